use crate::error::{Error, Result};
use crate::scalar::Real;

/// Elementwise Smooth-L1: `0.5 x^2` when `|x| < 1`, `|x| - 0.5` otherwise.
#[inline]
pub fn smooth_l1<T: Real>(x: T) -> T {
    let half = T::lit(0.5);
    if x.abs() < T::one() {
        half * x * x
    } else {
        x.abs() - half
    }
}

/// Derivative of [`smooth_l1`].
#[inline]
pub fn smooth_l1_grad<T: Real>(x: T) -> T {
    if x.abs() < T::one() {
        x
    } else {
        x.signum()
    }
}

/// Sum of [`smooth_l1`] over a residual vector.
pub fn smooth_l1_sum<T: Real>(residual: &[T]) -> T {
    residual.iter().map(|&x| smooth_l1(x)).sum()
}

/// Masked Smooth-L1 bound loss: the per-row sum over the 5 cylinder
/// parameters, averaged over rows whose mask is set.
///
/// Returns `(loss, degenerate)`; with no masked rows the loss is 0 and the
/// flag is set.
pub fn bound_loss<T: Real>(pred: &[[T; 5]], gt: &[[T; 5]], mask: &[bool]) -> Result<(T, bool)> {
    if pred.len() != gt.len() || pred.len() != mask.len() {
        return Err(Error::Shape(format!(
            "bound_loss: pred {} rows, gt {} rows, mask {}",
            pred.len(),
            gt.len(),
            mask.len()
        )));
    }
    let mut total = T::zero();
    let mut n = 0usize;
    for ((p, g), &m) in pred.iter().zip(gt).zip(mask) {
        if m {
            let res: Vec<T> = p.iter().zip(g).map(|(a, b)| *a - *b).collect();
            total = total + smooth_l1_sum(&res);
            n += 1;
        }
    }
    if n == 0 {
        return Ok((T::zero(), true));
    }
    Ok((total / T::from_usize_lossy(n), false))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn values() {
        assert_eq!(smooth_l1(0.0), 0.0);
        assert_eq!(smooth_l1(0.5), 0.125);
        assert_eq!(smooth_l1(2.0), 1.5);
        assert_eq!(smooth_l1(-2.0), 1.5);
    }

    #[test]
    fn c1_at_one() {
        let h = 1e-7;
        for x0 in [1.0f64, -1.0] {
            let left = (smooth_l1(x0) - smooth_l1(x0 - h)) / h;
            let right = (smooth_l1(x0 + h) - smooth_l1(x0)) / h;
            assert!((left - x0.signum()).abs() < 1e-6, "{left}");
            assert!((right - x0.signum()).abs() < 1e-6, "{right}");
            assert!((smooth_l1(x0 - 1e-12) - smooth_l1(x0 + 1e-12)).abs() < 1e-11);
        }
    }

    #[test]
    fn masked_loss() {
        let gt = [[1.0, 2.0, 3.0, 4.0, 5.0]; 2];
        assert_eq!(bound_loss(&gt, &gt, &[true, true]).unwrap(), (0.0, false));
        let pred = [[2.0, 2.0, 3.0, 4.0, 5.0], [100.0; 5]];
        assert_eq!(bound_loss(&pred, &gt, &[true, false]).unwrap(), (0.5, false));
        assert_eq!(bound_loss(&pred, &gt, &[false, false]).unwrap(), (0.0, true));
        assert!(bound_loss(&pred, &gt[..1], &[true]).is_err());
    }
}
