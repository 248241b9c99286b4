use crate::dentition::NUM_TEETH;
use crate::error::{Error, Result};

/// Relative position feature for zig-zag indices `i` and `j`, with
/// `d = i - j`: `[ln(1 + max(d, 0)), ln(1 + max(-d, 0)), [d == 0]]`.
pub fn rpe_feature(i: usize, j: usize) -> Result<[f64; 3]> {
    if i >= NUM_TEETH || j >= NUM_TEETH {
        return Err(Error::InvalidInput(format!("zig-zag index pair ({i}, {j}) outside 0..{NUM_TEETH}")));
    }
    let d = i as i64 - j as i64;
    Ok([
        ((1 + d.max(0)) as f64).ln(),
        ((1 + (-d).max(0)) as f64).ln(),
        if d == 0 { 1.0 } else { 0.0 },
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn values_and_symmetry() {
        assert_eq!(rpe_feature(5, 5).unwrap(), [0.0, 0.0, 1.0]);
        assert_eq!(rpe_feature(7, 5).unwrap(), [3f64.ln(), 0.0, 0.0]);
        for i in 0..NUM_TEETH {
            for j in 0..NUM_TEETH {
                let a = rpe_feature(i, j).unwrap();
                let b = rpe_feature(j, i).unwrap();
                assert_eq!((a[0], a[1], a[2]), (b[1], b[0], b[2]));
                assert!(a[0] == 0.0 || a[1] == 0.0);
            }
        }
        assert!(rpe_feature(28, 0).is_err());
    }
}
