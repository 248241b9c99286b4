//! Minimal enclosing circle by Welzl's randomized incremental method
//! (expected linear time), with a seeded shuffle so results are reproducible.

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::point::{dist2, Point2};
use crate::rng;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Circle<T> {
    pub center: Point2<T>,
    pub radius: T,
}

const SHUFFLE_SEED: u64 = 0x00C1_7C1E;

impl<T: Real> Circle<T> {
    fn tol(&self) -> T {
        T::epsilon() * T::lit(64.0) * (T::one() + self.radius)
    }

    pub fn contains(&self, p: &Point2<T>) -> bool {
        dist2(&self.center, p) <= self.radius + self.tol()
    }

    fn from_two(a: &Point2<T>, b: &Point2<T>) -> Self {
        let two = T::lit(2.0);
        let center = [(a[0] + b[0]) / two, (a[1] + b[1]) / two];
        let radius = dist2(&center, a).max(dist2(&center, b));
        Circle { center, radius }
    }

    /// Circumscribed circle; `None` for collinear input.
    fn from_three(a: &Point2<T>, b: &Point2<T>, c: &Point2<T>) -> Option<Self> {
        // Work relative to `a` for conditioning.
        let (bx, by) = (b[0] - a[0], b[1] - a[1]);
        let (cx, cy) = (c[0] - a[0], c[1] - a[1]);
        let d = T::lit(2.0) * (bx * cy - by * cx);
        if d == T::zero() {
            return None;
        }
        let b2 = bx * bx + by * by;
        let c2 = cx * cx + cy * cy;
        let ux = (cy * b2 - by * c2) / d;
        let uy = (bx * c2 - cx * b2) / d;
        let center = [a[0] + ux, a[1] + uy];
        let radius = dist2(&center, a).max(dist2(&center, b)).max(dist2(&center, c));
        Some(Circle { center, radius })
    }
}

/// Smallest circle containing all `points`.
pub fn min_enclosing_circle<T: Real>(points: &[Point2<T>]) -> Result<Circle<T>> {
    if points.is_empty() {
        return Err(Error::Empty("min_enclosing_circle input"));
    }
    let mut pts = points.to_vec();
    pts.shuffle(&mut rng::seeded(SHUFFLE_SEED));

    let mut c = Circle {
        center: pts[0],
        radius: T::zero(),
    };
    for i in 1..pts.len() {
        if c.contains(&pts[i]) {
            continue;
        }
        // pts[i] lies on the boundary.
        c = Circle {
            center: pts[i],
            radius: T::zero(),
        };
        for j in 0..i {
            if c.contains(&pts[j]) {
                continue;
            }
            // pts[i] and pts[j] lie on the boundary.
            c = Circle::from_two(&pts[i], &pts[j]);
            for k in 0..j {
                if c.contains(&pts[k]) {
                    continue;
                }
                c = Circle::from_three(&pts[i], &pts[j], &pts[k]).unwrap_or_else(|| {
                    // Collinear: the farthest pair spans the circle.
                    let cands = [
                        Circle::from_two(&pts[i], &pts[j]),
                        Circle::from_two(&pts[i], &pts[k]),
                        Circle::from_two(&pts[j], &pts[k]),
                    ];
                    cands
                        .into_iter()
                        .max_by(|a, b| a.radius.partial_cmp(&b.radius).unwrap())
                        .unwrap()
                });
            }
        }
    }
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn trivial_cases() {
        let c = min_enclosing_circle(&[[1.5f64, -2.0]]).unwrap();
        assert_eq!(c.center, [1.5, -2.0]);
        assert_eq!(c.radius, 0.0);
        let c = min_enclosing_circle(&[[0.0f64, 0.0], [4.0, 2.0]]).unwrap();
        assert!((c.center[0] - 2.0).abs() < 1e-15 && (c.center[1] - 1.0).abs() < 1e-15);
        assert!((c.radius - 5f64.sqrt()).abs() < 1e-15);
        assert!(min_enclosing_circle::<f64>(&[]).is_err());
    }

    #[test]
    fn collinear_points() {
        let pts: Vec<[f64; 2]> = (0..7).map(|i| [i as f64, 2.0 * i as f64]).collect();
        let c = min_enclosing_circle(&pts).unwrap();
        assert!((c.radius - (36.0f64 + 144.0).sqrt() / 2.0).abs() < 1e-12);
    }

    #[test]
    fn order_invariant() {
        let mut r = rng::seeded(1);
        let pts: Vec<[f64; 2]> = (0..40)
            .map(|_| [r.random_range(-3.0..3.0), r.random_range(-1.0..5.0)])
            .collect();
        let base = min_enclosing_circle(&pts).unwrap();
        for s in 0..50 {
            let mut p = pts.clone();
            p.shuffle(&mut rng::seeded(s));
            let c = min_enclosing_circle(&p).unwrap();
            assert!((c.radius - base.radius).abs() < 1e-9);
            assert!(dist2(&c.center, &base.center) < 1e-9);
        }
    }

    #[test]
    fn single_precision() {
        let c = min_enclosing_circle(&[[0.0f32, 0.0], [2.0, 0.0], [1.0, 1.0]]).unwrap();
        assert!((c.radius - 1.0).abs() < 1e-6);
    }
}
