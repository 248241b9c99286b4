//! Small fixed-size vector helpers. Points are plain `[T; 3]` / `[T; 2]` arrays.

use crate::scalar::Real;

pub type Point3<T> = [T; 3];
pub type Point2<T> = [T; 2];

#[inline]
pub fn dist_sq3<T: Real>(a: &Point3<T>, b: &Point3<T>) -> T {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    dx * dx + dy * dy + dz * dz
}

#[inline]
pub fn dist3<T: Real>(a: &Point3<T>, b: &Point3<T>) -> T {
    dist_sq3(a, b).sqrt()
}

#[inline]
pub fn dist2<T: Real>(a: &Point2<T>, b: &Point2<T>) -> T {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    (dx * dx + dy * dy).sqrt()
}

#[inline]
pub fn dot3<T: Real>(a: &Point3<T>, b: &Point3<T>) -> T {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn norm3<T: Real>(a: &Point3<T>) -> T {
    dot3(a, a).sqrt()
}

pub fn centroid<T: Real>(points: &[Point3<T>]) -> Option<Point3<T>> {
    if points.is_empty() {
        return None;
    }
    let n = T::from_usize_lossy(points.len());
    let mut c = [T::zero(); 3];
    for p in points {
        for k in 0..3 {
            c[k] = c[k] + p[k];
        }
    }
    Some([c[0] / n, c[1] / n, c[2] / n])
}

/// Rotation about the z axis followed by a translation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidZ<T> {
    pub angle: T,
    pub shift: Point3<T>,
}

impl<T: Real> RigidZ<T> {
    pub fn apply(&self, p: &Point3<T>) -> Point3<T> {
        let (s, c) = self.angle.sin_cos();
        [
            c * p[0] - s * p[1] + self.shift[0],
            s * p[0] + c * p[1] + self.shift[1],
            p[2] + self.shift[2],
        ]
    }

    pub fn rotate(&self, v: &Point3<T>) -> Point3<T> {
        let (s, c) = self.angle.sin_cos();
        [c * v[0] - s * v[1], s * v[0] + c * v[1], v[2]]
    }
}
