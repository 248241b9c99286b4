//! Cylinder-local coordinates: the bound's centre goes to the origin, its
//! radius to 1 and its half-height to 1.

use crate::boundary::{CylBound, DEGENERATE_FLOOR};
use crate::error::{Error, Result};
use crate::point::Point3;
use crate::scalar::Real;

fn check<T: Real>(b: &CylBound<T>) -> Result<()> {
    let floor = T::lit(DEGENERATE_FLOOR);
    if !(b.r >= floor) || !(b.h >= floor) {
        return Err(Error::Degenerate(format!("bound r={} h={} below floor", b.r, b.h)));
    }
    Ok(())
}

pub fn cyl_normalize<T: Real>(points: &[Point3<T>], b: &CylBound<T>) -> Result<Vec<Point3<T>>> {
    check(b)?;
    let half = b.h / T::lit(2.0);
    Ok(points
        .iter()
        .map(|p| [(p[0] - b.cx) / b.r, (p[1] - b.cy) / b.r, (p[2] - b.cz) / half])
        .collect())
}

pub fn cyl_denormalize<T: Real>(local: &[Point3<T>], b: &CylBound<T>) -> Result<Vec<Point3<T>>> {
    check(b)?;
    let half = b.h / T::lit(2.0);
    Ok(local
        .iter()
        .map(|p| [p[0] * b.r + b.cx, p[1] * b.r + b.cy, p[2] * half + b.cz])
        .collect())
}
