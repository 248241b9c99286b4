use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::boundary::circle::min_enclosing_circle;
use crate::dentition::{Fdi, Tooth};
use crate::error::{Error, Result};
use crate::point::Point3;
use crate::scalar::Real;

/// Smallest admissible radius or height (mm).
pub const DEGENERATE_FLOOR: f64 = 1e-6;

/// Vertical-axis cylinder: centre `(cx, cy, cz)`, radius `r`, height `h`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CylBound<T> {
    pub cx: T,
    pub cy: T,
    pub cz: T,
    pub r: T,
    pub h: T,
}

impl<T: Real> CylBound<T> {
    pub fn new(cx: T, cy: T, cz: T, r: T, h: T) -> Result<Self> {
        let floor = T::lit(DEGENERATE_FLOOR);
        if !(r >= floor) || !(h >= floor) {
            return Err(Error::Degenerate(format!(
                "cylinder radius {r} / height {h} below {DEGENERATE_FLOOR} mm"
            )));
        }
        if ![cx, cy, cz, r, h].iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("cylinder parameters"));
        }
        Ok(CylBound { cx, cy, cz, r, h })
    }

    /// Builds a bound from a regressed 5-vector, lifting `r` and `h` to the
    /// degenerate floor when a prediction undershoots it.
    pub fn from_prediction(p: [T; 5]) -> Result<Self> {
        let floor = T::lit(DEGENERATE_FLOOR);
        Self::new(p[0], p[1], p[2], p[3].max(floor), p[4].max(floor))
    }

    pub fn from_array(p: [T; 5]) -> Result<Self> {
        Self::new(p[0], p[1], p[2], p[3], p[4])
    }

    pub fn to_array(&self) -> [T; 5] {
        [self.cx, self.cy, self.cz, self.r, self.h]
    }

    pub fn volume(&self) -> T {
        T::from_f64(std::f64::consts::PI).unwrap() * self.r * self.r * self.h
    }

    pub fn z_min(&self) -> T {
        self.cz - self.h / T::lit(2.0)
    }

    pub fn z_max(&self) -> T {
        self.cz + self.h / T::lit(2.0)
    }

    /// Closed-cylinder membership with absolute slack `tol`.
    pub fn contains(&self, p: &Point3<T>, tol: T) -> bool {
        let dx = p[0] - self.cx;
        let dy = p[1] - self.cy;
        (dx * dx + dy * dy).sqrt() <= self.r + tol
            && p[2] >= self.z_min() - tol
            && p[2] <= self.z_max() + tol
    }

    pub fn cast<U: Real>(&self) -> CylBound<U> {
        let c = |v: T| U::lit(v.to_f64_lossy());
        CylBound {
            cx: c(self.cx),
            cy: c(self.cy),
            cz: c(self.cz),
            r: c(self.r),
            h: c(self.h),
        }
    }
}

/// Ground-truth bound: minimal enclosing circle of the XY projection and the
/// Z extent.
pub fn fit_points<T: Real>(points: &[Point3<T>]) -> Result<CylBound<T>> {
    if points.is_empty() {
        return Err(Error::Empty("tooth points"));
    }
    let xy: Vec<[T; 2]> = points.iter().map(|p| [p[0], p[1]]).collect();
    let circle = min_enclosing_circle(&xy)?;
    let (zmin, zmax) = points.iter().fold((T::infinity(), T::neg_infinity()), |(lo, hi), p| {
        (lo.min(p[2]), hi.max(p[2]))
    });
    let two = T::lit(2.0);
    CylBound::new(
        circle.center[0],
        circle.center[1],
        (zmin + zmax) / two,
        circle.radius,
        zmax - zmin,
    )
}

pub fn fit_bound<T: Real>(tooth: &Tooth<T>) -> Result<CylBound<T>> {
    fit_points(tooth.points())
}

/// Area of the intersection of two discs.
pub fn disc_intersection_area<T: Real>(ra: T, rb: T, d: T) -> T {
    let pi = T::from_f64(std::f64::consts::PI).unwrap();
    if d >= ra + rb {
        return T::zero();
    }
    if d <= (ra - rb).abs() {
        let r = ra.min(rb);
        return pi * r * r;
    }
    let one = T::one();
    let two = T::lit(2.0);
    let clamp = |v: T| v.max(-one).min(one);
    let alpha = clamp((d * d + ra * ra - rb * rb) / (two * d * ra)).acos();
    let beta = clamp((d * d + rb * rb - ra * ra) / (two * d * rb)).acos();
    let k = ((-d + ra + rb) * (d + ra - rb) * (d - ra + rb) * (d + ra + rb)).max(T::zero());
    ra * ra * alpha + rb * rb * beta - k.sqrt() / two
}

pub fn intersection_volume<T: Real>(a: &CylBound<T>, b: &CylBound<T>) -> T {
    let dz = (a.z_max().min(b.z_max()) - a.z_min().max(b.z_min())).max(T::zero());
    if dz == T::zero() {
        return T::zero();
    }
    let dx = a.cx - b.cx;
    let dy = a.cy - b.cy;
    disc_intersection_area(a.r, b.r, (dx * dx + dy * dy).sqrt()) * dz
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Overlap<T> {
    pub dice: T,
    pub iou: T,
}

/// Volumetric Dice and IoU of two cylinders.
pub fn cyl_overlap<T: Real>(a: &CylBound<T>, b: &CylBound<T>) -> Overlap<T> {
    let inter = intersection_volume(a, b);
    let (va, vb) = (a.volume(), b.volume());
    let one = T::one();
    let dice = (T::lit(2.0) * inter / (va + vb)).min(one);
    let iou = (inter / (va + vb - inter)).min(one);
    Overlap { dice, iou }
}

#[derive(Debug, Serialize, Deserialize)]
struct BoundRow {
    fdi: u32,
    c_x: f64,
    c_y: f64,
    c_z: f64,
    r: f64,
    h: f64,
}

/// Writes `fdi,c_x,c_y,c_z,r,h` rows.
pub fn write_bounds_csv<T: Real>(path: &Path, bounds: &[(Fdi, CylBound<T>)]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for (fdi, b) in bounds {
        w.serialize(BoundRow {
            fdi: fdi.code(),
            c_x: b.cx.to_f64_lossy(),
            c_y: b.cy.to_f64_lossy(),
            c_z: b.cz.to_f64_lossy(),
            r: b.r.to_f64_lossy(),
            h: b.h.to_f64_lossy(),
        })?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn read_bounds_csv(path: &Path) -> Result<Vec<(Fdi, CylBound<f64>)>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for row in r.deserialize() {
        let row: BoundRow = row?;
        out.push((
            Fdi::new(row.fdi)?,
            CylBound::new(row.c_x, row.c_y, row.c_z, row.r, row.h)?,
        ));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fdi(c: u32) -> Fdi {
        Fdi::new(c).unwrap()
    }

    #[test]
    fn unit_cube_corners() {
        let mut pts = Vec::new();
        for x in [0.0, 1.0] {
            for y in [0.0, 1.0] {
                for z in [0.0, 1.0] {
                    pts.push([x, y, z]);
                }
            }
        }
        let b = fit_points(&pts).unwrap();
        assert!((b.r - 0.5f64.sqrt()).abs() < 1e-12);
        assert!((b.h - 1.0).abs() < 1e-15);
        assert!((b.cx - 0.5).abs() < 1e-12 && (b.cy - 0.5).abs() < 1e-12);
        assert_eq!(b.cz, 0.5);
    }

    #[test]
    fn degenerate_rejected() {
        let flat = [[0.0, 0.0, 1.0], [1.0, 0.0, 1.0], [0.0, 1.0, 1.0]];
        assert!(matches!(fit_points(&flat), Err(Error::Degenerate(_))));
        let t = Tooth::<f64>::new(fdi(11), vec![]).unwrap();
        assert!(fit_bound(&t).is_err());
    }

    #[test]
    fn identical_and_disjoint() {
        let a = CylBound::new(1.0, 2.0, 3.0, 1.5, 2.0).unwrap();
        let o = cyl_overlap(&a, &a);
        assert_eq!((o.dice, o.iou), (1.0, 1.0));
        let b = CylBound::new(1.0, 2.0, 6.0, 1.5, 2.0).unwrap();
        let o = cyl_overlap(&a, &b);
        assert_eq!((o.dice, o.iou), (0.0, 0.0));
        let c = CylBound::new(10.0, 2.0, 3.0, 1.5, 2.0).unwrap();
        assert_eq!(cyl_overlap(&a, &c).dice, 0.0);
    }

    #[test]
    fn nested_discs() {
        let a = CylBound::new(0.0f64, 0.0, 0.0, 2.0, 1.0).unwrap();
        let b = CylBound::new(0.5, 0.0, 0.0, 1.0, 1.0).unwrap();
        let o = cyl_overlap(&a, &b);
        assert!((o.iou - 0.25).abs() < 1e-12);
        assert!((o.dice - 0.4).abs() < 1e-12);
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("b.csv");
        let rows = vec![
            (fdi(11), CylBound::new(0.1, -3.25, 4.0, 3.5, 9.0).unwrap()),
            (fdi(36), CylBound::new(-20.0, -30.5, -4.0, 5.5, 7.25).unwrap()),
        ];
        write_bounds_csv(&p, &rows).unwrap();
        assert_eq!(read_bounds_csv(&p).unwrap(), rows);
    }
}
