use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dentition::fdi::Fdi;
use crate::error::{Error, Result};
use crate::point::{centroid, norm3, Point3};
use crate::scalar::Real;

/// Whether a tooth conditions generation or is to be generated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    #[default]
    Context,
    Target,
}

impl Role {
    /// Per-point indicator channel: 0 for context, 1 for target.
    pub fn indicator(self) -> f64 {
        match self {
            Role::Context => 0.0,
            Role::Target => 1.0,
        }
    }
}

const NORMAL_TOL: f64 = 1e-6;

/// One labeled tooth point cloud.
#[derive(Debug, Clone, PartialEq)]
pub struct Tooth<T> {
    pub fdi: Fdi,
    pub role: Role,
    points: Vec<Point3<T>>,
    normals: Option<Vec<Point3<T>>>,
    /// Set on teeth synthesized by a model rather than observed.
    pub pseudo: bool,
}

impl<T: Real> Tooth<T> {
    pub fn new(fdi: Fdi, points: Vec<Point3<T>>) -> Result<Self> {
        Self::with_normals(fdi, points, None)
    }

    pub fn with_normals(
        fdi: Fdi,
        points: Vec<Point3<T>>,
        normals: Option<Vec<Point3<T>>>,
    ) -> Result<Self> {
        if points.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("tooth points"));
        }
        if let Some(ns) = &normals {
            if ns.len() != points.len() {
                return Err(Error::Shape(format!(
                    "tooth {fdi}: {} normals for {} points",
                    ns.len(),
                    points.len()
                )));
            }
            let tol = T::lit(NORMAL_TOL);
            for (i, n) in ns.iter().enumerate() {
                let len = norm3(n);
                if !((len - T::one()).abs() <= tol) {
                    return Err(Error::InvalidInput(format!(
                        "tooth {fdi}: normal {i} has length {len}"
                    )));
                }
            }
        }
        Ok(Tooth {
            fdi,
            role: Role::Context,
            points,
            normals,
            pseudo: false,
        })
    }

    pub fn with_role(mut self, role: Role) -> Self {
        self.role = role;
        self
    }

    pub fn points(&self) -> &[Point3<T>] {
        &self.points
    }

    pub fn normals(&self) -> Option<&[Point3<T>]> {
        self.normals.as_deref()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn centroid(&self) -> Option<Point3<T>> {
        centroid(&self.points)
    }

    /// Applies `f` to every point and `g` to every normal; normals are
    /// re-normalized afterwards.
    pub fn map(&self, f: impl Fn(&Point3<T>) -> Point3<T>, g: impl Fn(&Point3<T>) -> Point3<T>) -> Self {
        let points = self.points.iter().map(&f).collect();
        let normals = self.normals.as_ref().map(|ns| {
            ns.iter()
                .map(|n| {
                    let m = g(n);
                    let l = norm3(&m);
                    [m[0] / l, m[1] / l, m[2] / l]
                })
                .collect()
        });
        Tooth {
            fdi: self.fdi,
            role: self.role,
            points,
            normals,
            pseudo: self.pseudo,
        }
    }

    /// Reorders rows by `perm` (output row i = input row perm[i]).
    pub fn permuted(&self, perm: &[usize]) -> Self {
        debug_assert_eq!(perm.len(), self.points.len());
        Tooth {
            fdi: self.fdi,
            role: self.role,
            points: perm.iter().map(|&i| self.points[i]).collect(),
            normals: self
                .normals
                .as_ref()
                .map(|ns| perm.iter().map(|&i| ns[i]).collect()),
            pseudo: self.pseudo,
        }
    }

    pub fn cast<U: Real>(&self) -> Tooth<U> {
        let conv = |p: &Point3<T>| p.map(|v| U::lit(v.to_f64_lossy()));
        Tooth {
            fdi: self.fdi,
            role: self.role,
            points: self.points.iter().map(conv).collect(),
            normals: self.normals.as_ref().map(|ns| ns.iter().map(conv).collect()),
            pseudo: self.pseudo,
        }
    }
}

/// Marker for the coordinate convention a dentition is expressed in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Frame {
    /// Occlusal plane parallel to XY, maxillary-incisor centre at the origin,
    /// patient right (quadrants 1 and 4) along +x.
    #[default]
    Standardized,
    Unknown,
}

/// Up to 28 teeth keyed by FDI code.
#[derive(Debug, Clone, PartialEq)]
pub struct Dentition<T> {
    teeth: BTreeMap<Fdi, Tooth<T>>,
    pub frame: Frame,
}

impl<T: Real> Default for Dentition<T> {
    fn default() -> Self {
        Dentition {
            teeth: BTreeMap::new(),
            frame: Frame::Standardized,
        }
    }
}

impl<T: Real> Dentition<T> {
    pub fn new(teeth: impl IntoIterator<Item = Tooth<T>>) -> Result<Self> {
        let mut d = Dentition::default();
        for t in teeth {
            d.insert(t)?;
        }
        Ok(d)
    }

    pub fn insert(&mut self, tooth: Tooth<T>) -> Result<()> {
        if self.teeth.contains_key(&tooth.fdi) {
            return Err(Error::DuplicateFdi(tooth.fdi.code()));
        }
        self.teeth.insert(tooth.fdi, tooth);
        Ok(())
    }

    /// Inserts or replaces.
    pub fn set(&mut self, tooth: Tooth<T>) {
        self.teeth.insert(tooth.fdi, tooth);
    }

    pub fn remove(&mut self, fdi: Fdi) -> Option<Tooth<T>> {
        self.teeth.remove(&fdi)
    }

    pub fn get(&self, fdi: Fdi) -> Option<&Tooth<T>> {
        self.teeth.get(&fdi)
    }

    pub fn contains(&self, fdi: Fdi) -> bool {
        self.teeth.contains_key(&fdi)
    }

    /// Teeth in ascending FDI order.
    pub fn teeth(&self) -> impl Iterator<Item = &Tooth<T>> {
        self.teeth.values()
    }

    pub fn fdis(&self) -> Vec<Fdi> {
        self.teeth.keys().copied().collect()
    }

    pub fn len(&self) -> usize {
        self.teeth.len()
    }

    pub fn is_empty(&self) -> bool {
        self.teeth.is_empty()
    }

    pub fn is_fully_dentate(&self) -> bool {
        self.teeth.len() == crate::dentition::fdi::NUM_TEETH
    }

    pub fn map_teeth(&self, f: impl Fn(&Tooth<T>) -> Tooth<T>) -> Self {
        Dentition {
            teeth: self
                .teeth
                .values()
                .map(|t| {
                    let n = f(t);
                    (n.fdi, n)
                })
                .collect(),
            frame: self.frame,
        }
    }

    /// Centroid of the four maxillary incisors (11, 12, 21, 22) when all are
    /// present.
    pub fn incisor_centroid(&self) -> Option<Point3<T>> {
        let mut acc = [T::zero(); 3];
        for code in [11, 12, 21, 22] {
            let c = self.get(Fdi::new(code).unwrap())?.centroid()?;
            for k in 0..3 {
                acc[k] = acc[k] + c[k];
            }
        }
        let four = T::lit(4.0);
        Some(acc.map(|v| v / four))
    }

    /// Soft check of the standardized-frame convention.
    pub fn check_frame(&self, tolerance: T) -> Result<()> {
        if let Some(c) = self.incisor_centroid() {
            let off = norm3(&c);
            if off > tolerance {
                return Err(Error::InvalidInput(format!(
                    "maxillary incisor centroid is {off} from the origin (tolerance {tolerance})"
                )));
            }
        }
        Ok(())
    }

    /// All teeth must carry exactly `n` points.
    pub fn check_point_count(&self, n: usize) -> Result<()> {
        for t in self.teeth() {
            if t.len() != n {
                return Err(Error::Shape(format!(
                    "tooth {} has {} points, expected {n}",
                    t.fdi,
                    t.len()
                )));
            }
        }
        Ok(())
    }

    pub fn cast<U: Real>(&self) -> Dentition<U> {
        Dentition {
            teeth: self.teeth.iter().map(|(k, t)| (*k, t.cast())).collect(),
            frame: self.frame,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fdi(c: u32) -> Fdi {
        Fdi::new(c).unwrap()
    }

    #[test]
    fn rejects_bad_normals() {
        let p = vec![[0.0, 0.0, 0.0]];
        assert!(Tooth::with_normals(fdi(11), p.clone(), Some(vec![[0.0, 0.0, 2.0]])).is_err());
        assert!(Tooth::with_normals(fdi(11), p.clone(), Some(vec![])).is_err());
        assert!(Tooth::with_normals(fdi(11), p, Some(vec![[0.0, 0.0, 1.0]])).is_ok());
        assert!(Tooth::new(fdi(11), vec![[f64::NAN, 0.0, 0.0]]).is_err());
    }

    #[test]
    fn rejects_duplicates() {
        let t = Tooth::new(fdi(11), vec![[0.0f64; 3]]).unwrap();
        assert!(matches!(Dentition::new([t.clone(), t]), Err(Error::DuplicateFdi(11))));
    }
}
