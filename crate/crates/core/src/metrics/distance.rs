//! Point-cloud fidelity metrics: Chamfer-L1, EMD, F1@tau, ASD and normal
//! consistency.

use crate::error::{Error, Result};
use crate::metrics::assignment::solve_assignment;
use crate::metrics::kdtree::KdTree;
use crate::point::{dist3, dist_sq3, dot3, Point3};
use crate::scalar::Real;

fn nonempty<T>(a: &[T], b: &[T], what: &'static str) -> Result<()> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Empty(what));
    }
    Ok(())
}

/// Distance from every point of `from` to its nearest neighbour in `to`.
pub fn nn_distances<T: Real>(from: &[Point3<T>], to: &[Point3<T>]) -> Vec<T> {
    let tree = KdTree::new(to);
    from.iter()
        .map(|p| tree.nearest(p).map(|(_, d)| d.sqrt()).unwrap_or(T::infinity()))
        .collect()
}

/// Reference O(nm) scan for [`nn_distances`].
pub fn nn_distances_brute<T: Real>(from: &[Point3<T>], to: &[Point3<T>]) -> Vec<T> {
    from.iter()
        .map(|p| {
            to.iter()
                .map(|q| dist_sq3(p, q))
                .fold(T::infinity(), |a, b| a.min(b))
                .sqrt()
        })
        .collect()
}

fn mean<T: Real>(v: &[T]) -> T {
    v.iter().copied().sum::<T>() / T::from_usize_lossy(v.len())
}

fn symmetric_mean<T: Real>(ab: &[T], ba: &[T]) -> T {
    (mean(ab) + mean(ba)) / T::lit(2.0)
}

/// Chamfer-L1: half the sum of the two directed mean nearest-neighbour
/// Euclidean distances.
pub fn chamfer_l1<T: Real>(a: &[Point3<T>], b: &[Point3<T>]) -> Result<T> {
    nonempty(a, b, "chamfer_l1 input")?;
    Ok(symmetric_mean(&nn_distances(a, b), &nn_distances(b, a)))
}

pub fn chamfer_l1_brute<T: Real>(a: &[Point3<T>], b: &[Point3<T>]) -> Result<T> {
    nonempty(a, b, "chamfer_l1 input")?;
    Ok(symmetric_mean(&nn_distances_brute(a, b), &nn_distances_brute(b, a)))
}

/// Earth mover's distance between equal-size sets: mean Euclidean cost of
/// the optimal bijection, solved exactly.
pub fn emd<T: Real>(a: &[Point3<T>], b: &[Point3<T>]) -> Result<T> {
    nonempty(a, b, "emd input")?;
    if a.len() != b.len() {
        return Err(Error::Shape(format!(
            "emd needs equal cardinality, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    let assign = solve_assignment(a.len(), |i, j| dist3(&a[i], &b[j]));
    let total: T = assign.iter().enumerate().map(|(i, &j)| dist3(&a[i], &b[j])).sum();
    Ok(total / T::from_usize_lossy(a.len()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrecisionRecall<T> {
    pub precision: T,
    pub recall: T,
    pub f1: T,
}

/// Precision (generated points within `tau` of the truth), recall (truth
/// points within `tau` of the generated set) and their harmonic mean.
pub fn f1_at<T: Real>(generated: &[Point3<T>], truth: &[Point3<T>], tau: T) -> Result<PrecisionRecall<T>> {
    nonempty(generated, truth, "f1 input")?;
    if !(tau > T::zero()) {
        return Err(Error::InvalidInput(format!("threshold must be positive, got {tau}")));
    }
    let frac = |d: Vec<T>| {
        let n = d.iter().filter(|&&x| x <= tau).count();
        T::from_usize_lossy(n) / T::from_usize_lossy(d.len())
    };
    let precision = frac(nn_distances(generated, truth));
    let recall = frac(nn_distances(truth, generated));
    let s = precision + recall;
    let f1 = if s > T::zero() {
        T::lit(2.0) * precision * recall / s
    } else {
        T::zero()
    };
    Ok(PrecisionRecall { precision, recall, f1 })
}

/// Average surface distance between densely sampled surfaces, in the
/// coordinate unit (mm). Same symmetrized form as [`chamfer_l1`].
pub fn asd<T: Real>(a: &[Point3<T>], b: &[Point3<T>]) -> Result<T> {
    nonempty(a, b, "asd input")?;
    chamfer_l1(a, b)
}

/// Mean cosine between each point's normal and the normal of its nearest
/// neighbour in the other set, symmetrized. Normals are assumed unit length.
pub fn normal_consistency<T: Real>(
    a: &[Point3<T>],
    a_normals: &[Point3<T>],
    b: &[Point3<T>],
    b_normals: &[Point3<T>],
) -> Result<T> {
    nonempty(a, b, "normal_consistency input")?;
    if a.len() != a_normals.len() || b.len() != b_normals.len() {
        return Err(Error::InvalidInput("normals missing or misaligned".into()));
    }
    let directed = |p: &[Point3<T>], pn: &[Point3<T>], q: &[Point3<T>], qn: &[Point3<T>]| {
        let tree = KdTree::new(q);
        let cos: Vec<T> = p
            .iter()
            .zip(pn)
            .map(|(x, n)| {
                let (j, _) = tree.nearest(x).unwrap();
                dot3(n, &qn[j])
            })
            .collect();
        mean(&cos)
    };
    let ab = directed(a, a_normals, b, b_normals);
    let ba = directed(b, b_normals, a, a_normals);
    Ok(((ab + ba) / T::lit(2.0)).max(-T::one()).min(T::one()))
}

/// Unit normals from the smallest principal axis of each point's `k`
/// nearest neighbours, oriented away from the cloud centroid.
pub fn estimate_normals<T: Real>(points: &[Point3<T>], k: usize) -> Vec<Point3<T>> {
    let tree = KdTree::new(points);
    let c = crate::point::centroid(points).unwrap_or([T::zero(); 3]);
    points
        .iter()
        .map(|p| {
            let nb = tree.knn(p, k.max(3));
            let m = crate::point::centroid(
                &nb.iter().map(|&(i, _)| points[i]).collect::<Vec<_>>(),
            )
            .unwrap();
            let mut cov = [[0.0f64; 3]; 3];
            for &(i, _) in &nb {
                let d = [
                    (points[i][0] - m[0]).to_f64_lossy(),
                    (points[i][1] - m[1]).to_f64_lossy(),
                    (points[i][2] - m[2]).to_f64_lossy(),
                ];
                for r in 0..3 {
                    for s in 0..3 {
                        cov[r][s] += d[r] * d[s];
                    }
                }
            }
            let n = smallest_eigenvector(cov);
            let out = [
                (p[0] - c[0]).to_f64_lossy(),
                (p[1] - c[1]).to_f64_lossy(),
                (p[2] - c[2]).to_f64_lossy(),
            ];
            let sign = if n[0] * out[0] + n[1] * out[1] + n[2] * out[2] < 0.0 { -1.0 } else { 1.0 };
            n.map(|v| T::lit(sign * v))
        })
        .collect()
}

/// Cyclic Jacobi rotations on a symmetric 3x3 matrix.
fn smallest_eigenvector(mut a: [[f64; 3]; 3]) -> [f64; 3] {
    let mut v = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    for _ in 0..50 {
        let off = a[0][1].abs() + a[0][2].abs() + a[1][2].abs();
        if off < 1e-15 {
            break;
        }
        for (p, q) in [(0, 1), (0, 2), (1, 2)] {
            if a[p][q].abs() < 1e-300 {
                continue;
            }
            let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
            let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
            let t = if theta == 0.0 { 1.0 } else { t };
            let c = 1.0 / (t * t + 1.0).sqrt();
            let s = t * c;
            for k in 0..3 {
                let akp = a[k][p];
                let akq = a[k][q];
                a[k][p] = c * akp - s * akq;
                a[k][q] = s * akp + c * akq;
            }
            for k in 0..3 {
                let apk = a[p][k];
                let aqk = a[q][k];
                a[p][k] = c * apk - s * aqk;
                a[q][k] = s * apk + c * aqk;
            }
            for row in v.iter_mut() {
                let vp = row[p];
                let vq = row[q];
                row[p] = c * vp - s * vq;
                row[q] = s * vp + c * vq;
            }
        }
    }
    let idx = (0..3)
        .min_by(|&i, &j| a[i][i].partial_cmp(&a[j][j]).unwrap())
        .unwrap();
    let e = [v[0][idx], v[1][idx], v[2][idx]];
    let l = (e[0] * e[0] + e[1] * e[1] + e[2] * e[2]).sqrt();
    e.map(|x| x / l)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize, z: f64) -> Vec<[f64; 3]> {
        let mut v = Vec::new();
        for i in 0..n {
            for j in 0..n {
                v.push([i as f64 * 0.1, j as f64 * 0.1, z]);
            }
        }
        v
    }

    #[test]
    fn chamfer_basics() {
        let a = grid(5, 0.0);
        assert_eq!(chamfer_l1(&a, &a).unwrap(), 0.0);
        assert_eq!(chamfer_l1(&[[0.0, 0.0, 0.0]], &[[2.5, 0.0, 0.0]]).unwrap(), 2.5);
        assert!(chamfer_l1::<f64>(&[], &a).is_err());
    }

    #[test]
    fn emd_basics() {
        let a = grid(4, 0.0);
        let mut b = a.clone();
        b.reverse();
        assert_eq!(emd(&a, &b).unwrap(), 0.0);
        assert_eq!(emd(&[[0.0, 0.0, 0.0]], &[[0.0, 3.0, 4.0]]).unwrap(), 5.0);
        assert!(emd(&a, &a[1..]).is_err());
    }

    #[test]
    fn f1_counting() {
        let b: Vec<[f64; 3]> = (0..9).map(|i| [i as f64, 0.0, 0.0]).collect();
        let mut a = b.clone();
        a.push([100.0, 0.0, 0.0]);
        let pr = f1_at(&a, &b, 0.3).unwrap();
        assert!((pr.precision - 0.9).abs() < 1e-15);
        assert_eq!(pr.recall, 1.0);
        assert!((pr.f1 - 1.8 / 1.9).abs() < 1e-15);
        let far: Vec<[f64; 3]> = b.iter().map(|p| [p[0], 10.0, 0.0]).collect();
        let pr = f1_at(&far, &b, 1.0).unwrap();
        assert_eq!((pr.precision, pr.recall, pr.f1), (0.0, 0.0, 0.0));
        assert_eq!(f1_at(&b, &b, 0.5).unwrap().f1, 1.0);
        assert!(f1_at(&b, &b, 0.0).is_err());
    }

    #[test]
    fn asd_translated_plane() {
        let a = grid(20, 0.0);
        let b = grid(20, 0.1);
        assert!((asd(&a, &b).unwrap() - 0.1).abs() < 1e-12);
        assert_eq!(asd(&a, &b).unwrap(), asd(&b, &a).unwrap());
    }

    #[test]
    fn normal_consistency_cases() {
        let a = grid(6, 0.0);
        let up = vec![[0.0, 0.0, 1.0]; a.len()];
        let down = vec![[0.0, 0.0, -1.0]; a.len()];
        assert_eq!(normal_consistency(&a, &up, &a, &up).unwrap(), 1.0);
        assert_eq!(normal_consistency(&a, &up, &a, &down).unwrap(), -1.0);
        let half: Vec<[f64; 3]> =
            (0..a.len()).map(|i| if i % 2 == 0 { [0.0, 0.0, 1.0] } else { [0.0, 0.0, -1.0] }).collect();
        assert!(normal_consistency(&a, &up, &a, &half).unwrap().abs() < 1e-12);
        assert!(normal_consistency(&a, &up[1..], &a, &up).is_err());
    }

    #[test]
    fn normals_of_a_sphere_point_outward() {
        let mut pts = Vec::new();
        for i in 0..20 {
            for j in 0..40 {
                let th = std::f64::consts::PI * (i as f64 + 0.5) / 20.0;
                let ph = 2.0 * std::f64::consts::PI * j as f64 / 40.0;
                pts.push([th.sin() * ph.cos(), th.sin() * ph.sin(), th.cos()]);
            }
        }
        let ns = estimate_normals(&pts, 8);
        let mean_cos: f64 = pts.iter().zip(&ns).map(|(p, n)| dot3(p, n)).sum::<f64>() / pts.len() as f64;
        assert!(mean_cos > 0.98, "{mean_cos}");
    }
}
