//! Procedural dentitions: type-specific superellipsoid crowns placed along a
//! parabolic arch. Stands in for clinical scans in tests and toy runs.

use std::f64::consts::PI;

use rand::seq::IndexedRandom;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dentition::fdi::{Arch, Fdi};
use crate::dentition::tooth::{Dentition, Tooth};
use crate::error::{Error, Result};
use crate::point::{Point3, RigidZ};
use crate::rng;
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub points_per_tooth: usize,
    /// Parabola curvature of the maxillary arch (1/mm).
    pub upper_curvature: f64,
    /// Parabola curvature of the mandibular arch (1/mm).
    pub lower_curvature: f64,
    /// Lingual offset of the mandibular arch relative to the maxillary (mm).
    pub overjet: f64,
    /// Interproximal gap (mm).
    pub gap: f64,
    /// Vertical overlap of opposing crowns (mm).
    pub occlusal_overlap: f64,
    /// Relative per-tooth variation of crown dimensions.
    pub jitter: f64,
    /// Relative per-dentition variation of arch size and shape.
    pub arch_jitter: f64,
    /// Left side is the exact mirror image of the right side.
    pub symmetric: bool,
    /// Number of teeth removed per dentition, drawn from this inclusive range.
    pub missing: (usize, usize),
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            points_per_tooth: 1024,
            upper_curvature: 0.05,
            lower_curvature: 0.055,
            overjet: 1.5,
            gap: 0.3,
            occlusal_overlap: 0.5,
            jitter: 0.04,
            arch_jitter: 0.03,
            symmetric: false,
            missing: (0, 0),
        }
    }
}

struct CrownShape {
    /// Mesiodistal width, buccolingual depth, crown height (mm).
    dims: [f64; 3],
    /// Vertical and horizontal superellipsoid exponents.
    exps: [f64; 2],
}

fn crown_shape(arch: Arch, position: u8) -> CrownShape {
    let (dims, exps) = match (arch, position) {
        (Arch::Maxillary, 1) => ([8.5, 7.0, 10.5], [0.6, 0.5]),
        (Arch::Maxillary, 2) => ([6.5, 6.0, 9.0], [0.6, 0.55]),
        (Arch::Maxillary, 3) => ([7.5, 8.0, 10.0], [0.7, 0.8]),
        (Arch::Maxillary, 4) => ([7.0, 9.0, 8.5], [0.6, 0.7]),
        (Arch::Maxillary, 5) => ([6.5, 9.0, 8.0], [0.6, 0.7]),
        (Arch::Maxillary, 6) => ([10.0, 11.0, 7.5], [0.5, 0.6]),
        (Arch::Maxillary, _) => ([9.0, 11.0, 7.0], [0.5, 0.6]),
        (Arch::Mandibular, 1) => ([5.0, 6.0, 9.0], [0.6, 0.5]),
        (Arch::Mandibular, 2) => ([5.5, 6.0, 9.5], [0.6, 0.5]),
        (Arch::Mandibular, 3) => ([7.0, 7.5, 11.0], [0.7, 0.8]),
        (Arch::Mandibular, 4) => ([7.0, 7.5, 8.5], [0.6, 0.7]),
        (Arch::Mandibular, 5) => ([7.0, 8.0, 8.0], [0.6, 0.7]),
        (Arch::Mandibular, 6) => ([11.0, 10.5, 7.5], [0.5, 0.6]),
        (Arch::Mandibular, _) => ([10.5, 10.0, 7.0], [0.5, 0.6]),
    };
    CrownShape { dims, exps }
}

#[inline]
fn spow(v: f64, e: f64) -> f64 {
    v.signum() * v.abs().powf(e)
}

/// Samples `n` points with outward unit normals on a superellipsoid with
/// half-axes `half` and exponents `exps`, centred at the origin.
fn superellipsoid(
    n: usize,
    half: [f64; 3],
    exps: [f64; 2],
    r: &mut rng::Rng,
) -> (Vec<[f64; 3]>, Vec<[f64; 3]>) {
    let [a, b, c] = half;
    let [e1, e2] = exps;
    let mut pts = Vec::with_capacity(n);
    let mut nrm = Vec::with_capacity(n);
    for _ in 0..n {
        let u = r.random_range(-1.0f64..=1.0).asin();
        let w = r.random_range(-PI..PI);
        let (su, cu) = u.sin_cos();
        let (sw, cw) = w.sin_cos();
        pts.push([
            a * spow(cu, e1) * spow(cw, e2),
            b * spow(cu, e1) * spow(sw, e2),
            c * spow(su, e1),
        ]);
        let g = [
            spow(cu, 2.0 - e1) * spow(cw, 2.0 - e2) / a,
            spow(cu, 2.0 - e1) * spow(sw, 2.0 - e2) / b,
            spow(su, 2.0 - e1) / c,
        ];
        let l = (g[0] * g[0] + g[1] * g[1] + g[2] * g[2]).sqrt();
        nrm.push([g[0] / l, g[1] / l, g[2] / l]);
    }
    (pts, nrm)
}

/// Arc-length positions along y = -k x^2 for x >= 0.
fn x_at_arc_length(k: f64, s: f64) -> f64 {
    const STEP: f64 = 1e-3;
    let mut x = 0.0;
    let mut acc = 0.0;
    while acc < s {
        let slope = 2.0 * k * (x + 0.5 * STEP);
        acc += STEP * (1.0 + slope * slope).sqrt();
        x += STEP;
    }
    x
}

fn gaussian(r: &mut rng::Rng) -> f64 {
    StandardNormal.sample(r)
}

/// Generates a dentition as a pure function of `(seed, config)`.
pub fn synth_dentition<T: Real>(seed: u64, config: &SynthConfig) -> Result<Dentition<T>> {
    if config.points_per_tooth == 0 {
        return Err(Error::InvalidInput("points_per_tooth must be positive".into()));
    }
    if config.missing.0 > config.missing.1 || config.missing.1 > 27 {
        return Err(Error::InvalidInput(format!("invalid missing range {:?}", config.missing)));
    }
    let mut arch_rng = rng::stream(seed, &[0xA4C]);
    let arch_scale = 1.0 + config.arch_jitter * gaussian(&mut arch_rng);
    let curv_scale = 1.0 + config.arch_jitter * gaussian(&mut arch_rng);

    let mut teeth: Vec<(Fdi, Vec<[f64; 3]>, Vec<[f64; 3]>)> = Vec::with_capacity(28);
    for arch in [Arch::Maxillary, Arch::Mandibular] {
        let (k, y_off, right_q, left_q) = match arch {
            Arch::Maxillary => (config.upper_curvature * curv_scale, 0.0, 1u32, 2u32),
            Arch::Mandibular => (config.lower_curvature * curv_scale, -config.overjet, 4, 3),
        };
        // Per-side crown dimensions; the left side copies the right one when
        // symmetric.
        for side in [right_q, left_q] {
            let mirror_of = (config.symmetric && side == left_q).then_some(right_q);
            let mut arc = 0.0;
            for position in 1..=7u8 {
                let fdi = Fdi::new(side * 10 + position as u32)?;
                let src = Fdi::new(mirror_of.unwrap_or(side) * 10 + position as u32)?;
                let mut r = rng::stream(seed, &[0x700, src.code() as u64]);
                let shape = crown_shape(arch, position);
                let mut dims = shape.dims;
                for d in dims.iter_mut() {
                    *d *= arch_scale * (1.0 + config.jitter * gaussian(&mut r)).clamp(0.7, 1.3);
                }
                let exps = shape.exps.map(|e| (e + 0.05 * gaussian(&mut r)).clamp(0.3, 1.2));
                let twist = 0.05 * gaussian(&mut r);
                let (pts, nrm) = superellipsoid(
                    config.points_per_tooth,
                    [dims[0] / 2.0, dims[1] / 2.0, dims[2] / 2.0],
                    exps,
                    &mut r,
                );
                let s = arc + dims[0] / 2.0;
                arc += dims[0] + config.gap;
                let x = x_at_arc_length(k, s);
                let y = -k * x * x + y_off;
                let z = match arch {
                    Arch::Maxillary => dims[2] / 2.0 - config.occlusal_overlap,
                    Arch::Mandibular => -(dims[2] / 2.0 - config.occlusal_overlap),
                };
                let place = RigidZ {
                    angle: (-2.0 * k * x).atan() + twist,
                    shift: [x, y, z],
                };
                let mut p: Vec<[f64; 3]> = pts.iter().map(|q| place.apply(q)).collect();
                let mut nn: Vec<[f64; 3]> = nrm.iter().map(|q| place.rotate(q)).collect();
                if !fdi.is_right() {
                    for q in p.iter_mut().chain(nn.iter_mut()) {
                        q[0] = -q[0];
                    }
                }
                teeth.push((fdi, p, nn));
            }
        }
    }

    // Move the maxillary-incisor centroid to the origin.
    let mut c = [0.0; 3];
    for (fdi, pts, _) in &teeth {
        if fdi.arch() == Arch::Maxillary && fdi.position() <= 2 {
            let n = pts.len() as f64;
            for p in pts {
                for k in 0..3 {
                    c[k] += p[k] / n / 4.0;
                }
            }
        }
    }
    if config.symmetric {
        c[0] = 0.0;
    }

    let mut removed = Vec::new();
    if config.missing.1 > 0 {
        let mut r = rng::stream(seed, &[0x3155]);
        let n = r.random_range(config.missing.0..=config.missing.1);
        let all: Vec<Fdi> = Fdi::all().collect();
        removed = all.choose_multiple(&mut r, n).copied().collect();
    }

    let to_t = |p: &[f64; 3]| -> Point3<T> { [T::lit(p[0]), T::lit(p[1]), T::lit(p[2])] };
    let mut out = Vec::with_capacity(28);
    for (fdi, pts, nrm) in teeth {
        if removed.contains(&fdi) {
            continue;
        }
        let p = pts
            .iter()
            .map(|q| to_t(&[q[0] - c[0], q[1] - c[1], q[2] - c[2]]))
            .collect();
        let n = nrm.iter().map(to_t).collect();
        out.push(Tooth::with_normals(fdi, p, Some(n))?);
    }
    Dentition::new(out)
}
