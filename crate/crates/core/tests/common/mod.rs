//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

pub mod grad_suite;

use dentgen_core::boundary::CylBound;
use dentgen_core::nets::{Grads, ParamStore};
use dentgen_core::point::Point3;
use rand::Rng;

/// Relative error `|a - b| / max(|a|, |b|, floor)`.
pub fn rel_err(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

pub const FD_STEP: f64 = 1e-5;
/// Round-off leaves about `1e-10 * |loss|` of absolute noise in a central
/// difference, so gradients below `FD_FLOOR * max(1, |loss|)` are compared
/// absolutely.
pub const FD_FLOOR: f64 = 1e-4;

/// Central finite differences of `loss` for every scalar of every
/// parameter, compared with `grads`. Returns the worst relative error and
/// where it occurred.
pub fn finite_difference_check(
    store: &ParamStore,
    grads: &Grads,
    loss: impl Fn(&ParamStore) -> f64,
) -> (f64, String) {
    let mut worst = (0.0, String::new());
    let floor = FD_FLOOR * loss(store).abs().max(1.0);
    let mut s = store.clone();
    for id in store.ids() {
        let shape = store.value(id).dim();
        for r in 0..shape.0 {
            for c in 0..shape.1 {
                let x0 = store.value(id)[[r, c]];
                s.value_mut(id)[[r, c]] = x0 + FD_STEP;
                let up = loss(&s);
                s.value_mut(id)[[r, c]] = x0 - FD_STEP;
                let down = loss(&s);
                s.value_mut(id)[[r, c]] = x0;
                let numeric = (up - down) / (2.0 * FD_STEP);
                let analytic = grads.get(id).map(|g| g[[r, c]]).unwrap_or(0.0);
                let e = rel_err(analytic, numeric, floor);
                if e > worst.0 {
                    worst = (e, format!("{}[{r},{c}]: analytic {analytic:e}, numeric {numeric:e}", store.name(id)));
                }
            }
        }
    }
    worst
}

/// Exact minimum-cost perfect matching by enumerating permutations.
pub fn brute_force_emd(a: &[Point3<f64>], b: &[Point3<f64>]) -> f64 {
    fn rec(i: usize, a: &[Point3<f64>], b: &[Point3<f64>], used: &mut Vec<bool>, acc: f64, best: &mut f64) {
        if i == a.len() {
            *best = best.min(acc);
            return;
        }
        for j in 0..b.len() {
            if !used[j] {
                used[j] = true;
                let d = ((a[i][0] - b[j][0]).powi(2) + (a[i][1] - b[j][1]).powi(2) + (a[i][2] - b[j][2]).powi(2)).sqrt();
                rec(i + 1, a, b, used, acc + d, best);
                used[j] = false;
            }
        }
    }
    let mut best = f64::INFINITY;
    rec(0, a, b, &mut vec![false; b.len()], 0.0, &mut best);
    best / a.len() as f64
}

/// Smallest circle through 2 or 3 of the points that contains them all.
pub fn brute_force_circle(p: &[[f64; 2]]) -> ([f64; 2], f64) {
    let contains = |c: [f64; 2], r: f64| p.iter().all(|q| ((q[0] - c[0]).powi(2) + (q[1] - c[1]).powi(2)).sqrt() <= r + 1e-9);
    let mut best = ([p[0][0], p[0][1]], if p.len() == 1 { 0.0 } else { f64::INFINITY });
    for i in 0..p.len() {
        for j in i + 1..p.len() {
            let c = [(p[i][0] + p[j][0]) / 2.0, (p[i][1] + p[j][1]) / 2.0];
            let r = ((p[i][0] - c[0]).powi(2) + (p[i][1] - c[1]).powi(2)).sqrt();
            if r < best.1 && contains(c, r) {
                best = (c, r);
            }
            for k in j + 1..p.len() {
                let (ax, ay, bx, by, cx, cy) = (p[i][0], p[i][1], p[j][0], p[j][1], p[k][0], p[k][1]);
                let d = 2.0 * (ax * (by - cy) + bx * (cy - ay) + cx * (ay - by));
                if d.abs() < 1e-12 {
                    continue;
                }
                let a2 = ax * ax + ay * ay;
                let b2 = bx * bx + by * by;
                let c2 = cx * cx + cy * cy;
                let ux = (a2 * (by - cy) + b2 * (cy - ay) + c2 * (ay - by)) / d;
                let uy = (a2 * (cx - bx) + b2 * (ax - cx) + c2 * (bx - ax)) / d;
                let r = ((ax - ux).powi(2) + (ay - uy).powi(2)).sqrt();
                if r < best.1 && contains([ux, uy], r) {
                    best = ([ux, uy], r);
                }
            }
        }
    }
    best
}

/// Rejection-sampling estimate of (dice, iou) for two vertical cylinders.
pub fn monte_carlo_overlap(a: &CylBound<f64>, b: &CylBound<f64>, samples: usize, rng: &mut impl Rng) -> (f64, f64) {
    let lo = [
        (a.cx - a.r).min(b.cx - b.r),
        (a.cy - a.r).min(b.cy - b.r),
        (a.cz - a.h / 2.0).min(b.cz - b.h / 2.0),
    ];
    let hi = [
        (a.cx + a.r).max(b.cx + b.r),
        (a.cy + a.r).max(b.cy + b.r),
        (a.cz + a.h / 2.0).max(b.cz + b.h / 2.0),
    ];
    let inside = |c: &CylBound<f64>, p: [f64; 3]| {
        (p[0] - c.cx).powi(2) + (p[1] - c.cy).powi(2) <= c.r * c.r && (p[2] - c.cz).abs() <= c.h / 2.0
    };
    let (mut na, mut nb, mut nab) = (0usize, 0usize, 0usize);
    for _ in 0..samples {
        let p = [0, 1, 2].map(|k| rng.random_range(lo[k]..hi[k]));
        let (ia, ib) = (inside(a, p), inside(b, p));
        na += ia as usize;
        nb += ib as usize;
        nab += (ia && ib) as usize;
    }
    let dice = 2.0 * nab as f64 / (na + nb) as f64;
    let iou = nab as f64 / (na + nb - nab) as f64;
    (dice, iou)
}
