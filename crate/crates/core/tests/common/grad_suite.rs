//! Finite-difference checks of every differentiable primitive, layer and
//! full model loss. Each group reports the worst relative error per check.

use dentgen_core::dentition::{synth_dentition, AugmentConfig, Fdi, Role, SynthConfig};
use dentgen_core::diffusion::DiffusionSchedule;
use dentgen_core::dita::{DitaConfig, DitaLayer};
use dentgen_core::nets::*;
use dentgen_core::rng;
use ndarray::Array2;
use rand::Rng;

use super::finite_difference_check;

pub struct GradCheck {
    pub name: String,
    pub worst: f64,
    pub at: String,
}

pub fn random(rows: usize, cols: usize, seed: u64) -> Array2<f64> {
    let mut r = rng::seeded(seed);
    Array2::from_shape_fn((rows, cols), |_| r.random_range(-1.0..1.0))
}

/// Scalar probe `sum(y * R)` so every output entry gets a distinct upstream
/// gradient.
fn probe(g: &mut Graph, y: Var, seed: u64) -> Var {
    let (r, c) = g.value(y).dim();
    let w = g.constant(random(r, c, seed));
    let m = g.mul(y, w).unwrap();
    g.sum(m)
}

/// Compares `build` (parameters in, scalar out) with finite differences.
fn check(out: &mut Vec<GradCheck>, name: &str, store: &ParamStore, build: impl Fn(&mut Graph) -> Var) {
    let mut g = Graph::new(store);
    let loss = build(&mut g);
    let grads = g.backward(loss).unwrap();
    let (worst, at) = finite_difference_check(store, &grads, |s| {
        let mut g = Graph::new(s);
        let l = build(&mut g);
        g.scalar(l)
    });
    out.push(GradCheck {
        name: name.to_string(),
        worst,
        at,
    });
}

pub fn store_with(mats: &[(&str, Array2<f64>)]) -> (ParamStore, Vec<ParamId>) {
    let mut s = ParamStore::new();
    let ids = mats.iter().map(|(n, m)| s.add(n, m.clone()).unwrap()).collect();
    (s, ids)
}

pub fn binary_primitives(out: &mut Vec<GradCheck>) {
    let (s, id) = store_with(&[("a", random(3, 4, 1)), ("b", random(4, 2, 2)), ("c", random(3, 4, 3)), ("r", random(1, 4, 4))]);
    check(out, "matmul", &s, |g| {
        let (a, b) = (g.param(id[0]), g.param(id[1]));
        let y = g.matmul(a, b).unwrap();
        probe(g, y, 10)
    });
    check(out, "matmul_t", &s, |g| {
        let (a, c) = (g.param(id[0]), g.param(id[2]));
        let y = g.matmul_t(a, c).unwrap();
        probe(g, y, 11)
    });
    check(out, "add", &s, |g| {
        let (a, c) = (g.param(id[0]), g.param(id[2]));
        let y = g.add(a, c).unwrap();
        probe(g, y, 12)
    });
    check(out, "add_row", &s, |g| {
        let (a, r) = (g.param(id[0]), g.param(id[3]));
        let y = g.add_row(a, r).unwrap();
        probe(g, y, 13)
    });
    check(out, "mul", &s, |g| {
        let (a, c) = (g.param(id[0]), g.param(id[2]));
        let y = g.mul(a, c).unwrap();
        probe(g, y, 14)
    });
    check(out, "shared operand", &s, |g| {
        let a = g.param(id[0]);
        let y = g.mul(a, a).unwrap();
        probe(g, y, 15)
    });
}

pub fn unary_primitives(out: &mut Vec<GradCheck>) {
    let (s, id) = store_with(&[("a", random(4, 5, 5))]);
    check(out, "scale", &s, |g| {
        let a = g.param(id[0]);
        let y = g.scale(a, -2.5);
        probe(g, y, 20)
    });
    check(out, "relu", &s, |g| {
        let a = g.param(id[0]);
        let y = g.relu(a);
        probe(g, y, 21)
    });
    check(out, "tanh", &s, |g| {
        let a = g.param(id[0]);
        let y = g.tanh(a);
        probe(g, y, 22)
    });
    check(out, "slice_cols", &s, |g| {
        let a = g.param(id[0]);
        let y = g.slice_cols(a, 1, 4).unwrap();
        probe(g, y, 23)
    });
    check(out, "concat_cols", &s, |g| {
        let a = g.param(id[0]);
        let b = g.tanh(a);
        let y = g.concat_cols(&[a, b, a]).unwrap();
        probe(g, y, 24)
    });
    check(out, "gather_rows", &s, |g| {
        let a = g.param(id[0]);
        let y = g.gather_rows(a, &[3, 0, 3, 1, 3]).unwrap();
        probe(g, y, 25)
    });
    check(out, "segment_max", &s, |g| {
        let a = g.param(id[0]);
        let y = g.segment_max(a, &[1, 3]).unwrap();
        probe(g, y, 26)
    });
    check(out, "masked_softmax", &s, |g| {
        let a = g.param(id[0]);
        let y = g.masked_softmax(a, &[true, false, true, true, false]).unwrap();
        probe(g, y, 27)
    });
    check(out, "sum", &s, |g| {
        let a = g.param(id[0]);
        let y = g.tanh(a);
        g.sum(y)
    });
    check(out, "dropout", &s, |g| {
        let a = g.param(id[0]);
        let mut r = rng::seeded(28);
        let y = dropout(g, a, 0.3, Some(&mut r)).unwrap();
        probe(g, y, 29)
    });
}

pub fn pair_primitives(out: &mut Vec<GradCheck>) {
    let k = 3;
    let (s, id) = store_with(&[("a", random(k, 4, 6)), ("p", random(k * k, 4, 7)), ("w", random(k, k, 8))]);
    check(out, "pair_dot_left", &s, |g| {
        let (a, p) = (g.param(id[0]), g.param(id[1]));
        let y = g.pair_dot_left(a, p).unwrap();
        probe(g, y, 30)
    });
    check(out, "pair_dot_right", &s, |g| {
        let (a, p) = (g.param(id[0]), g.param(id[1]));
        let y = g.pair_dot_right(a, p).unwrap();
        probe(g, y, 31)
    });
    check(out, "pair_weighted", &s, |g| {
        let (w, p) = (g.param(id[2]), g.param(id[1]));
        let y = g.pair_weighted(w, p).unwrap();
        probe(g, y, 32)
    });
}

pub fn losses(out: &mut Vec<GradCheck>) {
    let (s, id) = store_with(&[("a", random(4, 3, 9))]);
    let target = random(4, 3, 40);
    let rows = [true, false, true, true];
    check(out, "masked_sq_err", &s, |g| {
        let a = g.param(id[0]);
        g.masked_sq_err(a, target.clone(), &rows).unwrap()
    });
    // Residuals on both sides of the Smooth-L1 switch.
    let wide = &random(4, 3, 41) * 3.0;
    check(out, "masked_smooth_l1", &s, |g| {
        let a = g.param(id[0]);
        g.masked_smooth_l1(a, wide.clone(), &rows).unwrap()
    });
}

pub fn layers_and_embeddings(out: &mut Vec<GradCheck>) {
    let mut s = ParamStore::new();
    let mut r = rng::seeded(5);
    let lin = Linear::new(&mut s, "lin", 4, 3, true, &mut r).unwrap();
    let emb = FdiEmbedding::new(&mut s, "emb", 8, &mut r).unwrap();
    let x = random(5, 4, 50);
    let fdis: Vec<Fdi> = [11, 21, 11, 47].map(|c| Fdi::new(c).unwrap()).to_vec();
    check(out, "linear", &s, |g| {
        let xv = g.constant(x.clone());
        let y = lin.forward(g, xv).unwrap();
        probe(g, y, 51)
    });
    check(out, "fdi embedding", &s, |g| {
        let y = emb.lookup(g, &fdis).unwrap();
        probe(g, y, 52)
    });
}

pub fn dita_layer(out: &mut Vec<GradCheck>) {
    let mut s = ParamStore::new();
    let mut r = rng::seeded(6);
    let cfg = DitaConfig {
        channels: 8,
        heads: 2,
        rpe_hidden: 16,
    };
    let layer = DitaLayer::new(&mut s, "dita", cfg, &mut r).unwrap();
    let z0 = s.add("z", random(5, 8, 60)).unwrap();
    let indices = [9, 2, 17, 0, 5];
    let keys = [true, true, false, true, false];
    check(out, "dita", &s, |g| {
        let z = g.param(z0);
        let (y, _) = layer.forward(g, z, &indices, &keys).unwrap();
        probe(g, y, 61)
    });
}

/// Zero-initialised biases and output layers put ReLUs exactly on their
/// kink, where central differences are meaningless; check at a generic
/// point instead.
fn jitter(store: &mut ParamStore, seed: u64) {
    let mut r = rng::seeded(seed);
    for id in store.ids().collect::<Vec<_>>() {
        store.value_mut(id).mapv_inplace(|v| v + r.random_range(-0.2..0.2));
    }
}

fn micro_denoiser_example(seed: u64) -> DenoiserExample {
    let cfg = SynthConfig {
        points_per_tooth: 8,
        ..Default::default()
    };
    let d = synth_dentition::<f64>(seed, &cfg).unwrap();
    let keep: Vec<Fdi> = [16, 46].map(|c| Fdi::new(c).unwrap()).to_vec();
    let mut small = d.clone();
    for f in d.fdis() {
        if !keep.contains(&f) {
            small.remove(f);
        }
    }
    let s = DiffusionSchedule::<f64>::linear(50, 1e-3, 0.2).unwrap();
    let mut ex = denoiser_example(&small, &s, &AugmentConfig::none(), seed).unwrap();
    assert_eq!(ex.teeth.len(), 2);
    assert_eq!(ex.teeth.iter().filter(|t| t.role == Role::Target).count(), 1);
    ex.t = 17;
    ex
}

pub fn full_denoiser_loss(out: &mut Vec<GradCheck>) {
    let cfg = DenoiserConfig {
        enc_hidden: 8,
        channels: 8,
        heads: 2,
        layers: 2,
        rpe_hidden: 16,
        time_dim: 8,
        dec_hidden: 8,
        dropout: 0.1,
    };
    let mut model = Denoiser::new(cfg, 7).unwrap();
    jitter(&mut model.store, 8);
    let ex = micro_denoiser_example(3);
    let net = model.net.clone();
    check(out, "denoiser loss", &model.store, |g| {
        let mut r = rng::seeded(9);
        denoiser_loss(&net, g, &ex, Some(&mut r)).unwrap()
    });
}

pub fn full_regressor_loss(out: &mut Vec<GradCheck>) {
    let cfg = RegressorConfig {
        enc_hidden: 8,
        channels: 8,
        heads: 2,
        layers: 1,
        rpe_hidden: 16,
        head_hidden: 8,
        dropout: 0.3,
        coord_scale: 0.1,
    };
    let mut model = BoundaryRegressor::new(cfg, 4).unwrap();
    jitter(&mut model.store, 6);
    let d = synth_dentition::<f64>(
        5,
        &SynthConfig {
            points_per_tooth: 6,
            ..Default::default()
        },
    )
    .unwrap();
    let mut small = d.clone();
    for f in d.fdis() {
        if ![15, 16, 17, 45].contains(&f.code()) {
            small.remove(f);
        }
    }
    let ex = boundary_example(&small, &AugmentConfig::none(), 2).unwrap();
    let net = model.net.clone();
    check(out, "regressor loss", &model.store, |g| {
        let mut r = rng::seeded(3);
        boundary_loss(&net, g, &ex, Some(&mut r)).unwrap()
    });
}

/// Every group, in order.
pub fn all() -> Vec<GradCheck> {
    let mut out = Vec::new();
    for group in [
        binary_primitives,
        unary_primitives,
        pair_primitives,
        losses,
        layers_and_embeddings,
        dita_layer,
        full_denoiser_loss,
        full_regressor_loss,
    ] {
        group(&mut out);
    }
    out
}
