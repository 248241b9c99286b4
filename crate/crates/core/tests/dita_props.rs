use std::collections::BTreeSet;

use dentgen_core::dentition::{synth_dentition, Fdi, SynthConfig};
use dentgen_core::dita::{rpe_feature, DitaConfig, DitaLayer};
use dentgen_core::nets::*;
use dentgen_core::rng;
use ndarray::Array2;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;

const CFG: DitaConfig = DitaConfig {
    channels: 8,
    heads: 2,
    rpe_hidden: 16,
};

fn layer(seed: u64) -> (ParamStore, DitaLayer) {
    let mut s = ParamStore::new();
    let l = DitaLayer::new(&mut s, "d", CFG, &mut rng::seeded(seed)).unwrap();
    (s, l)
}

/// `k` distinct zig-zag indices, latents, and a key mask with at least one
/// attendable column.
fn inputs(k: usize, seed: u64) -> (Array2<f64>, Vec<usize>, Vec<bool>) {
    let mut r = rng::seeded(seed);
    let mut idx: Vec<usize> = (0..28).collect();
    idx.shuffle(&mut r);
    idx.truncate(k);
    let z = Array2::from_shape_fn((k, CFG.channels), |_| r.random_range(-2.0..2.0));
    let mut keys: Vec<bool> = (0..k).map(|_| r.random_bool(0.6)).collect();
    keys[r.random_range(0..k)] = true;
    (z, idx, keys)
}

fn run(store: &ParamStore, l: &DitaLayer, z: &Array2<f64>, idx: &[usize], keys: &[bool]) -> (Array2<f64>, Vec<Array2<f64>>) {
    let mut g = Graph::new(store);
    let zv = g.constant(z.clone());
    let (out, maps) = l.forward(&mut g, zv, idx, keys).unwrap();
    (g.value(out).clone(), maps)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn rows_are_distributions_over_keys(k in 1usize..=28, seed in any::<u64>()) {
        let (store, l) = layer(seed ^ 1);
        let (z, idx, keys) = inputs(k, seed);
        let (_, maps) = run(&store, &l, &z, &idx, &keys);
        for m in &maps {
            for i in 0..k {
                let row: f64 = m.row(i).sum();
                prop_assert!((row - 1.0).abs() < 1e-9);
                for j in 0..k {
                    if keys[j] {
                        prop_assert!(m[[i, j]] >= 0.0);
                    } else {
                        prop_assert_eq!(m[[i, j]], 0.0);
                    }
                }
            }
        }
    }

    #[test]
    fn row_permutation_is_bit_exact(k in 1usize..=28, seed in any::<u64>()) {
        let (store, l) = layer(seed ^ 2);
        let (z, idx, keys) = inputs(k, seed);
        let (out, maps) = run(&store, &l, &z, &idx, &keys);
        let mut perm: Vec<usize> = (0..k).collect();
        perm.shuffle(&mut rng::seeded(seed ^ 3));
        let zp = Array2::from_shape_fn(z.dim(), |(i, c)| z[[perm[i], c]]);
        let ip: Vec<usize> = perm.iter().map(|&p| idx[p]).collect();
        let kp: Vec<bool> = perm.iter().map(|&p| keys[p]).collect();
        let (outp, mapsp) = run(&store, &l, &zp, &ip, &kp);
        for i in 0..k {
            for c in 0..CFG.channels {
                prop_assert_eq!(outp[[i, c]].to_bits(), out[[perm[i], c]].to_bits());
            }
            for (m, mp) in maps.iter().zip(&mapsp) {
                for j in 0..k {
                    prop_assert_eq!(mp[[i, j]].to_bits(), m[[perm[i], perm[j]]].to_bits());
                }
            }
        }
    }

    #[test]
    fn masked_rows_do_not_leak(k in 2usize..=28, seed in any::<u64>()) {
        // Rows that are not keys influence only their own output.
        let (store, l) = layer(seed ^ 4);
        let (z, idx, keys) = inputs(k, seed);
        let Some(hidden) = keys.iter().position(|&m| !m) else { return Ok(()) };
        let (out, _) = run(&store, &l, &z, &idx, &keys);
        let mut z2 = z.clone();
        z2.row_mut(hidden).mapv_inplace(|v| v * -3.0 + 1.0);
        let (out2, _) = run(&store, &l, &z2, &idx, &keys);
        for i in (0..k).filter(|&i| i != hidden) {
            for c in 0..CFG.channels {
                prop_assert_eq!(out[[i, c]].to_bits(), out2[[i, c]].to_bits());
            }
        }
    }

    #[test]
    fn rpe_depends_only_on_offset(i in 0usize..28, j in 0usize..28) {
        let f = rpe_feature(i, j).unwrap();
        let d = i as f64 - j as f64;
        prop_assert_eq!(f[0], (1.0 + d.max(0.0)).ln());
        prop_assert_eq!(f[1], (1.0 + (-d).max(0.0)).ln());
        prop_assert_eq!(f[2], if i == j { 1.0 } else { 0.0 });
        if i + 1 < 28 && j + 1 < 28 {
            prop_assert_eq!(rpe_feature(i + 1, j + 1).unwrap(), f);
        }
    }
}

#[test]
fn zero_weights_give_uniform_attention() {
    let (mut store, l) = layer(5);
    for id in store.ids().collect::<Vec<_>>() {
        store.value_mut(id).fill(0.0);
    }
    let (z, idx, _) = inputs(9, 6);
    let keys = [true, false, true, true, false, true, false, false, true];
    let (out, maps) = run(&store, &l, &z, &idx, &keys);
    for m in &maps {
        for i in 0..9 {
            for j in 0..9 {
                assert_eq!(m[[i, j]], if keys[j] { 0.2 } else { 0.0 });
            }
        }
    }
    // Zero output projection leaves only the residual.
    assert_eq!(out, z);
}

#[test]
fn single_row_attends_to_itself() {
    let (store, l) = layer(7);
    let (z, idx, _) = inputs(1, 8);
    let (out, maps) = run(&store, &l, &z, &idx, &[true]);
    for m in &maps {
        assert_eq!(m[[0, 0]], 1.0);
    }
    assert!(out.iter().all(|v| v.is_finite()));
}

#[test]
fn invalid_inputs_are_rejected() {
    let (store, l) = layer(9);
    let (z, mut idx, _) = inputs(3, 10);
    let mut g = Graph::new(&store);
    let zv = g.constant(z.clone());
    assert!(l.forward(&mut g, zv, &idx, &[false; 3]).is_err());
    idx[1] = idx[0];
    assert!(l.forward(&mut g, zv, &idx, &[true; 3]).is_err());
    assert!(l.forward(&mut g, zv, &idx[..2], &[true; 2]).is_err());
    let nan = g.constant(Array2::from_elem((3, 8), f64::NAN));
    assert!(l.forward(&mut g, nan, &[0, 1, 2], &[true; 3]).is_err());
    assert!(rpe_feature(28, 0).is_err());
}

#[test]
fn regressor_ignores_target_contents() {
    let cfg = RegressorConfig::small();
    let model = BoundaryRegressor::new(cfg, 11).unwrap();
    let d = synth_dentition::<f64>(
        12,
        &SynthConfig {
            points_per_tooth: 32,
            ..Default::default()
        },
    )
    .unwrap();
    let targets: BTreeSet<Fdi> = [14, 36, 41].map(|c| Fdi::new(c).unwrap()).into_iter().collect();
    let base = model.predict_bounds(&d, &targets).unwrap();
    // Replace the stored target teeth with arbitrary clouds.
    let mut stale = d.clone();
    let mut r = rng::seeded(13);
    for &f in &targets {
        let pts = (0..7).map(|_| [r.random_range(-90.0..90.0), r.random_range(-90.0..90.0), r.random_range(-90.0..90.0)]).collect();
        stale.set(dentgen_core::dentition::Tooth::new(f, pts).unwrap());
    }
    let again = model.predict_bounds(&stale, &targets).unwrap();
    assert_eq!(base, again);
}
