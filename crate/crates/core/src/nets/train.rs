use std::path::Path;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::boundary::fit_bound;
use crate::dentition::{augment, AugmentConfig, Dentition, Role, Scenario};
use crate::diffusion::{cyl_normalize, forward_closed, standard_normal_points, DiffusionSchedule};
use crate::error::{Error, Result};
use crate::nets::denoiser::{DenoiseTooth, Denoiser, DenoiserNet};
use crate::nets::optim::{Adam, AdamConfig};
use crate::nets::params::ParamStore;
use crate::nets::regressor::{BoundaryInput, BoundaryRegressor, RegressorNet};
use crate::nets::tape::{Grads, Graph, Var};
use crate::rng::{self, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    pub augment: AugmentConfig,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 200,
            batch_size: 4,
            adam: AdamConfig::default(),
            augment: AugmentConfig::default(),
            seed: 0,
        }
    }
}

/// Mean training loss per epoch.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LossTrace {
    pub losses: Vec<f64>,
}

impl LossTrace {
    pub fn first(&self) -> Option<f64> {
        self.losses.first().copied()
    }

    pub fn last(&self) -> Option<f64> {
        self.losses.last().copied()
    }

    /// CSV with columns `epoch,loss`, epochs counted from 1.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["epoch", "loss"])?;
        for (e, l) in self.losses.iter().enumerate() {
            w.write_record([(e + 1).to_string(), format!("{l:.17e}")])?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// One denoiser training example: the input teeth, the timestep and the
/// noise added to each target point (rows in target order).
#[derive(Debug, Clone)]
pub struct DenoiserExample {
    pub teeth: Vec<DenoiseTooth>,
    pub t: usize,
    pub noise: Array2<f64>,
}

/// Augments `d`, draws a training scenario, a timestep uniform in `1..=T`
/// and per-point noise, and corrupts the targets in their local frames.
pub fn denoiser_example(d: &Dentition<f64>, s: &DiffusionSchedule<f64>, aug: &AugmentConfig, seed: u64) -> Result<DenoiserExample> {
    let d = augment(d, aug, rng::derive_seed(seed, &[1]))?;
    let scenario = Scenario::random_training(&d, rng::derive_seed(seed, &[2]))?;
    let mut r = rng::stream(seed, &[3]);
    let t = r.random_range(1..=s.steps());
    let mut teeth = Vec::with_capacity(d.len());
    let mut noise = Vec::new();
    for tooth in d.teeth() {
        let bound = fit_bound(tooth)?;
        let local = cyl_normalize(tooth.points(), &bound)?;
        let target = scenario.targets.contains(&tooth.fdi);
        let points = if target {
            let eps = standard_normal_points::<f64>(&mut r, local.len());
            let flat: Vec<f64> = local.iter().flatten().copied().collect();
            let ef: Vec<f64> = eps.iter().flatten().copied().collect();
            let xt = forward_closed(s, &flat, t, &ef)?;
            noise.extend(eps);
            xt.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect()
        } else {
            local
        };
        teeth.push(DenoiseTooth {
            fdi: tooth.fdi,
            role: if target { Role::Target } else { Role::Context },
            points,
            bound,
        });
    }
    let noise = Array2::from_shape_fn((noise.len(), 3), |(i, c)| noise[i][c]);
    Ok(DenoiserExample { teeth, t, noise })
}

/// Mean squared noise-prediction error over target points.
pub fn denoiser_loss(net: &DenoiserNet, g: &mut Graph, ex: &DenoiserExample, rng: Option<&mut Rng>) -> Result<Var> {
    let out = net.forward(g, &ex.teeth, ex.t, rng)?;
    let rows = vec![true; ex.noise.nrows()];
    g.masked_sq_err(out, ex.noise.clone(), &rows)
}

/// One regressor training example with ground-truth target bounds.
#[derive(Debug, Clone)]
pub struct BoundaryExample {
    pub input: BoundaryInput,
    pub truth: Array2<f64>,
}

pub fn boundary_example(d: &Dentition<f64>, aug: &AugmentConfig, seed: u64) -> Result<BoundaryExample> {
    let d = augment(d, aug, rng::derive_seed(seed, &[1]))?;
    let scenario = Scenario::random_training(&d, rng::derive_seed(seed, &[2]))?;
    let input = BoundaryInput::from_dentition(&d, &scenario.targets)?;
    let mut truth = Array2::zeros((input.targets.len(), 5));
    for (i, f) in input.targets.iter().enumerate() {
        let b = fit_bound(d.get(*f).ok_or(Error::MissingTooth(f.code()))?)?;
        for (c, v) in b.to_array().into_iter().enumerate() {
            truth[[i, c]] = v;
        }
    }
    Ok(BoundaryExample { input, truth })
}

/// Masked Smooth-L1 over the target rows (all rows are targets here).
pub fn boundary_loss(net: &RegressorNet, g: &mut Graph, ex: &BoundaryExample, rng: Option<&mut Rng>) -> Result<Var> {
    let out = net.forward(g, &ex.input, rng)?;
    let rows = vec![true; ex.truth.nrows()];
    g.masked_smooth_l1(out, ex.truth.clone(), &rows)
}

/// Mini-batch Adam. `example_grad(store, item, seed)` returns the loss and
/// gradients for one dataset item; batches average them. Visiting order and
/// per-item seeds depend only on `cfg.seed`.
pub fn run_training(
    store: &mut ParamStore,
    n_items: usize,
    cfg: &TrainConfig,
    mut example_grad: impl FnMut(&ParamStore, usize, u64) -> Result<(f64, Grads)>,
) -> Result<LossTrace> {
    if n_items == 0 {
        return Err(Error::Empty("training set"));
    }
    let batch = cfg.batch_size.max(1);
    let mut opt = Adam::new(cfg.adam);
    let mut trace = LossTrace::default();
    for epoch in 0..cfg.epochs {
        let mut order: Vec<usize> = (0..n_items).collect();
        order.shuffle(&mut rng::stream(cfg.seed, &[1, epoch as u64]));
        let lr = cfg.adam.schedule.rate(cfg.adam.lr, epoch);
        let mut total = 0.0;
        for (b, chunk) in order.chunks(batch).enumerate() {
            let mut acc = Grads::default();
            for (k, &item) in chunk.iter().enumerate() {
                let seed = rng::derive_seed(cfg.seed, &[2, epoch as u64, (b * batch + k) as u64]);
                let (loss, grads) = example_grad(store, item, seed)?;
                if !loss.is_finite() {
                    return Err(Error::Diverged { epoch: epoch + 1, loss });
                }
                total += loss;
                acc.accumulate(grads);
            }
            acc.scale(1.0 / chunk.len() as f64);
            opt.update(store, &acc, lr)?;
            if !store.all_finite() {
                return Err(Error::Diverged { epoch: epoch + 1, loss: f64::NAN });
            }
        }
        trace.losses.push(total / n_items as f64);
    }
    Ok(trace)
}

pub fn train_denoiser(
    model: &mut Denoiser,
    data: &[Dentition<f64>],
    s: &DiffusionSchedule<f64>,
    cfg: &TrainConfig,
) -> Result<LossTrace> {
    let net = model.net.clone();
    run_training(&mut model.store, data.len(), cfg, |store, item, seed| {
        let ex = denoiser_example(&data[item], s, &cfg.augment, seed)?;
        let mut g = Graph::new(store);
        let mut r = rng::stream(seed, &[4]);
        let loss = denoiser_loss(&net, &mut g, &ex, Some(&mut r))?;
        Ok((g.scalar(loss), g.backward(loss)?))
    })
}

pub fn train_regressor(model: &mut BoundaryRegressor, data: &[Dentition<f64>], cfg: &TrainConfig) -> Result<LossTrace> {
    let net = model.net.clone();
    run_training(&mut model.store, data.len(), cfg, |store, item, seed| {
        let ex = boundary_example(&data[item], &cfg.augment, seed)?;
        let mut g = Graph::new(store);
        let mut r = rng::stream(seed, &[4]);
        let loss = boundary_loss(&net, &mut g, &ex, Some(&mut r))?;
        Ok((g.scalar(loss), g.backward(loss)?))
    })
}
