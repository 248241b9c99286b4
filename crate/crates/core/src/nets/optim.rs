use std::collections::HashMap;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nets::params::{ParamId, ParamStore};
use crate::nets::tape::Grads;

/// Learning rate as a function of the (0-based) epoch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LrSchedule {
    Constant,
    /// Multiply by `gamma` at every epoch in `every, 2 * every, ...`.
    Step { every: usize, gamma: f64 },
    /// Cosine annealing from the base rate to `min_lr` over `epochs`.
    Cosine { min_lr: f64, epochs: usize },
}

impl LrSchedule {
    pub fn rate(&self, base: f64, epoch: usize) -> f64 {
        match *self {
            LrSchedule::Constant => base,
            LrSchedule::Step { every, gamma } => {
                if every == 0 {
                    base
                } else {
                    base * gamma.powi((epoch / every) as i32)
                }
            }
            LrSchedule::Cosine { min_lr, epochs } => {
                if epochs <= 1 {
                    return base;
                }
                let p = (epoch.min(epochs - 1)) as f64 / (epochs - 1) as f64;
                min_lr + 0.5 * (base - min_lr) * (1.0 + (std::f64::consts::PI * p).cos())
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub schedule: LrSchedule,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            schedule: LrSchedule::Constant,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Adam {
    pub cfg: AdamConfig,
    step: u64,
    m: HashMap<ParamId, Array2<f64>>,
    v: HashMap<ParamId, Array2<f64>>,
}

impl Adam {
    pub fn new(cfg: AdamConfig) -> Self {
        Adam {
            cfg,
            step: 0,
            m: HashMap::new(),
            v: HashMap::new(),
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// One bias-corrected update at learning rate `lr`. Parameters without a
    /// gradient are treated as having a zero gradient.
    pub fn update(&mut self, store: &mut ParamStore, grads: &Grads, lr: f64) -> Result<()> {
        self.step += 1;
        let (b1, b2) = (self.cfg.beta1, self.cfg.beta2);
        let c1 = 1.0 - b1.powi(self.step as i32);
        let c2 = 1.0 - b2.powi(self.step as i32);
        for id in store.ids().collect::<Vec<_>>() {
            let shape = store.value(id).dim();
            let zero;
            let g = match grads.get(id) {
                Some(g) => {
                    if g.dim() != shape {
                        return Err(Error::Shape(format!("gradient for {} has shape {:?}", store.name(id), g.dim())));
                    }
                    g
                }
                None => {
                    zero = Array2::zeros(shape);
                    &zero
                }
            };
            let m = self.m.entry(id).or_insert_with(|| Array2::zeros(shape));
            let v = self.v.entry(id).or_insert_with(|| Array2::zeros(shape));
            let w = store.value_mut(id);
            ndarray::Zip::from(w).and(m).and(v).and(g).for_each(|w, m, v, &g| {
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                *w -= lr * (*m / c1) / ((*v / c2).sqrt() + self.cfg.eps);
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedules() {
        assert_eq!(LrSchedule::Constant.rate(0.1, 50), 0.1);
        let s = LrSchedule::Step { every: 10, gamma: 0.5 };
        assert_eq!(s.rate(1.0, 9), 1.0);
        assert_eq!(s.rate(1.0, 10), 0.5);
        assert_eq!(s.rate(1.0, 25), 0.25);
        let c = LrSchedule::Cosine { min_lr: 0.01, epochs: 11 };
        assert_eq!(c.rate(1.0, 0), 1.0);
        assert!((c.rate(1.0, 5) - 0.505).abs() < 1e-12);
        assert!((c.rate(1.0, 10) - 0.01).abs() < 1e-15);
    }

    #[test]
    fn first_step_moves_by_lr() {
        let mut s = ParamStore::new();
        let id = s.add("w", Array2::from_elem((1, 2), 1.0)).unwrap();
        let mut g = Grads::default();
        g.by_param.insert(id, Array2::from_shape_vec((1, 2), vec![3.0, -0.5]).unwrap());
        let mut opt = Adam::new(AdamConfig::default());
        opt.update(&mut s, &g, 0.1).unwrap();
        let w = s.value(id);
        assert!((w[[0, 0]] - 0.9).abs() < 1e-7);
        assert!((w[[0, 1]] - 1.1).abs() < 1e-7);
        let before = s.clone();
        opt.update(&mut s, &g, 0.0).unwrap();
        assert_eq!(s, before);
    }
}
