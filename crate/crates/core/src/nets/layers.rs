use ndarray::Array2;
use rand::Rng as _;

use crate::dentition::{Fdi, NUM_TEETH};
use crate::error::Result;
use crate::nets::params::{ParamId, ParamStore};
use crate::nets::tape::{Graph, Var};
use crate::rng::Rng;

/// Dense layer `x W + b`.
#[derive(Debug, Clone, Copy)]
pub struct Linear {
    pub w: ParamId,
    pub b: Option<ParamId>,
}

impl Linear {
    pub fn new(store: &mut ParamStore, name: &str, fan_in: usize, fan_out: usize, bias: bool, rng: &mut Rng) -> Result<Self> {
        let w = store.add_glorot(&format!("{name}.w"), fan_in, fan_out, 1.0, rng)?;
        let b = if bias {
            Some(store.add_zeros(&format!("{name}.b"), 1, fan_out)?)
        } else {
            None
        };
        Ok(Linear { w, b })
    }

    /// Zero weights and bias, so the layer starts out as the zero map.
    pub fn zeros(store: &mut ParamStore, name: &str, fan_in: usize, fan_out: usize) -> Result<Self> {
        Ok(Linear {
            w: store.add_zeros(&format!("{name}.w"), fan_in, fan_out)?,
            b: Some(store.add_zeros(&format!("{name}.b"), 1, fan_out)?),
        })
    }

    pub fn forward(&self, g: &mut Graph, x: Var) -> Result<Var> {
        let w = g.param(self.w);
        let y = g.matmul(x, w)?;
        match self.b {
            Some(b) => {
                let b = g.param(b);
                g.add_row(y, b)
            }
            None => Ok(y),
        }
    }
}

/// Inverted dropout. `rng = None` is evaluation mode and returns `x`.
pub fn dropout(g: &mut Graph, x: Var, rate: f64, rng: Option<&mut Rng>) -> Result<Var> {
    let Some(rng) = rng else { return Ok(x) };
    if rate <= 0.0 {
        return Ok(x);
    }
    let keep = 1.0 - rate;
    let dim = g.value(x).dim();
    let mask = Array2::from_shape_fn(dim, |_| if rng.random::<f64>() < keep { 1.0 / keep } else { 0.0 });
    let m = g.constant(mask);
    g.mul(x, m)
}

/// Learned vector per permanent tooth, looked up by [`Fdi::ordinal`].
#[derive(Debug, Clone, Copy)]
pub struct FdiEmbedding {
    pub table: ParamId,
    pub dim: usize,
}

impl FdiEmbedding {
    pub fn new(store: &mut ParamStore, name: &str, dim: usize, rng: &mut Rng) -> Result<Self> {
        let table = Array2::from_shape_fn((NUM_TEETH, dim), |_| rng.random_range(-1.0..=1.0));
        Ok(FdiEmbedding {
            table: store.add(name, table)?,
            dim,
        })
    }

    /// One embedding row per entry of `fdis`.
    pub fn lookup(&self, g: &mut Graph, fdis: &[Fdi]) -> Result<Var> {
        let t = g.param(self.table);
        let idx: Vec<usize> = fdis.iter().map(|f| f.ordinal()).collect();
        g.gather_rows(t, &idx)
    }
}

/// Sinusoidal embedding of a timestep: `dim / 2` sines then `dim / 2`
/// cosines at geometrically spaced frequencies.
pub fn timestep_embedding(t: usize, dim: usize) -> Array2<f64> {
    let half = dim / 2;
    let mut e = Array2::zeros((1, dim));
    for k in 0..half {
        let freq = (-(10_000f64).ln() * k as f64 / half as f64).exp();
        let a = t as f64 * freq;
        e[[0, k]] = a.sin();
        e[[0, half + k]] = a.cos();
    }
    e
}
