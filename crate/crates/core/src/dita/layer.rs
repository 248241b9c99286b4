use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::dentition::NUM_TEETH;
use crate::dita::rpe::rpe_feature;
use crate::error::{Error, Result};
use crate::nets::layers::Linear;
use crate::nets::params::ParamStore;
use crate::nets::tape::{Graph, Var};
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DitaConfig {
    pub channels: usize,
    pub heads: usize,
    pub rpe_hidden: usize,
}

impl DitaConfig {
    pub fn head_dim(&self) -> usize {
        self.channels / self.heads
    }

    pub fn validate(&self) -> Result<()> {
        if self.heads == 0 || self.channels == 0 || self.channels % self.heads != 0 {
            return Err(Error::InvalidInput(format!(
                "{} channels do not split into {} heads",
                self.channels, self.heads
            )));
        }
        Ok(())
    }
}

/// Multi-head attention across teeth with learned biases driven by the
/// zig-zag index difference.
#[derive(Debug, Clone)]
pub struct DitaLayer {
    pub cfg: DitaConfig,
    pub q: Linear,
    pub k: Linear,
    pub v: Linear,
    pub rpe_hidden: Linear,
    /// Emits `[p_Q | p_K | p_V]`, each `heads * head_dim` wide.
    pub rpe_out: Linear,
    pub out: Linear,
}

/// Attention weights of one call, one `K x K` matrix per head, rows and
/// columns in input order.
pub type AttentionMaps = Vec<Array2<f64>>;

impl DitaLayer {
    pub fn new(store: &mut ParamStore, name: &str, cfg: DitaConfig, rng: &mut Rng) -> Result<Self> {
        cfg.validate()?;
        let c = cfg.channels;
        Ok(DitaLayer {
            cfg,
            q: Linear::new(store, &format!("{name}.q"), c, c, false, rng)?,
            k: Linear::new(store, &format!("{name}.k"), c, c, false, rng)?,
            v: Linear::new(store, &format!("{name}.v"), c, c, false, rng)?,
            rpe_hidden: Linear::new(store, &format!("{name}.rpe0"), 3, cfg.rpe_hidden, true, rng)?,
            rpe_out: Linear::new(store, &format!("{name}.rpe1"), cfg.rpe_hidden, 3 * c, true, rng)?,
            out: Linear::new(store, &format!("{name}.out"), c, c, true, rng)?,
        })
    }

    /// `z` is `K x C`; `indices` are zig-zag positions and `keys[j]` says
    /// whether row `j` may be attended to. Every row is a query.
    ///
    /// Rows are processed in ascending index order internally, so permuting
    /// the inputs permutes the outputs bit for bit.
    pub fn forward(&self, g: &mut Graph, z: Var, indices: &[usize], keys: &[bool]) -> Result<(Var, AttentionMaps)> {
        let (kn, c) = g.value(z).dim();
        if c != self.cfg.channels {
            return Err(Error::Shape(format!("dita input has {c} channels, layer expects {}", self.cfg.channels)));
        }
        if indices.len() != kn || keys.len() != kn {
            return Err(Error::Shape(format!("{kn} rows, {} indices, {} mask entries", indices.len(), keys.len())));
        }
        if kn == 0 || kn > NUM_TEETH {
            return Err(Error::InvalidInput(format!("dita needs 1..={NUM_TEETH} rows, got {kn}")));
        }
        if !keys.iter().any(|&m| m) {
            return Err(Error::InvalidInput("every attention column is masked".into()));
        }
        if g.value(z).iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("dita input"));
        }
        let mut order: Vec<usize> = (0..kn).collect();
        order.sort_by_key(|&i| indices[i]);
        if order.windows(2).any(|w| indices[w[0]] == indices[w[1]]) {
            return Err(Error::InvalidInput("duplicate zig-zag index".into()));
        }
        let mut inverse = vec![0; kn];
        for (pos, &i) in order.iter().enumerate() {
            inverse[i] = pos;
        }
        let idx: Vec<usize> = order.iter().map(|&i| indices[i]).collect();
        let mask: Vec<bool> = order.iter().map(|&i| keys[i]).collect();

        let zs = g.gather_rows(z, &order)?;
        let mut r = Array2::zeros((kn * kn, 3));
        for i in 0..kn {
            for j in 0..kn {
                let f = rpe_feature(idx[i], idx[j])?;
                for (col, v) in f.into_iter().enumerate() {
                    r[[i * kn + j, col]] = v;
                }
            }
        }
        let r = g.constant(r);
        let hdn = self.rpe_hidden.forward(g, r)?;
        let hdn = g.tanh(hdn);
        let p = self.rpe_out.forward(g, hdn)?;

        let q = self.q.forward(g, zs)?;
        let k = self.k.forward(g, zs)?;
        let v = self.v.forward(g, zs)?;
        let f = self.cfg.head_dim();
        let inv_sqrt = 1.0 / (f as f64).sqrt();
        let mut heads = Vec::with_capacity(self.cfg.heads);
        let mut maps = Vec::with_capacity(self.cfg.heads);
        for h in 0..self.cfg.heads {
            let cols = h * f..(h + 1) * f;
            let qh = g.slice_cols(q, cols.start, cols.end)?;
            let kh = g.slice_cols(k, cols.start, cols.end)?;
            let vh = g.slice_cols(v, cols.start, cols.end)?;
            let pq = g.slice_cols(p, cols.start, cols.end)?;
            let pk = g.slice_cols(p, c + cols.start, c + cols.end)?;
            let pv = g.slice_cols(p, 2 * c + cols.start, 2 * c + cols.end)?;
            let qk = g.matmul_t(qh, kh)?;
            let qk = g.scale(qk, inv_sqrt);
            let qp = g.pair_dot_left(qh, pk)?;
            let pk2 = g.pair_dot_right(kh, pq)?;
            let e = g.add(qk, qp)?;
            let e = g.add(e, pk2)?;
            let a = g.masked_softmax(e, &mask)?;
            let av = g.matmul(a, vh)?;
            let ap = g.pair_weighted(a, pv)?;
            heads.push(g.add(av, ap)?);
            let sorted = g.value(a);
            maps.push(Array2::from_shape_fn((kn, kn), |(i, j)| sorted[[inverse[i], inverse[j]]]));
        }
        let cat = g.concat_cols(&heads)?;
        let proj = self.out.forward(g, cat)?;
        let res = g.add(zs, proj)?;
        let out = g.gather_rows(res, &inverse)?;
        Ok((out, maps))
    }
}
