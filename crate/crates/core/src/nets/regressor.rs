use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::boundary::{fit_bound, CylBound};
use crate::dentition::{Dentition, Fdi};
use crate::dita::{DitaConfig, DitaLayer};
use crate::error::{Error, Result};
use crate::nets::denoiser::CYLINDER_SCALE;
use crate::nets::encoder::{EncoderTooth, PointEncoder};
use crate::nets::layers::{dropout, Linear};
use crate::nets::params::ParamStore;
use crate::nets::tape::{Graph, Var};
use crate::point::Point3;
use crate::rng::{self, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegressorConfig {
    pub enc_hidden: usize,
    pub channels: usize,
    pub heads: usize,
    pub layers: usize,
    pub rpe_hidden: usize,
    pub head_hidden: usize,
    pub dropout: f64,
    /// Multiplies world coordinates (mm) before they enter the network.
    pub coord_scale: f64,
}

impl Default for RegressorConfig {
    fn default() -> Self {
        RegressorConfig {
            enc_hidden: 64,
            channels: 128,
            heads: 4,
            layers: 2,
            rpe_hidden: 16,
            head_hidden: 64,
            dropout: 0.3,
            coord_scale: 0.1,
        }
    }
}

impl RegressorConfig {
    pub fn small() -> Self {
        RegressorConfig {
            enc_hidden: 32,
            channels: 64,
            heads: 2,
            head_hidden: 64,
            ..Self::default()
        }
    }
}

/// Context teeth with their fitted bounds, plus the teeth whose bounds are
/// wanted. Target rows carry only their role and FDI code.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryInput {
    pub context: Vec<(Fdi, Vec<Point3<f64>>, CylBound<f64>)>,
    pub targets: Vec<Fdi>,
}

impl BoundaryInput {
    /// Builds the input from a dentition; any points stored for a target
    /// tooth are ignored.
    pub fn from_dentition(d: &Dentition<f64>, targets: &BTreeSet<Fdi>) -> Result<Self> {
        let mut context = Vec::new();
        for t in d.teeth().filter(|t| !targets.contains(&t.fdi)) {
            context.push((t.fdi, t.points().to_vec(), fit_bound(t)?));
        }
        if context.is_empty() {
            return Err(Error::Empty("boundary context"));
        }
        Ok(BoundaryInput {
            context,
            targets: targets.iter().copied().collect(),
        })
    }
}

#[derive(Debug, Clone)]
pub struct RegressorNet {
    pub cfg: RegressorConfig,
    pub encoder: PointEncoder,
    pub dita: Vec<DitaLayer>,
    pub head1: Linear,
    pub head2: Linear,
}

impl RegressorNet {
    pub fn new(store: &mut ParamStore, cfg: RegressorConfig, rng: &mut Rng) -> Result<Self> {
        let dita_cfg = DitaConfig {
            channels: cfg.channels,
            heads: cfg.heads,
            rpe_hidden: cfg.rpe_hidden,
        };
        dita_cfg.validate()?;
        // Dropout acts on the head only; per-point dropout ahead of the
        // max-pool biases the pooled features between training and inference.
        let encoder = PointEncoder::new(store, "enc", cfg.enc_hidden, cfg.channels, 0.0, rng)?;
        let dita = (0..cfg.layers)
            .map(|l| DitaLayer::new(store, &format!("dita{l}"), dita_cfg, rng))
            .collect::<Result<_>>()?;
        Ok(RegressorNet {
            cfg,
            encoder,
            dita,
            head1: Linear::new(store, "head1", cfg.channels, cfg.head_hidden, true, rng)?,
            head2: Linear::new(store, "head2", cfg.head_hidden, 5, true, rng)?,
        })
    }

    /// `|targets| x 5` cylinder parameters in mm.
    pub fn forward(&self, g: &mut Graph, input: &BoundaryInput, mut rng: Option<&mut Rng>) -> Result<Var> {
        if input.context.is_empty() {
            return Err(Error::Empty("boundary context"));
        }
        if input.targets.is_empty() {
            return Err(Error::Empty("boundary targets"));
        }
        let s = self.cfg.coord_scale;
        let rows = input.context.iter().map(|c| c.1.len()).max().unwrap_or(1).max(1);
        let mut teeth: Vec<EncoderTooth> = input
            .context
            .iter()
            .map(|(fdi, pts, b)| EncoderTooth {
                fdi: *fdi,
                role: 0.0,
                points: pts.iter().map(|p| p.map(|v| v * s)).collect(),
                cylinder: b.to_array().map(|v| v / CYLINDER_SCALE),
            })
            .collect();
        for &fdi in &input.targets {
            teeth.push(EncoderTooth {
                fdi,
                role: 1.0,
                points: vec![[0.0; 3]; rows],
                cylinder: [0.0; 5],
            });
        }
        let enc = self.encoder.forward(g, &teeth, rng.as_deref_mut())?;
        let indices: Vec<usize> = teeth.iter().map(|t| t.fdi.zigzag_index()).collect();
        let keys: Vec<bool> = (0..teeth.len()).map(|i| i < input.context.len()).collect();
        let mut z = enc.latent;
        for layer in &self.dita {
            z = layer.forward(g, z, &indices, &keys)?.0;
        }
        let targets: Vec<usize> = (input.context.len()..teeth.len()).collect();
        let zt = g.gather_rows(z, &targets)?;
        let h = self.head1.forward(g, zt)?;
        let h = g.relu(h);
        let h = dropout(g, h, self.cfg.dropout, rng)?;
        let out = self.head2.forward(g, h)?;
        Ok(g.scale(out, CYLINDER_SCALE))
    }
}

#[derive(Debug, Clone)]
pub struct BoundaryRegressor {
    pub net: RegressorNet,
    pub store: ParamStore,
}

impl BoundaryRegressor {
    pub fn new(cfg: RegressorConfig, seed: u64) -> Result<Self> {
        let mut store = ParamStore::new();
        let mut r = rng::stream(seed, &[0x626f756e]);
        let net = RegressorNet::new(&mut store, cfg, &mut r)?;
        Ok(BoundaryRegressor { net, store })
    }

    /// Raw evaluation-mode output, one 5-vector per target.
    pub fn predict(&self, input: &BoundaryInput) -> Result<Vec<[f64; 5]>> {
        let mut g = Graph::new(&self.store);
        let out = self.net.forward(&mut g, input, None)?;
        let v = g.value(out);
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("regressor output"));
        }
        Ok(v.outer_iter().map(|r| [r[0], r[1], r[2], r[3], r[4]]).collect())
    }

    /// Bounds for `targets`, with radius and height lifted to the floor.
    pub fn predict_bounds(&self, d: &Dentition<f64>, targets: &BTreeSet<Fdi>) -> Result<Vec<(Fdi, CylBound<f64>)>> {
        let input = BoundaryInput::from_dentition(d, targets)?;
        let raw = self.predict(&input)?;
        input
            .targets
            .iter()
            .zip(raw)
            .map(|(&f, p)| Ok((f, CylBound::from_prediction(p)?)))
            .collect()
    }
}
