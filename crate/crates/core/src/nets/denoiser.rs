use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::boundary::CylBound;
use crate::dentition::{Fdi, Role};
use crate::diffusion::NoisePredictor;
use crate::dita::{DitaConfig, DitaLayer};
use crate::error::{Error, Result};
use crate::nets::encoder::{EncoderTooth, PointEncoder};
use crate::nets::layers::{timestep_embedding, Linear};
use crate::nets::params::ParamStore;
use crate::nets::tape::{Graph, Var};
use crate::point::Point3;
use crate::rng::{self, Rng};

/// Cylinder parameters enter the network divided by this (mm).
pub const CYLINDER_SCALE: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DenoiserConfig {
    pub enc_hidden: usize,
    pub channels: usize,
    pub heads: usize,
    pub layers: usize,
    pub rpe_hidden: usize,
    pub time_dim: usize,
    pub dec_hidden: usize,
    pub dropout: f64,
}

impl Default for DenoiserConfig {
    fn default() -> Self {
        DenoiserConfig {
            enc_hidden: 64,
            channels: 128,
            heads: 4,
            layers: 2,
            rpe_hidden: 16,
            time_dim: 32,
            dec_hidden: 128,
            dropout: 0.1,
        }
    }
}

impl DenoiserConfig {
    /// A reduced network for quick CPU runs.
    pub fn small() -> Self {
        DenoiserConfig {
            enc_hidden: 32,
            channels: 64,
            heads: 2,
            layers: 2,
            rpe_hidden: 16,
            time_dim: 32,
            dec_hidden: 64,
            dropout: 0.1,
        }
    }
}

/// One tooth of a denoiser input. Points are in the tooth's own
/// cylinder-local frame: clean for context teeth, noisy for targets.
#[derive(Debug, Clone, PartialEq)]
pub struct DenoiseTooth {
    pub fdi: Fdi,
    pub role: Role,
    pub points: Vec<Point3<f64>>,
    pub bound: CylBound<f64>,
}

#[derive(Debug, Clone)]
pub struct DenoiserNet {
    pub cfg: DenoiserConfig,
    pub encoder: PointEncoder,
    pub time: Linear,
    pub dita: Vec<DitaLayer>,
    pub dec1: Linear,
    pub dec2: Linear,
    pub dec3: Linear,
}

impl DenoiserNet {
    pub fn new(store: &mut ParamStore, cfg: DenoiserConfig, rng: &mut Rng) -> Result<Self> {
        let dita_cfg = DitaConfig {
            channels: cfg.channels,
            heads: cfg.heads,
            rpe_hidden: cfg.rpe_hidden,
        };
        dita_cfg.validate()?;
        let encoder = PointEncoder::new(store, "enc", cfg.enc_hidden, cfg.channels, cfg.dropout, rng)?;
        let time = Linear::new(store, "time", cfg.time_dim, cfg.channels, true, rng)?;
        let dita = (0..cfg.layers)
            .map(|l| DitaLayer::new(store, &format!("dita{l}"), dita_cfg, rng))
            .collect::<Result<_>>()?;
        let dec_in = 3 + cfg.enc_hidden + cfg.channels + cfg.time_dim;
        let dec1 = Linear::new(store, "dec1", dec_in, cfg.dec_hidden, true, rng)?;
        let dec2 = Linear::new(store, "dec2", cfg.dec_hidden, cfg.dec_hidden, true, rng)?;
        let dec3 = Linear::zeros(store, "dec3", cfg.dec_hidden, 3)?;
        Ok(DenoiserNet {
            cfg,
            encoder,
            time,
            dita,
            dec1,
            dec2,
            dec3,
        })
    }

    /// Predicted noise for every target point, targets in input order.
    /// `rng = Some` enables dropout.
    pub fn forward(&self, g: &mut Graph, teeth: &[DenoiseTooth], t: usize, mut rng: Option<&mut Rng>) -> Result<Var> {
        if t == 0 {
            return Err(Error::InvalidInput("timestep must be at least 1".into()));
        }
        let enc_in: Vec<EncoderTooth> = teeth
            .iter()
            .map(|d| EncoderTooth {
                fdi: d.fdi,
                role: d.role.indicator(),
                points: d.points.clone(),
                cylinder: d.bound.to_array().map(|v| v / CYLINDER_SCALE),
            })
            .collect();
        let enc = self.encoder.forward(g, &enc_in, rng.as_deref_mut())?;
        let temb_row = timestep_embedding(t, self.cfg.time_dim);
        let temb = g.constant(temb_row.clone());
        let tproj = self.time.forward(g, temb)?;
        let mut z = g.add_row(enc.latent, tproj)?;
        let indices: Vec<usize> = teeth.iter().map(|d| d.fdi.zigzag_index()).collect();
        let keys = vec![true; teeth.len()];
        for layer in &self.dita {
            z = layer.forward(g, z, &indices, &keys)?.0;
        }
        let mut rows = Vec::new();
        let mut owner = Vec::new();
        for (k, d) in teeth.iter().enumerate() {
            if d.role == Role::Target {
                rows.extend(enc.offsets[k]..enc.offsets[k] + d.points.len());
                owner.extend(std::iter::repeat_n(k, d.points.len()));
            }
        }
        if rows.is_empty() {
            return Err(Error::Empty("denoiser targets"));
        }
        let xyz: Array2<f64> = Array2::from_shape_fn((rows.len(), 3), |(i, c)| {
            let (k, r) = (owner[i], rows[i] - enc.offsets[owner[i]]);
            teeth[k].points[r][c]
        });
        let xyz = g.constant(xyz);
        let feat = g.gather_rows(enc.points, &rows)?;
        let lat = g.gather_rows(z, &owner)?;
        let tcol = g.constant(temb_row.broadcast((rows.len(), self.cfg.time_dim)).unwrap().to_owned());
        let x = g.concat_cols(&[xyz, feat, lat, tcol])?;
        let h = self.dec1.forward(g, x)?;
        let h = g.relu(h);
        let h = self.dec2.forward(g, h)?;
        let h = g.relu(h);
        self.dec3.forward(g, h)
    }
}

/// Network structure plus its parameters.
#[derive(Debug, Clone)]
pub struct Denoiser {
    pub net: DenoiserNet,
    pub store: ParamStore,
}

impl Denoiser {
    pub fn new(cfg: DenoiserConfig, seed: u64) -> Result<Self> {
        let mut store = ParamStore::new();
        let mut r = rng::stream(seed, &[0x64656e6f]);
        let net = DenoiserNet::new(&mut store, cfg, &mut r)?;
        Ok(Denoiser { net, store })
    }

    /// Evaluation-mode prediction, one noise cloud per target tooth.
    pub fn denoise(&self, teeth: &[DenoiseTooth], t: usize) -> Result<Vec<Vec<Point3<f64>>>> {
        let mut g = Graph::new(&self.store);
        let out = self.net.forward(&mut g, teeth, t, None)?;
        let v = g.value(out);
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("denoiser output"));
        }
        let mut clouds = Vec::new();
        let mut row = 0;
        for d in teeth.iter().filter(|d| d.role == Role::Target) {
            clouds.push((row..row + d.points.len()).map(|r| [v[[r, 0]], v[[r, 1]], v[[r, 2]]]).collect());
            row += d.points.len();
        }
        Ok(clouds)
    }
}

/// Adapts a denoiser plus fixed context teeth and target bounds to the
/// sampler interface.
pub struct ConditionedDenoiser<'a> {
    pub model: &'a Denoiser,
    pub context: Vec<DenoiseTooth>,
    pub targets: Vec<(Fdi, CylBound<f64>)>,
    pub steps: usize,
}

impl NoisePredictor<f64> for ConditionedDenoiser<'_> {
    fn predict(&self, x_t: &[Vec<Point3<f64>>], t: usize) -> Result<Vec<Vec<Point3<f64>>>> {
        if t == 0 || t > self.steps {
            return Err(Error::InvalidInput(format!("timestep {t} outside 1..={}", self.steps)));
        }
        if x_t.len() != self.targets.len() {
            return Err(Error::Shape(format!("{} noisy clouds for {} targets", x_t.len(), self.targets.len())));
        }
        let mut teeth = self.context.clone();
        for ((fdi, b), pts) in self.targets.iter().zip(x_t) {
            teeth.push(DenoiseTooth {
                fdi: *fdi,
                role: Role::Target,
                points: pts.clone(),
                bound: *b,
            });
        }
        self.model.denoise(&teeth, t)
    }
}
