use ndarray::Array2;

use crate::dentition::Fdi;
use crate::error::{Error, Result};
use crate::nets::layers::{dropout, FdiEmbedding, Linear};
use crate::nets::params::ParamStore;
use crate::nets::tape::{Graph, Var};
use crate::point::Point3;
use crate::rng::Rng;

/// Channels per point: xyz, role indicator, FDI embedding, cylinder.
pub const FDI_EMBED_DIM: usize = 8;
pub const INPUT_CHANNELS: usize = 3 + 1 + FDI_EMBED_DIM + 5;

/// One tooth as seen by an encoder, already in the coordinates and scale
/// the network consumes.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderTooth {
    pub fdi: Fdi,
    pub role: f64,
    pub points: Vec<Point3<f64>>,
    pub cylinder: [f64; 5],
}

/// Shared per-point MLP followed by a per-tooth max-pool.
#[derive(Debug, Clone)]
pub struct PointEncoder {
    pub embed: FdiEmbedding,
    pub l1: Linear,
    pub l2: Linear,
    pub dropout: f64,
}

pub struct Encoded {
    /// Hidden per-point features (`N x hidden`), rows in tooth order.
    pub points: Var,
    /// Pooled per-tooth latents (`K x C`).
    pub latent: Var,
    /// First row of each tooth in `points`.
    pub offsets: Vec<usize>,
}

impl PointEncoder {
    pub fn new(store: &mut ParamStore, name: &str, hidden: usize, channels: usize, dropout: f64, rng: &mut Rng) -> Result<Self> {
        Ok(PointEncoder {
            embed: FdiEmbedding::new(store, &format!("{name}.fdi"), FDI_EMBED_DIM, rng)?,
            l1: Linear::new(store, &format!("{name}.l1"), INPUT_CHANNELS, hidden, true, rng)?,
            l2: Linear::new(store, &format!("{name}.l2"), hidden, channels, true, rng)?,
            dropout,
        })
    }

    pub fn forward(&self, g: &mut Graph, teeth: &[EncoderTooth], rng: Option<&mut Rng>) -> Result<Encoded> {
        if teeth.is_empty() {
            return Err(Error::Empty("encoder input"));
        }
        let n: usize = teeth.iter().map(|t| t.points.len()).sum();
        let mut head = Array2::zeros((n, 4));
        let mut cyl = Array2::zeros((n, 5));
        let mut fdis = Vec::with_capacity(n);
        let mut offsets = Vec::with_capacity(teeth.len());
        let mut lengths = Vec::with_capacity(teeth.len());
        let mut row = 0;
        for t in teeth {
            if t.points.is_empty() {
                return Err(Error::Empty("tooth point cloud"));
            }
            offsets.push(row);
            lengths.push(t.points.len());
            for p in &t.points {
                head[[row, 0]] = p[0];
                head[[row, 1]] = p[1];
                head[[row, 2]] = p[2];
                head[[row, 3]] = t.role;
                for (c, v) in t.cylinder.iter().enumerate() {
                    cyl[[row, c]] = *v;
                }
                fdis.push(t.fdi);
                row += 1;
            }
        }
        if head.iter().chain(cyl.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("encoder input"));
        }
        let head = g.constant(head);
        let cyl = g.constant(cyl);
        let emb = self.embed.lookup(g, &fdis)?;
        let x = g.concat_cols(&[head, emb, cyl])?;
        let h1 = self.l1.forward(g, x)?;
        let h1 = g.relu(h1);
        let h1 = dropout(g, h1, self.dropout, rng)?;
        let h2 = self.l2.forward(g, h1)?;
        let h2 = g.relu(h2);
        let latent = g.segment_max(h2, &lengths)?;
        Ok(Encoded {
            points: h1,
            latent,
            offsets,
        })
    }
}
