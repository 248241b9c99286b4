//! Training-time augmentations: point shuffling, bilateral mirroring and
//! isotropic scaling.

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::dentition::tooth::{Dentition, Tooth};
use crate::error::{Error, Result};
use crate::rng;
use crate::scalar::Real;

/// Negates x and swaps left/right FDI codes.
pub fn mirror_dentition<T: Real>(dentition: &Dentition<T>) -> Dentition<T> {
    let flip = |p: &[T; 3]| [-p[0], p[1], p[2]];
    dentition.map_teeth(|t| {
        let mut m = t.map(flip, flip);
        m.fdi = t.fdi.mirrored();
        m
    })
}

/// Multiplies every coordinate by `s` about the origin; normals unchanged.
pub fn scale_dentition<T: Real>(dentition: &Dentition<T>, s: T) -> Result<Dentition<T>> {
    if !(s > T::zero()) || !s.is_finite() {
        return Err(Error::InvalidInput(format!("scale factor must be positive, got {s}")));
    }
    Ok(dentition.map_teeth(|t| t.map(|p| p.map(|v| v * s), |n| *n)))
}

/// Random row permutation of a tooth's points (normals follow).
pub fn shuffle_points<T: Real>(tooth: &Tooth<T>, seed: u64) -> Tooth<T> {
    let mut perm: Vec<usize> = (0..tooth.len()).collect();
    perm.shuffle(&mut rng::seeded(seed));
    tooth.permuted(&perm)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentConfig {
    pub shuffle: bool,
    pub mirror_probability: f64,
    pub scale_min: f64,
    pub scale_max: f64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        AugmentConfig {
            shuffle: true,
            mirror_probability: 0.5,
            scale_min: 0.95,
            scale_max: 1.05,
        }
    }
}

impl AugmentConfig {
    pub fn none() -> Self {
        AugmentConfig {
            shuffle: false,
            mirror_probability: 0.0,
            scale_min: 1.0,
            scale_max: 1.0,
        }
    }
}

/// Applies the configured augmentations with a seed-determined draw.
pub fn augment<T: Real>(
    dentition: &Dentition<T>,
    config: &AugmentConfig,
    seed: u64,
) -> Result<Dentition<T>> {
    let mut r = rng::stream(seed, &[0xA06]);
    let mut d = dentition.clone();
    if config.mirror_probability > 0.0 && r.random::<f64>() < config.mirror_probability {
        d = mirror_dentition(&d);
    }
    if config.scale_max > config.scale_min {
        let s = r.random_range(config.scale_min..=config.scale_max);
        d = scale_dentition(&d, T::lit(s))?;
    } else if config.scale_min != 1.0 {
        d = scale_dentition(&d, T::lit(config.scale_min))?;
    }
    if config.shuffle {
        d = d.map_teeth(|t| shuffle_points(t, rng::derive_seed(seed, &[t.fdi.code() as u64])));
    }
    Ok(d)
}
