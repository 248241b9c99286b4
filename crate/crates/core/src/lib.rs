//! Tooth-level point-cloud generation by denoising diffusion, conditioned on
//! cylindrical bounds and inter-tooth attention, with the evaluation metrics
//! and reader-study statistics used to assess it.
//!
//! Geometry, metrics and the diffusion process are generic over [`Real`]
//! (`f32` or `f64`); the networks and the statistics run in double precision.

pub mod boundary;
pub mod dentition;
pub mod diffusion;
pub mod dita;
pub mod error;
pub mod metrics;
pub mod nets;
pub mod pipeline;
pub mod point;
pub mod rng;
pub mod scalar;
pub mod stats;

pub use error::{Error, Result};
pub use scalar::Real;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub type Tooth64 = dentition::Tooth<f64>;
pub type Tooth32 = dentition::Tooth<f32>;
pub type Dentition64 = dentition::Dentition<f64>;
pub type Dentition32 = dentition::Dentition<f32>;
pub type CylBound64 = boundary::CylBound<f64>;
pub type CylBound32 = boundary::CylBound<f32>;
pub type Schedule64 = diffusion::DiffusionSchedule<f64>;
pub type Schedule32 = diffusion::DiffusionSchedule<f32>;
