//! Reference networks with exact reverse-mode gradients: a per-point set
//! encoder, the noise-prediction denoiser and the boundary regressor.

pub mod denoiser;
pub mod encoder;
pub mod layers;
pub mod optim;
pub mod params;
pub mod regressor;
pub mod tape;
pub mod train;

pub use denoiser::{ConditionedDenoiser, DenoiseTooth, Denoiser, DenoiserConfig, DenoiserNet, CYLINDER_SCALE};
pub use encoder::{EncoderTooth, PointEncoder, FDI_EMBED_DIM, INPUT_CHANNELS};
pub use layers::{dropout, timestep_embedding, FdiEmbedding, Linear};
pub use optim::{Adam, AdamConfig, LrSchedule};
pub use params::{load_into, read_checkpoint, write_checkpoint, ParamId, ParamStore};
pub use regressor::{BoundaryInput, BoundaryRegressor, RegressorConfig, RegressorNet};
pub use tape::{Grads, Graph, Var};
pub use train::{
    boundary_example, boundary_loss, denoiser_example, denoiser_loss, run_training, train_denoiser, train_regressor,
    BoundaryExample, DenoiserExample, LossTrace, TrainConfig,
};
