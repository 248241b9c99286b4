//! Denoising diffusion on per-tooth point clouds.

pub mod frame;
pub mod process;
pub mod sampler;
pub mod schedule;

pub use frame::{cyl_denormalize, cyl_normalize};
pub use process::{
    eps_from_x0, forward_closed, forward_step, gaussian_kl, mu_theta, posterior_mean, posterior_mean_coefs,
    prior_kl, simple_loss, simple_loss_grad, vlb_term, vlb_weight,
};
pub use sampler::{reverse_sample, reverse_sample_local, standard_normal_points, NoisePredictor, OracleDenoiser};
pub use schedule::{DiffusionSchedule, ScheduleConfig};
