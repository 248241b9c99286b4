//! Attention between per-tooth latents with relative positional biases
//! indexed by the zig-zag tooth order.

pub mod layer;
pub mod rpe;

pub use layer::{AttentionMaps, DitaConfig, DitaLayer};
pub use rpe::rpe_feature;
