//! Minimal dense network engine: forward, exact reverse-mode gradients for
//! parameters and inputs, Adam, Xavier init and soft target updates.

mod adam;
mod gradcheck;
mod mlp;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use gradcheck::{check_gradients, kink_margin, relative_error, GradCheck};
pub use mlp::{BackwardScratch, Dense, ForwardTrace, GradientBundle, LayerGrad, Mlp, ParamGrads};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NnError {
    #[error("network configuration: {0}")]
    Config(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("non-finite value in layer {layer}")]
    NonFinite { layer: usize },
}
