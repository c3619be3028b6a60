//! Friend-or-foe biased multi-agent DDPG on a 2-D particle world.
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix the precision used by the command-line harness.

pub mod env;
pub mod harness;
pub mod marl;
pub mod metrics;
pub mod nn;
pub mod replay;
mod scalar;

pub use scalar::Scalar;

/// Default precision.
pub type Real = f64;
pub type Mlp64 = nn::Mlp<f64>;
pub type Mlp32 = nn::Mlp<f32>;
pub type Env64 = env::Env<f64>;
pub type Trainer64 = marl::Trainer<f64>;
pub type Trainer32 = marl::Trainer<f32>;
