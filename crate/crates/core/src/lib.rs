//! Fuses static assembly structure with dynamic register and memory
//! snapshots into typed graphs, and learns branch outcomes and next load
//! addresses over them with a gated graph neural network.

pub mod asm;
pub mod baselines;
pub mod encode;
pub mod eval;
pub mod ggnn;
pub mod graph;
mod scalar;
pub mod tracer;

pub use scalar::Scalar;

/// Default floating-point type for models.
pub type Real = f64;
pub type GgnnParamsF32 = ggnn::GgnnParams<f32>;
pub type GgnnParamsF64 = ggnn::GgnnParams<f64>;
