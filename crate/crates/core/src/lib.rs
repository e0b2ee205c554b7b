//! Spiking neural networks with a learned input gate.
//!
//! A controller neuron reads the first hidden layer and a bank of periodic
//! pulses and decides, step by step, whether the next input column is
//! admitted. Training runs in two stages (network first, controller second)
//! with surrogate-gradient BPTT; an event-driven ledger counts the multiply
//! and add operations each forward pass actually performs.
//!
//! Everything numeric is generic over [`Scalar`] (f32 or f64); the aliases
//! below fix the precision used by the command-line tools.

pub mod baselines;
pub mod dynamics;
pub mod error;
pub mod experiment;
pub mod matrix;
pub mod metrics;
pub mod scalar;
pub mod spiketrain;
pub mod training;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Params = dynamics::ModelParams<f64>;
pub type ParamsF32 = dynamics::ModelParams<f32>;
pub type Trace = dynamics::ForwardTrace<f64>;
pub type TraceF32 = dynamics::ForwardTrace<f32>;
pub type Gradients = training::GradientSet<f64>;
pub type Lif = dynamics::LifConfig<f64>;
