//! Resource-constrained model updates under concept drift.
//!
//! A drift-plus-penalty policy decides at every step whether to spend
//! resources on retraining a model whose data distribution is moving,
//! keeping the time-averaged cost under a budget through a virtual queue.
//! The crate contains the drifting data environment, the learner, the
//! policy and its baselines, numerical checks of the convergence and
//! stability bounds, and an experiment harness.
//!
//! Core numerics are generic over the scalar type ([`Scalar`], implemented
//! for `f32` and `f64`); the harness works in [`Real`].

// `!(x > 0)` is used on purpose throughout: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod config;
pub mod drift_env;
pub mod error;
pub mod export;
pub mod harness;
pub mod learner;
pub mod policies;
pub mod scalar;
pub mod trace;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Scalar type of the experiment harness.
pub type Real = f64;

pub type ModelParams64 = learner::ModelParams<f64>;
pub type ModelParams32 = learner::ModelParams<f32>;
pub type LossSpec64 = learner::LossSpec<f64>;
pub type DomainSpec64 = drift_env::DomainSpec<f64>;
pub type DatasetState64 = drift_env::DatasetState<f64>;
pub type VirtualQueue64 = policies::VirtualQueue<f64>;
pub type Policy64 = policies::Policy<f64>;
pub type PolicyConfig64 = policies::PolicyConfig<f64>;
pub type TheoremConstants64 = analysis::TheoremConstants<f64>;
