//! Two-temperature logistic regression.
//!
//! A multiclass linear classifier trained with the surrogate loss
//! `-log_t1 exp_t2(a_c - G_t2(a))`, where `a = W^T x`. With `t1 < 1` the loss of any
//! single example is capped; with `t2 > 1` the predictive distribution is heavy-tailed.
//! `t1 = t2 = 1` is ordinary logistic regression and `t1 = 1` is t-logistic regression.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, the experiment harness,
//! and the command-line tool live in the companion `ttlr` crate.
#![no_std]

extern crate alloc;

pub mod analysis;
pub mod dataset;
pub mod error;
pub mod loss;
pub mod model;
pub mod noise;
pub mod optim;
pub mod partition;
pub mod tempered;

pub use dataset::{Dataset, Example, SparseVector, WeightMatrix};
pub use error::{Error, Result};
pub use loss::{
    binary_grad, binary_loss, regularized_objective, surrogate_grad, surrogate_loss, Objective, Sign,
    TemperaturePair,
};
pub use model::{fit, make_baseline, FitConfig, Method, Trainer, TtlrModel};
pub use optim::{lbfgs_minimize, OptimizationTrace, OptimizerConfig, Termination};
pub use partition::{escort, log_partition, partition_d1, partition_d2, tempered_probs, PartitionResult};
pub use tempered::{exp_t, log_t, tsallis_divergence, tsallis_entropy, Temperature};
