//! File formats, the experiment harness, and verification batteries for
//! two-temperature logistic regression. The numerics live in [`ttlr_core`].

pub mod experiment;
pub mod libsvm;
pub mod model_io;
pub mod report;
pub mod verify;

pub use ttlr_core;
