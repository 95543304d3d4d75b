//! Benchmark suite comparing mean-squared-error and Cauchy-loss training of
//! small feed-forward regressors on data corrupted with Gaussian noise, Cauchy
//! noise, or uniform outliers.
//!
//! The numerical core ([`losses`], [`nn`], [`datagen`]) is generic over the
//! floating-point scalar through [`num_traits::Float`]; the experiment harness
//! and the statistics run in `f64`. Concrete aliases for both precisions are
//! exported at the crate root.

pub mod datagen;
pub mod error;
pub mod harness;
pub mod ingest;
pub mod losses;
pub mod nn;
pub mod report;
pub mod seed;
pub mod stats;

pub use error::{Error, Result};

pub use datagen::{Dataset, Matrix, Noise, Provenance};
pub use harness::{DatasetSource, ExperimentConfig, ExperimentResults, ScoreTable};
pub use losses::{LossKind, LossSpec, Residual};
pub use nn::{AdamState, NetworkConfig, Parameters, TrainConfig, TrainedModel};
pub use stats::{Alternative, TestMethod, TestResult};

/// Double-precision dataset, the harness default.
pub type Dataset64 = Dataset<f64>;
/// Single-precision dataset.
pub type Dataset32 = Dataset<f32>;
pub type LossSpec64 = LossSpec<f64>;
pub type LossSpec32 = LossSpec<f32>;
pub type Parameters64 = Parameters<f64>;
pub type Parameters32 = Parameters<f32>;
pub type AdamState64 = AdamState<f64>;
pub type AdamState32 = AdamState<f32>;
pub type TrainedModel64 = TrainedModel<f64>;
pub type TrainedModel32 = TrainedModel<f32>;
