//! Feature selection for positive-unlabeled (PU) data under a cluster assumption.
//!
//! The pipeline is: mask columns, cluster the masked rows, and score the mask by
//! the best recall x precision achievable by declaring a subset of clusters
//! "labeled". Masks are searched with a compact-GA style optimizer over
//! independent Bernoulli parameters, with a repair step that keeps every
//! candidate inside a per-feature cost budget.
//!
//! Modules:
//! - [`dataset`]: PU datasets, CSV I/O, min-max scaling and synthetic generators.
//! - [`clustering`]: diagonal GMM (default) and k-means backends.
//! - [`objective`]: the cluster-subset objective, its exhaustive oracle, and the MI variant.
//! - [`optimizer`]: Bernoulli search with hard cost constraint and repair.
//! - [`evaluation`]: feature-selection recall and the synthetic benchmark harness.
//! - [`checks`]: self-contained property suite used by `fscpu check`.

pub mod checks;
pub mod cli;
pub mod clustering;
pub mod dataset;
pub mod error;
pub mod evaluation;
pub mod matrix;
pub mod objective;
pub mod optimizer;
pub mod rng;

pub use clustering::{ClusterBackend, ClusterConfig, Clustering};
pub use dataset::{Dataset, NormalizationParams, SyntheticSpec};
pub use error::{Error, Result};
pub use matrix::Matrix;
pub use objective::{ObjectiveReport, ScoreLog};
pub use optimizer::{
    CostConstraint, FeatureMask, ObjectiveMode, RunConfig, RunResult, ThetaVector,
};
