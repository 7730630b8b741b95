//! Covariance matrix estimation by jackknife regression.
//!
//! The estimator splits the samples into groups, treats each group's sample
//! covariance entries as regression responses and the remaining groups'
//! sufficient statistics as features, fits a nonparametric regressor (kNN,
//! clustered linear regression, or a regression tree), averages the
//! in-sample predictions over held-out groups and repeated splits, and
//! projects the averaged matrix onto the positive definite cone.
//!
//! The crate also ships the sample-covariance and linear-shrinkage
//! baselines, seeded population-model generators, and a deterministic
//! Monte Carlo benchmark harness used by the `covjack` CLI.

pub mod baselines;
pub mod benchmark;
pub mod error;
pub mod io;
pub mod jackknife;
pub mod linalg;
pub mod regress;
pub mod rng;
pub mod simgen;

pub use error::{Error, Result};
pub use linalg::{DataMatrix, EigenDecomposition, SymmetricMatrix};
