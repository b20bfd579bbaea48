//! Latent block models for weighted bipartite interaction networks.
//!
//! Observed interaction counts mix two phenomena: a binary network of
//! possible interactions and an uneven sampling process. This crate fits a
//! corrected-observation latent block model that disentangles the two — the
//! counts are modeled as the product of a Bernoulli block structure and
//! independent Poisson draws whose rates factor into per-row, per-column and
//! global sampling efforts. A plain binary latent block model fitted on the
//! observed support is provided as the baseline comparator.
//!
//! The crate covers:
//! - stochastic EM inference for the corrected model ([`sem`]),
//! - variational EM for the baseline ([`lbm`]),
//! - block-count selection by an integrated classification likelihood
//!   criterion with split-merge exploration ([`select`]),
//! - network simulation and sub-sampling schemes ([`simulate`]),
//! - evaluation metrics: ARI, ROC AUC, coverage and connectivity
//!   estimators, NODF nestedness, bipartite modularity and matrix
//!   completion ([`metrics`]),
//! - a benchmark harness emitting plot-ready CSV ([`bench`]).

pub mod align;
pub mod bench;
pub mod clustering;
pub mod error;
pub mod init;
pub mod io;
pub mod lbm;
pub mod likelihood;
pub mod matrix;
pub mod metrics;
pub mod params;
pub mod rng;
pub mod select;
pub mod sem;
pub mod simulate;

pub use clustering::{Clustering, SoftAssignment};
pub use error::{Error, Result};
pub use matrix::{drop_empty, observed_support, BinaryMatrix, CountMatrix};
pub use params::{CoopParams, FitResult, LbmParams, ModelKind, ModelParams};
