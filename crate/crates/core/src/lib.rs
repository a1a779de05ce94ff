//! Density-of-states estimation for out-of-distribution detection.
//!
//! A generative model is summarized per sample by a handful of statistics
//! (log-likelihood, latent log-density, rate, ...). Fitting a density to
//! those statistics on training data, then scoring new samples by that
//! density, flags inputs whose statistics are atypical even when their raw
//! likelihood looks fine.
//!
//! Modules:
//! * [`table`]: statistic tables and their CSV + manifest format.
//! * [`kde`]: product-of-experts KDE scoring.
//! * [`svm`]: PCA whitening and one-class SVM scoring.
//! * [`scores`]: score vectors and baseline rules (likelihood, TT, WAIC, LLR).
//! * [`typicality`]: typical-set membership and the atypicality bound.
//! * [`metrics`]: AUROC, ECE memorization check, thresholds.
//! * [`synthetic`]: generators with analytic references.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod kde;
pub mod metrics;
pub mod model;
pub mod rng;
pub mod scores;
pub mod stats;
pub mod svm;
pub mod synthetic;
pub mod table;
pub mod typicality;

pub use error::{DoseError, Result};
pub use scores::{Method, Orientation, ScoreVector};
pub use table::{read_stat_table, write_stat_table, Reducer, Role, StatSchema, StatTable};
