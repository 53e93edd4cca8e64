//! Inverse-space sparse representation classification (ISSRC) for
//! high-dimensional, small-sample expression data.
//!
//! The pipeline has three stages, each usable on its own:
//!
//! 1. [`gene_selection`]: BW pre-selection followed by ranking on the
//!    decision information factor (DIF), the maximum clinical net benefit of
//!    a per-gene risk curve.
//! 2. [`feature_learning`]: a layer-wise pre-trained, two-layer sparse NMF
//!    fitted transductively on the training and (unlabeled) test samples.
//! 3. [`classification`]: every training feature vector is coded as a sparse
//!    combination of the test feature vectors (the "inverse space"), the
//!    lasso problems are solved with a generalized semi-proximal ADMM
//!    ([`solver`]), and each test sample goes to the class with the largest
//!    category contribution rate (CCR).
//!
//! [`evaluation`] holds the metrics, ROC/DCA curves and the cross-validation
//! harness; [`pipeline`] wires everything to configuration files and report
//! bundles for the `issrc` binary.

pub mod classification;
pub mod config;
pub mod dataset;
pub mod error;
pub mod evaluation;
pub mod feature_learning;
pub mod gene_selection;
pub mod linalg;
pub mod pipeline;
pub mod seed;
pub mod solver;

pub use error::{Error, Result};

/// Crate version, recorded in every run manifest.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
