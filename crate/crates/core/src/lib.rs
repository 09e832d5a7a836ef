//! Random-convolution-kernel time series classifiers (the ROCKET family)
//! with group-sparse kernel pruning.
//!
//! The pipeline: load a UCR-format dataset, generate a random kernel bank,
//! extract PPV/MAX features, standardize, then either fit an ℓ2-regularized
//! classifier directly or prune kernels by driving groups of classifier
//! weights to zero — with a per-iteration-penalty baseline solver and an
//! accelerated two-stage solver that factorizes its system exactly once.

pub mod admm;
pub mod bench;
pub mod data_io;
pub mod error;
pub mod groups;
pub mod hyper_cv;
pub mod kernel_bank;
pub mod linalg;
pub mod model_io;
pub mod pocket;
pub mod preprocess;
pub mod ridge;
pub mod synthetic;
pub mod transform;

pub use error::{Error, Result};
