//! Meta-classification of lithography hotspots.
//!
//! The crate covers the whole flow: synthetic rectilinear layouts, a
//! Gaussian-blur lithography oracle that labels edge fragments, density
//! features, three base classifiers (neural network, RBF SVM and a fuzzy
//! pattern matcher) and a quantized weighted combination of their outputs
//! whose weights come from a bound-constrained convex quadratic program.

pub mod ann;
pub mod bench;
pub mod config;
pub mod error;
pub mod features;
pub mod geom;
pub mod oracle;
pub mod meta;
pub mod metrics;
pub mod model_file;
pub mod pipeline;
pub mod pm;
pub mod qp;
pub mod svm;

pub use error::{EpicError, Result};
