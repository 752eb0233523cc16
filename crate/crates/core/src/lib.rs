//! Recursive-training collapse experiments for clinical text and image-feature
//! generators: corpora, generator kernels, the generation chain, text, safety
//! and image metrics, statistics, and mitigation.
//!
//! Numeric code is generic over [`Real`] (`f32` or `f64`); the aliases below
//! fix the `f64` instantiations used by the chain and the CLI.

pub mod corpus;
pub mod error;
pub mod genkernel;
pub mod imagemetrics;
pub mod linalg;
pub mod mitigation;
pub mod recursion;
pub mod rng;
pub mod safety;
pub mod scalar;
pub mod stats;
pub mod textmetrics;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Matrix = linalg::Matrix<f64>;
pub type RatingsMatrix = stats::Ratings<f64>;
pub type FeatureRecord = imagemetrics::FeatureRecord<f64>;
pub type GaussianMixtureModel = genkernel::GaussianMixture<f64>;
