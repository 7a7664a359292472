//! Privacy-aware semantic GPS features for daily stress recognition.
//!
//! Raw fixes are reverse-geocoded against a local OpenStreetMap extract,
//! collapsed into seven life categories, and aggregated into daily feature
//! rows. The crate also ships the classifiers, resampling, evaluation regimes
//! and the re-identification / mutual-information analyses used to measure
//! the privacy-utility trade-off.

pub mod analysis;
pub mod config;
pub mod dataset;
pub mod error;
pub mod evaluation;
pub mod features;
pub mod geo;
pub mod labeling;
pub mod learners;
pub mod matrix;
pub mod pipeline;
pub mod privacy;
pub mod resampling;
pub mod semantic;

pub use error::{Error, Result};
