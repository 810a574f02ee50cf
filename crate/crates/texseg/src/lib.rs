//! Supervised texture segmentation toolkit.
//!
//! Four texture measures — co-occurrence (GLCM/Haralick) features,
//! run-length features, Gaussian Markov random field parameters and a
//! dyadic Gabor filter bank — feed a Gaussian Bayes per-window classifier.
//! Segmentation quality is assessed with the Bhattacharyya distance between
//! segmented and reference texture statistics, and a pipeline reproduces
//! the comparative sliding-window experiment on synthetic or user-supplied
//! texture mosaics.

pub mod classifier;
pub mod error;
pub mod features;
mod fft;
pub mod gabor;
pub mod glcm;
pub mod gmrf;
pub mod image;
pub mod io;
pub mod mosaic;
pub mod pipeline;
pub mod quality;
pub mod rlm;

pub use error::{Error, Result};
pub use features::{Extractor, FeatureSample, FeatureVector};
pub use image::{GrayImage, LabelMap, Padding, WindowSpec};
