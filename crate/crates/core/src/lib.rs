//! Bayesian scene keypoints: track 3D keypoints over a camera trajectory by
//! filtering dense-correspondence distance maps and depth maps through either
//! a pixel-space Bayes filter or a world-frame particle filter.
//!
//! A synthetic scene simulator stands in for the descriptor network so that
//! every stage can be checked against exact ground truth.

pub mod descriptor;
pub mod discrete_filter;
pub mod error;
pub mod geometry;
pub mod grid;
pub mod io;
pub mod metrics;
pub mod particle_filter;
pub mod scene_sim;

pub use error::{BundleError, Error, Result};
