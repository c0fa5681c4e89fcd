//! Textural-corruption robustness experiments on 3D volumes.
//!
//! The crate corrupts volumes with Gaussian blur, median smoothing and
//! salt-and-pepper speckle, trains a per-voxel reference segmenter on
//! mixtures of corrupted datasets, and scores every model against every
//! corruption with per-class Dice.

pub mod dataset;
pub mod error;
pub mod filters;
pub mod harness;
pub mod metrics;
pub mod phantom;
pub mod seed;
pub mod segmenter;
pub mod volume;

pub use error::{Error, Result};
