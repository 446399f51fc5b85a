//! Seeded generators of correlated observation triples (x, y, z): the
//! Gaussian fading model and a simplified geometric range-angle-map model,
//! plus the eavesdropper observation variants.

mod fading;
mod ramap;

use ndarray::Array2;
use rand::RngCore;
use thiserror::Error;

pub use fading::{dbm_to_linear, fading_mi_bits_per_scalar, gen_fading, FadingConfig, FadingSource};
pub use ramap::{
    eve_position_obs, gen_ra_maps, strongest_cell, RaConfig, RamapSource, RamapSourceConfig,
    RaScene, C0,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SourceError {
    #[error("scene out of range: {0}")]
    BadScene(String),
    #[error("bad source config: {0}")]
    BadConfig(String),
}

/// Which observation the eavesdropper receives.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EveMode {
    /// No z stream at all (no adversarial term in training).
    Absent,
    /// A z stream statistically independent of (x, y).
    Uncorrelated,
    /// A z stream correlated with the shared randomness.
    Correlated,
}

/// Paired observations; `z` is `None` exactly when the eavesdropper is
/// absent. Row counts always agree.
#[derive(Debug, Clone)]
pub struct SampleBatch {
    pub x: Array2<f64>,
    pub y: Array2<f64>,
    pub z: Option<Array2<f64>>,
}

impl SampleBatch {
    pub fn rows(&self) -> usize {
        self.x.nrows()
    }
}

/// A seeded, stateless batch generator. Implementations draw from the
/// caller's RNG in a fixed order, so identical (config, seed) pairs yield
/// bit-identical batches.
pub trait Source {
    fn x_dim(&self) -> usize;
    fn y_dim(&self) -> usize;
    /// 0 when the eavesdropper is absent.
    fn z_dim(&self) -> usize;
    fn sample(&self, batch: usize, rng: &mut dyn RngCore) -> SampleBatch;
}
