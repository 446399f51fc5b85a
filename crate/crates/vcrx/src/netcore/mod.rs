//! Minimal deterministic neural engine: f64 tensors, dense/batch-norm/ReLU
//! layers with a softmax head, analytic reverse-mode gradients, Adam and
//! AdamW. Everything is 64-bit and runs in a fixed reduction order, so a
//! (seed, config) pair reproduces training bit for bit on one platform.

mod io;
mod mlp;
mod optim;
mod tensor;

use ndarray::Array2;
use thiserror::Error;

pub use io::{load_model, save_model};
pub use mlp::{ForwardCache, Mlp, MlpSpec};
pub use optim::{OptKind, OptState};
pub use tensor::Tensor;

#[derive(Debug, Error)]
pub enum NetError {
    #[error("shape mismatch: expected {want}, got {got}")]
    ShapeMismatch { want: String, got: String },
    #[error("spec needs at least one hidden layer and positive dims")]
    BadSpec,
    #[error("eval-mode forward before any train-mode batch: running statistics are empty")]
    EvalBeforeTrain,
    #[error("non-finite value produced in {0}")]
    NonFinite(&'static str),
    #[error("model file parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Batch-norm behavior switch: train mode normalizes with batch statistics
/// and updates the running estimates, eval mode reads the running estimates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// B x q matrix of output distributions; every row sums to 1.
#[derive(Debug, Clone)]
pub struct ProbBatch(Array2<f64>);

impl ProbBatch {
    /// Wraps rows that are already normalized; checks the invariant.
    pub fn from_rows(p: Array2<f64>) -> Result<Self, NetError> {
        for row in p.rows() {
            let s: f64 = row.sum();
            if !s.is_finite() || (s - 1.0).abs() > 1e-9 || row.iter().any(|&x| x < 0.0) {
                return Err(NetError::ShapeMismatch {
                    want: "rows summing to 1 with nonnegative entries".into(),
                    got: format!("row sum {s}"),
                });
            }
        }
        Ok(ProbBatch(p))
    }

    pub(crate) fn new_unchecked(p: Array2<f64>) -> Self {
        ProbBatch(p)
    }

    pub fn rows(&self) -> usize {
        self.0.nrows()
    }

    pub fn q(&self) -> usize {
        self.0.ncols()
    }

    pub fn as_array(&self) -> &Array2<f64> {
        &self.0
    }
}
