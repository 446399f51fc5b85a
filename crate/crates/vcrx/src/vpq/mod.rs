//! The VPQ objective suite and the adversarial training loop: mismatch and
//! uniformity losses for the paired quantizer encoders, variational bounds
//! on what a predictor can infer from side observations, and the
//! alternating optimization that ties them together.

mod losses;
mod train;

use crate::netcore::{NetError, OptKind};
use thiserror::Error;

pub use losses::{
    adaptive_lambda2, ema_update, entropy_bits, loss_entropy, loss_mismatch,
    loss_mismatch_with_grads, mi_vlb, mi_vlb_with_grads, mi_vub, mi_vub_with_grads, EmaMarginals,
    LAMBDA2_MAX,
};
pub use train::{quantize, train_vpq, TrainedVpq};

#[derive(Debug, Error)]
pub enum VpqError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("bad vpq config: {0}")]
    BadConfig(String),
    #[error("non-finite loss at step {step}")]
    NonFinite { step: usize },
    #[error(transparent)]
    Net(#[from] NetError),
}

/// How the adversarial weight on the leakage bound is chosen each step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Lambda2Mode {
    Fixed(f64),
    /// Ratio of final-layer gradient norms, clamped to [0, LAMBDA2_MAX].
    Adaptive,
}

/// Everything the training loop needs besides the source and the RNG.
#[derive(Debug, Clone, PartialEq)]
pub struct VpqConfig {
    /// Quantizer alphabet size.
    pub q: usize,
    /// Weight of the mismatch loss inside L_AB.
    pub lambda1: f64,
    pub lambda2_mode: Lambda2Mode,
    /// Stability constant in the adaptive lambda2 denominator.
    pub delta: f64,
    /// EMA factor for the batch marginals.
    pub alpha: f64,
    pub steps_max: usize,
    /// Trailing steps that update only the predictor against frozen
    /// encoders; ignored when the source has no eavesdropper stream.
    pub steps_predictor_only: usize,
    pub batch_size: usize,
    /// Use one encoder for both parties (sensible when x and y are
    /// identically distributed).
    pub shared_encoder: bool,
    pub lr: f64,
    pub optimizer: OptKind,
    pub enc_hidden: Vec<usize>,
    pub pred_hidden: Vec<usize>,
    pub use_batchnorm: bool,
    /// Parameter initialization seed; data randomness comes from the RNG
    /// handed to `train_vpq`.
    pub init_seed: u64,
}

impl VpqConfig {
    /// Small preset sized for a single desktop core.
    pub fn desk() -> Self {
        Self {
            q: 16,
            lambda1: 1.0,
            lambda2_mode: Lambda2Mode::Adaptive,
            delta: 1e-7,
            alpha: 0.6,
            steps_max: 20_000,
            steps_predictor_only: 2_000,
            batch_size: 512,
            shared_encoder: true,
            lr: 1e-4,
            optimizer: OptKind::Adam,
            enc_hidden: vec![256, 256, 256],
            pred_hidden: vec![512, 512, 512, 512],
            use_batchnorm: true,
            init_seed: 1,
        }
    }

    /// Full-scale preset matching the published operating point.
    pub fn paper() -> Self {
        Self {
            steps_max: 60_000,
            steps_predictor_only: 10_000,
            batch_size: 2048,
            lr: 3e-5,
            enc_hidden: vec![1024, 1024, 1024, 1024],
            pred_hidden: vec![2048; 8],
            ..Self::desk()
        }
    }

    pub fn validate(&self) -> Result<(), VpqError> {
        let bad = |m: String| Err(VpqError::BadConfig(m));
        if self.q < 2 || self.q > 256 {
            return bad(format!("alphabet size {} outside 2..=256", self.q));
        }
        if !(self.lambda1 > 0.0) {
            return bad(format!("lambda1 {} must be positive", self.lambda1));
        }
        if !(self.delta > 0.0) {
            return bad(format!("delta {} must be positive", self.delta));
        }
        if !(0.0..1.0).contains(&self.alpha) {
            return bad(format!("alpha {} outside [0, 1)", self.alpha));
        }
        if self.steps_predictor_only > self.steps_max {
            return bad(format!(
                "steps_predictor_only {} exceeds steps_max {}",
                self.steps_predictor_only, self.steps_max
            ));
        }
        if self.batch_size < 2 {
            return bad("batch_size must be at least 2".into());
        }
        if !(self.lr > 0.0) {
            return bad(format!("learning rate {} must be positive", self.lr));
        }
        if let Lambda2Mode::Fixed(v) = self.lambda2_mode {
            if !(v >= 0.0) || !v.is_finite() {
                return bad(format!("fixed lambda2 {v} must be finite and nonnegative"));
            }
        }
        Ok(())
    }
}

/// One history row; fields are absent when the step did not compute them
/// (no eavesdropper, or a predictor-only step).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub l_mr: Option<f64>,
    pub l_ent: Option<f64>,
    pub i_vlb_bits: Option<f64>,
    pub i_vub_bits: Option<f64>,
    pub lambda2: Option<f64>,
}

/// Per-step loss trace of a training run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainHistory {
    pub records: Vec<StepRecord>,
}
