//! The four training objectives and their gradients with respect to the
//! probability outputs they consume. Backprop through the networks happens
//! in netcore; everything here is closed-form in the batch distributions.

use ndarray::{Array1, Array2, Axis};

use super::VpqError;
use crate::netcore::ProbBatch;

const LN_2: f64 = std::f64::consts::LN_2;
/// Probabilities below this are clamped inside logs.
const LOG_CLAMP: f64 = 1e-12;
/// Upper clamp for the adaptive lambda2 ratio.
pub const LAMBDA2_MAX: f64 = 1e4;

fn check_paired(a: &ProbBatch, b: &ProbBatch) -> Result<(), VpqError> {
    if a.rows() != b.rows() || a.q() != b.q() {
        return Err(VpqError::Shape(format!(
            "paired batches disagree: {}x{} vs {}x{}",
            a.rows(),
            a.q(),
            b.rows(),
            b.q()
        )));
    }
    Ok(())
}

/// Shannon entropy in bits; entries that are not positive contribute zero.
pub fn entropy_bits(p: &[f64]) -> f64 {
    -p.iter().filter(|&&v| v > 0.0).map(|&v| v * v.log2()).sum::<f64>()
}

/// Mismatch-rate surrogate: minus the mean row-wise inner product of the
/// two parties' output distributions. Lives in [-1, 0]; hits -1 exactly
/// when every paired row is the same one-hot.
pub fn loss_mismatch(pw: &ProbBatch, pv: &ProbBatch) -> Result<f64, VpqError> {
    check_paired(pw, pv)?;
    let b = pw.rows() as f64;
    Ok(-(pw.as_array() * pv.as_array()).sum() / b)
}

/// [`loss_mismatch`] plus its gradients w.r.t. both probability batches.
pub fn loss_mismatch_with_grads(
    pw: &ProbBatch,
    pv: &ProbBatch,
) -> Result<(f64, Array2<f64>, Array2<f64>), VpqError> {
    check_paired(pw, pv)?;
    let b = pw.rows() as f64;
    let val = -(pw.as_array() * pv.as_array()).sum() / b;
    let dpw = pv.as_array().mapv(|v| -v / b);
    let dpv = pw.as_array().mapv(|v| -v / b);
    Ok((val, dpw, dpv))
}

/// Exponentially averaged marginals of the two quantizer outputs. The
/// running term is a constant for gradient purposes; only the fresh batch
/// mean carries gradient, which the 1/(1-alpha) factor in [`loss_entropy`]
/// compensates.
#[derive(Debug, Clone, PartialEq)]
pub struct EmaMarginals {
    p_w: Array1<f64>,
    q_v: Array1<f64>,
    alpha: f64,
}

impl EmaMarginals {
    /// Uniform starting point; avoids log(0) on the very first update.
    pub fn uniform(q: usize, alpha: f64) -> Result<Self, VpqError> {
        if q == 0 {
            return Err(VpqError::BadConfig("marginal alphabet must be nonempty".into()));
        }
        if !(0.0..1.0).contains(&alpha) {
            return Err(VpqError::BadConfig(format!("alpha {alpha} outside [0, 1)")));
        }
        let u = Array1::from_elem(q, 1.0 / q as f64);
        Ok(Self { p_w: u.clone(), q_v: u, alpha })
    }

    pub fn new(p_w: Array1<f64>, q_v: Array1<f64>, alpha: f64) -> Result<Self, VpqError> {
        if !(0.0..1.0).contains(&alpha) {
            return Err(VpqError::BadConfig(format!("alpha {alpha} outside [0, 1)")));
        }
        if p_w.len() != q_v.len() || p_w.is_empty() {
            return Err(VpqError::Shape("marginal lengths disagree".into()));
        }
        for v in p_w.iter().chain(q_v.iter()) {
            if !(*v >= 0.0) {
                return Err(VpqError::BadConfig("marginal entries must be nonnegative".into()));
            }
        }
        if (p_w.sum() - 1.0).abs() > 1e-9 || (q_v.sum() - 1.0).abs() > 1e-9 {
            return Err(VpqError::BadConfig("marginals must sum to 1 within 1e-9".into()));
        }
        Ok(Self { p_w, q_v, alpha })
    }

    pub fn p_w(&self) -> &Array1<f64> {
        &self.p_w
    }

    pub fn q_v(&self) -> &Array1<f64> {
        &self.q_v
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn q(&self) -> usize {
        self.p_w.len()
    }
}

/// One EMA step: alpha times the previous marginal plus (1-alpha) times
/// the fresh batch mean of each output distribution.
pub fn ema_update(m: &EmaMarginals, pw: &ProbBatch, pv: &ProbBatch) -> EmaMarginals {
    assert_eq!(m.q(), pw.q(), "marginal/batch alphabet mismatch");
    assert_eq!(m.q(), pv.q(), "marginal/batch alphabet mismatch");
    let a = m.alpha;
    let mean_w = pw.as_array().mean_axis(Axis(0)).expect("nonempty batch");
    let mean_v = pv.as_array().mean_axis(Axis(0)).expect("nonempty batch");
    // Convex combination of simplex points stays on the simplex; skip
    // revalidation so the training loop cannot drift into an error path.
    EmaMarginals {
        p_w: a * &m.p_w + (1.0 - a) * &mean_w,
        q_v: a * &m.q_v + (1.0 - a) * &mean_v,
        alpha: a,
    }
}

/// Uniformity loss: minus the mean of the two marginal entropies (bits),
/// rescaled by 1/(1-alpha) to undo the EMA's gradient attenuation.
pub fn loss_entropy(m: &EmaMarginals) -> f64 {
    let h = entropy_bits(m.p_w.as_slice().expect("contiguous"))
        + entropy_bits(m.q_v.as_slice().expect("contiguous"));
    -h / (2.0 * (1.0 - m.alpha))
}

/// Gradient of [`loss_entropy`] w.r.t. each row of the batches that fed
/// the EMA update producing `m`. The row is identical for every batch
/// element: (log2 p(w) + 1/ln 2) / (2B); the (1-alpha) factors cancel.
pub(crate) fn loss_entropy_grad_rows(
    m: &EmaMarginals,
    batch: usize,
) -> (Array1<f64>, Array1<f64>) {
    let b = batch as f64;
    let g = |p: &Array1<f64>| p.mapv(|v| (v.max(LOG_CLAMP).log2() + 1.0 / LN_2) / (2.0 * b));
    (g(&m.p_w), g(&m.q_v))
}

fn log2_clamped(pz: &ProbBatch) -> Array2<f64> {
    pz.as_array().mapv(|v| v.max(LOG_CLAMP).log2())
}

/// Variational lower-bound objective (bits): the mean cross term
/// (1/B) sum_i sum_w p_w(w|x_i) log2 p_psi(w|z_i), logs clamped at 1e-12.
/// Adding the marginal entropy H(W) turns it into a lower bound on
/// I(W; Z); on its own it is the part the predictor can influence.
pub fn mi_vlb(pw: &ProbBatch, pz: &ProbBatch) -> Result<f64, VpqError> {
    check_paired(pw, pz)?;
    let b = pw.rows() as f64;
    Ok((pw.as_array() * &log2_clamped(pz)).sum() / b)
}

/// [`mi_vlb`] plus gradients w.r.t. the encoder batch and the predictor
/// batch. Entries sitting on the clamp carry zero predictor gradient.
pub fn mi_vlb_with_grads(
    pw: &ProbBatch,
    pz: &ProbBatch,
) -> Result<(f64, Array2<f64>, Array2<f64>), VpqError> {
    check_paired(pw, pz)?;
    let b = pw.rows() as f64;
    let lb = log2_clamped(pz);
    let val = (pw.as_array() * &lb).sum() / b;
    let dpw = lb.mapv(|v| v / b);
    let mut dpz = pw.as_array() / (b * LN_2);
    dpz.zip_mut_with(pz.as_array(), |g, &p| {
        if p > LOG_CLAMP {
            *g /= p;
        } else {
            *g = 0.0;
        }
    });
    Ok((val, dpw, dpz))
}

/// Leakage upper-bound objective (bits): the positive-pair cross term of
/// [`mi_vlb`] minus the all-pairs cross term (1/B^2) sum_ij.
pub fn mi_vub(pw: &ProbBatch, pz: &ProbBatch) -> Result<f64, VpqError> {
    Ok(mi_vub_with_grads(pw, pz)?.0)
}

/// [`mi_vub`] plus its gradient w.r.t. the encoder batch; the predictor
/// is held fixed where this is used.
pub fn mi_vub_with_grads(
    pw: &ProbBatch,
    pz: &ProbBatch,
) -> Result<(f64, Array2<f64>), VpqError> {
    check_paired(pw, pz)?;
    let b = pw.rows() as f64;
    let lb = log2_clamped(pz);
    let vlb = (pw.as_array() * &lb).sum() / b;
    let col_lb = lb.sum_axis(Axis(0));
    let col_pw = pw.as_array().sum_axis(Axis(0));
    let cross = col_pw.dot(&col_lb) / (b * b);
    let dpw = &lb / b - &(col_lb.mapv(|v| v / (b * b)));
    Ok((vlb - cross, dpw))
}

/// VQ-GAN-style adaptive weight: the ratio of the two final-layer
/// gradient norms, clamped to [0, 1e4].
pub fn adaptive_lambda2(grad_ab_norm: f64, grad_vub_norm: f64, delta: f64) -> f64 {
    (grad_ab_norm / (grad_vub_norm + delta)).clamp(0.0, LAMBDA2_MAX)
}
