use ndarray::linalg::general_mat_mul;
use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use super::{Mode, NetError, ProbBatch, Tensor};

pub(crate) const BN_EPS: f64 = 1e-5;
pub(crate) const BN_MOMENTUM: f64 = 0.1;

/// Architecture of an encoder or predictor: a stack of
/// linear -> [batch-norm] -> ReLU blocks followed by linear -> softmax.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MlpSpec {
    pub in_dim: usize,
    pub hidden_dims: Vec<usize>,
    /// Output alphabet size q.
    pub out_dim: usize,
    pub use_batchnorm: bool,
}

#[derive(Debug, Clone)]
struct BatchNorm {
    gamma: Tensor,
    beta: Tensor,
    running_mean: Tensor,
    running_var: Tensor,
}

impl BatchNorm {
    fn new(dim: usize) -> Self {
        let mut gamma = Tensor::zeros(&[dim]);
        gamma.data.fill(1.0);
        let mut running_var = Tensor::zeros(&[dim]);
        running_var.data.fill(1.0);
        BatchNorm {
            gamma,
            beta: Tensor::zeros(&[dim]),
            running_mean: Tensor::zeros(&[dim]),
            running_var,
        }
    }
}

/// Per-forward activations needed by `backward`. The cache is immutable, so
/// several backward passes (for separately weighted loss terms) may reuse
/// one forward.
#[derive(Debug)]
pub struct ForwardCache {
    mode: Mode,
    /// Input to linear layer i: inputs[0] is the batch, inputs[i] the
    /// post-activation of hidden layer i.
    inputs: Vec<Array2<f64>>,
    /// Normalized pre-scale activations per batch-norm layer.
    bn_xhat: Vec<Array2<f64>>,
    /// 1/sqrt(var + eps) per batch-norm layer.
    bn_invstd: Vec<Array1<f64>>,
    probs: Array2<f64>,
}

impl ForwardCache {
    pub fn batch_size(&self) -> usize {
        self.probs.nrows()
    }

    /// Zero/positive pattern of every hidden activation. Two forwards of
    /// the same batch whose patterns differ took different ReLU branches
    /// somewhere, so the loss is not smooth between those two points.
    pub fn relu_pattern(&self) -> Vec<bool> {
        self.inputs[1..]
            .iter()
            .flat_map(|a| a.iter().map(|&v| v > 0.0))
            .collect()
    }
}

/// Dense network with deterministic initialization and a softmax head.
#[derive(Debug, Clone)]
pub struct Mlp {
    spec: MlpSpec,
    /// weights[i] has shape [out, in]; the last entry feeds the softmax.
    weights: Vec<Tensor>,
    biases: Vec<Tensor>,
    /// One per hidden layer when `use_batchnorm`.
    bns: Vec<BatchNorm>,
    bn_batches: u64,
}

fn check_finite(name: &'static str, a: &Array2<f64>) -> Result<(), NetError> {
    if a.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(NetError::NonFinite(name))
    }
}

fn affine(x: &Array2<f64>, w: &Tensor, b: &Tensor) -> Array2<f64> {
    let mut out = x.dot(&w.view2().t());
    for mut row in out.rows_mut() {
        for (o, &bi) in row.iter_mut().zip(&b.data) {
            *o += bi;
        }
    }
    out
}

fn relu_inplace(a: &mut Array2<f64>) {
    a.mapv_inplace(|x| if x > 0.0 { x } else { 0.0 });
}

/// Max-subtracted softmax; safe for logits within +-700.
fn softmax(logits: &Array2<f64>) -> Array2<f64> {
    let mut p = logits.clone();
    for mut row in p.rows_mut() {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for x in row.iter_mut() {
            *x = (*x - max).exp();
            sum += *x;
        }
        for x in row.iter_mut() {
            *x /= sum;
        }
    }
    p
}

/// dL/dlogits from dL/dprobs: p .* (d - rowsum(d .* p)).
fn softmax_backward(probs: &Array2<f64>, dprobs: &Array2<f64>) -> Array2<f64> {
    let mut out = Array2::zeros(probs.raw_dim());
    for ((mut orow, prow), drow) in out.rows_mut().into_iter().zip(probs.rows()).zip(dprobs.rows())
    {
        let dot: f64 = prow.iter().zip(drow.iter()).map(|(&p, &d)| p * d).sum();
        for ((o, &p), &d) in orow.iter_mut().zip(prow.iter()).zip(drow.iter()) {
            *o = p * (d - dot);
        }
    }
    out
}

impl Mlp {
    /// Kaiming-uniform weights in a fixed draw order, zero biases,
    /// batch-norm scale 1 / shift 0.
    pub fn new(spec: MlpSpec, seed: u64) -> Result<Self, NetError> {
        if spec.hidden_dims.is_empty()
            || spec.in_dim == 0
            || spec.out_dim == 0
            || spec.hidden_dims.iter().any(|&d| d == 0)
        {
            return Err(NetError::BadSpec);
        }
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let mut dims = vec![spec.in_dim];
        dims.extend_from_slice(&spec.hidden_dims);
        dims.push(spec.out_dim);
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for pair in dims.windows(2) {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let bound = (6.0 / fan_in as f64).sqrt();
            let data: Vec<f64> = (0..fan_in * fan_out)
                .map(|_| (rng.gen::<f64>() * 2.0 - 1.0) * bound)
                .collect();
            weights.push(Tensor::from_data(&[fan_out, fan_in], data));
            biases.push(Tensor::zeros(&[fan_out]));
        }
        let bns = if spec.use_batchnorm {
            spec.hidden_dims.iter().map(|&d| BatchNorm::new(d)).collect()
        } else {
            Vec::new()
        };
        Ok(Mlp { spec, weights, biases, bns, bn_batches: 0 })
    }

    pub fn spec(&self) -> &MlpSpec {
        &self.spec
    }

    pub fn num_params(&self) -> usize {
        self.weights.iter().map(Tensor::len).sum::<usize>()
            + self.biases.iter().map(Tensor::len).sum::<usize>()
            + self.bns.iter().map(|b| b.gamma.len() + b.beta.len()).sum::<usize>()
    }

    /// Trainable tensors in declaration order: per hidden layer W, b
    /// [, gamma, beta], then the final W, b. The order is part of the model
    /// file format and of init/update determinism.
    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        let hidden = self.weights.len() - 1;
        let use_bn = self.spec.use_batchnorm;
        let mut out = Vec::new();
        let mut ws = self.weights.iter_mut();
        let mut bs = self.biases.iter_mut();
        let mut bn = self.bns.iter_mut();
        for _ in 0..hidden {
            out.push(ws.next().expect("layer count"));
            out.push(bs.next().expect("layer count"));
            if use_bn {
                let b = bn.next().expect("bn count");
                out.push(&mut b.gamma);
                out.push(&mut b.beta);
            }
        }
        out.push(ws.next().expect("final weight"));
        out.push(bs.next().expect("final bias"));
        out
    }

    pub fn zero_grad(&mut self) {
        for t in self.params_mut() {
            t.zero_grad();
        }
    }

    fn check_input(&self, x: &Array2<f64>) -> Result<(), NetError> {
        if x.ncols() != self.spec.in_dim {
            return Err(NetError::ShapeMismatch {
                want: format!("B x {}", self.spec.in_dim),
                got: format!("{} x {}", x.nrows(), x.ncols()),
            });
        }
        check_finite("input", x)
    }

    /// Full forward pass. Train mode normalizes with batch statistics and
    /// updates running estimates; eval mode requires at least one prior
    /// train-mode batch when batch-norm is present.
    pub fn forward(&mut self, x: &Array2<f64>, mode: Mode) -> Result<(ProbBatch, ForwardCache), NetError> {
        self.check_input(x)?;
        if mode == Mode::Eval && self.spec.use_batchnorm && self.bn_batches == 0 {
            return Err(NetError::EvalBeforeTrain);
        }
        let batch = x.nrows();
        let hidden = self.weights.len() - 1;
        let mut inputs = vec![x.clone()];
        let mut bn_xhat = Vec::new();
        let mut bn_invstd = Vec::new();
        for i in 0..hidden {
            let mut a = affine(&inputs[i], &self.weights[i], &self.biases[i]);
            check_finite("hidden pre-activation", &a)?;
            if self.spec.use_batchnorm {
                let d = a.ncols();
                let (mut mean, mut var) = (Array1::zeros(d), Array1::zeros(d));
                match mode {
                    Mode::Train => {
                        for (j, col) in a.columns().into_iter().enumerate() {
                            mean[j] = col.sum() / batch as f64;
                            var[j] = col.iter().map(|&v| (v - mean[j]).powi(2)).sum::<f64>()
                                / batch as f64;
                        }
                        let bn = &mut self.bns[i];
                        // Running variance uses the unbiased estimate, as is
                        // conventional; normalization uses the biased one.
                        let unbias = if batch > 1 {
                            batch as f64 / (batch - 1) as f64
                        } else {
                            1.0
                        };
                        for j in 0..d {
                            bn.running_mean.data[j] = (1.0 - BN_MOMENTUM) * bn.running_mean.data[j]
                                + BN_MOMENTUM * mean[j];
                            bn.running_var.data[j] = (1.0 - BN_MOMENTUM) * bn.running_var.data[j]
                                + BN_MOMENTUM * var[j] * unbias;
                        }
                    }
                    Mode::Eval => {
                        let bn = &self.bns[i];
                        for j in 0..d {
                            mean[j] = bn.running_mean.data[j];
                            var[j] = bn.running_var.data[j];
                        }
                    }
                }
                let invstd = var.mapv(|v| 1.0 / (v + BN_EPS).sqrt());
                let mut xhat = a;
                for mut row in xhat.rows_mut() {
                    for j in 0..d {
                        row[j] = (row[j] - mean[j]) * invstd[j];
                    }
                }
                let bn = &self.bns[i];
                a = xhat.clone();
                for mut row in a.rows_mut() {
                    for j in 0..d {
                        row[j] = row[j] * bn.gamma.data[j] + bn.beta.data[j];
                    }
                }
                bn_xhat.push(xhat);
                bn_invstd.push(invstd);
            }
            relu_inplace(&mut a);
            check_finite("hidden activation", &a)?;
            inputs.push(a);
        }
        if mode == Mode::Train && self.spec.use_batchnorm {
            self.bn_batches += 1;
        }
        let logits = affine(inputs.last().expect("nonempty"), &self.weights[hidden], &self.biases[hidden]);
        let probs = softmax(&logits);
        check_finite("probabilities", &probs)?;
        let cache = ForwardCache { mode, inputs, bn_xhat, bn_invstd, probs: probs.clone() };
        Ok((ProbBatch::new_unchecked(probs), cache))
    }

    /// Read-only eval-mode forward for frozen models; no cache, no running
    /// stat updates.
    pub fn forward_eval(&self, x: &Array2<f64>) -> Result<ProbBatch, NetError> {
        self.check_input(x)?;
        if self.spec.use_batchnorm && self.bn_batches == 0 {
            return Err(NetError::EvalBeforeTrain);
        }
        let hidden = self.weights.len() - 1;
        let mut h = x.clone();
        for i in 0..hidden {
            let mut a = affine(&h, &self.weights[i], &self.biases[i]);
            if self.spec.use_batchnorm {
                let bn = &self.bns[i];
                for mut row in a.rows_mut() {
                    for j in 0..row.len() {
                        let invstd = 1.0 / (bn.running_var.data[j] + BN_EPS).sqrt();
                        row[j] = (row[j] - bn.running_mean.data[j]) * invstd * bn.gamma.data[j]
                            + bn.beta.data[j];
                    }
                }
            }
            relu_inplace(&mut a);
            h = a;
        }
        let logits = affine(&h, &self.weights[hidden], &self.biases[hidden]);
        let probs = softmax(&logits);
        check_finite("probabilities", &probs)?;
        Ok(ProbBatch::new_unchecked(probs))
    }

    fn check_dprobs(&self, cache: &ForwardCache, dprobs: &Array2<f64>) -> Result<(), NetError> {
        if cache.mode != Mode::Train {
            return Err(NetError::ShapeMismatch {
                want: "train-mode forward cache".into(),
                got: "eval-mode cache".into(),
            });
        }
        if dprobs.raw_dim() != cache.probs.raw_dim()
            || cache.inputs[0].ncols() != self.spec.in_dim
            || cache.probs.ncols() != self.spec.out_dim
        {
            return Err(NetError::ShapeMismatch {
                want: format!("{} x {}", cache.probs.nrows(), cache.probs.ncols()),
                got: format!("{} x {}", dprobs.nrows(), dprobs.ncols()),
            });
        }
        Ok(())
    }

    /// Accumulates dLoss/dparams into the grad buffers given dLoss/dprobs.
    /// May be called repeatedly on one cache; contributions add up.
    pub fn backward(&mut self, cache: &ForwardCache, dprobs: &Array2<f64>) -> Result<(), NetError> {
        self.check_dprobs(cache, dprobs)?;
        let hidden = self.weights.len() - 1;
        let batch = cache.batch_size() as f64;
        let mut delta = softmax_backward(&cache.probs, dprobs);
        // Final linear.
        {
            let h_in = &cache.inputs[hidden];
            let (w, b) = (&mut self.weights[hidden], &mut self.biases[hidden]);
            general_mat_mul(1.0, &delta.t(), h_in, 1.0, &mut w.grad_view2_mut());
            for (j, col) in delta.columns().into_iter().enumerate() {
                b.grad[j] += col.sum();
            }
            delta = delta.dot(&w.view2());
        }
        for i in (0..hidden).rev() {
            // Through ReLU: post-activation h > 0 iff the unit was active.
            let h = &cache.inputs[i + 1];
            delta.zip_mut_with(h, |d, &hv| {
                if hv <= 0.0 {
                    *d = 0.0;
                }
            });
            if self.spec.use_batchnorm {
                let xhat = &cache.bn_xhat[i];
                let invstd = &cache.bn_invstd[i];
                let bn = &mut self.bns[i];
                let d = xhat.ncols();
                let mut sum_d = vec![0.0; d];
                let mut sum_dx = vec![0.0; d];
                for (drow, xrow) in delta.rows().into_iter().zip(xhat.rows()) {
                    for j in 0..d {
                        sum_d[j] += drow[j];
                        sum_dx[j] += drow[j] * xrow[j];
                    }
                }
                for j in 0..d {
                    bn.gamma.grad[j] += sum_dx[j];
                    bn.beta.grad[j] += sum_d[j];
                }
                // dx = invstd/B * (B*dxhat - sum(dxhat) - xhat*sum(dxhat*xhat))
                // with dxhat = dout * gamma.
                for (mut drow, xrow) in delta.rows_mut().into_iter().zip(xhat.rows()) {
                    for j in 0..d {
                        let g = bn.gamma.data[j];
                        let dxhat = drow[j] * g;
                        drow[j] = invstd[j] / batch
                            * (batch * dxhat - g * sum_d[j] - xrow[j] * g * sum_dx[j]);
                    }
                }
            }
            let x_in = &cache.inputs[i];
            let (w, b) = (&mut self.weights[i], &mut self.biases[i]);
            general_mat_mul(1.0, &delta.t(), x_in, 1.0, &mut w.grad_view2_mut());
            for (j, col) in delta.columns().into_iter().enumerate() {
                b.grad[j] += col.sum();
            }
            if i > 0 {
                delta = delta.dot(&w.view2());
            }
        }
        Ok(())
    }

    /// Gradient of a loss (given as dLoss/dprobs) with respect to the final
    /// linear layer's weights only; used for the adaptive adversarial weight.
    pub fn final_weight_grad(&self, cache: &ForwardCache, dprobs: &Array2<f64>) -> Result<Array2<f64>, NetError> {
        self.check_dprobs(cache, dprobs)?;
        let hidden = self.weights.len() - 1;
        let delta = softmax_backward(&cache.probs, dprobs);
        Ok(delta.t().dot(&cache.inputs[hidden]))
    }

    pub(crate) fn bn_batches(&self) -> u64 {
        self.bn_batches
    }

    pub(crate) fn state_buffers(&self) -> Vec<&Tensor> {
        let hidden = self.weights.len() - 1;
        let mut out = Vec::new();
        for i in 0..hidden {
            out.push(&self.weights[i]);
            out.push(&self.biases[i]);
            if self.spec.use_batchnorm {
                out.push(&self.bns[i].gamma);
                out.push(&self.bns[i].beta);
                out.push(&self.bns[i].running_mean);
                out.push(&self.bns[i].running_var);
            }
        }
        out.push(&self.weights[hidden]);
        out.push(&self.biases[hidden]);
        out
    }

    pub(crate) fn state_buffers_mut(&mut self) -> Vec<&mut Tensor> {
        let hidden = self.weights.len() - 1;
        let use_bn = self.spec.use_batchnorm;
        let mut out = Vec::new();
        let mut ws = self.weights.iter_mut();
        let mut bs = self.biases.iter_mut();
        let mut bn = self.bns.iter_mut();
        for _ in 0..hidden {
            out.push(ws.next().expect("layer count"));
            out.push(bs.next().expect("layer count"));
            if use_bn {
                let b = bn.next().expect("bn count");
                out.push(&mut b.gamma);
                out.push(&mut b.beta);
                out.push(&mut b.running_mean);
                out.push(&mut b.running_var);
            }
        }
        out.push(ws.next().expect("final weight"));
        out.push(bs.next().expect("final bias"));
        out
    }

    pub(crate) fn set_bn_batches(&mut self, n: u64) {
        self.bn_batches = n;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn spec(in_dim: usize, hidden: &[usize], out: usize, bn: bool) -> MlpSpec {
        MlpSpec { in_dim, hidden_dims: hidden.to_vec(), out_dim: out, use_batchnorm: bn }
    }

    fn random_batch(rows: usize, cols: usize, seed: u64) -> Array2<f64> {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        Array2::from_shape_fn((rows, cols), |_| rng.gen::<f64>() * 2.0 - 1.0)
    }

    #[test]
    fn zero_params_give_uniform_rows() {
        for bn in [false, true] {
            let mut net = Mlp::new(spec(3, &[5], 4, bn), 0).unwrap();
            for t in net.params_mut() {
                t.data.fill(0.0);
            }
            let x = random_batch(6, 3, 1);
            let (p, _) = net.forward(&x, Mode::Train).unwrap();
            for row in p.as_array().rows() {
                for &v in row {
                    assert_relative_eq!(v, 0.25, max_relative = 1e-12);
                }
            }
        }
    }

    #[test]
    fn rows_sum_to_one() {
        let mut net = Mlp::new(spec(7, &[16, 16], 9, true), 3).unwrap();
        let x = random_batch(33, 7, 4);
        let (p, _) = net.forward(&x, Mode::Train).unwrap();
        for row in p.as_array().rows() {
            assert!((row.sum() - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn batchnorm_train_mode_standardizes_preactivations() {
        // With gamma=1, beta=0 the BN output has batch mean ~0 and variance
        // ~1 per unit; probe through the xhat cache.
        let mut net = Mlp::new(spec(4, &[8], 3, true), 5).unwrap();
        let x = random_batch(256, 4, 6);
        let (_, cache) = net.forward(&x, Mode::Train).unwrap();
        let xhat = &cache.bn_xhat[0];
        for col in xhat.columns() {
            let mean = col.sum() / col.len() as f64;
            let var = col.iter().map(|&v| (v - mean).powi(2)).sum::<f64>() / col.len() as f64;
            assert!(mean.abs() < 1e-10, "mean {mean}");
            assert!((var - 1.0).abs() < 1e-3, "var {var}");
        }
    }

    #[test]
    fn eval_mode_before_any_train_batch_is_an_error() {
        let net = Mlp::new(spec(4, &[8], 3, true), 7).unwrap();
        let x = random_batch(5, 4, 8);
        assert!(matches!(net.forward_eval(&x), Err(NetError::EvalBeforeTrain)));
        // Without batch-norm there are no running stats to populate.
        let net = Mlp::new(spec(4, &[8], 3, false), 7).unwrap();
        assert!(net.forward_eval(&x).is_ok());
    }

    #[test]
    fn eval_mode_uses_running_stats_and_is_deterministic() {
        let mut net = Mlp::new(spec(4, &[8], 3, true), 9).unwrap();
        for i in 0..10 {
            net.forward(&random_batch(64, 4, 100 + i), Mode::Train).unwrap();
        }
        let x = random_batch(32, 4, 200);
        let a = net.forward_eval(&x).unwrap();
        let b = net.forward_eval(&x).unwrap();
        assert_eq!(a.as_array(), b.as_array());
        let (c, _) = net.forward(&x, Mode::Eval).unwrap();
        assert_eq!(a.as_array(), c.as_array());
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let mut net = Mlp::new(spec(4, &[8], 3, false), 11).unwrap();
        let x = random_batch(5, 3, 12);
        assert!(matches!(
            net.forward(&x, Mode::Train),
            Err(NetError::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn constant_loss_gives_zero_grads() {
        let mut net = Mlp::new(spec(4, &[8], 3, true), 13).unwrap();
        let x = random_batch(16, 4, 14);
        let (p, cache) = net.forward(&x, Mode::Train).unwrap();
        net.backward(&cache, &Array2::zeros(p.as_array().raw_dim())).unwrap();
        for t in net.params_mut() {
            assert!(t.grad.iter().all(|&g| g == 0.0));
        }
    }

    #[test]
    fn affine_backward_matches_closed_form() {
        // Quadratic loss on a bare affine map: L = 0.5*||x W^T + b - T||^2,
        // dW = (y-T)^T x, db = colsum(y-T).
        let x = random_batch(6, 3, 15);
        let w = Tensor::from_data(&[2, 3], random_batch(2, 3, 16).into_raw_vec_and_offset().0);
        let b = Tensor::from_data(&[2], vec![0.3, -0.7]);
        let t = random_batch(6, 2, 17);
        let y = affine(&x, &w, &b);
        let resid = &y - &t;
        let dw_closed = resid.t().dot(&x);
        let db_closed: Vec<f64> = resid.columns().into_iter().map(|c| c.sum()).collect();
        // Numeric check of the same quantities by finite differences.
        let loss = |w: &Tensor, b: &Tensor| -> f64 {
            let y = affine(&x, w, b);
            y.iter().zip(t.iter()).map(|(&a, &b)| 0.5 * (a - b).powi(2)).sum()
        };
        let h = 1e-6;
        let mut w_pert = w.clone();
        for idx in 0..w_pert.data.len() {
            let orig = w_pert.data[idx];
            w_pert.data[idx] = orig + h;
            let up = loss(&w_pert, &b);
            w_pert.data[idx] = orig - h;
            let down = loss(&w_pert, &b);
            w_pert.data[idx] = orig;
            let fd = (up - down) / (2.0 * h);
            assert_relative_eq!(dw_closed.as_slice().unwrap()[idx], fd, max_relative = 1e-6);
        }
        let mut b_pert = Tensor::from_data(&[2], b.data.clone());
        for idx in 0..2 {
            let orig = b_pert.data[idx];
            b_pert.data[idx] = orig + h;
            let up = loss(&w, &b_pert);
            b_pert.data[idx] = orig - h;
            let down = loss(&w, &b_pert);
            b_pert.data[idx] = orig;
            assert_relative_eq!(db_closed[idx], (up - down) / (2.0 * h), max_relative = 1e-6);
        }
    }

    /// Central finite-difference oracle over every parameter of the
    /// network for a quadratic loss on the output probabilities.
    fn fd_check(mut net: Mlp, x: Array2<f64>) {
        let target = {
            let mut rng = ChaCha12Rng::seed_from_u64(42);
            Array2::from_shape_fn((x.nrows(), net.spec().out_dim), |_| rng.gen::<f64>())
        };
        let (p, cache) = net.forward(&x, Mode::Train).unwrap();
        let dprobs = p.as_array() - &target;
        net.zero_grad();
        net.backward(&cache, &dprobs).unwrap();
        let analytic: Vec<Vec<f64>> = net.params_mut().iter().map(|t| t.grad.clone()).collect();
        let h = 1e-6;
        for pi in 0..analytic.len() {
            for idx in 0..analytic[pi].len() {
                let orig = net.params_mut()[pi].data[idx];
                net.params_mut()[pi].data[idx] = orig + h;
                let up: f64 = {
                    let (p, _) = net.forward(&x, Mode::Train).unwrap();
                    p.as_array()
                        .iter()
                        .zip(target.iter())
                        .map(|(&a, &b)| 0.5 * (a - b).powi(2))
                        .sum()
                };
                net.params_mut()[pi].data[idx] = orig - h;
                let down: f64 = {
                    let (p, _) = net.forward(&x, Mode::Train).unwrap();
                    p.as_array()
                        .iter()
                        .zip(target.iter())
                        .map(|(&a, &b)| 0.5 * (a - b).powi(2))
                        .sum()
                };
                net.params_mut()[pi].data[idx] = orig;
                let fd = (up - down) / (2.0 * h);
                let a = analytic[pi][idx];
                // Relative error 1e-5 with an absolute floor of 1e-8: the
                // central difference itself carries ~1e-9 cancellation noise,
                // which dominates for near-zero gradients.
                assert!(
                    (a - fd).abs() < 1e-5 * a.abs().max(fd.abs()) + 1e-8,
                    "param {pi} idx {idx}: analytic {a} vs fd {fd}"
                );
            }
        }
    }

    #[test]
    fn finite_difference_gradient_check_no_batchnorm() {
        let net = Mlp::new(spec(5, &[12, 9], 6, false), 21).unwrap();
        fd_check(net, random_batch(17, 5, 22));
    }

    #[test]
    fn finite_difference_gradient_check_with_batchnorm() {
        let net = Mlp::new(spec(4, &[10, 8], 5, true), 23).unwrap();
        fd_check(net, random_batch(19, 4, 24));
    }

    #[test]
    fn backward_on_eval_cache_is_an_error() {
        let mut net = Mlp::new(spec(4, &[8], 3, true), 25).unwrap();
        let x = random_batch(8, 4, 26);
        net.forward(&x, Mode::Train).unwrap();
        let (p, cache) = net.forward(&x, Mode::Eval).unwrap();
        let d = Array2::zeros(p.as_array().raw_dim());
        assert!(net.backward(&cache, &d).is_err());
    }

    #[test]
    fn init_is_deterministic_per_seed() {
        let a = Mlp::new(spec(6, &[11], 4, true), 77).unwrap();
        let b = Mlp::new(spec(6, &[11], 4, true), 77).unwrap();
        let c = Mlp::new(spec(6, &[11], 4, true), 78).unwrap();
        let flat = |n: &Mlp| {
            n.state_buffers().iter().flat_map(|t| t.data.clone()).collect::<Vec<_>>()
        };
        assert_eq!(flat(&a), flat(&b));
        assert_ne!(flat(&a), flat(&c));
    }

    #[test]
    fn nan_input_is_a_fault() {
        let mut net = Mlp::new(spec(2, &[4], 3, false), 31).unwrap();
        let mut x = random_batch(3, 2, 32);
        x[(1, 1)] = f64::NAN;
        assert!(matches!(net.forward(&x, Mode::Train), Err(NetError::NonFinite(_))));
        let mut net2 = Mlp::new(spec(2, &[4], 3, false), 33).unwrap();
        net2.params_mut()[0].data[0] = f64::INFINITY;
        let x = random_batch(3, 2, 34);
        assert!(net2.forward(&x, Mode::Train).is_err());
    }
}
