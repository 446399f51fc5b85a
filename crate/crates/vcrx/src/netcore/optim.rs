use super::Tensor;

/// Adam applies coupled L2 only through gradients (none here); AdamW adds
/// decoupled weight decay at update time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OptKind {
    Adam,
    AdamW { weight_decay: f64 },
}

/// Adam/AdamW state over a fixed parameter list; `step` must be fed the
/// same tensors, in the same order, as `new`.
#[derive(Debug, Clone)]
pub struct OptState {
    kind: OptKind,
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl OptState {
    pub fn new(kind: OptKind, lr: f64, params: &[&mut Tensor]) -> Self {
        OptState {
            kind,
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: params.iter().map(|t| vec![0.0; t.len()]).collect(),
            v: params.iter().map(|t| vec![0.0; t.len()]).collect(),
        }
    }

    pub fn lr(&self) -> f64 {
        self.lr
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One bias-corrected update from the accumulated gradients.
    pub fn step(&mut self, mut params: Vec<&mut Tensor>) {
        assert_eq!(params.len(), self.m.len(), "parameter list changed shape");
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        let wd = match self.kind {
            OptKind::Adam => 0.0,
            OptKind::AdamW { weight_decay } => weight_decay,
        };
        for (pi, tensor) in params.iter_mut().enumerate() {
            assert_eq!(tensor.len(), self.m[pi].len(), "parameter {pi} changed size");
            let (m, v) = (&mut self.m[pi], &mut self.v[pi]);
            for i in 0..tensor.len() {
                let g = tensor.grad[i];
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g;
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g * g;
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                let w = tensor.data[i];
                tensor.data[i] = w - self.lr * (m_hat / (v_hat.sqrt() + self.eps) + wd * w);
            }
        }
    }
}
