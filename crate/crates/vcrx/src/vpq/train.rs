//! The alternating training loop: encoder steps minimize the uniformity
//! and mismatch losses (plus a weighted leakage bound when an eavesdropper
//! stream exists), predictor steps maximize the lower bound on what the
//! eavesdropper can infer. A trailing phase refines the predictor alone
//! against frozen encoders so the reported leakage is not understated.

use ndarray::{Array1, Array2};
use rand::RngCore;

use super::losses::{
    adaptive_lambda2, ema_update, loss_entropy, loss_entropy_grad_rows, loss_mismatch_with_grads,
    mi_vlb_with_grads, mi_vub_with_grads, EmaMarginals,
};
use super::{Lambda2Mode, StepRecord, TrainHistory, VpqConfig, VpqError};
use crate::galois::SymbolSequence;
use crate::netcore::{Mlp, MlpSpec, Mode, NetError, OptState, ProbBatch};
use crate::sources::Source;

/// Output of [`train_vpq`]. `encoder_b` is `None` when the parties share
/// one encoder; `predictor` is `None` when the source has no z stream.
#[derive(Debug)]
pub struct TrainedVpq {
    pub encoder_a: Mlp,
    pub encoder_b: Option<Mlp>,
    pub predictor: Option<Mlp>,
    pub history: TrainHistory,
}

impl TrainedVpq {
    /// Bob's encoder; Alice's when the parties share weights.
    pub fn encoder_bob(&self) -> &Mlp {
        self.encoder_b.as_ref().unwrap_or(&self.encoder_a)
    }
}

/// Hard decision at test time: per row, the symbol with the largest
/// output probability, lowest index on ties.
pub fn quantize(encoder: &Mlp, obs: &Array2<f64>) -> Result<SymbolSequence, VpqError> {
    let probs = encoder.forward_eval(obs)?;
    Ok(argmax_rows(&probs))
}

pub(crate) fn argmax_rows(probs: &ProbBatch) -> SymbolSequence {
    probs
        .as_array()
        .rows()
        .into_iter()
        .map(|row| {
            let mut best = 0usize;
            let mut best_v = row[0];
            for (k, &v) in row.iter().enumerate().skip(1) {
                if v > best_v {
                    best_v = v;
                    best = k;
                }
            }
            best as u8
        })
        .collect()
}

fn net_at(e: NetError, step: usize) -> VpqError {
    match e {
        NetError::NonFinite(_) => VpqError::NonFinite { step },
        other => VpqError::Net(other),
    }
}

fn ensure_finite(values: &[f64], step: usize) -> Result<(), VpqError> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(VpqError::NonFinite { step })
    }
}

fn l2_norm(m: &Array2<f64>) -> f64 {
    m.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Runs Algorithm 1 against `source`. Deterministic for a fixed
/// (config, rng seed) pair; aborts with the offending step index if any
/// loss or activation goes non-finite.
pub fn train_vpq(
    cfg: &VpqConfig,
    source: &dyn Source,
    rng: &mut dyn RngCore,
) -> Result<TrainedVpq, VpqError> {
    cfg.validate()?;
    let (dx, dy, dz) = (source.x_dim(), source.y_dim(), source.z_dim());
    let eve = dz > 0;
    if cfg.shared_encoder && dx != dy {
        return Err(VpqError::BadConfig(format!(
            "shared encoder needs matching observation widths, got {dx} and {dy}"
        )));
    }

    let enc_spec = |in_dim: usize| MlpSpec {
        in_dim,
        hidden_dims: cfg.enc_hidden.clone(),
        out_dim: cfg.q,
        use_batchnorm: cfg.use_batchnorm,
    };
    let mut enc_a = Mlp::new(enc_spec(dx), cfg.init_seed)?;
    let mut enc_b = if cfg.shared_encoder {
        None
    } else {
        Some(Mlp::new(enc_spec(dy), cfg.init_seed.wrapping_add(1))?)
    };
    let mut predictor = if eve {
        Some(Mlp::new(
            MlpSpec {
                in_dim: dz,
                hidden_dims: cfg.pred_hidden.clone(),
                out_dim: cfg.q,
                use_batchnorm: cfg.use_batchnorm,
            },
            cfg.init_seed.wrapping_add(2),
        )?)
    } else {
        None
    };

    let mut opt_a = OptState::new(cfg.optimizer, cfg.lr, &enc_a.params_mut());
    let mut opt_b = enc_b
        .as_mut()
        .map(|e| OptState::new(cfg.optimizer, cfg.lr, &e.params_mut()));
    let mut opt_p = predictor
        .as_mut()
        .map(|p| OptState::new(cfg.optimizer, cfg.lr, &p.params_mut()));

    let mut ema = EmaMarginals::uniform(cfg.q, cfg.alpha)?;
    let mut records = Vec::with_capacity(cfg.steps_max);
    let tail_start = cfg.steps_max - if eve { cfg.steps_predictor_only } else { 0 };

    for step in 0..cfg.steps_max {
        let batch = source.sample(cfg.batch_size, rng);

        if step >= tail_start {
            // Predictor-only refinement: encoders frozen in eval mode.
            let pred = predictor.as_mut().expect("tail runs only with a predictor");
            let z = batch.z.as_ref().expect("eve source emits z");
            let pw = enc_a.forward_eval(&batch.x).map_err(|e| net_at(e, step))?;
            let (pz, cache) = pred.forward(z, Mode::Train).map_err(|e| net_at(e, step))?;
            let (vlb, _, dpz) = mi_vlb_with_grads(&pw, &pz)?;
            let (vub, _) = mi_vub_with_grads(&pw, &pz)?;
            ensure_finite(&[vlb, vub], step)?;
            pred.zero_grad();
            pred.backward(&cache, &dpz.mapv(|g| -g)).map_err(|e| net_at(e, step))?;
            opt_p.as_mut().expect("optimizer exists with predictor").step(pred.params_mut());
            records.push(StepRecord {
                step,
                l_mr: None,
                l_ent: None,
                i_vlb_bits: Some(vlb),
                i_vub_bits: Some(vub),
                lambda2: None,
            });
            continue;
        }

        let (pw, cache_a) = enc_a.forward(&batch.x, Mode::Train).map_err(|e| net_at(e, step))?;
        let (pv, cache_b) = match enc_b.as_mut() {
            Some(e) => e.forward(&batch.y, Mode::Train).map_err(|e| net_at(e, step))?,
            None => enc_a.forward(&batch.y, Mode::Train).map_err(|e| net_at(e, step))?,
        };

        let (l_mr, dmr_w, dmr_v) = loss_mismatch_with_grads(&pw, &pv)?;
        ema = ema_update(&ema, &pw, &pv);
        let l_ent = loss_entropy(&ema);
        ensure_finite(&[l_mr, l_ent], step)?;
        let (gent_w, gent_v): (Array1<f64>, Array1<f64>) =
            loss_entropy_grad_rows(&ema, cfg.batch_size);
        let mut d_w = dmr_w.mapv(|g| g * cfg.lambda1) + &gent_w;
        let d_v = dmr_v.mapv(|g| g * cfg.lambda1) + &gent_v;

        let mut rec = StepRecord {
            step,
            l_mr: Some(l_mr),
            l_ent: Some(l_ent),
            i_vlb_bits: None,
            i_vub_bits: None,
            lambda2: None,
        };

        if let Some(pred) = predictor.as_mut() {
            let z = batch.z.as_ref().expect("eve source emits z");
            // Predictor ascent on the lower bound, then a fresh forward so
            // the encoders face the just-updated adversary.
            let (pz, cache_p) = pred.forward(z, Mode::Train).map_err(|e| net_at(e, step))?;
            let (vlb, _, dpz) = mi_vlb_with_grads(&pw, &pz)?;
            ensure_finite(&[vlb], step)?;
            pred.zero_grad();
            pred.backward(&cache_p, &dpz.mapv(|g| -g)).map_err(|e| net_at(e, step))?;
            opt_p.as_mut().expect("optimizer exists with predictor").step(pred.params_mut());

            let (pz2, _) = pred.forward(z, Mode::Train).map_err(|e| net_at(e, step))?;
            let (vub, dvub_w) = mi_vub_with_grads(&pw, &pz2)?;
            let lambda2 = match cfg.lambda2_mode {
                Lambda2Mode::Fixed(v) => v,
                Lambda2Mode::Adaptive => {
                    // Norms taken on the last encoder layer before softmax;
                    // with a shared encoder both branches feed that layer.
                    let mut g_ab = enc_a.final_weight_grad(&cache_a, &d_w)?;
                    if enc_b.is_none() {
                        g_ab += &enc_a.final_weight_grad(&cache_b, &d_v)?;
                    }
                    let g_vub = enc_a.final_weight_grad(&cache_a, &dvub_w)?;
                    adaptive_lambda2(l2_norm(&g_ab), l2_norm(&g_vub), cfg.delta)
                }
            };
            ensure_finite(&[vub, lambda2], step)?;
            d_w += &dvub_w.mapv(|g| g * lambda2);
            rec.i_vlb_bits = Some(vlb);
            rec.i_vub_bits = Some(vub);
            rec.lambda2 = Some(lambda2);
        }

        enc_a.zero_grad();
        if let Some(e) = enc_b.as_mut() {
            e.zero_grad();
        }
        enc_a.backward(&cache_a, &d_w).map_err(|e| net_at(e, step))?;
        match enc_b.as_mut() {
            Some(e) => e.backward(&cache_b, &d_v).map_err(|e| net_at(e, step))?,
            None => enc_a.backward(&cache_b, &d_v).map_err(|e| net_at(e, step))?,
        }
        opt_a.step(enc_a.params_mut());
        if let (Some(e), Some(o)) = (enc_b.as_mut(), opt_b.as_mut()) {
            o.step(e.params_mut());
        }
        records.push(rec);
    }

    Ok(TrainedVpq {
        encoder_a: enc_a,
        encoder_b: enc_b,
        predictor,
        history: TrainHistory { records },
    })
}
