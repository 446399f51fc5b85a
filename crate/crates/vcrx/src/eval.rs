//! Test-set metrics and the end-to-end key experiment: held-out entropy
//! and agreement for the trained quantizers, batch-averaged leakage
//! bounds, and the sketch-and-recover sweep over Reed-Solomon message
//! lengths.

use ndarray::{Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use statrs::distribution::{Binomial, ChiSquared, ContinuousCDF, DiscreteCDF};
use thiserror::Error;

use crate::galois::{Field, FieldError, RsError, RsParams};
use crate::netcore::{Mlp, NetError};
use crate::sketch::{leakage_bound_bits, make_sketch, recover, key_rate_bits, KeyPair, SketchError};
use crate::sources::Source;
use crate::vpq::{entropy_bits, mi_vlb, mi_vub, quantize, VpqError};

/// Rows processed per forward pass when scanning a dataset.
const EVAL_CHUNK: usize = 4096;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("empty dataset")]
    EmptyDataset,
    #[error("eavesdropper observations present but no predictor was given")]
    MissingPredictor,
    #[error("sample of {len} symbols is below the minimum {need}")]
    UndersizedSample { len: usize, need: usize },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Vpq(#[from] VpqError),
    #[error(transparent)]
    Sketch(#[from] SketchError),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Rs(#[from] RsError),
}

/// Held-out quantizer metrics. MI bounds are absent when no eavesdropper
/// stream exists.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRecord {
    pub h_w_bits: f64,
    pub h_v_bits: f64,
    pub agree_rate: f64,
    pub i_vlb_bits: Option<f64>,
    pub i_vub_bits: Option<f64>,
    pub n_test: usize,
}

/// One sweep point of the key experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct KeyExperimentRow {
    pub m: usize,
    pub key_rate_bits: f64,
    pub key_mismatch_rate: f64,
    /// Standard error of the mismatch rate estimate.
    pub mismatch_se: f64,
    pub decode_failure_rate: f64,
    pub leakage_bound_bits: f64,
    pub trials: usize,
}

/// Entropy (bits) of the dataset-averaged encoder output distribution.
/// Averaging the distributions over the whole set gives a far lower-noise
/// marginal than counting hard symbols.
pub fn empirical_entropy_bits(encoder: &Mlp, x: &Array2<f64>) -> Result<f64, EvalError> {
    if x.nrows() == 0 {
        return Err(EvalError::EmptyDataset);
    }
    let q = encoder.spec().out_dim;
    let mut marginal = vec![0.0f64; q];
    for chunk in x.axis_chunks_iter(Axis(0), EVAL_CHUNK) {
        let probs = encoder.forward_eval(&chunk.to_owned())?;
        for row in probs.as_array().rows() {
            for (acc, &p) in marginal.iter_mut().zip(row) {
                *acc += p;
            }
        }
    }
    let n = x.nrows() as f64;
    for v in &mut marginal {
        *v /= n;
    }
    Ok(entropy_bits(&marginal))
}

/// Fraction of paired rows whose hard symbols agree.
pub fn agreement_rate(
    enc_a: &Mlp,
    enc_b: &Mlp,
    x: &Array2<f64>,
    y: &Array2<f64>,
) -> Result<f64, EvalError> {
    if x.nrows() == 0 {
        return Err(EvalError::EmptyDataset);
    }
    if x.nrows() != y.nrows() {
        return Err(EvalError::Shape(format!(
            "paired datasets disagree: {} vs {} rows",
            x.nrows(),
            y.nrows()
        )));
    }
    let mut agree = 0usize;
    for (cx, cy) in x
        .axis_chunks_iter(Axis(0), EVAL_CHUNK)
        .zip(y.axis_chunks_iter(Axis(0), EVAL_CHUNK))
    {
        let w = quantize(enc_a, &cx.to_owned())?;
        let v = quantize(enc_b, &cy.to_owned())?;
        agree += w.iter().zip(&v).filter(|(a, b)| a == b).count();
    }
    Ok(agree as f64 / x.nrows() as f64)
}

/// Batch-averaged variational bounds over a test set, in bits. The upper
/// bound's all-pairs term makes it batch-size dependent, so the set is
/// scanned in `batch_size` chunks and the per-chunk values are averaged
/// weighted by rows; a trailing single-row chunk is skipped.
pub fn mi_bounds_on_test(
    encoder: &Mlp,
    predictor: &Mlp,
    x: &Array2<f64>,
    z: &Array2<f64>,
    batch_size: usize,
) -> Result<(f64, f64), EvalError> {
    if x.nrows() == 0 {
        return Err(EvalError::EmptyDataset);
    }
    if x.nrows() != z.nrows() {
        return Err(EvalError::Shape(format!(
            "paired datasets disagree: {} vs {} rows",
            x.nrows(),
            z.nrows()
        )));
    }
    if batch_size < 2 {
        return Err(EvalError::Shape("mi batch size must be at least 2".into()));
    }
    let (mut vlb_acc, mut vub_acc, mut rows) = (0.0, 0.0, 0usize);
    for (cx, cz) in x
        .axis_chunks_iter(Axis(0), batch_size)
        .zip(z.axis_chunks_iter(Axis(0), batch_size))
    {
        if cx.nrows() < 2 {
            continue;
        }
        let pw = encoder.forward_eval(&cx.to_owned())?;
        let pz = predictor.forward_eval(&cz.to_owned())?;
        let b = cx.nrows() as f64;
        vlb_acc += mi_vlb(&pw, &pz)? * b;
        vub_acc += mi_vub(&pw, &pz)? * b;
        rows += cx.nrows();
    }
    if rows == 0 {
        return Err(EvalError::EmptyDataset);
    }
    Ok((vlb_acc / rows as f64, vub_acc / rows as f64))
}

/// Full held-out metrics sweep. `z` and `predictor` go together: MI
/// bounds are computed when both are present, and eavesdropper data
/// without a predictor is an error.
pub fn test_metrics(
    enc_a: &Mlp,
    enc_b: &Mlp,
    predictor: Option<&Mlp>,
    x: &Array2<f64>,
    y: &Array2<f64>,
    z: Option<&Array2<f64>>,
    mi_batch: usize,
) -> Result<MetricsRecord, EvalError> {
    let h_w_bits = empirical_entropy_bits(enc_a, x)?;
    let h_v_bits = empirical_entropy_bits(enc_b, y)?;
    let agree_rate = agreement_rate(enc_a, enc_b, x, y)?;
    let (i_vlb_bits, i_vub_bits) = match z {
        None => (None, None),
        Some(z) => {
            let pred = predictor.ok_or(EvalError::MissingPredictor)?;
            let (lb, ub) = mi_bounds_on_test(enc_a, pred, x, z, mi_batch)?;
            (Some(lb), Some(ub))
        }
    };
    Ok(MetricsRecord {
        h_w_bits,
        h_v_bits,
        agree_rate,
        i_vlb_bits,
        i_vub_bits,
        n_test: x.nrows(),
    })
}

/// Pr{Bin(n, p) > t}, the exact mismatch probability of bounded-distance
/// decoding under i.i.d. symbol errors.
pub fn binomial_tail_gt(n: usize, t: usize, p: f64) -> f64 {
    if p <= 0.0 {
        return 0.0;
    }
    if p >= 1.0 {
        return if t < n { 1.0 } else { 0.0 };
    }
    let d = Binomial::new(p, n as u64).expect("validated p");
    1.0 - d.cdf(t as u64)
}

/// Sketch-and-recover sweep: `trials` rounds per message length, each
/// drawing q-1 fresh observation pairs, quantizing once, and reusing the
/// symbols across every m (common random numbers, so the measured
/// mismatch is exactly monotone in m). The leakage bound column applies
/// the sketch formula to the supplied held-out metrics.
pub fn key_experiment(
    enc_a: &Mlp,
    enc_b: &Mlp,
    source: &dyn Source,
    metrics: &MetricsRecord,
    ms: &[usize],
    trials: usize,
    seed: u64,
) -> Result<Vec<KeyExperimentRow>, EvalError> {
    if trials == 0 || ms.is_empty() {
        return Err(EvalError::EmptyDataset);
    }
    let q = enc_a.spec().out_dim;
    if !q.is_power_of_two() {
        return Err(EvalError::Shape(format!("alphabet {q} is not a field order")));
    }
    let field = Field::new(q.trailing_zeros())?;
    let n = field.q() - 1;
    let params: Vec<RsParams> = ms
        .iter()
        .map(|&m| RsParams::new(field.clone(), m))
        .collect::<Result<_, _>>()?;

    let mut mismatches = vec![0u64; ms.len()];
    let mut failures = vec![0u64; ms.len()];
    for trial in 0..trials {
        // Independent per-trial stream; trials could run in any order or
        // in parallel and reproduce identically.
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        rng.set_stream(trial as u64 + 1);
        let batch = source.sample(n, &mut rng);
        let w = quantize(enc_a, &batch.x)?;
        let v = quantize(enc_b, &batch.y)?;
        for (idx, rs) in params.iter().enumerate() {
            let msg: Vec<u8> = (0..rs.m()).map(|_| rng.gen_range(0..q) as u8).collect();
            let codeword = rs.encode(&msg)?;
            let sketch = make_sketch(&w, &codeword, rs)?;
            let l_bob = recover(&v, &sketch)?;
            let pair = KeyPair { k_alice: msg, l_bob };
            if pair.l_bob.is_err() {
                failures[idx] += 1;
            }
            if !pair.is_match() {
                mismatches[idx] += 1;
            }
        }
    }

    let leak = leakage_bound_bits(
        metrics.h_w_bits,
        metrics.i_vub_bits.unwrap_or(0.0),
        q,
        n,
    )?;
    let t = trials as f64;
    Ok(params
        .iter()
        .zip(ms)
        .enumerate()
        .map(|(idx, (rs, &m))| {
            let rate = mismatches[idx] as f64 / t;
            KeyExperimentRow {
                m,
                key_rate_bits: key_rate_bits(rs),
                key_mismatch_rate: rate,
                mismatch_se: (rate * (1.0 - rate) / t).sqrt(),
                decode_failure_rate: failures[idx] as f64 / t,
                leakage_bound_bits: leak,
                trials,
            }
        })
        .collect())
}

/// Pearson chi-square test of symbol uniformity over q cells. Returns the
/// statistic and its upper-tail p-value at q-1 degrees of freedom.
pub fn chi_square_uniformity(symbols: &[u8], q: usize) -> Result<(f64, f64), EvalError> {
    let need = 5 * q;
    if symbols.len() < need {
        return Err(EvalError::UndersizedSample { len: symbols.len(), need });
    }
    let mut counts = vec![0u64; q];
    for &s in symbols {
        if s as usize >= q {
            return Err(EvalError::Shape(format!("symbol {s} outside alphabet {q}")));
        }
        counts[s as usize] += 1;
    }
    let expected = symbols.len() as f64 / q as f64;
    let stat: f64 = counts
        .iter()
        .map(|&c| {
            let d = c as f64 - expected;
            d * d / expected
        })
        .sum();
    let dist = ChiSquared::new((q - 1) as f64).expect("q >= 2");
    Ok((stat, 1.0 - dist.cdf(stat)))
}
