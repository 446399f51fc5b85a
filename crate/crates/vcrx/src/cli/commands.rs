//! The four pipeline commands. All are deterministic functions of the
//! (config, seed, input files) triple; rerunning one reproduces its
//! outputs byte for byte.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use ndarray::s;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use super::config::{load_run, ConfigDigest, RunConfig};
use super::dataset::{read_dataset, write_dataset, Dataset, DatasetSource};
use super::CliError;
use crate::eval::{key_experiment, test_metrics, KeyExperimentRow, MetricsRecord};
use crate::netcore::{load_model, save_model, Mlp};
use crate::vpq::{train_vpq, TrainHistory, TrainedVpq};

/// Stream id for the batch-replay RNG. The key experiment numbers its
/// trial streams from 1 on the same seed, so training randomness lives in
/// a disjoint stream.
const TRAIN_STREAM: u64 = 0x5452_4149_4e42_4154;

/// Draws `rows` samples from the configured source and writes the dataset.
pub fn cmd_gen(config_path: &Path, out_path: &Path, seed: Option<u64>) -> Result<(), CliError> {
    let (cfg, digest) = load_run(config_path, seed)?;
    let source = cfg.source.build()?;
    let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed);
    let batch = source.sample(cfg.rows, &mut rng);
    write_dataset(out_path, &batch, cfg.seed, digest)?;
    println!(
        "gen: {} rows (x {}, y {}, z {}) -> {} [seed {} digest {}]",
        batch.rows(),
        batch.x.ncols(),
        batch.y.ncols(),
        batch.z.as_ref().map_or(0, |z| z.ncols()),
        out_path.display(),
        cfg.seed,
        digest,
    );
    Ok(())
}

/// Files written by a training run.
#[derive(Debug)]
pub struct TrainOutputs {
    pub model_paths: Vec<PathBuf>,
    pub history_path: PathBuf,
    pub trained: TrainedVpq,
}

/// Trains on a dataset file and writes model files plus the history CSV.
/// A non-finite loss aborts with an error (and a nonzero process exit).
pub fn cmd_train(
    config_path: &Path,
    data_path: &Path,
    model_stem: &Path,
    log_path: &Path,
    seed: Option<u64>,
) -> Result<TrainOutputs, CliError> {
    let (cfg, digest) = load_run(config_path, seed)?;
    let ds = read_dataset(data_path)?;
    check_dims(&cfg, &ds)?;
    let source = DatasetSource::new(ds);
    let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed);
    rng.set_stream(TRAIN_STREAM);
    let trained = train_vpq(&cfg.vpq, &source, &mut rng)?;

    let meta = |role: &str| {
        vec![
            ("seed".to_string(), cfg.seed.to_string()),
            ("config_digest".to_string(), digest.to_string()),
            ("role".to_string(), role.to_string()),
        ]
    };
    let mut model_paths = Vec::new();
    match &trained.encoder_b {
        None => {
            let p = with_suffix(model_stem, ".encoder.bin");
            save_model(&trained.encoder_a, &p, &meta("encoder"))?;
            model_paths.push(p);
        }
        Some(enc_b) => {
            let pa = with_suffix(model_stem, ".encoder_alice.bin");
            save_model(&trained.encoder_a, &pa, &meta("encoder_alice"))?;
            let pb = with_suffix(model_stem, ".encoder_bob.bin");
            save_model(enc_b, &pb, &meta("encoder_bob"))?;
            model_paths.push(pa);
            model_paths.push(pb);
        }
    }
    if let Some(pred) = &trained.predictor {
        let p = with_suffix(model_stem, ".predictor.bin");
        save_model(pred, &p, &meta("predictor"))?;
        model_paths.push(p);
    }
    write_history(log_path, &trained.history, cfg.seed, digest)?;
    if let Some(last) = trained.history.records.last() {
        println!(
            "train: {} steps, final l_mr {} l_ent {} i_vlb {} i_vub {} -> {}",
            trained.history.records.len(),
            fmt_opt(last.l_mr),
            fmt_opt(last.l_ent),
            fmt_opt(last.i_vlb_bits),
            fmt_opt(last.i_vub_bits),
            log_path.display(),
        );
    }
    Ok(TrainOutputs {
        model_paths,
        history_path: log_path.to_path_buf(),
        trained,
    })
}

/// Computes held-out metrics and writes the metrics document. With --mi,
/// both a predictor model and an eavesdropper stream must be present.
pub fn cmd_eval(
    config_path: &Path,
    data_path: &Path,
    model_stem: &Path,
    predictor_path: Option<&Path>,
    mi: bool,
    out_path: &Path,
    seed: Option<u64>,
) -> Result<MetricsRecord, CliError> {
    let (cfg, digest) = load_run(config_path, seed)?;
    let ds = read_dataset(data_path)?;
    let (enc_a, enc_b) = load_encoders(model_stem)?;
    check_models(&cfg, &ds, &enc_a, enc_b.as_ref())?;
    let n = cfg.eval.test_size.min(ds.rows());
    let x = ds.x.slice(s![..n, ..]).to_owned();
    let y = ds.y.slice(s![..n, ..]).to_owned();
    let (predictor, z) = if mi {
        let z_full = ds.z.as_ref().ok_or_else(|| {
            CliError::Config("--mi needs a dataset with an eavesdropper stream".into())
        })?;
        let p = predictor_path.ok_or_else(|| {
            CliError::Config("--mi needs a predictor model: pass --predictor".into())
        })?;
        let (pred, _) = load_model(p)?;
        check_predictor(&cfg, &ds, &pred)?;
        (Some(pred), Some(z_full.slice(s![..n, ..]).to_owned()))
    } else {
        (None, None)
    };
    let metrics = test_metrics(
        &enc_a,
        enc_b.as_ref().unwrap_or(&enc_a),
        predictor.as_ref(),
        &x,
        &y,
        z.as_ref(),
        cfg.eval.mi_batch,
    )?;
    write_metrics(out_path, &metrics, cfg.seed, digest)?;
    println!(
        "eval: n {} h_w {} h_v {} agree {} i_vlb {} i_vub {} -> {}",
        metrics.n_test,
        metrics.h_w_bits,
        metrics.h_v_bits,
        metrics.agree_rate,
        fmt_opt(metrics.i_vlb_bits),
        fmt_opt(metrics.i_vub_bits),
        out_path.display(),
    );
    Ok(metrics)
}

/// Runs the key experiment and writes the key CSV. The dataset supplies
/// both the metrics sample (first eval.test_size rows) and the trial pool.
#[allow(clippy::too_many_arguments)]
pub fn cmd_keys(
    config_path: &Path,
    data_path: &Path,
    model_stem: &Path,
    predictor_path: Option<&Path>,
    rs_m: Option<Vec<usize>>,
    trials: Option<usize>,
    out_path: &Path,
    seed: Option<u64>,
) -> Result<Vec<KeyExperimentRow>, CliError> {
    let (cfg, digest) = load_run(config_path, seed)?;
    let ds = read_dataset(data_path)?;
    let (enc_a, enc_b) = load_encoders(model_stem)?;
    check_models(&cfg, &ds, &enc_a, enc_b.as_ref())?;
    let predictor = match (&ds.z, predictor_path) {
        (None, None) => None,
        (None, Some(_)) => {
            return Err(CliError::Config(
                "a predictor was given but the dataset has no eavesdropper stream".into(),
            ))
        }
        (Some(_), None) => {
            return Err(CliError::Config(
                "dataset has an eavesdropper stream; pass --predictor so the leakage bound includes the MI estimate".into(),
            ))
        }
        (Some(_), Some(p)) => {
            let (pred, _) = load_model(p)?;
            check_predictor(&cfg, &ds, &pred)?;
            Some(pred)
        }
    };
    let n = cfg.eval.test_size.min(ds.rows());
    let x = ds.x.slice(s![..n, ..]).to_owned();
    let y = ds.y.slice(s![..n, ..]).to_owned();
    let z = ds.z.as_ref().map(|z| z.slice(s![..n, ..]).to_owned());
    let metrics = test_metrics(
        &enc_a,
        enc_b.as_ref().unwrap_or(&enc_a),
        predictor.as_ref(),
        &x,
        &y,
        z.as_ref(),
        cfg.eval.mi_batch,
    )?;
    let ms = rs_m.unwrap_or_else(|| cfg.eval.rs_m.clone());
    let trials = trials.unwrap_or(cfg.eval.trials);
    let source = DatasetSource::new(ds);
    let rows = key_experiment(
        &enc_a,
        enc_b.as_ref().unwrap_or(&enc_a),
        &source,
        &metrics,
        &ms,
        trials,
        cfg.seed,
    )?;
    write_keys_csv(out_path, &rows, cfg.seed, digest)?;
    for r in &rows {
        println!(
            "keys: m {} rate {} mismatch {} (se {}) failures {} leakage {}",
            r.m,
            r.key_rate_bits,
            r.key_mismatch_rate,
            r.mismatch_se,
            r.decode_failure_rate,
            r.leakage_bound_bits,
        );
    }
    Ok(rows)
}

/// Appends a suffix to a path without treating it as an extension swap.
fn with_suffix(stem: &Path, suffix: &str) -> PathBuf {
    let mut s = stem.as_os_str().to_os_string();
    s.push(suffix);
    PathBuf::from(s)
}

/// Loads the encoder pair written by train: a single shared file, or the
/// alice/bob pair.
fn load_encoders(stem: &Path) -> Result<(Mlp, Option<Mlp>), CliError> {
    let shared = with_suffix(stem, ".encoder.bin");
    if shared.exists() {
        let (m, _) = load_model(&shared)?;
        return Ok((m, None));
    }
    let pa = with_suffix(stem, ".encoder_alice.bin");
    let pb = with_suffix(stem, ".encoder_bob.bin");
    if pa.exists() && pb.exists() {
        let (a, _) = load_model(&pa)?;
        let (b, _) = load_model(&pb)?;
        return Ok((a, Some(b)));
    }
    Err(CliError::Config(format!(
        "no model at stem {}: expected {} or {} plus {}",
        stem.display(),
        shared.display(),
        pa.display(),
        pb.display(),
    )))
}

fn check_dims(cfg: &RunConfig, ds: &Dataset) -> Result<(), CliError> {
    let (dx, dy, dz) = cfg.source.dims();
    let got = (ds.x.ncols(), ds.y.ncols(), ds.z_dim());
    if got != (dx, dy, dz) {
        return Err(CliError::Data(format!(
            "dataset dims (x {}, y {}, z {}) do not match the config source (x {dx}, y {dy}, z {dz})",
            got.0, got.1, got.2,
        )));
    }
    Ok(())
}

fn check_models(
    cfg: &RunConfig,
    ds: &Dataset,
    enc_a: &Mlp,
    enc_b: Option<&Mlp>,
) -> Result<(), CliError> {
    check_dims(cfg, ds)?;
    let q = cfg.vpq.q;
    for (name, enc, width) in [
        ("alice encoder", Some(enc_a), ds.x.ncols()),
        ("bob encoder", enc_b, ds.y.ncols()),
    ] {
        let Some(enc) = enc else { continue };
        let spec = enc.spec();
        if spec.in_dim != width {
            return Err(CliError::Data(format!(
                "{name} expects {} inputs but the dataset rows have {width}",
                spec.in_dim,
            )));
        }
        if spec.out_dim != q {
            return Err(CliError::Data(format!(
                "{name} has alphabet {} but the config says q = {q}",
                spec.out_dim,
            )));
        }
    }
    Ok(())
}

fn check_predictor(cfg: &RunConfig, ds: &Dataset, pred: &Mlp) -> Result<(), CliError> {
    let spec = pred.spec();
    if spec.in_dim != ds.z_dim() {
        return Err(CliError::Data(format!(
            "predictor expects {} inputs but the eavesdropper rows have {}",
            spec.in_dim,
            ds.z_dim(),
        )));
    }
    if spec.out_dim != cfg.vpq.q {
        return Err(CliError::Data(format!(
            "predictor has alphabet {} but the config says q = {}",
            spec.out_dim, cfg.vpq.q,
        )));
    }
    Ok(())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

fn write_history(
    path: &Path,
    history: &TrainHistory,
    seed: u64,
    digest: ConfigDigest,
) -> Result<(), CliError> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "# seed={seed} config_digest={digest}")?;
    writeln!(w, "step,l_mr,l_ent,i_vlb_bits,i_vub_bits,lambda2")?;
    for r in &history.records {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            r.step,
            fmt_opt(r.l_mr),
            fmt_opt(r.l_ent),
            fmt_opt(r.i_vlb_bits),
            fmt_opt(r.i_vub_bits),
            fmt_opt(r.lambda2),
        )?;
    }
    w.flush()?;
    Ok(())
}

fn write_metrics(
    path: &Path,
    m: &MetricsRecord,
    seed: u64,
    digest: ConfigDigest,
) -> Result<(), CliError> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "seed = {seed}")?;
    writeln!(w, "config_digest = {digest}")?;
    writeln!(w, "n_test = {}", m.n_test)?;
    writeln!(w, "h_w_bits = {}", m.h_w_bits)?;
    writeln!(w, "h_v_bits = {}", m.h_v_bits)?;
    writeln!(w, "agree_rate = {}", m.agree_rate)?;
    if let Some(v) = m.i_vlb_bits {
        writeln!(w, "i_vlb_bits = {v}")?;
    }
    if let Some(v) = m.i_vub_bits {
        writeln!(w, "i_vub_bits = {v}")?;
    }
    w.flush()?;
    Ok(())
}

fn write_keys_csv(
    path: &Path,
    rows: &[KeyExperimentRow],
    seed: u64,
    digest: ConfigDigest,
) -> Result<(), CliError> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "# seed={seed} config_digest={digest}")?;
    writeln!(
        w,
        "m,key_rate_bits,key_mismatch_rate,decode_failure_rate,leakage_bound_bits,trials"
    )?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            r.m,
            r.key_rate_bits,
            r.key_mismatch_rate,
            r.decode_failure_rate,
            r.leakage_bound_bits,
            r.trials,
        )?;
    }
    w.flush()?;
    Ok(())
}
