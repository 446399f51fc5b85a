//! Run configuration: a TOML document resolved against a preset. Unknown
//! keys are errors, exactly one source section must be present, and the
//! seed is mandatory.

use std::fmt;
use std::fs;
use std::path::Path;

use serde::Deserialize;
use sha2::{Digest as _, Sha256};

use super::CliError;
use crate::netcore::OptKind;
use crate::sources::{
    EveMode, FadingConfig, FadingSource, RamapSource, RamapSourceConfig, Source,
};
use crate::vpq::{Lambda2Mode, VpqConfig};

/// First eight bytes of the SHA-256 of the raw configuration file. Every
/// output artifact carries this value (16 hex digits in text formats).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConfigDigest(pub [u8; 8]);

impl ConfigDigest {
    pub fn of_bytes(bytes: &[u8]) -> Self {
        let hash = Sha256::digest(bytes);
        let mut d = [0u8; 8];
        d.copy_from_slice(&hash[..8]);
        Self(d)
    }
}

impl fmt::Display for ConfigDigest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.0 {
            write!(f, "{b:02x}")?;
        }
        Ok(())
    }
}

/// Which physical source the run draws from.
#[derive(Debug, Clone, PartialEq)]
pub enum SourceConfig {
    Fading(FadingConfig),
    Ramap(RamapSourceConfig),
}

impl SourceConfig {
    /// (x, y, z) row widths implied by the configuration; z is 0 when the
    /// eavesdropper is absent. Cheap, unlike `build` for radar maps.
    pub fn dims(&self) -> (usize, usize, usize) {
        match self {
            SourceConfig::Fading(c) => {
                let z = if c.eve == EveMode::Absent { 0 } else { c.dim };
                (c.dim, c.dim, z)
            }
            SourceConfig::Ramap(c) => {
                let cells = c.ra.n_range_bins * c.ra.n_beams;
                let z = if c.eve == EveMode::Absent { 0 } else { 2 };
                (cells, cells, z)
            }
        }
    }

    /// Instantiates the source. For radar maps this runs the calibration
    /// pass that fits the standardization statistics.
    pub fn build(&self) -> Result<Box<dyn Source>, CliError> {
        match self {
            SourceConfig::Fading(c) => Ok(Box::new(FadingSource::new(c.clone())?)),
            SourceConfig::Ramap(c) => Ok(Box::new(RamapSource::new(c.clone())?)),
        }
    }
}

/// Settings shared by the eval and keys commands.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalSettings {
    /// Held-out rows used for metrics (capped by the dataset size).
    pub test_size: usize,
    /// Key-experiment rounds per message length.
    pub trials: usize,
    /// Reed-Solomon message lengths to sweep, strictly increasing.
    pub rs_m: Vec<usize>,
    /// Batch size for the chunked MI-bound averages.
    pub mi_batch: usize,
}

/// A fully resolved run: preset defaults plus file overrides.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    /// Rows the gen command writes.
    pub rows: usize,
    pub source: SourceConfig,
    pub vpq: VpqConfig,
    pub eval: EvalSettings,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RootToml {
    seed: u64,
    preset: Option<String>,
    rows: Option<usize>,
    source: SourceToml,
    vpq: Option<VpqToml>,
    eval: Option<EvalToml>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SourceToml {
    fading: Option<FadingToml>,
    ramap: Option<RamapToml>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FadingToml {
    p_dbm: Option<f64>,
    n1_dbm: Option<f64>,
    n2_dbm: Option<f64>,
    n3_dbm: Option<f64>,
    dim: Option<usize>,
    eve: Option<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RamapToml {
    delta_f: Option<f64>,
    n_sc: Option<usize>,
    n_ifft: Option<usize>,
    n_beams: Option<usize>,
    sector_deg: Option<f64>,
    array_elems: Option<usize>,
    n_range_bins: Option<usize>,
    r_min_m: Option<f64>,
    r_max_m: Option<f64>,
    rcs_min_dbsm: Option<f64>,
    rcs_max_dbsm: Option<f64>,
    n_clutter: Option<usize>,
    clutter_gain_min_db: Option<f64>,
    clutter_gain_max_db: Option<f64>,
    snr_db: Option<f64>,
    eve: Option<String>,
    delta_d_m: Option<f64>,
    delta_theta_deg: Option<f64>,
    calib_scenes: Option<usize>,
    calib_seed: Option<u64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct VpqToml {
    q: Option<usize>,
    lambda1: Option<f64>,
    lambda2: Option<Lambda2Toml>,
    delta: Option<f64>,
    alpha: Option<f64>,
    steps_max: Option<usize>,
    steps_predictor_only: Option<usize>,
    batch_size: Option<usize>,
    shared_encoder: Option<bool>,
    lr: Option<f64>,
    optimizer: Option<String>,
    weight_decay: Option<f64>,
    enc_hidden: Option<Vec<usize>>,
    pred_hidden: Option<Vec<usize>>,
    batchnorm: Option<bool>,
    init_seed: Option<u64>,
}

/// lambda2 is either a fixed number or the string "adaptive".
#[derive(Deserialize)]
#[serde(untagged)]
enum Lambda2Toml {
    Fixed(f64),
    Mode(String),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct EvalToml {
    test_size: Option<usize>,
    trials: Option<usize>,
    rs_m: Option<Vec<usize>>,
    mi_batch: Option<usize>,
}

fn parse_eve(s: Option<&str>) -> Result<EveMode, CliError> {
    match s {
        None | Some("absent") => Ok(EveMode::Absent),
        Some("uncorrelated") => Ok(EveMode::Uncorrelated),
        Some("correlated") => Ok(EveMode::Correlated),
        Some(other) => Err(CliError::Config(format!(
            "eve must be \"absent\", \"uncorrelated\", or \"correlated\", got {other:?}"
        ))),
    }
}

macro_rules! override_fields {
    ($dst:expr, $src:expr, $($field:ident),+ $(,)?) => {
        $(if let Some(v) = $src.$field {
            $dst.$field = v;
        })+
    };
}

fn resolve_fading(t: FadingToml) -> Result<FadingConfig, CliError> {
    let mut cfg = FadingConfig::default();
    override_fields!(cfg, t, p_dbm, n1_dbm, n2_dbm, n3_dbm, dim);
    cfg.eve = parse_eve(t.eve.as_deref())?;
    cfg.validate()?;
    Ok(cfg)
}

fn resolve_ramap(t: RamapToml) -> Result<RamapSourceConfig, CliError> {
    let mut cfg = RamapSourceConfig::default();
    override_fields!(cfg.ra, t, delta_f, n_sc, n_ifft, n_beams, sector_deg, array_elems, n_range_bins);
    override_fields!(
        cfg, t, r_min_m, r_max_m, rcs_min_dbsm, rcs_max_dbsm, n_clutter,
        clutter_gain_min_db, clutter_gain_max_db, snr_db, delta_d_m, delta_theta_deg,
        calib_scenes, calib_seed,
    );
    cfg.eve = parse_eve(t.eve.as_deref())?;
    cfg.validate()?;
    Ok(cfg)
}

fn resolve_vpq(mut cfg: VpqConfig, t: Option<VpqToml>, seed: u64) -> Result<VpqConfig, CliError> {
    // Tie initialization to the run seed unless the file pins it.
    cfg.init_seed = seed;
    let Some(t) = t else { return Ok(cfg) };
    override_fields!(
        cfg, t, q, lambda1, delta, alpha, steps_max, steps_predictor_only, batch_size,
        shared_encoder, lr, enc_hidden, pred_hidden, init_seed,
    );
    if let Some(b) = t.batchnorm {
        cfg.use_batchnorm = b;
    }
    if let Some(l2) = t.lambda2 {
        cfg.lambda2_mode = match l2 {
            Lambda2Toml::Fixed(v) => Lambda2Mode::Fixed(v),
            Lambda2Toml::Mode(s) if s == "adaptive" => Lambda2Mode::Adaptive,
            Lambda2Toml::Mode(s) => {
                return Err(CliError::Config(format!(
                    "lambda2 must be a number or \"adaptive\", got {s:?}"
                )))
            }
        };
    }
    match (t.optimizer.as_deref(), t.weight_decay) {
        (None, None) => {}
        (Some("adam"), None) => cfg.optimizer = OptKind::Adam,
        (Some("adamw"), wd) => {
            cfg.optimizer = OptKind::AdamW {
                weight_decay: wd.unwrap_or(0.01),
            }
        }
        (Some("adam"), Some(_)) | (None, Some(_)) => {
            return Err(CliError::Config(
                "weight_decay requires optimizer = \"adamw\"".into(),
            ))
        }
        (Some(other), _) => {
            return Err(CliError::Config(format!(
                "optimizer must be \"adam\" or \"adamw\", got {other:?}"
            )))
        }
    }
    Ok(cfg)
}

fn validate_rs_m(ms: &[usize]) -> Result<(), CliError> {
    if ms.is_empty() {
        return Err(CliError::Config("rs_m must list at least one message length".into()));
    }
    if ms[0] == 0 {
        return Err(CliError::Config("rs_m entries must be at least 1".into()));
    }
    if !ms.windows(2).all(|w| w[0] < w[1]) {
        return Err(CliError::Config(
            "rs_m message lengths must be strictly increasing".into(),
        ));
    }
    Ok(())
}

/// Parses a --rs-m override, a comma-separated list such as "1,3,5,7".
pub fn parse_rs_m_list(s: &str) -> Result<Vec<usize>, CliError> {
    let ms = s
        .split(',')
        .map(|tok| {
            tok.trim().parse::<usize>().map_err(|_| {
                CliError::Config(format!("--rs-m entry {:?} is not a positive integer", tok.trim()))
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    validate_rs_m(&ms)?;
    Ok(ms)
}

fn resolve_eval(t: Option<EvalToml>, batch_size: usize) -> Result<EvalSettings, CliError> {
    let t = t.unwrap_or(EvalToml {
        test_size: None,
        trials: None,
        rs_m: None,
        mi_batch: None,
    });
    let eval = EvalSettings {
        test_size: t.test_size.unwrap_or(81_920),
        trials: t.trials.unwrap_or(10_000),
        rs_m: t.rs_m.unwrap_or_else(|| vec![1, 3, 5, 7, 9, 11, 13]),
        mi_batch: t.mi_batch.unwrap_or(batch_size),
    };
    if eval.test_size == 0 {
        return Err(CliError::Config("eval.test_size must be at least 1".into()));
    }
    if eval.trials == 0 {
        return Err(CliError::Config("eval.trials must be at least 1".into()));
    }
    if eval.mi_batch < 2 {
        return Err(CliError::Config("eval.mi_batch must be at least 2".into()));
    }
    validate_rs_m(&eval.rs_m)?;
    Ok(eval)
}

/// Resolves configuration text. `seed_override` replaces the file's seed
/// (and the derived init_seed, unless the file pins init_seed itself).
pub fn parse_run(text: &str, seed_override: Option<u64>) -> Result<RunConfig, CliError> {
    let root: RootToml = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
    let seed = seed_override.unwrap_or(root.seed);
    let base = match root.preset.as_deref().unwrap_or("desk") {
        "desk" => VpqConfig::desk(),
        "paper" => VpqConfig::paper(),
        other => {
            return Err(CliError::Config(format!(
                "preset must be \"desk\" or \"paper\", got {other:?}"
            )))
        }
    };
    let source = match (root.source.fading, root.source.ramap) {
        (Some(f), None) => SourceConfig::Fading(resolve_fading(f)?),
        (None, Some(r)) => SourceConfig::Ramap(resolve_ramap(r)?),
        (Some(_), Some(_)) => {
            return Err(CliError::Config(
                "config declares both source.fading and source.ramap; keep exactly one".into(),
            ))
        }
        (None, None) => {
            return Err(CliError::Config(
                "config needs exactly one source section: source.fading or source.ramap".into(),
            ))
        }
    };
    let vpq = resolve_vpq(base, root.vpq, seed)?;
    vpq.validate()?;
    let eval = resolve_eval(root.eval, vpq.batch_size)?;
    let rows = root.rows.unwrap_or(100_000);
    if rows == 0 {
        return Err(CliError::Config("rows must be at least 1".into()));
    }
    Ok(RunConfig {
        seed,
        rows,
        source,
        vpq,
        eval,
    })
}

/// Reads and resolves a configuration file, returning the run together
/// with the digest of the file's raw bytes.
pub fn load_run(
    path: &Path,
    seed_override: Option<u64>,
) -> Result<(RunConfig, ConfigDigest), CliError> {
    let bytes = fs::read(path)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let digest = ConfigDigest::of_bytes(&bytes);
    let text = String::from_utf8(bytes)
        .map_err(|_| CliError::Config(format!("{} is not UTF-8", path.display())))?;
    Ok((parse_run(&text, seed_override)?, digest))
}
