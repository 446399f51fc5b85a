//! Command-line pipeline: `gen` draws a dataset from a configured source,
//! `train` fits the quantizer encoders (and, with an eavesdropper stream,
//! the adversarial predictor), `eval` reports held-out metrics, and `keys`
//! runs the sketch-and-recover sweep.
//!
//! A run is described by one TOML file. Every artifact a command writes
//! (dataset, model, history CSV, metrics document, key CSV) embeds the run
//! seed and a digest of that file, so outputs can always be traced back to
//! the exact configuration that produced them.

mod commands;
mod config;
mod dataset;

pub use commands::{cmd_eval, cmd_gen, cmd_keys, cmd_train, TrainOutputs};
pub use config::{
    load_run, parse_rs_m_list, parse_run, ConfigDigest, EvalSettings, RunConfig, SourceConfig,
};
pub use dataset::{read_dataset, write_dataset, Dataset, DatasetSource};

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("config: {0}")]
    Config(String),
    #[error("data: {0}")]
    Data(String),
    #[error(transparent)]
    Source(#[from] crate::sources::SourceError),
    #[error(transparent)]
    Net(#[from] crate::netcore::NetError),
    #[error(transparent)]
    Vpq(#[from] crate::vpq::VpqError),
    #[error(transparent)]
    Eval(#[from] crate::eval::EvalError),
}

/// Worker threads this process may use: the VCRX_THREADS cap, or 1 when
/// unset. All computation is currently single-threaded, so any positive
/// cap is honored; the variable still must parse.
pub fn thread_cap() -> Result<usize, CliError> {
    match std::env::var("VCRX_THREADS") {
        Err(std::env::VarError::NotPresent) => Ok(1),
        Err(e) => Err(CliError::Config(format!("VCRX_THREADS: {e}"))),
        Ok(raw) => parse_thread_cap(&raw).map(|cap| cap.min(1)),
    }
}

fn parse_thread_cap(raw: &str) -> Result<usize, CliError> {
    match raw.trim().parse::<usize>() {
        Ok(n) if n >= 1 => Ok(n),
        _ => Err(CliError::Config(format!(
            "VCRX_THREADS must be a positive integer, got {raw:?}"
        ))),
    }
}

#[derive(Parser)]
#[command(
    name = "vcrx",
    version,
    about = "Secret common randomness extraction: probabilistic quantizers with Reed-Solomon reconciliation"
)]
struct CliArgs {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a dataset from the configured source and write it to a file.
    Gen {
        /// Run configuration (TOML).
        #[arg(long)]
        config: PathBuf,
        /// Output dataset path.
        #[arg(long)]
        out: PathBuf,
        /// Override the seed from the config file.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Train encoders (and predictor, if the data has an eavesdropper
    /// stream) on a dataset file.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Training dataset, as written by gen.
        #[arg(long)]
        data: PathBuf,
        /// Model stem: writes <stem>.encoder.bin for a shared encoder,
        /// otherwise <stem>.encoder_alice.bin and <stem>.encoder_bob.bin,
        /// plus <stem>.predictor.bin when a predictor was trained.
        #[arg(long)]
        model: PathBuf,
        /// Training history CSV path.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Evaluate trained models on a held-out dataset.
    Eval {
        #[arg(long)]
        config: PathBuf,
        /// Held-out dataset path.
        #[arg(long)]
        data: PathBuf,
        /// Model stem, as passed to train.
        #[arg(long)]
        model: PathBuf,
        /// Predictor model path; required with --mi.
        #[arg(long)]
        predictor: Option<PathBuf>,
        /// Also estimate the leakage bounds I_VLB and I_VUB.
        #[arg(long)]
        mi: bool,
        /// Output metrics document path.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Sweep Reed-Solomon message lengths through the key experiment.
    Keys {
        #[arg(long)]
        config: PathBuf,
        /// Dataset supplying both the metrics sample and the trial pool.
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        model: PathBuf,
        /// Predictor model path; required when the dataset has an
        /// eavesdropper stream (the leakage column needs I_VUB).
        #[arg(long)]
        predictor: Option<PathBuf>,
        /// Comma-separated message lengths, e.g. "1,3,5,7,9,11,13";
        /// defaults to the config's eval.rs_m list.
        #[arg(long = "rs-m")]
        rs_m: Option<String>,
        /// Trials per message length; defaults to eval.trials.
        #[arg(long)]
        trials: Option<usize>,
        /// Output key CSV path.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
}

/// Parses std::env::args and dispatches; returns the process exit code.
pub fn run() -> i32 {
    let args = CliArgs::parse();
    let outcome = (|| -> Result<(), CliError> {
        let _threads = thread_cap()?;
        match args.command {
            Command::Gen { config, out, seed } => cmd_gen(&config, &out, seed),
            Command::Train {
                config,
                data,
                model,
                out,
                seed,
            } => cmd_train(&config, &data, &model, &out, seed).map(|_| ()),
            Command::Eval {
                config,
                data,
                model,
                predictor,
                mi,
                out,
                seed,
            } => cmd_eval(&config, &data, &model, predictor.as_deref(), mi, &out, seed)
                .map(|_| ()),
            Command::Keys {
                config,
                data,
                model,
                predictor,
                rs_m,
                trials,
                out,
                seed,
            } => {
                let ms = rs_m.as_deref().map(parse_rs_m_list).transpose()?;
                cmd_keys(
                    &config,
                    &data,
                    &model,
                    predictor.as_deref(),
                    ms,
                    trials,
                    &out,
                    seed,
                )
                .map(|_| ())
            }
        }
    })();
    match outcome {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thread_cap_parses_positive_integers() {
        assert_eq!(parse_thread_cap("4").unwrap(), 4);
        assert_eq!(parse_thread_cap(" 1 ").unwrap(), 1);
    }

    #[test]
    fn thread_cap_rejects_zero_and_garbage() {
        assert!(parse_thread_cap("0").is_err());
        assert!(parse_thread_cap("lots").is_err());
        assert!(parse_thread_cap("").is_err());
    }

    #[test]
    fn cli_args_parse_all_subcommands() {
        CliArgs::try_parse_from(["vcrx", "gen", "--config", "c.toml", "--out", "d.bin"])
            .unwrap();
        CliArgs::try_parse_from([
            "vcrx", "train", "--config", "c.toml", "--data", "d.bin", "--model", "m",
            "--out", "h.csv", "--seed", "7",
        ])
        .unwrap();
        CliArgs::try_parse_from([
            "vcrx", "eval", "--config", "c.toml", "--data", "d.bin", "--model", "m",
            "--predictor", "m.predictor.bin", "--mi", "--out", "metrics.txt",
        ])
        .unwrap();
        CliArgs::try_parse_from([
            "vcrx", "keys", "--config", "c.toml", "--data", "d.bin", "--model", "m",
            "--rs-m", "1,3,5", "--trials", "100", "--out", "keys.csv",
        ])
        .unwrap();
    }

    #[test]
    fn unknown_flag_is_rejected() {
        assert!(CliArgs::try_parse_from(["vcrx", "gen", "--config", "c", "--out", "o", "--frob", "1"]).is_err());
    }
}
