// SPDX-License-Identifier: Apache-2.0

//! Experiment harness: load a TOML configuration, run it, write the results.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod compare;
pub mod config;
pub mod error;
pub mod experiments;
pub mod output;
pub mod table;

use std::path::{Path, PathBuf};
use std::time::SystemTime;

use config::{ExperimentConfig, ExperimentKind};
use error::CliError;
use output::{RunMeta, Written};

pub const OUT_DIR_ENV: &str = "OQS_OUT_DIR";

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub out: Option<PathBuf>,
    pub workers: Option<usize>,
    pub seed: Option<u64>,
    /// Reject configurations of a different kind.
    pub expect: Option<ExperimentKind>,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub written: Written,
    pub rows: usize,
    pub failures: usize,
}

/// Output directory: `--out`, then the config's `output`, then
/// `$OQS_OUT_DIR`, then `./out`; the last two get a per-kind subdirectory.
pub fn output_dir(cfg: &ExperimentConfig, out: Option<&Path>) -> PathBuf {
    if let Some(p) = out.or(cfg.output.as_deref()) {
        return p.to_path_buf();
    }
    let base = std::env::var_os(OUT_DIR_ENV).map_or_else(|| PathBuf::from("out"), PathBuf::from);
    base.join(cfg.kind.name())
}

pub fn run_config(mut cfg: ExperimentConfig, opts: &RunOptions) -> Result<RunReport, CliError> {
    if let Some(k) = opts.expect {
        if k != cfg.kind {
            return Err(CliError::Config(format!("config is a {} experiment, not {}", cfg.kind.name(), k.name())));
        }
    }
    if let Some(seed) = opts.seed {
        cfg.seed = seed;
    }
    let started = SystemTime::now();
    let table = oqs_core::par::with_workers(opts.workers, || experiments::run(&cfg, cfg.seed))?;
    let dir = output_dir(&cfg, opts.out.as_deref());
    let meta = RunMeta { seed: cfg.seed, workers: opts.workers, started };
    let written = output::write_outputs(&dir, &cfg, &table, &meta)?;
    Ok(RunReport { written, rows: table.rows.len(), failures: table.failures() })
}

pub fn run_file(path: &Path, opts: &RunOptions) -> Result<RunReport, CliError> {
    run_config(ExperimentConfig::load(path)?, opts)
}
