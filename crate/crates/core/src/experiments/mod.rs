//! Experiment drivers: the chain moment sweep, contraction and
//! counterexample certificates, the herding rate study and the randomized
//! property suite. Each driver returns CSV rows plus pass/fail checks;
//! [`run`] writes both to the output directory.

mod certify;
mod chain;
mod config;
mod herding_run;
mod properties;

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub use certify::{run_contraction_suite, run_counterexample_check, CertRow};
pub use chain::{run_chain_experiment, ChainRow, K2_ANALYTIC_TOLERANCE};
pub use config::{
    ContractionConfig, CounterexampleConfig, ExperimentConfig, ExperimentKind, HerdingConfig, NamedLearner,
    PropertyConfig,
};
pub use herding_run::{run_herding_experiment, HerdingRow};
pub use properties::{run_property_suite, PropertyRow};

/// Environment variable holding the worker count for parallel runs.
pub const WORKERS_ENV: &str = "MMDRL_WORKERS";

/// Worker count from [`WORKERS_ENV`]; unset or empty means the rayon default.
pub fn workers_from_env() -> Result<Option<usize>> {
    match std::env::var(WORKERS_ENV) {
        Ok(v) if v.trim().is_empty() => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(0) | Err(_) => Err(Error::Config(format!(
                "{WORKERS_ENV} must be a positive integer, got {v:?}"
            ))),
            Ok(n) => Ok(Some(n)),
        },
        Err(std::env::VarError::NotPresent) => Ok(None),
        Err(e) => Err(Error::Config(format!("{WORKERS_ENV}: {e}"))),
    }
}

/// Seed for one unit of work, derived from the master seed, a tag and indices.
pub fn derive_seed(master: u64, tag: &str, parts: &[u64]) -> u64 {
    let mut h = Sha256::new();
    h.update(master.to_le_bytes());
    h.update((tag.len() as u64).to_le_bytes());
    h.update(tag.as_bytes());
    for p in parts {
        h.update(p.to_le_bytes());
    }
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("sha256 digest has 32 bytes"))
}

/// One pass/fail certification.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Check {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }
}

/// Rows and checks produced by one driver.
#[derive(Debug, Clone)]
pub struct Outcome<R> {
    pub rows: Vec<R>,
    pub checks: Vec<Check>,
    /// Extra human-readable lines for the summary.
    pub notes: Vec<String>,
}

impl<R: Serialize> Outcome<R> {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn csv_bytes(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for row in &self.rows {
            w.serialize(row)?;
        }
        w.into_inner().map_err(|e| Error::Io(io::Error::other(e.to_string())))
    }
}

/// What [`run`] wrote.
#[derive(Debug, Clone)]
pub struct Report {
    pub kind: ExperimentKind,
    pub checks: Vec<Check>,
    pub csv_path: PathBuf,
    pub summary_path: PathBuf,
    pub summary: String,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

fn summary_text<R>(cfg: &ExperimentConfig, outcome: &Outcome<R>, csv_name: &str) -> Result<String> {
    let mut s = String::new();
    let fmt = |e: std::fmt::Error| Error::Io(io::Error::other(e));
    writeln!(s, "experiment: {}", cfg.experiment.name()).map_err(fmt)?;
    writeln!(s, "seed: {}", cfg.seed).map_err(fmt)?;
    writeln!(s, "config_hash: {}", cfg.config_hash()?).map_err(fmt)?;
    writeln!(s, "rows: {} ({csv_name})", outcome.rows.len()).map_err(fmt)?;
    for note in &outcome.notes {
        writeln!(s, "{note}").map_err(fmt)?;
    }
    for c in &outcome.checks {
        let tag = if c.passed { "PASS" } else { "FAIL" };
        writeln!(s, "{tag} {}: {}", c.name, c.detail).map_err(fmt)?;
    }
    let ok = outcome.checks.iter().all(|c| c.passed);
    writeln!(s, "overall: {}", if ok { "PASS" } else { "FAIL" }).map_err(fmt)?;
    Ok(s)
}

fn write_outputs<R: Serialize>(cfg: &ExperimentConfig, outcome: Outcome<R>, out_dir: &Path) -> Result<Report> {
    fs::create_dir_all(out_dir)?;
    let stem = cfg.experiment.file_stem();
    let csv_name = format!("{stem}.csv");
    let csv_path = out_dir.join(&csv_name);
    fs::write(&csv_path, outcome.csv_bytes()?)?;
    let summary = summary_text(cfg, &outcome, &csv_name)?;
    let summary_path = out_dir.join(format!("{stem}_summary.txt"));
    fs::write(&summary_path, &summary)?;
    Ok(Report {
        kind: cfg.experiment,
        checks: outcome.checks,
        csv_path,
        summary_path,
        summary,
    })
}

fn in_pool<T: Send>(workers: Option<usize>, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = workers {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    pool.install(f)
}

/// Runs the configured experiment and writes `<kind>.csv` and
/// `<kind>_summary.txt` to `cfg.out_dir`.
pub fn run(cfg: &ExperimentConfig) -> Result<Report> {
    cfg.validate()?;
    let out_dir = cfg
        .out_dir
        .clone()
        .ok_or_else(|| Error::Config("no output directory configured".into()))?;
    in_pool(cfg.workers, || match cfg.experiment {
        ExperimentKind::ChainEval => write_outputs(cfg, run_chain_experiment(cfg)?, &out_dir),
        ExperimentKind::Contraction => write_outputs(cfg, run_contraction_suite(cfg)?, &out_dir),
        ExperimentKind::Counterexample => write_outputs(cfg, run_counterexample_check(cfg)?, &out_dir),
        ExperimentKind::Herding => write_outputs(cfg, run_herding_experiment(cfg)?, &out_dir),
        ExperimentKind::Properties => write_outputs(cfg, run_property_suite(cfg)?, &out_dir),
    })
}
