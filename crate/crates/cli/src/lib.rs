//! Experiment runner for the nonlocal absorption laboratory.
//!
//! An experiment is a TOML file naming a kind, the kernel, grid, datum and
//! sample times, and the checks to evaluate. A run writes CSV curves and a
//! JSON report into a fresh directory; the directory appears only once the
//! run has finished.

// `!(x > 0.0)` is used on purpose so that NaN is rejected
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod experiment;
pub mod report;

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Deserialize;

pub use config::{Experiment, ExperimentConfig, ExperimentKind};
pub use report::{Report, SuiteReport};

/// Default output directory when neither `--out` nor the config names one.
pub const DEFAULT_OUT: &str = "out";

#[derive(Debug, thiserror::Error)]
pub enum LabError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] nonlocal_core::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Base output directory; each experiment writes to `<out>/<name>`.
    pub out: Option<PathBuf>,
    /// Treat failed audits as failures.
    pub strict: bool,
}

/// Where the run of `exp` is written.
pub fn output_dir(exp: &Experiment, options: &RunOptions) -> PathBuf {
    match (&options.out, &exp.config.output) {
        (Some(base), _) => base.join(&exp.config.name),
        (None, Some(dir)) => exp.base_dir.join(dir),
        (None, None) => Path::new(DEFAULT_OUT).join(&exp.config.name),
    }
}

/// Moves a finished staging directory into place, replacing any old run.
fn publish(staging: tempfile::TempDir, target: &Path) -> Result<(), LabError> {
    if target.exists() {
        fs::remove_dir_all(target)?;
    }
    fs::rename(staging.path(), target)?;
    // the staging path no longer exists; dropping the guard is a no-op
    drop(staging);
    Ok(())
}

fn staging_in(target: &Path) -> Result<tempfile::TempDir, LabError> {
    let parent = match target.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&parent)?;
    Ok(tempfile::Builder::new().prefix(".staging-").tempdir_in(parent)?)
}

/// Validates and runs one config. Nothing is written unless the run
/// completes.
pub fn run_config(path: &Path, options: &RunOptions) -> Result<(Report, PathBuf), LabError> {
    let exp = Experiment::load(path)?;
    run_experiment(&exp, options)
}

pub fn run_experiment(exp: &Experiment, options: &RunOptions) -> Result<(Report, PathBuf), LabError> {
    let target = output_dir(exp, options);
    let staging = staging_in(&target)?;
    let report = experiment::execute(exp, staging.path(), options.strict)?;
    fs::write(staging.path().join("report.json"), serde_json::to_string_pretty(&report)? + "\n")?;
    publish(staging, &target)?;
    Ok((report, target))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SuiteFile {
    name: Option<String>,
    #[serde(default)]
    configs: Vec<PathBuf>,
}

/// Runs every config listed in a suite file (concurrently) and writes the
/// aggregate report to `<out>/<suite name>.json`.
pub fn run_suite(path: &Path, options: &RunOptions) -> Result<(SuiteReport, PathBuf), LabError> {
    let text = fs::read_to_string(path)
        .map_err(|e| LabError::Config(format!("cannot read {}: {e}", path.display())))?;
    let suite: SuiteFile = toml::from_str(&text).map_err(|e| LabError::Config(e.to_string()))?;
    let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let name = suite.name.unwrap_or_else(|| {
        path.file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "suite".to_string())
    });
    let entries: Vec<report::SuiteEntry> = suite
        .configs
        .par_iter()
        .map(|config| {
            let label = config.display().to_string();
            match run_config(&base_dir.join(config), options) {
                Ok((report, _)) => report::SuiteEntry {
                    config: label,
                    passed: report.passed,
                    report: Some(report),
                    error: None,
                },
                Err(e) => report::SuiteEntry {
                    config: label,
                    passed: false,
                    report: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    let report = SuiteReport {
        name: name.clone(),
        passed: entries.iter().all(|e| e.passed),
        entries,
    };
    let out = options.out.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    fs::create_dir_all(&out)?;
    let target = out.join(format!("{name}.json"));
    let mut file = tempfile::NamedTempFile::new_in(&out)?;
    std::io::Write::write_all(&mut file, (serde_json::to_string_pretty(&report)? + "\n").as_bytes())?;
    file.persist(&target).map_err(|e| LabError::Io(e.error))?;
    Ok((report, target))
}
