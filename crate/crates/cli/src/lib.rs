//! File formats, experiments and the batch driver for the gradient lattice
//! model; the numerics live in `gradlat_core`.

pub mod artifacts;
pub mod checkpoint;
pub mod config;
pub mod experiments;

use std::path::{Path, PathBuf};
use std::time::Instant;

use gradlat_core::diagnostics::{DiagnosticReport, Verdict};

use crate::artifacts::{exit_status, report_table, write_file, Manifest, ReportEntry};
use crate::checkpoint::CheckpointError;
use crate::config::{ConfigError, Experiment, RunConfig};
use crate::experiments::Outcome;

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error("checkpoint model (α, β, ε, d, N) differs from the configuration")]
    ModelMismatch,
    #[error("--resume only continues the sample experiment, not {0}")]
    ResumeExperiment(Experiment),
    #[error(transparent)]
    Sampler(#[from] gradlat_core::sampler::SamplerError),
    #[error(transparent)]
    Stable(#[from] gradlat_core::stable::StableError),
    #[error(transparent)]
    Lattice(#[from] gradlat_core::lattice::LatticeError),
    #[error(transparent)]
    Scaling(#[from] gradlat_core::scaling::ScalingError),
    #[error(transparent)]
    Rcm(#[from] gradlat_core::rcm::RcmError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// What to do with a validated configuration.
#[derive(Clone, Debug, PartialEq)]
pub enum Action {
    /// Run the configured experiment; `sweeps` overrides the chain length of
    /// the sample experiment.
    Fresh { sweeps: Option<u64> },
    /// Continue a sample-experiment checkpoint by `sweeps` sweeps.
    Resume { checkpoint: PathBuf, sweeps: u64 },
}

#[derive(Debug)]
pub struct RunSummary {
    pub verdict: Verdict,
    pub exit_status: i32,
    pub out_dir: PathBuf,
    pub artifacts: Vec<PathBuf>,
    pub reports: Vec<(usize, DiagnosticReport)>,
}

/// Chain index encoded in a checkpoint file name `chain-K.ckpt`.
fn chain_index(path: &Path) -> usize {
    path.file_stem()
        .and_then(|s| s.to_str())
        .and_then(|s| s.strip_prefix("chain-"))
        .and_then(|s| s.parse().ok())
        .unwrap_or(0)
}

pub fn execute(cfg: &RunConfig, action: &Action) -> Result<Outcome, RunError> {
    match action {
        Action::Resume { checkpoint, sweeps } => {
            if cfg.experiment != Experiment::Sample {
                return Err(RunError::ResumeExperiment(cfg.experiment));
            }
            let state = checkpoint::load(checkpoint)?;
            experiments::resume(cfg, chain_index(checkpoint), state, *sweeps)
        }
        Action::Fresh { sweeps } => match cfg.experiment {
            Experiment::Sample => experiments::sample(cfg, *sweeps),
            Experiment::StableCheck => experiments::stable_check(cfg),
            Experiment::Ward => experiments::ward(cfg),
            Experiment::Moments => experiments::moments(cfg),
            Experiment::Scaling => experiments::scaling_experiment(cfg),
            Experiment::Rcm => experiments::rcm_experiment(cfg),
        },
    }
}

/// Runs the experiment and writes its CSV tables, report table, checkpoints
/// and `manifest.json` into the output directory. Nothing is written unless
/// the experiment itself succeeds.
pub fn run(cfg: &RunConfig, action: &Action) -> Result<RunSummary, RunError> {
    let start = Instant::now();
    let outcome = execute(cfg, action)?;
    let out = cfg.output.dir.clone();
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| RunError::Io { path, source }
    };
    std::fs::create_dir_all(&out).map_err(io(&out))?;
    let mut artifacts = Vec::new();
    let mut all_reports = outcome.reports.clone();
    all_reports.extend(outcome.details.iter().cloned());
    let mut tables = outcome.tables.clone();
    tables.push(report_table(cfg, &all_reports));
    for t in &tables {
        let name = format!("{}.csv", t.name);
        artifacts.push(write_file(&out, &name, &t.to_bytes()).map_err(io(&out.join(&name)))?);
    }
    let mut checkpoints = Vec::new();
    for (name, state) in &outcome.checkpoints {
        let path = out.join(name);
        checkpoint::save(&path, state)?;
        checkpoints.push(name.clone());
    }
    let verdict = outcome.verdict();
    let status = exit_status(verdict);
    let manifest = Manifest {
        experiment: cfg.experiment.name(),
        seed: cfg.seed,
        config_hash: cfg.hash(),
        config: cfg,
        versions: artifacts::versions(),
        wall_time_seconds: start.elapsed().as_secs_f64(),
        artifacts: artifacts
            .iter()
            .filter_map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
            .collect(),
        checkpoints,
        resumed_from: match action {
            Action::Resume { checkpoint, .. } => Some(checkpoint.display().to_string()),
            Action::Fresh { .. } => None,
        },
        provenance: outcome.provenance.clone(),
        reports: all_reports.iter().map(|(n, r)| ReportEntry::new(*n, r)).collect(),
        verdict: verdict.as_str(),
        exit_status: status,
    };
    let json = serde_json::to_vec_pretty(&manifest).expect("manifest serialises");
    artifacts.push(write_file(&out, "manifest.json", &json).map_err(io(&out.join("manifest.json")))?);
    Ok(RunSummary {
        verdict,
        exit_status: status,
        out_dir: out,
        artifacts,
        reports: outcome.reports,
    })
}
