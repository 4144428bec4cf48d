//! Experiment driver: JSON configs, cached pipeline stages and CSV outputs.

pub mod artifacts;
pub mod config;
pub mod pipeline;

use rbno_core::{Error, Result};
use serde::Serialize;

pub use config::ExperimentConfig;
pub use pipeline::{Experiment, Split};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Solve,
    Pod,
    Reduce,
    Train,
    Eval,
    Rates,
    Ratios,
}

/// Runs one command in a pool of `cfg.workers` threads and returns a short
/// JSON summary.
pub fn run(cmd: Command, cfg: ExperimentConfig) -> Result<serde_json::Value> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers.max(1))
        .build()
        .map_err(|e| Error::Internal(e.to_string()))?;
    pool.install(|| {
        let exp = Experiment::new(cfg)?;
        let detail = match cmd {
            Command::Solve => {
                let rows = exp.solve()?;
                serde_json::json!({ "samples": rows.len(), "mean_loss": mean(rows.iter().map(|r| r.loss)) })
            }
            Command::Pod => {
                let out = exp.pod()?;
                serde_json::json!({ "rank": out.basis.rank(), "basis_hash": out.basis.hash() })
            }
            Command::Reduce => {
                let out = exp.reduce()?;
                serde_json::json!({ "samples": out.rows.len(), "mean_rb_loss": mean(out.rows.iter().map(|r| r.rb_loss)) })
            }
            Command::Train => {
                let out = exp.train()?;
                serde_json::json!({ "best_iter": out.trained.best_iter, "best_val": out.trained.best_val })
            }
            Command::Eval => {
                let out = exp.eval()?;
                serde_json::json!({ "summary": out.summary })
            }
            Command::Rates => {
                let (_, fits) = exp.rates()?;
                serde_json::json!({ "fits": fits })
            }
            Command::Ratios => {
                let rows = exp.ratios()?;
                serde_json::json!({ "samples": rows.len(), "mean_loss_over_error_sq": mean(rows.iter().map(|r| r.loss_over_error_sq)) })
            }
        };
        Ok(serde_json::json!({ "command": cmd, "out": exp.out(), "result": detail }))
    })
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let v: Vec<f64> = values.collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

/// Machine-readable error record printed by the binary.
pub fn error_json(err: &Error) -> serde_json::Value {
    serde_json::json!({ "error": { "kind": err.kind(), "message": err.to_string() } })
}
