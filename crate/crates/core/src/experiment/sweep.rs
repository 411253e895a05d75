use std::fs;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::train::run_training;
use crate::checkpoint::write_text;
use crate::error::{Error, Result};

pub const SWEEP_CSV: &str = "sweep_summary.csv";
pub const SWEEP_JSON: &str = "sweep_summary.json";

/// Aggregate over the trials of one regularizing factor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub lambda: f64,
    /// Mean final eval metric over successful trials.
    pub mean: f64,
    /// Sample standard deviation; 0 for a single trial.
    pub sd: f64,
    pub completed: usize,
    pub failures: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub metric: String,
    pub trials: usize,
    pub rows: Vec<SweepRow>,
}

pub fn mean_and_sd(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// One training run per `(λ, trial)`; trial `t` uses seed `base.run.seed + t`
/// and writes to `<output_dir>/lambda{i}_trial{t}`. Failed runs are recorded
/// and the sweep continues.
pub fn run_sweep(base: &ExperimentConfig, lambdas: &[f64], trials: usize) -> Result<SweepSummary> {
    if lambdas.is_empty() {
        return Err(Error::InvalidArgument("sweep needs at least one lambda".into()));
    }
    if trials == 0 {
        return Err(Error::InvalidArgument("sweep needs at least one trial".into()));
    }
    if let Some(l) = lambdas.iter().find(|l| !(l.is_finite() && **l >= 0.0)) {
        return Err(Error::InvalidArgument(format!(
            "lambda must be finite and >= 0, got {l}"
        )));
    }
    base.validate()?;
    let root = base.run.output_dir.clone();
    fs::create_dir_all(&root).map_err(|e| Error::io(&root, e))?;

    let mut metric = String::new();
    let mut rows = Vec::with_capacity(lambdas.len());
    for (i, &lambda) in lambdas.iter().enumerate() {
        let mut finals = Vec::new();
        let mut failures = Vec::new();
        for t in 0..trials {
            let mut cfg = base.clone();
            cfg.regularizer.lambda = lambda;
            cfg.run.seed = base.run.seed.wrapping_add(t as u64);
            cfg.run.output_dir = run_dir(&root, i, t);
            match run_training(&cfg) {
                Ok(o) => {
                    metric = o.summary.eval_metric_name.clone();
                    finals.push(o.summary.final_eval_metric);
                }
                Err(e) => failures.push(format!("trial {t}: {e}")),
            }
        }
        let (mean, sd) = mean_and_sd(&finals);
        rows.push(SweepRow {
            lambda,
            mean,
            sd,
            completed: finals.len(),
            failures,
        });
    }
    let summary = SweepSummary { metric, trials, rows };
    write_text(&root.join(SWEEP_JSON), &serde_json::to_string_pretty(&summary)?)?;
    let mut csv = String::from("lambda,mean,sd,completed,failed\n");
    for r in &summary.rows {
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            r.lambda,
            r.mean,
            r.sd,
            r.completed,
            r.failures.len()
        ));
    }
    write_text(&root.join(SWEEP_CSV), &csv)?;
    Ok(summary)
}

fn run_dir(root: &std::path::Path, i: usize, t: usize) -> PathBuf {
    root.join(format!("lambda{i}_trial{t}"))
}
