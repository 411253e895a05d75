//! Configuration-driven experiments: dense or regularized training with
//! scheduled pruning, lottery-ticket retraining, λ sweeps and exports.

mod config;
mod heatmap;
mod metrics;
mod reg;
mod seeds;
mod sweep;
mod task;
mod train;

pub use config::{
    ExperimentConfig, ModelConfig, PruneScope, PruningConfig, RegularizerConfig, RegularizerMode, RunConfig, TaskConfig,
};
pub use heatmap::export_heatmap;
pub use metrics::{read_metrics, MetricsRecord, MetricsWriter, RunSummary, METRICS_HEADER};
pub use seeds::{derive_seed, Stream};
pub use sweep::{mean_and_sd, run_sweep, SweepRow, SweepSummary, SWEEP_CSV, SWEEP_JSON};
pub use train::{
    evaluate_initial, evaluate_run, run_lottery, run_training, DebugRecord, EvalReport, RunOutcome, CHECKPOINT_DIR,
    COEFFICIENTS_DIR, CONFIG_FILE, DEBUG_DIR, LAST_GOOD_DIR, METRICS_FILE, SUMMARY_FILE,
};
