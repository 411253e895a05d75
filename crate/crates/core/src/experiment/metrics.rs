use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const METRICS_HEADER: &str = "epoch,batch,train_loss,penalty_value,sparsity_percent,eval_metric,wall_time_s,seed";

/// One row of `metrics.csv`.
///
/// `train_loss` is the full objective `criterion + λ·penalty` on the batch
/// just trained; `penalty_value` is the unscaled penalty summed over hidden
/// matrices. `batch` counts batches from the start of the run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub epoch: usize,
    pub batch: usize,
    pub train_loss: f64,
    pub penalty_value: f64,
    pub sparsity_percent: f64,
    pub eval_metric: f64,
    pub wall_time_s: f64,
    pub seed: u64,
}

impl MetricsRecord {
    pub fn is_finite(&self) -> bool {
        [
            self.train_loss,
            self.penalty_value,
            self.sparsity_percent,
            self.eval_metric,
            self.wall_time_s,
        ]
        .iter()
        .all(|v| v.is_finite())
    }

    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.epoch,
            self.batch,
            self.train_loss,
            self.penalty_value,
            self.sparsity_percent,
            self.eval_metric,
            self.wall_time_s,
            self.seed
        )
    }

    pub fn parse_csv_row(line: &str) -> Result<Self> {
        let f: Vec<&str> = line.trim_end().split(',').collect();
        if f.len() != 8 {
            return Err(Error::InvalidArgument(format!(
                "metrics row needs 8 fields, got {}",
                f.len()
            )));
        }
        let bad = |what: &str| Error::InvalidArgument(format!("bad {what} in metrics row {line:?}"));
        let real = |i: usize, what: &str| f[i].parse::<f64>().map_err(|_| bad(what));
        Ok(MetricsRecord {
            epoch: f[0].parse().map_err(|_| bad("epoch"))?,
            batch: f[1].parse().map_err(|_| bad("batch"))?,
            train_loss: real(2, "train_loss")?,
            penalty_value: real(3, "penalty_value")?,
            sparsity_percent: real(4, "sparsity_percent")?,
            eval_metric: real(5, "eval_metric")?,
            wall_time_s: real(6, "wall_time_s")?,
            seed: f[7].parse().map_err(|_| bad("seed"))?,
        })
    }
}

/// Streams rows to a CSV file, flushing after each.
pub struct MetricsWriter {
    out: BufWriter<File>,
    path: std::path::PathBuf,
}

impl MetricsWriter {
    pub fn create(path: &Path) -> Result<Self> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = MetricsWriter {
            out: BufWriter::new(file),
            path: path.to_path_buf(),
        };
        w.line(METRICS_HEADER)?;
        Ok(w)
    }

    pub fn write(&mut self, r: &MetricsRecord) -> Result<()> {
        self.line(&r.to_csv_row())
    }

    fn line(&mut self, s: &str) -> Result<()> {
        writeln!(self.out, "{s}")
            .and_then(|_| self.out.flush())
            .map_err(|e| Error::io(&self.path, e))
    }
}

pub fn read_metrics(path: &Path) -> Result<Vec<MetricsRecord>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = BufReader::new(file).lines();
    let header = lines
        .next()
        .transpose()
        .map_err(|e| Error::io(path, e))?
        .unwrap_or_default();
    if header.trim_end() != METRICS_HEADER {
        return Err(Error::InvalidArgument(format!("unexpected metrics header {header:?}")));
    }
    lines
        .map(|l| {
            l.map_err(|e| Error::io(path, e))
                .and_then(|l| MetricsRecord::parse_csv_row(&l))
        })
        .collect()
}

/// Final numbers of a run, written as `summary.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub task: String,
    pub eval_metric_name: String,
    pub final_eval_metric: f64,
    pub final_train_loss: f64,
    pub final_penalty_value: f64,
    pub final_sparsity_percent: f64,
    pub batches: usize,
    pub seed: u64,
    pub regularizer: String,
    pub lambda: f64,
    pub pruned_tensors: Vec<String>,
    pub lottery: bool,
    pub wall_time_s: f64,
    /// Set when the run stopped on a non-finite loss or gradient.
    pub aborted: Option<String>,
}
