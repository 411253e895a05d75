use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, PruneScope};
use super::metrics::{MetricsRecord, MetricsWriter, RunSummary};
use super::reg::RegState;
use super::seeds::{derive_seed, Stream};
use super::task::TaskRuntime;
use crate::checkpoint::{write_text, Checkpoint, MaskSchedule};
use crate::error::{Error, Result};
use crate::pruning::{lottery_reinit, prune_tensors, MaskSet, PruneSchedule};
use crate::rnn::{backward, forward, OptimizerState, RnnParams, TensorId};

pub const CONFIG_FILE: &str = "config.json";
pub const METRICS_FILE: &str = "metrics.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const CHECKPOINT_DIR: &str = "checkpoint";
pub const LAST_GOOD_DIR: &str = "checkpoint_last_good";
pub const COEFFICIENTS_DIR: &str = "coefficients";
pub const DEBUG_DIR: &str = "debug";

/// Loss parts and gradient addends of one spot-checked batch.
#[derive(Clone, Debug, PartialEq)]
pub struct DebugRecord {
    pub epoch: usize,
    pub batch: usize,
    pub criterion_loss: f64,
    pub penalty: f64,
    pub lambda: f64,
    pub total_loss: f64,
    /// Per hidden layer: criterion gradient of `W_hh`.
    pub criterion_grad: Vec<Array2<f64>>,
    /// Per hidden layer: `λ·∂R/∂W_hh`.
    pub penalty_grad: Vec<Array2<f64>>,
    /// Per hidden layer: the gradient handed to the optimizer.
    pub total_grad: Vec<Array2<f64>>,
}

#[derive(Serialize, Deserialize)]
struct DebugScalars {
    epoch: usize,
    batch: usize,
    criterion_loss: f64,
    penalty: f64,
    lambda: f64,
    total_loss: f64,
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub output_dir: PathBuf,
    pub checkpoint: Checkpoint,
    pub metrics: Vec<MetricsRecord>,
    pub summary: RunSummary,
    pub debug: Vec<DebugRecord>,
}

impl RunOutcome {
    pub fn checkpoint_dir(&self) -> PathBuf {
        self.output_dir.join(CHECKPOINT_DIR)
    }
}

fn pruned_ids(params: &RnnParams, scope: PruneScope) -> Vec<TensorId> {
    params
        .tensor_ids()
        .into_iter()
        .filter(|id| match scope {
            PruneScope::Hidden => matches!(id, TensorId::HiddenWeights(_)),
            PruneScope::AllMatrices => params.matrix(*id).is_some(),
        })
        .collect()
}

/// Widens the recurrent init bound; masked zeros stay zero.
fn apply_recurrent_gain(params: &mut RnnParams, gain: f64) {
    if gain != 1.0 {
        for layer in &mut params.layers {
            layer.w_hh *= gain;
        }
    }
}

enum Masking {
    Scheduled {
        schedule: PruneSchedule,
        ids: Vec<TensorId>,
    },
    Frozen {
        masks: MaskSet,
        schedule: Option<MaskSchedule>,
    },
    Dense,
}

struct Plan {
    params: RnnParams,
    masking: Masking,
    reg: RegState,
    lottery: bool,
}

fn initial_params(cfg: &ExperimentConfig, task: &TaskRuntime) -> Result<RnnParams> {
    let mut params = RnnParams::init(
        &task.shape(cfg),
        cfg.model.nonlinearity,
        task.output_activation(),
        derive_seed(cfg.run.seed, Stream::Init, 0),
    )?;
    apply_recurrent_gain(&mut params, cfg.model.recurrent_init_gain);
    Ok(params)
}

/// Dense or regularized training with optional scheduled pruning.
///
/// Writes `config.json`, `metrics.csv`, `summary.json`, the final
/// `checkpoint/` and, for regularized runs, `coefficients/` into the run's
/// output directory. The directory is assembled under a `.partial` sibling
/// and moved into place when the run ends.
pub fn run_training(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    cfg.validate()?;
    let seed = cfg.run.seed;
    let task = TaskRuntime::new(cfg, seed)?;
    let params = initial_params(cfg, &task)?;
    let masking = match cfg.pruning.schedule()? {
        Some(schedule) => Masking::Scheduled {
            schedule,
            ids: pruned_ids(&params, cfg.pruning.scope),
        },
        None => Masking::Dense,
    };
    let reg = RegState::new(&cfg.regularizer, &cfg.model.hidden_dims, seed, None)?;
    execute(
        cfg,
        &task,
        Plan {
            params,
            masking,
            reg,
            lottery: false,
        },
    )
}

/// Retrains from a fresh initialization drawn with `seed` on the masks of
/// the checkpoint in `checkpoint_dir`. Masks and embeddings stay frozen and
/// no further pruning happens. Output goes to `cfg.run.output_dir`.
pub fn run_lottery(cfg: &ExperimentConfig, checkpoint_dir: &Path, seed: u64) -> Result<RunOutcome> {
    let mut cfg = cfg.clone();
    cfg.run.seed = seed;
    cfg.pruning.enabled = false;
    cfg.regularizer.trainable_embedding = false;
    cfg.validate()?;
    let ck = Checkpoint::load(checkpoint_dir)?;
    if ck.masks.is_empty() {
        return Err(Error::Checkpoint {
            path: checkpoint_dir.to_path_buf(),
            reason: "checkpoint holds no pruning masks".into(),
        });
    }
    let task = TaskRuntime::new(&cfg, seed)?;
    let expected = task.shape(&cfg);
    if ck.params.shape() != expected || ck.params.nonlinearity != cfg.model.nonlinearity {
        return Err(Error::InvalidConfig(format!(
            "checkpoint model {:?} does not match the config model {expected:?}",
            ck.params.shape()
        )));
    }
    let mut params = ck.params.clone();
    params.output_activation = task.output_activation();
    let mut params = lottery_reinit(&params, &ck.masks, derive_seed(seed, Stream::Init, 0))?;
    apply_recurrent_gain(&mut params, cfg.model.recurrent_init_gain);
    let mut frozen = ck.embeddings.clone();
    for e in &mut frozen {
        e.rows.trainable = false;
        if let Some(c) = e.cols.as_mut() {
            c.trainable = false;
        }
    }
    let reg = RegState::new(&cfg.regularizer, &cfg.model.hidden_dims, ck.seed, Some(&frozen))?;
    execute(
        &cfg,
        &task,
        Plan {
            params,
            masking: Masking::Frozen {
                masks: ck.masks,
                schedule: ck.mask_schedule,
            },
            reg,
            lottery: true,
        },
    )
}

fn staging_dir(out: &Path) -> PathBuf {
    let mut name = out.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".partial");
    out.with_file_name(name)
}

fn fresh_dir(dir: &Path) -> Result<()> {
    if dir.exists() {
        fs::remove_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn publish(staging: &Path, out: &Path) -> Result<()> {
    if out.exists() {
        fs::remove_dir_all(out).map_err(|e| Error::io(out, e))?;
    }
    fs::rename(staging, out).map_err(|e| Error::io(out, e))
}

fn write_debug(dir: &Path, d: &DebugRecord) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let scalars = DebugScalars {
        epoch: d.epoch,
        batch: d.batch,
        criterion_loss: d.criterion_loss,
        penalty: d.penalty,
        lambda: d.lambda,
        total_loss: d.total_loss,
    };
    let stem = format!("batch{}", d.batch);
    write_text(
        &dir.join(format!("{stem}.json")),
        &serde_json::to_string_pretty(&scalars)?,
    )?;
    for (k, ((c, p), t)) in d
        .criterion_grad
        .iter()
        .zip(&d.penalty_grad)
        .zip(&d.total_grad)
        .enumerate()
    {
        for (what, m) in [("criterion_grad", c), ("penalty_grad", p), ("total_grad", t)] {
            crate::tensor_io::write_matrix(&dir.join(format!("{stem}.layer{k}.{what}.f64")), m)?;
        }
    }
    Ok(())
}

struct Progress {
    metrics: Vec<MetricsRecord>,
    debug: Vec<DebugRecord>,
    last_loss: f64,
    last_penalty: f64,
}

fn execute(cfg: &ExperimentConfig, task: &TaskRuntime, plan: Plan) -> Result<RunOutcome> {
    let out = cfg.run.output_dir.clone();
    let staging = staging_dir(&out);
    fresh_dir(&staging)?;
    write_text(&staging.join(CONFIG_FILE), &cfg.to_json()?)?;
    let mut writer = MetricsWriter::create(&staging.join(METRICS_FILE))?;

    let Plan {
        mut params,
        masking,
        mut reg,
        lottery,
    } = plan;
    let seed = cfg.run.seed;
    let mut masks: Option<MaskSet> = match &masking {
        Masking::Frozen { masks, .. } => Some(masks.clone()),
        _ => None,
    };
    let mut mask_schedule = match &masking {
        Masking::Frozen { schedule, .. } => *schedule,
        _ => None,
    };
    let mut opt = OptimizerState::new(cfg.optimizer.clone(), &params)?;
    let criterion = task.criterion();
    let lambda = reg.lambda();
    let total_batches = cfg.total_batches();
    let started = Instant::now();
    let mut progress = Progress {
        metrics: Vec::new(),
        debug: Vec::new(),
        last_loss: f64::NAN,
        last_penalty: 0.0,
    };

    let result: Result<()> = (|| {
        for epoch in 1..=cfg.run.epochs {
            if let Masking::Scheduled { schedule, ids } = &masking {
                if epoch <= schedule.epochs {
                    let percent = schedule.sparsity_at(epoch)?;
                    masks = Some(prune_tensors(&mut params, ids, percent)?);
                    mask_schedule = Some(MaskSchedule {
                        target_percent: schedule.target_percent,
                        epochs: schedule.epochs,
                        epoch,
                    });
                }
            }
            for j in 0..cfg.run.batches_per_epoch {
                let index = (epoch - 1) * cfg.run.batches_per_epoch + j;
                let batch = task.batch(seed, index, cfg.run.batch_size)?;
                let trace = forward(&params, &batch.inputs, batch.initial_state())?;
                let (crit, dlogits) = criterion.loss_and_grad(&trace.logits, &batch.targets)?;
                let mut grads = backward(&params, &trace, &dlogits)?.params;
                let pen = if reg.is_active() { reg.penalty(&params)? } else { 0.0 };
                let total = crit + lambda * pen;
                if !total.is_finite() {
                    return Err(Error::NonFinite(format!("training loss at batch {}", index + 1)));
                }
                let want_debug = cfg.run.debug && j == 0;
                let crit_grads: Vec<Array2<f64>> = if want_debug {
                    grads.layers.iter().map(|l| l.w_hh.clone()).collect()
                } else {
                    Vec::new()
                };
                let pen_grads = if reg.is_active() {
                    reg.weight_grads(&params)?
                } else {
                    Vec::new()
                };
                for (layer, g) in grads.layers.iter_mut().zip(&pen_grads) {
                    layer.w_hh += g;
                }
                if want_debug {
                    let d = DebugRecord {
                        epoch,
                        batch: index + 1,
                        criterion_loss: crit,
                        penalty: pen,
                        lambda,
                        total_loss: total,
                        penalty_grad: if pen_grads.is_empty() {
                            crit_grads.iter().map(|g| Array2::zeros(g.dim())).collect()
                        } else {
                            pen_grads.clone()
                        },
                        criterion_grad: crit_grads,
                        total_grad: grads.layers.iter().map(|l| l.w_hh.clone()).collect(),
                    };
                    write_debug(&staging.join(DEBUG_DIR), &d)?;
                    progress.debug.push(d);
                }

                let last_good = params.clone();
                if let Err(e) = opt.step(&mut params, &mut grads, masks.as_ref()) {
                    params = last_good;
                    return Err(e);
                }
                progress.last_loss = total;
                progress.last_penalty = pen;

                let done = index + 1;
                if done % cfg.run.eval_every == 0 || done == total_batches {
                    let record = MetricsRecord {
                        epoch,
                        batch: done,
                        train_loss: total,
                        penalty_value: pen,
                        sparsity_percent: masks.as_ref().map_or(0.0, MaskSet::max_sparsity_percent),
                        eval_metric: task.evaluate(&params)?,
                        wall_time_s: started.elapsed().as_secs_f64(),
                        seed,
                    };
                    if !record.is_finite() {
                        return Err(Error::NonFinite(format!("metrics at batch {done}")));
                    }
                    writer.write(&record)?;
                    progress.metrics.push(record);
                }
            }
            reg.train_embeddings(&params)?;
        }
        Ok(())
    })();

    let mut checkpoint = Checkpoint::new(params, seed, cfg.run.epochs);
    checkpoint.masks = masks.unwrap_or_default();
    checkpoint.mask_schedule = mask_schedule;
    checkpoint.embeddings = reg.embeddings();

    let aborted = match &result {
        Ok(()) => None,
        Err(Error::NonFinite(what)) => Some(what.clone()),
        Err(_) => return result.map(|_| unreachable!()),
    };
    let final_record = progress.metrics.last();
    let summary = RunSummary {
        task: task.name().into(),
        eval_metric_name: task.metric_name().into(),
        final_eval_metric: final_record.map_or(f64::NAN, |r| r.eval_metric),
        final_train_loss: progress.last_loss,
        final_penalty_value: progress.last_penalty,
        final_sparsity_percent: final_record.map_or(0.0, |r| r.sparsity_percent),
        batches: final_record.map_or(0, |r| r.batch),
        seed,
        regularizer: format!("{:?}", cfg.regularizer.mode).to_lowercase(),
        lambda,
        pruned_tensors: checkpoint.masks.iter().map(|(id, _)| id.to_string()).collect(),
        lottery,
        wall_time_s: started.elapsed().as_secs_f64(),
        aborted: aborted.clone(),
    };
    drop(writer);
    write_text(&staging.join(SUMMARY_FILE), &serde_json::to_string_pretty(&summary)?)?;
    reg.export(&staging.join(COEFFICIENTS_DIR))?;
    if let Some(what) = aborted {
        checkpoint.save(&staging.join(LAST_GOOD_DIR))?;
        publish(&staging, &out)?;
        return Err(Error::NonFinite(format!(
            "{what}; last good checkpoint saved to {}",
            out.join(LAST_GOOD_DIR).display()
        )));
    }
    checkpoint.save(&staging.join(CHECKPOINT_DIR))?;
    publish(&staging, &out)?;
    Ok(RunOutcome {
        output_dir: out,
        checkpoint,
        metrics: progress.metrics,
        summary,
        debug: progress.debug,
    })
}

/// Result of re-evaluating a finished run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub task: String,
    pub metric: String,
    pub value: f64,
    pub seed: u64,
    pub sparsity_percent: f64,
}

/// Loads `config.json` and `checkpoint/` from a run directory and evaluates
/// the checkpoint on the run's evaluation set.
pub fn evaluate_run(run_dir: &Path) -> Result<EvalReport> {
    let cfg = ExperimentConfig::load(&run_dir.join(CONFIG_FILE))?;
    let ck = Checkpoint::load(&run_dir.join(CHECKPOINT_DIR))?;
    let task = TaskRuntime::new(&cfg, ck.seed)?;
    Ok(EvalReport {
        task: task.name().into(),
        metric: task.metric_name().into(),
        value: task.evaluate(&ck.params)?,
        seed: ck.seed,
        sparsity_percent: ck.masks.max_sparsity_percent(),
    })
}

/// Evaluation metric of the untrained model that `run_training` would start from.
pub fn evaluate_initial(cfg: &ExperimentConfig) -> Result<f64> {
    cfg.validate()?;
    let task = TaskRuntime::new(cfg, cfg.run.seed)?;
    task.evaluate(&initial_params(cfg, &task)?)
}
