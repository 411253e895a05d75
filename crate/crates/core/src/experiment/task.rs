use ndarray::Array2;

use super::config::{ExperimentConfig, TaskConfig};
use super::seeds::{derive_seed, Stream};
use crate::error::Result;
use crate::rnn::{forward, Criterion, InitialState, OutputActivation, RnnParams, RnnShape};
use crate::tasks::adding::{self, AddingTensors};
use crate::tasks::navigation::{self, NavArena, NavTensors, PositionDecoder};

/// One training batch in model-ready form.
pub(crate) struct Batch {
    pub inputs: Vec<Array2<f64>>,
    /// Context encoded into the first layer's initial state.
    pub context: Option<Array2<f64>>,
    pub targets: Array2<f64>,
}

impl Batch {
    pub fn initial_state(&self) -> InitialState<'_> {
        match &self.context {
            Some(c) => InitialState::Encoded(c),
            None => InitialState::Zeros,
        }
    }
}

/// Task-specific data generation and evaluation for a run.
pub(crate) enum TaskRuntime {
    Adding {
        seq_len: usize,
        eval: AddingTensors,
    },
    Navigation {
        arena: NavArena,
        seq_len: usize,
        velocity_scale: f64,
        start_scale: f64,
        decoder: PositionDecoder,
        eval: NavTensors,
    },
}

impl TaskRuntime {
    pub fn new(cfg: &ExperimentConfig, seed: u64) -> Result<Self> {
        let eval_seed = derive_seed(seed, Stream::Eval, 0);
        match &cfg.task {
            &TaskConfig::Adding { seq_len, eval_samples } => {
                let eval = adding::to_tensors(&adding::gen_adding_batch(seq_len, eval_samples, eval_seed)?)?;
                Ok(TaskRuntime::Adding { seq_len, eval })
            }
            TaskConfig::Navigation {
                seq_len,
                landmarks,
                side_cm,
                gaussian_sigma_cm,
                landmark_seed,
                score_form,
                grid_resolution_cm,
                eval_trajectories,
                velocity_scale,
                start_scale,
            } => {
                let arena = NavArena::random(*side_cm, *landmarks, *gaussian_sigma_cm, *landmark_seed)?
                    .with_score_form(*score_form);
                let decoder = PositionDecoder::new(&arena, *grid_resolution_cm)?;
                let trajectories = navigation::gen_trajectories(&arena, *seq_len, *eval_trajectories, eval_seed)?;
                let mut eval = navigation::to_tensors(&arena, &trajectories)?;
                scale_inputs(&mut eval.inputs, *velocity_scale);
                eval.start_scores *= *start_scale;
                Ok(TaskRuntime::Navigation {
                    arena,
                    seq_len: *seq_len,
                    velocity_scale: *velocity_scale,
                    start_scale: *start_scale,
                    decoder,
                    eval,
                })
            }
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            TaskRuntime::Adding { .. } => "adding",
            TaskRuntime::Navigation { .. } => "navigation",
        }
    }

    pub fn metric_name(&self) -> &'static str {
        match self {
            TaskRuntime::Adding { .. } => "rmse",
            TaskRuntime::Navigation { .. } => "mean_decode_error_cm",
        }
    }

    pub fn shape(&self, cfg: &ExperimentConfig) -> RnnShape {
        let (output_dim, init_dim) = match self {
            TaskRuntime::Adding { .. } => (1, None),
            TaskRuntime::Navigation { arena, .. } => (arena.num_landmarks(), Some(arena.num_landmarks())),
        };
        RnnShape {
            input_dim: 2,
            hidden_dims: cfg.model.hidden_dims.clone(),
            output_dim,
            bias: cfg.model.bias,
            decoder_bias: cfg.model.decoder_bias,
            init_dim,
        }
    }

    pub fn output_activation(&self) -> OutputActivation {
        match self {
            TaskRuntime::Adding { .. } => OutputActivation::Identity,
            TaskRuntime::Navigation { .. } => OutputActivation::Softmax,
        }
    }

    pub fn criterion(&self) -> Criterion {
        match self {
            TaskRuntime::Adding { .. } => Criterion::Mse,
            TaskRuntime::Navigation { .. } => Criterion::SoftmaxCrossEntropy,
        }
    }

    /// The batch at `index` of the data stream of `seed`.
    pub fn batch(&self, seed: u64, index: usize, size: usize) -> Result<Batch> {
        let s = derive_seed(seed, Stream::Data, index as u64);
        match self {
            TaskRuntime::Adding { seq_len, .. } => {
                let t = adding::to_tensors(&adding::gen_adding_batch(*seq_len, size, s)?)?;
                Ok(Batch {
                    inputs: t.inputs,
                    context: None,
                    targets: t.targets,
                })
            }
            TaskRuntime::Navigation {
                arena,
                seq_len,
                velocity_scale,
                start_scale,
                ..
            } => {
                let trajectories = navigation::gen_trajectories(arena, *seq_len, size, s)?;
                let mut t = navigation::to_tensors(arena, &trajectories)?;
                scale_inputs(&mut t.inputs, *velocity_scale);
                t.start_scores *= *start_scale;
                Ok(Batch {
                    inputs: t.inputs,
                    context: Some(t.start_scores),
                    targets: t.end_scores,
                })
            }
        }
    }

    /// RMSE on the fixed evaluation set for the adding problem, mean decode
    /// error in cm for navigation.
    pub fn evaluate(&self, params: &RnnParams) -> Result<f64> {
        match self {
            TaskRuntime::Adding { eval, .. } => {
                let trace = forward(params, &eval.inputs, InitialState::Zeros)?;
                Ok(adding::rmse(&trace.logits, &eval.targets))
            }
            TaskRuntime::Navigation { decoder, eval, .. } => {
                let trace = forward(params, &eval.inputs, InitialState::Encoded(&eval.start_scores))?;
                decoder.mean_error(&trace.logits, &eval.ends)
            }
        }
    }
}

fn scale_inputs(inputs: &mut [Array2<f64>], scale: f64) {
    if scale != 1.0 {
        for x in inputs {
            x.mapv_inplace(|v| v * scale);
        }
    }
}
