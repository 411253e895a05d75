use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::ManifoldSpec;
use crate::inhibitor::InhibitorSpec;
use crate::pruning::PruneSchedule;
use crate::rnn::{Nonlinearity, OptimizerConfig};
use crate::tasks::navigation::{PlaceScoreForm, DEFAULT_GRID_RESOLUTION_CM, DEFAULT_SIDE_CM, DEFAULT_SIGMA_CM};

/// A complete, self-describing experiment. Unknown keys are rejected at
/// every level.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub task: TaskConfig,
    pub model: ModelConfig,
    #[serde(default)]
    pub regularizer: RegularizerConfig,
    #[serde(default)]
    pub pruning: PruningConfig,
    pub optimizer: OptimizerConfig,
    pub run: RunConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TaskConfig {
    Adding {
        seq_len: usize,
        #[serde(default = "default_adding_eval")]
        eval_samples: usize,
    },
    Navigation {
        seq_len: usize,
        landmarks: usize,
        #[serde(default = "default_side")]
        side_cm: f64,
        #[serde(default = "default_sigma")]
        gaussian_sigma_cm: f64,
        /// Landmark placement; fixed for the whole run and across lottery
        /// retraining.
        #[serde(default)]
        landmark_seed: u64,
        #[serde(default)]
        score_form: PlaceScoreForm,
        #[serde(default = "default_grid")]
        grid_resolution_cm: f64,
        #[serde(default = "default_nav_eval")]
        eval_trajectories: usize,
        /// Multiplier applied to velocities (cm per step) before they enter
        /// the network.
        #[serde(default = "default_input_scale")]
        velocity_scale: f64,
        /// Multiplier applied to the start place scores before the encoder.
        #[serde(default = "default_input_scale")]
        start_scale: f64,
    },
}

fn default_adding_eval() -> usize {
    1000
}
fn default_side() -> f64 {
    DEFAULT_SIDE_CM
}
fn default_sigma() -> f64 {
    DEFAULT_SIGMA_CM
}
fn default_grid() -> f64 {
    DEFAULT_GRID_RESOLUTION_CM
}
fn default_nav_eval() -> usize {
    200
}
fn default_input_scale() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub hidden_dims: Vec<usize>,
    pub nonlinearity: Nonlinearity,
    pub bias: bool,
    pub decoder_bias: bool,
    /// Multiplier on the `±1/√fan_in` bound used to draw recurrent matrices.
    #[serde(default = "default_input_scale")]
    pub recurrent_init_gain: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegularizerMode {
    #[default]
    None,
    L1,
    Moduli,
    Shuffled,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegularizerConfig {
    pub mode: RegularizerMode,
    #[serde(default = "ManifoldSpec::torus2")]
    pub manifold: ManifoldSpec,
    #[serde(default = "default_inhibitor")]
    pub inhibitor: InhibitorSpec,
    #[serde(default = "default_ell")]
    pub ell: f64,
    #[serde(default)]
    pub lambda: f64,
    /// Uniform coefficient used in L1 mode.
    #[serde(default = "default_l1_coefficient")]
    pub l1_coefficient: f64,
    #[serde(default)]
    pub trainable_embedding: bool,
    /// Step size of gradient descent on the unscaled penalty.
    #[serde(default = "default_embedding_lr")]
    pub embedding_lr: f64,
    /// Embed rows and columns of each hidden matrix separately.
    #[serde(default)]
    pub split_embeddings: bool,
}

fn default_inhibitor() -> InhibitorSpec {
    InhibitorSpec::default_for(crate::inhibitor::InhibitorKind::DoG)
}
fn default_ell() -> f64 {
    1.0
}
fn default_l1_coefficient() -> f64 {
    1.0
}
fn default_embedding_lr() -> f64 {
    1e-2
}

impl Default for RegularizerConfig {
    fn default() -> Self {
        RegularizerConfig {
            mode: RegularizerMode::None,
            manifold: ManifoldSpec::torus2(),
            inhibitor: default_inhibitor(),
            ell: default_ell(),
            lambda: 0.0,
            l1_coefficient: default_l1_coefficient(),
            trainable_embedding: false,
            embedding_lr: default_embedding_lr(),
            split_embeddings: false,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PruneScope {
    /// Hidden update matrices only.
    #[default]
    Hidden,
    /// Every weight matrix, including encoders and the decoder.
    AllMatrices,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PruningConfig {
    pub enabled: bool,
    #[serde(default)]
    pub target_percent: f64,
    /// Schedule length `n`; must not exceed the run's epoch count.
    #[serde(default = "default_prune_epochs")]
    pub epochs: usize,
    #[serde(default)]
    pub scope: PruneScope,
}

fn default_prune_epochs() -> usize {
    10
}

impl Default for PruningConfig {
    fn default() -> Self {
        PruningConfig {
            enabled: false,
            target_percent: 0.0,
            epochs: default_prune_epochs(),
            scope: PruneScope::Hidden,
        }
    }
}

impl PruningConfig {
    pub fn schedule(&self) -> Result<Option<PruneSchedule>> {
        if !self.enabled {
            return Ok(None);
        }
        PruneSchedule::new(self.target_percent, self.epochs).map(Some)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub epochs: usize,
    pub batches_per_epoch: usize,
    pub batch_size: usize,
    /// A metrics row is written every `eval_every` batches and after the
    /// last batch.
    pub eval_every: usize,
    pub output_dir: PathBuf,
    /// Record loss parts and gradient addends for the first batch of every
    /// epoch.
    #[serde(default)]
    pub debug: bool,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&crate::checkpoint::read_text(path)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn total_batches(&self) -> usize {
        self.run.epochs * self.run.batches_per_epoch
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        match &self.task {
            TaskConfig::Adding { seq_len, eval_samples } => {
                if *seq_len < 2 {
                    return bad(format!("adding seq_len must be >= 2, got {seq_len}"));
                }
                if *eval_samples == 0 {
                    return bad("eval_samples must be positive".into());
                }
            }
            TaskConfig::Navigation {
                seq_len,
                landmarks,
                side_cm,
                gaussian_sigma_cm,
                grid_resolution_cm,
                eval_trajectories,
                velocity_scale,
                start_scale,
                ..
            } => {
                if *seq_len < 1 {
                    return bad("navigation seq_len must be >= 1".into());
                }
                if *landmarks < 2 {
                    return bad(format!("navigation needs >= 2 landmarks, got {landmarks}"));
                }
                for (name, v) in [
                    ("side_cm", side_cm),
                    ("gaussian_sigma_cm", gaussian_sigma_cm),
                    ("grid_resolution_cm", grid_resolution_cm),
                    ("velocity_scale", velocity_scale),
                    ("start_scale", start_scale),
                ] {
                    if !(v.is_finite() && *v > 0.0) {
                        return bad(format!("{name} must be positive, got {v}"));
                    }
                }
                if grid_resolution_cm > side_cm {
                    return bad("grid resolution exceeds the arena".into());
                }
                if *eval_trajectories == 0 {
                    return bad("eval_trajectories must be positive".into());
                }
            }
        }

        if self.model.hidden_dims.is_empty() || self.model.hidden_dims.contains(&0) {
            return bad("hidden_dims must be a non-empty list of positive sizes".into());
        }
        let gain = self.model.recurrent_init_gain;
        if !(gain.is_finite() && gain > 0.0) {
            return bad(format!("recurrent_init_gain must be positive, got {gain}"));
        }

        let r = &self.regularizer;
        if !(r.lambda.is_finite() && r.lambda >= 0.0) {
            return bad(format!("lambda must be finite and >= 0, got {}", r.lambda));
        }
        if !(r.ell.is_finite() && r.ell >= 1.0) {
            return bad(format!("ell must be >= 1, got {}", r.ell));
        }
        match r.mode {
            RegularizerMode::None | RegularizerMode::L1 => {
                if r.trainable_embedding {
                    return bad(format!("{:?} mode has no embedding to train", r.mode));
                }
                if !(r.l1_coefficient.is_finite() && r.l1_coefficient >= 0.0) {
                    return bad("l1_coefficient must be finite and >= 0".into());
                }
            }
            RegularizerMode::Moduli | RegularizerMode::Shuffled => {
                r.manifold.validate().map_err(|e| Error::InvalidConfig(e.to_string()))?;
                r.inhibitor
                    .validate()
                    .map_err(|e| Error::InvalidConfig(e.to_string()))?;
                if r.trainable_embedding {
                    if r.mode == RegularizerMode::Shuffled {
                        return bad("shuffled coefficients carry no geometry to train".into());
                    }
                    if r.inhibitor.is_monotone() {
                        return bad(format!(
                            "a trainable embedding with the monotone {:?} inhibitor collapses to plain L_ell",
                            r.inhibitor.kind
                        ));
                    }
                    if !(r.embedding_lr.is_finite() && r.embedding_lr > 0.0) {
                        return bad("embedding_lr must be positive".into());
                    }
                }
            }
        }

        if self.pruning.enabled {
            PruneSchedule::new(self.pruning.target_percent, self.pruning.epochs)
                .map_err(|e| Error::InvalidConfig(e.to_string()))?;
            if self.pruning.epochs > self.run.epochs {
                return bad(format!(
                    "pruning schedule of {} epochs exceeds the run's {} epochs",
                    self.pruning.epochs, self.run.epochs
                ));
            }
        }

        self.optimizer.validate()?;

        let run = &self.run;
        if run.epochs == 0 || run.batches_per_epoch == 0 || run.batch_size == 0 || run.eval_every == 0 {
            return bad("epochs, batches_per_epoch, batch_size and eval_every must be positive".into());
        }
        if run.output_dir.as_os_str().is_empty() {
            return bad("output_dir must not be empty".into());
        }
        Ok(())
    }

    /// Resolves a relative output directory against `root`.
    pub fn with_output_root(mut self, root: Option<&Path>) -> Self {
        if let Some(root) = root {
            if self.run.output_dir.is_relative() {
                self.run.output_dir = root.join(&self.run.output_dir);
            }
        }
        self
    }
}
