use ndarray::Zip;
use serde::{Deserialize, Serialize};

use super::params::RnnParams;
use crate::error::{Error, Result};
use crate::pruning::MaskSet;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Adam,
    Sgd,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerConfig {
    pub kind: OptimizerKind,
    pub lr: f64,
    #[serde(default = "default_beta1")]
    pub beta1: f64,
    #[serde(default = "default_beta2")]
    pub beta2: f64,
    #[serde(default = "default_eps")]
    pub eps: f64,
    /// Global-norm clipping threshold.
    #[serde(default)]
    pub grad_clip: Option<f64>,
}

fn default_beta1() -> f64 {
    0.9
}
fn default_beta2() -> f64 {
    0.999
}
fn default_eps() -> f64 {
    1e-8
}

impl OptimizerConfig {
    pub fn adam(lr: f64) -> Self {
        OptimizerConfig {
            kind: OptimizerKind::Adam,
            lr,
            beta1: default_beta1(),
            beta2: default_beta2(),
            eps: default_eps(),
            grad_clip: None,
        }
    }

    pub fn sgd(lr: f64) -> Self {
        OptimizerConfig {
            kind: OptimizerKind::Sgd,
            ..Self::adam(lr)
        }
    }

    pub fn with_clip(mut self, clip: f64) -> Self {
        self.grad_clip = Some(clip);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "learning rate must be positive, got {}",
                self.lr
            )));
        }
        if let Some(c) = self.grad_clip {
            if !(c.is_finite() && c > 0.0) {
                return Err(Error::InvalidConfig(format!("grad_clip must be positive, got {c}")));
            }
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || self.eps <= 0.0 {
            return Err(Error::InvalidConfig("adam betas must lie in [0, 1) and eps > 0".into()));
        }
        Ok(())
    }
}

/// Optimizer hyperparameters plus per-parameter moment estimates.
#[derive(Clone, Debug, PartialEq)]
pub struct OptimizerState {
    pub config: OptimizerConfig,
    pub first_moment: RnnParams,
    pub second_moment: RnnParams,
    pub step_count: u64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepStats {
    /// Global gradient norm before clipping (masked entries excluded).
    pub grad_norm: f64,
    pub clipped: bool,
}

impl OptimizerState {
    pub fn new(config: OptimizerConfig, params: &RnnParams) -> Result<Self> {
        config.validate()?;
        Ok(OptimizerState {
            config,
            first_moment: params.zeros_like(),
            second_moment: params.zeros_like(),
            step_count: 0,
        })
    }

    /// Applies one update. Masked gradient entries are discarded before the
    /// clipping norm is taken; masked parameters and their moments are zero
    /// afterwards.
    pub fn step(
        &mut self,
        params: &mut RnnParams,
        grads: &mut RnnParams,
        masks: Option<&MaskSet>,
    ) -> Result<StepStats> {
        params.check_matches(grads)?;
        params.check_matches(&self.first_moment)?;
        if !grads.is_finite() {
            return Err(Error::NonFinite("gradient".into()));
        }
        if let Some(masks) = masks {
            masks.apply(grads)?;
        }
        let grad_norm = grads.global_norm();
        let mut clipped = false;
        if let Some(clip) = self.config.grad_clip {
            if grad_norm > clip {
                grads.scale(clip / grad_norm);
                clipped = true;
            }
        }

        self.step_count += 1;
        let c = &self.config;
        match c.kind {
            OptimizerKind::Sgd => {
                for id in params.tensor_ids() {
                    let g = grads.tensor(id).expect("matched");
                    let mut p = params.tensor_mut(id).expect("matched");
                    Zip::from(&mut p).and(&g).for_each(|p, &g| *p -= c.lr * g);
                }
            }
            OptimizerKind::Adam => {
                let t = self.step_count as i32;
                let bc1 = 1.0 - c.beta1.powi(t);
                let bc2 = 1.0 - c.beta2.powi(t);
                for id in params.tensor_ids() {
                    let g = grads.tensor(id).expect("matched");
                    let mut m = self.first_moment.tensor_mut(id).expect("matched");
                    let mut v = self.second_moment.tensor_mut(id).expect("matched");
                    let mut p = params.tensor_mut(id).expect("matched");
                    Zip::from(&mut p)
                        .and(&mut m)
                        .and(&mut v)
                        .and(&g)
                        .for_each(|p, m, v, &g| {
                            *m = c.beta1 * *m + (1.0 - c.beta1) * g;
                            *v = c.beta2 * *v + (1.0 - c.beta2) * g * g;
                            let m_hat = *m / bc1;
                            let v_hat = *v / bc2;
                            *p -= c.lr * m_hat / (v_hat.sqrt() + c.eps);
                        });
                }
            }
        }

        if let Some(masks) = masks {
            masks.apply(params)?;
            masks.apply(&mut self.first_moment)?;
            masks.apply(&mut self.second_moment)?;
        }
        if !params.is_finite() {
            return Err(Error::NonFinite("parameters after optimizer step".into()));
        }
        Ok(StepStats { grad_norm, clipped })
    }

    /// Clears moments and the step counter.
    pub fn reset(&mut self) {
        self.first_moment = self.first_moment.zeros_like();
        self.second_moment = self.second_moment.zeros_like();
        self.step_count = 0;
    }
}
