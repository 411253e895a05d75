use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Max-subtracted softmax.
pub fn softmax(v: &[f64]) -> Result<Vec<f64>> {
    if v.is_empty() {
        return Err(Error::InvalidArgument("softmax of an empty vector".into()));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("softmax input".into()));
    }
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = v.iter().map(|x| (x - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    Ok(exps.into_iter().map(|e| e / sum).collect())
}

/// `log(Σ exp(v))`, computed stably.
pub fn log_sum_exp(v: &[f64]) -> f64 {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + v.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// `-Σ target_i · log pred_i`. Terms with zero target weight are skipped.
pub fn cross_entropy(target: &[f64], pred: &[f64]) -> Result<f64> {
    if target.len() != pred.len() {
        return Err(Error::shape(&[target.len()], &[pred.len()]));
    }
    let mut total = 0.0;
    for (&t, &p) in target.iter().zip(pred) {
        if t == 0.0 {
            continue;
        }
        if p <= 0.0 {
            return Err(Error::InvalidArgument(
                "cross entropy takes log of a non-positive prediction".into(),
            ));
        }
        total -= t * p.ln();
    }
    Ok(total)
}

pub fn mse(pred: &[f64], target: &[f64]) -> Result<f64> {
    if pred.len() != target.len() {
        return Err(Error::shape(&[target.len()], &[pred.len()]));
    }
    if pred.is_empty() {
        return Err(Error::InvalidArgument("mean square error of empty vectors".into()));
    }
    Ok(pred.iter().zip(target).map(|(p, t)| (p - t).powi(2)).sum::<f64>() / pred.len() as f64)
}

/// Training criterion applied to the decoder's pre-activation output.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    /// Mean over batch and outputs of squared error of the raw output.
    Mse,
    /// Mean over the batch of `cross_entropy(target, softmax(logits))`.
    SoftmaxCrossEntropy,
}

impl Criterion {
    /// Loss averaged over the batch and its gradient with respect to the
    /// logits (`batch × out`).
    pub fn loss_and_grad(self, logits: &Array2<f64>, targets: &Array2<f64>) -> Result<(f64, Array2<f64>)> {
        if logits.dim() != targets.dim() {
            let (a, b) = targets.dim();
            let (x, y) = logits.dim();
            return Err(Error::shape(&[a, b], &[x, y]));
        }
        let (batch, out) = logits.dim();
        if batch == 0 || out == 0 {
            return Err(Error::InvalidArgument("empty batch".into()));
        }
        match self {
            Criterion::Mse => {
                let n = (batch * out) as f64;
                let diff = logits - targets;
                let loss = diff.iter().map(|d| d * d).sum::<f64>() / n;
                Ok((loss, diff * (2.0 / n)))
            }
            Criterion::SoftmaxCrossEntropy => {
                let mut grad = Array2::zeros((batch, out));
                let mut loss = 0.0;
                for ((z, t), mut g) in logits
                    .axis_iter(Axis(0))
                    .zip(targets.axis_iter(Axis(0)))
                    .zip(grad.axis_iter_mut(Axis(0)))
                {
                    let z = z.to_vec();
                    let lse = log_sum_exp(&z);
                    let t_sum: f64 = t.sum();
                    for i in 0..out {
                        let log_p = z[i] - lse;
                        if t[i] != 0.0 {
                            loss -= t[i] * log_p;
                        }
                        g[i] = (t_sum * log_p.exp() - t[i]) / batch as f64;
                    }
                }
                Ok((loss / batch as f64, grad))
            }
        }
    }
}
