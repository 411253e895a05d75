use std::path::Path;

use ndarray::Array2;

use super::config::{RegularizerConfig, RegularizerMode};
use super::seeds::{derive_seed, Stream};
use crate::checkpoint::LayerEmbedding;
use crate::error::{Error, Result};
use crate::geometry::{retract, sample_uniform, Embedding, ManifoldPoint};
use crate::regularizer::{
    build_coefficients, penalty, penalty_embedding_grad, penalty_weight_grad, shuffle, CoefficientMatrix, EmbeddingPair,
};
use crate::rnn::RnnParams;

struct LayerReg {
    embedding: Option<LayerEmbedding>,
    coeffs: CoefficientMatrix,
}

/// Coefficient matrices (and embeddings) for every hidden layer of a run.
pub(crate) struct RegState {
    cfg: RegularizerConfig,
    shuffle_seed: u64,
    layers: Vec<LayerReg>,
}

impl RegState {
    /// Builds the regularizer for `hidden_dims`. Embeddings are sampled from
    /// `seed` unless `frozen` supplies them.
    pub fn new(
        cfg: &RegularizerConfig,
        hidden_dims: &[usize],
        seed: u64,
        frozen: Option<&[LayerEmbedding]>,
    ) -> Result<Self> {
        let mut state = RegState {
            cfg: cfg.clone(),
            shuffle_seed: seed,
            layers: Vec::new(),
        };
        for (k, &n) in hidden_dims.iter().enumerate() {
            let layer = match cfg.mode {
                RegularizerMode::None => continue,
                RegularizerMode::L1 => LayerReg {
                    embedding: None,
                    coeffs: CoefficientMatrix::uniform(n, n, cfg.l1_coefficient, cfg.ell)?,
                },
                RegularizerMode::Moduli | RegularizerMode::Shuffled => {
                    let embedding = match frozen.and_then(|f| f.iter().find(|e| e.layer == k)) {
                        Some(e) => {
                            check_frozen(e, cfg, n)?;
                            e.clone()
                        }
                        None => {
                            let draw = |i| {
                                sample_uniform(&cfg.manifold, n, derive_seed(seed, Stream::Embedding, i))
                                    .map(|e| e.trainable(cfg.trainable_embedding))
                            };
                            LayerEmbedding {
                                layer: k,
                                rows: draw(2 * k as u64)?,
                                cols: if cfg.split_embeddings {
                                    Some(draw(2 * k as u64 + 1)?)
                                } else {
                                    None
                                },
                            }
                        }
                    };
                    let coeffs = state.coefficients(k, &embedding)?;
                    LayerReg {
                        embedding: Some(embedding),
                        coeffs,
                    }
                }
            };
            state.layers.push(layer);
        }
        Ok(state)
    }

    fn coefficients(&self, k: usize, e: &LayerEmbedding) -> Result<CoefficientMatrix> {
        let cols = e.cols.as_ref().unwrap_or(&e.rows);
        let c = build_coefficients(&e.rows, cols, &self.cfg.inhibitor, self.cfg.ell)?;
        if self.cfg.mode == RegularizerMode::Shuffled {
            shuffle(&c, derive_seed(self.shuffle_seed, Stream::Shuffle, k as u64))
        } else {
            Ok(c)
        }
    }

    pub fn lambda(&self) -> f64 {
        self.cfg.lambda
    }

    /// A zero factor switches the penalty off entirely.
    pub fn is_active(&self) -> bool {
        !self.layers.is_empty() && self.cfg.lambda > 0.0
    }

    /// Unscaled penalty summed over hidden layers.
    pub fn penalty(&self, params: &RnnParams) -> Result<f64> {
        let mut total = 0.0;
        for (layer, reg) in params.layers.iter().zip(&self.layers) {
            total += penalty(&reg.coeffs, &layer.w_hh)?;
        }
        Ok(total)
    }

    /// `λ·∂R/∂W_hh` per layer.
    pub fn weight_grads(&self, params: &RnnParams) -> Result<Vec<Array2<f64>>> {
        params
            .layers
            .iter()
            .zip(&self.layers)
            .map(|(layer, reg)| Ok(penalty_weight_grad(&reg.coeffs, &layer.w_hh)? * self.cfg.lambda))
            .collect()
    }

    /// One gradient-descent step of every embedding on the unscaled penalty,
    /// followed by a retraction and a coefficient rebuild.
    pub fn train_embeddings(&mut self, params: &RnnParams) -> Result<()> {
        if !self.cfg.trainable_embedding || !self.is_active() {
            return Ok(());
        }
        let lr = self.cfg.embedding_lr;
        for k in 0..self.layers.len() {
            let e = self.layers[k]
                .embedding
                .as_ref()
                .expect("moduli layers carry embeddings");
            let w = &params.layers[k].w_hh;
            let pair = match &e.cols {
                Some(cols) => EmbeddingPair::Split { rows: &e.rows, cols },
                None => EmbeddingPair::Shared(&e.rows),
            };
            let grad = penalty_embedding_grad(pair, &self.cfg.inhibitor, w, self.cfg.ell)?;
            let rows = descend(&e.rows, &grad.rows, lr)?;
            let cols = match (&e.cols, &grad.cols) {
                (Some(c), Some(g)) => Some(descend(c, g, lr)?),
                _ => None,
            };
            let updated = LayerEmbedding { layer: k, rows, cols };
            self.layers[k].coeffs = self.coefficients(k, &updated)?;
            self.layers[k].embedding = Some(updated);
        }
        Ok(())
    }

    pub fn embeddings(&self) -> Vec<LayerEmbedding> {
        self.layers.iter().filter_map(|l| l.embedding.clone()).collect()
    }

    /// Exports `layer{k}.bin` plus JSON sidecars into `dir`.
    pub fn export(&self, dir: &Path) -> Result<()> {
        if self.layers.is_empty() {
            return Ok(());
        }
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (k, l) in self.layers.iter().enumerate() {
            l.coeffs.export(&dir.join(format!("layer{k}.bin")))?;
        }
        Ok(())
    }
}

fn descend(e: &Embedding, grad: &[Vec<f64>], lr: f64) -> Result<Embedding> {
    let points = e
        .points
        .iter()
        .zip(grad)
        .map(|(p, g)| {
            let raw: Vec<f64> = p.0.iter().zip(g).map(|(x, d)| x - lr * d).collect();
            retract(&e.manifold, &raw)
        })
        .collect::<Result<Vec<ManifoldPoint>>>()?;
    Ok(Embedding::new(e.manifold.clone(), points)?.trainable(e.trainable))
}

fn check_frozen(e: &LayerEmbedding, cfg: &RegularizerConfig, n: usize) -> Result<()> {
    let ok = |x: &Embedding| x.manifold == cfg.manifold && x.len() == n;
    if !ok(&e.rows) || !e.cols.as_ref().is_none_or(ok) || e.cols.is_some() != cfg.split_embeddings {
        return Err(Error::InvalidConfig(format!(
            "stored embedding for layer {} does not match the regularizer config",
            e.layer
        )));
    }
    Ok(())
}
