//! Scheduled magnitude pruning and lottery-ticket reinitialization.
//!
//! To reach `p`% sparsity over `n` epochs, the lowest-magnitude
//! `(k-1)·p/(n-1)`% of each pruned tensor is zeroed at the start of epoch `k`.
//! The mask is recomputed from the current magnitudes at every scheduled
//! epoch, so the zero set need not grow monotonically.

use std::collections::BTreeMap;

use ndarray::{Array2, Zip};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rnn::{RnnParams, TensorId};

/// Sparsity target `p` reached linearly over `epochs` epochs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PruneSchedule {
    pub target_percent: f64,
    pub epochs: usize,
}

impl PruneSchedule {
    pub fn new(target_percent: f64, epochs: usize) -> Result<Self> {
        let s = PruneSchedule { target_percent, epochs };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..100.0).contains(&self.target_percent) {
            return Err(Error::InvalidArgument(format!(
                "target sparsity must lie in [0, 100), got {}",
                self.target_percent
            )));
        }
        if self.epochs < 2 {
            return Err(Error::InvalidArgument(format!(
                "pruning schedule needs at least 2 epochs, got {}",
                self.epochs
            )));
        }
        Ok(())
    }

    /// Sparsity percent scheduled for epoch `k` (1-based).
    pub fn sparsity_at(&self, k: usize) -> Result<f64> {
        scheduled_sparsity(k, self.epochs, self.target_percent)
    }
}

/// `(k-1)·p/(n-1)` for `1 <= k <= n`.
pub fn scheduled_sparsity(k: usize, n: usize, p: f64) -> Result<f64> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("need n >= 2, got {n}")));
    }
    if k < 1 || k > n {
        return Err(Error::InvalidArgument(format!("epoch {k} outside 1..={n}")));
    }
    if k == n {
        return Ok(p);
    }
    Ok((k - 1) as f64 * p / (n - 1) as f64)
}

/// Binary keep-mask (1 = kept, 0 = pruned) for one tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct PruneMask {
    mask: Array2<u8>,
    /// Sparsity percent the mask was built for.
    pub percent: f64,
}

impl PruneMask {
    pub fn dense(rows: usize, cols: usize) -> Self {
        PruneMask {
            mask: Array2::ones((rows, cols)),
            percent: 0.0,
        }
    }

    /// Wraps an existing 0/1 matrix. Entries other than 0 count as kept.
    pub fn from_mask(mask: Array2<u8>, percent: f64) -> Self {
        PruneMask {
            mask: mask.mapv(|v| u8::from(v != 0)),
            percent,
        }
    }

    pub fn mask(&self) -> &Array2<u8> {
        &self.mask
    }

    pub fn shape(&self) -> (usize, usize) {
        self.mask.dim()
    }

    pub fn pruned_count(&self) -> usize {
        self.mask.iter().filter(|&&v| v == 0).count()
    }

    pub fn zero_fraction(&self) -> f64 {
        self.pruned_count() as f64 / self.mask.len() as f64
    }

    pub fn apply(&self, w: &mut Array2<f64>) -> Result<()> {
        if w.dim() != self.mask.dim() {
            let (a, b) = self.mask.dim();
            return Err(Error::shape(&[a, b], &[w.nrows(), w.ncols()]));
        }
        Zip::from(w).and(&self.mask).for_each(|w, &m| {
            if m == 0 {
                *w = 0.0;
            }
        });
        Ok(())
    }
}

/// Zeroes exactly `floor(percent/100 · count)` entries of smallest magnitude
/// and returns the mask. Ties go to the lower row-major index.
pub fn magnitude_prune(w: &mut Array2<f64>, percent: f64) -> Result<PruneMask> {
    if !(0.0..100.0).contains(&percent) {
        return Err(Error::InvalidArgument(format!(
            "prune percent must lie in [0, 100), got {percent}"
        )));
    }
    let (rows, cols) = w.dim();
    let total = rows * cols;
    let to_prune = ((percent * total as f64) / 100.0).floor() as usize;
    let mut order: Vec<usize> = (0..total).collect();
    let flat: Vec<f64> = w.iter().map(|v| v.abs()).collect();
    // stable sort keeps row-major order among equal magnitudes
    order.sort_by(|&a, &b| flat[a].total_cmp(&flat[b]));
    let mut mask = Array2::<u8>::ones((rows, cols));
    for &idx in &order[..to_prune] {
        mask[[idx / cols, idx % cols]] = 0;
    }
    let mask = PruneMask { mask, percent };
    mask.apply(w)?;
    Ok(mask)
}

/// Masks for a model's pruned tensors, keyed by tensor.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MaskSet {
    masks: BTreeMap<TensorId, PruneMask>,
}

impl MaskSet {
    pub fn insert(&mut self, id: TensorId, mask: PruneMask) {
        self.masks.insert(id, mask);
    }

    pub fn get(&self, id: TensorId) -> Option<&PruneMask> {
        self.masks.get(&id)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&TensorId, &PruneMask)> {
        self.masks.iter()
    }

    pub fn is_empty(&self) -> bool {
        self.masks.is_empty()
    }

    pub fn len(&self) -> usize {
        self.masks.len()
    }

    /// All-ones masks for the given tensors.
    pub fn dense_for(params: &RnnParams, ids: &[TensorId]) -> Result<Self> {
        let mut set = MaskSet::default();
        for &id in ids {
            let m = params
                .matrix(id)
                .ok_or_else(|| Error::InvalidArgument(format!("{id} is not a prunable matrix")))?;
            set.insert(id, PruneMask::dense(m.nrows(), m.ncols()));
        }
        Ok(set)
    }

    /// Zeroes masked entries of every covered tensor in `params`.
    pub fn apply(&self, params: &mut RnnParams) -> Result<()> {
        for (&id, mask) in &self.masks {
            let m = params
                .matrix_mut(id)
                .ok_or_else(|| Error::InvalidArgument(format!("model has no tensor {id}")))?;
            mask.apply(m)?;
        }
        Ok(())
    }

    /// Checks every masked entry of `params` is exactly zero.
    pub fn is_respected_by(&self, params: &RnnParams) -> bool {
        self.masks.iter().all(|(&id, mask)| {
            params.matrix(id).is_some_and(|w| {
                w.dim() == mask.shape() && Zip::from(w).and(mask.mask()).all(|&w, &m| m == 1 || w == 0.0)
            })
        })
    }

    /// Largest zero fraction across tensors, in percent.
    pub fn max_sparsity_percent(&self) -> f64 {
        self.masks
            .values()
            .map(|m| m.zero_fraction() * 100.0)
            .fold(0.0, f64::max)
    }
}

/// Magnitude-prunes each listed tensor of `params` independently to `percent`.
pub fn prune_tensors(params: &mut RnnParams, ids: &[TensorId], percent: f64) -> Result<MaskSet> {
    let mut set = MaskSet::default();
    for &id in ids {
        let w = params
            .matrix_mut(id)
            .ok_or_else(|| Error::InvalidArgument(format!("{id} is not a prunable matrix")))?;
        set.insert(id, magnitude_prune(w, percent)?);
    }
    Ok(set)
}

/// Fresh draw from the initialization distribution with `seed`, with `masks`
/// applied immediately.
pub fn lottery_reinit(params: &RnnParams, masks: &MaskSet, seed: u64) -> Result<RnnParams> {
    let mut fresh = RnnParams::init(&params.shape(), params.nonlinearity, params.output_activation, seed)?;
    for (&id, mask) in masks.iter() {
        let w = fresh
            .matrix(id)
            .ok_or_else(|| Error::InvalidArgument(format!("model has no tensor {id}")))?;
        if w.dim() != mask.shape() {
            let (a, b) = mask.shape();
            return Err(Error::shape(&[a, b], &[w.nrows(), w.ncols()]));
        }
    }
    masks.apply(&mut fresh)?;
    Ok(fresh)
}
