//! The adding problem: remember two flagged numbers in a long sequence and
//! output their sum.

use ndarray::{Array2, Axis};
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct AddingSample {
    pub values: Vec<f64>,
    pub mask: Vec<u8>,
    pub target: f64,
}

impl AddingSample {
    /// Validates the mask (exactly two ones) and computes the target.
    pub fn new(values: Vec<f64>, mask: Vec<u8>) -> Result<Self> {
        if values.len() != mask.len() {
            return Err(Error::shape(&[values.len()], &[mask.len()]));
        }
        if values.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidArgument("adding values must lie in [0, 1]".into()));
        }
        if mask.iter().any(|&m| m > 1) || mask.iter().filter(|&&m| m == 1).count() != 2 {
            return Err(Error::InvalidArgument(
                "adding mask must contain exactly two ones and zeros elsewhere".into(),
            ));
        }
        let target = values.iter().zip(&mask).filter(|(_, &m)| m == 1).map(|(v, _)| v).sum();
        Ok(AddingSample { values, mask, target })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

pub fn gen_adding_batch(seq_len: usize, batch: usize, seed: u64) -> Result<Vec<AddingSample>> {
    if seq_len < 2 {
        return Err(Error::InvalidArgument(format!(
            "adding problem needs sequence length >= 2, got {seq_len}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..batch)
        .map(|_| {
            let values: Vec<f64> = (0..seq_len).map(|_| rng.random::<f64>()).collect();
            let mut mask = vec![0u8; seq_len];
            for i in index::sample(&mut rng, seq_len, 2) {
                mask[i] = 1;
            }
            let target = values.iter().zip(&mask).filter(|(_, &m)| m == 1).map(|(v, _)| v).sum();
            AddingSample { values, mask, target }
        })
        .collect())
}

/// Model-ready form of a batch: step `t` is the `batch × 2` matrix of
/// `(value_t, mask_t)` rows; targets are `batch × 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct AddingTensors {
    pub inputs: Vec<Array2<f64>>,
    pub targets: Array2<f64>,
}

pub fn to_tensors(samples: &[AddingSample]) -> Result<AddingTensors> {
    let first = samples
        .first()
        .ok_or_else(|| Error::InvalidArgument("empty adding batch".into()))?;
    let t_len = first.len();
    if samples.iter().any(|s| s.len() != t_len) {
        return Err(Error::InvalidArgument("adding samples differ in length".into()));
    }
    let inputs = (0..t_len)
        .map(|t| {
            Array2::from_shape_fn((samples.len(), 2), |(b, c)| {
                if c == 0 {
                    samples[b].values[t]
                } else {
                    f64::from(samples[b].mask[t])
                }
            })
        })
        .collect();
    let targets = Array2::from_shape_fn((samples.len(), 1), |(b, _)| samples[b].target);
    Ok(AddingTensors { inputs, targets })
}

/// Root mean square error of predictions (`batch × 1`) against targets.
pub fn rmse(pred: &Array2<f64>, targets: &Array2<f64>) -> f64 {
    let n = pred.len_of(Axis(0)) as f64;
    ((pred - targets).mapv(|d| d * d).sum() / n).sqrt()
}
