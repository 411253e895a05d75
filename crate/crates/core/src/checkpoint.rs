//! On-disk model snapshots.
//!
//! A checkpoint is a directory holding `manifest.json`, one little-endian
//! `f64` file per tensor and one byte file per pruning mask. Embeddings used
//! by the regularizer are stored alongside as JSON.

use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Embedding;
use crate::pruning::{MaskSet, PruneMask};
use crate::rnn::{Nonlinearity, OutputActivation, RnnParams, RnnShape, TensorId};
use crate::tensor_io;

pub const MANIFEST_FILE: &str = "manifest.json";
const FORMAT_VERSION: u32 = 1;

/// Schedule position at which the masks were saved.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaskSchedule {
    pub target_percent: f64,
    pub epochs: usize,
    /// Epoch `k` whose scheduled sparsity the masks realize.
    pub epoch: usize,
}

/// Regularizer embeddings of one hidden layer.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerEmbedding {
    pub layer: usize,
    pub rows: Embedding,
    /// Present when rows and columns are embedded separately.
    pub cols: Option<Embedding>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub params: RnnParams,
    pub masks: MaskSet,
    pub mask_schedule: Option<MaskSchedule>,
    pub embeddings: Vec<LayerEmbedding>,
    pub seed: u64,
    pub epoch: usize,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TensorEntry {
    name: String,
    file: String,
    shape: Vec<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EmbeddingEntry {
    layer: usize,
    rows: String,
    cols: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    format_version: u32,
    shape: RnnShape,
    layers: Vec<String>,
    nonlinearity: Nonlinearity,
    output_activation: OutputActivation,
    seed: u64,
    epoch: usize,
    tensors: Vec<TensorEntry>,
    masks: Vec<TensorEntry>,
    mask_schedule: Option<MaskSchedule>,
    embeddings: Vec<EmbeddingEntry>,
}

fn corrupt(dir: &Path, reason: impl Into<String>) -> Error {
    Error::Checkpoint {
        path: dir.to_path_buf(),
        reason: reason.into(),
    }
}

fn matrix_shape(shape: &[usize], dir: &Path, name: &str) -> Result<(usize, usize)> {
    match *shape {
        [r, c] => Ok((r, c)),
        _ => Err(corrupt(dir, format!("{name}: expected a 2-d shape, got {shape:?}"))),
    }
}

impl Checkpoint {
    pub fn new(params: RnnParams, seed: u64, epoch: usize) -> Self {
        Checkpoint {
            params,
            masks: MaskSet::default(),
            mask_schedule: None,
            embeddings: Vec::new(),
            seed,
            epoch,
        }
    }

    /// Writes the checkpoint to `dir`, replacing any previous contents. The
    /// files are first written to a sibling staging directory and then moved
    /// into place.
    pub fn save(&self, dir: &Path) -> Result<()> {
        let staging = staging_path(dir);
        if staging.exists() {
            fs::remove_dir_all(&staging).map_err(|e| Error::io(&staging, e))?;
        }
        fs::create_dir_all(&staging).map_err(|e| Error::io(&staging, e))?;
        self.write_files(&staging)?;
        if dir.exists() {
            fs::remove_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        fs::rename(&staging, dir).map_err(|e| Error::io(dir, e))
    }

    fn write_files(&self, dir: &Path) -> Result<()> {
        let mut tensors = Vec::new();
        for id in self.params.tensor_ids() {
            let t = self.params.tensor(id).expect("listed id exists");
            let name = id.to_string();
            let file = format!("{name}.f64");
            tensor_io::write_f64(&dir.join(&file), t.iter().copied())?;
            tensors.push(TensorEntry {
                name,
                file,
                shape: t.shape().to_vec(),
            });
        }
        let mut masks = Vec::new();
        for (id, mask) in self.masks.iter() {
            let name = id.to_string();
            let file = format!("{name}.mask");
            tensor_io::write_mask(&dir.join(&file), mask.mask())?;
            let (r, c) = mask.shape();
            masks.push(TensorEntry {
                name,
                file,
                shape: vec![r, c],
            });
        }
        let mut embeddings = Vec::new();
        for e in &self.embeddings {
            let rows = format!("embedding{}.rows.json", e.layer);
            write_text(&dir.join(&rows), &e.rows.to_json()?)?;
            let cols = match &e.cols {
                Some(c) => {
                    let name = format!("embedding{}.cols.json", e.layer);
                    write_text(&dir.join(&name), &c.to_json()?)?;
                    Some(name)
                }
                None => None,
            };
            embeddings.push(EmbeddingEntry {
                layer: e.layer,
                rows,
                cols,
            });
        }
        let manifest = Manifest {
            format_version: FORMAT_VERSION,
            shape: self.params.shape(),
            layers: (0..self.params.layers.len()).map(|k| format!("layer{k}")).collect(),
            nonlinearity: self.params.nonlinearity,
            output_activation: self.params.output_activation,
            seed: self.seed,
            epoch: self.epoch,
            tensors,
            masks,
            mask_schedule: self.mask_schedule,
            embeddings,
        };
        write_text(&dir.join(MANIFEST_FILE), &serde_json::to_string_pretty(&manifest)?)
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let m: Manifest = serde_json::from_str(&text).map_err(|e| corrupt(dir, e.to_string()))?;
        if m.format_version != FORMAT_VERSION {
            return Err(corrupt(dir, format!("unsupported format version {}", m.format_version)));
        }
        let mut params = RnnParams::init(&m.shape, m.nonlinearity, m.output_activation, 0)?;
        let mut seen = Vec::new();
        for entry in &m.tensors {
            let id: TensorId = entry.name.parse()?;
            let mut t = params
                .tensor_mut(id)
                .ok_or_else(|| corrupt(dir, format!("tensor {} does not fit the model shape", entry.name)))?;
            if t.shape() != entry.shape.as_slice() {
                return Err(corrupt(
                    dir,
                    format!(
                        "tensor {}: manifest shape {:?} vs model {:?}",
                        entry.name,
                        entry.shape,
                        t.shape()
                    ),
                ));
            }
            let data = tensor_io::read_f64(&dir.join(&entry.file), t.len())?;
            for (dst, v) in t.iter_mut().zip(data) {
                *dst = v;
            }
            seen.push(id);
        }
        seen.sort();
        let mut expected = params.tensor_ids();
        expected.sort();
        if seen != expected {
            return Err(corrupt(dir, "manifest does not list every model tensor"));
        }
        if !params.is_finite() {
            return Err(Error::NonFinite(format!("checkpoint {}", dir.display())));
        }

        let mut masks = MaskSet::default();
        let percent = m.mask_schedule.map_or(0.0, |s| {
            crate::pruning::scheduled_sparsity(s.epoch, s.epochs, s.target_percent).unwrap_or(s.target_percent)
        });
        for entry in &m.masks {
            let id: TensorId = entry.name.parse()?;
            let (r, c) = matrix_shape(&entry.shape, dir, &entry.name)?;
            if params.matrix(id).map(Array2::dim) != Some((r, c)) {
                return Err(corrupt(dir, format!("mask {} does not fit the model", entry.name)));
            }
            let mask = tensor_io::read_mask(&dir.join(&entry.file), r, c)?;
            masks.insert(id, PruneMask::from_mask(mask, percent));
        }

        let mut embeddings = Vec::new();
        for entry in &m.embeddings {
            let rows = Embedding::from_json(&read_text(&dir.join(&entry.rows))?)?;
            let cols = match &entry.cols {
                Some(f) => Some(Embedding::from_json(&read_text(&dir.join(f))?)?),
                None => None,
            };
            embeddings.push(LayerEmbedding {
                layer: entry.layer,
                rows,
                cols,
            });
        }

        Ok(Checkpoint {
            params,
            masks,
            mask_schedule: m.mask_schedule,
            embeddings,
            seed: m.seed,
            epoch: m.epoch,
        })
    }
}

fn staging_path(dir: &Path) -> PathBuf {
    let mut name = dir.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".partial");
    dir.with_file_name(name)
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub(crate) fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}
