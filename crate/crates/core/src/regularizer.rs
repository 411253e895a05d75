//! Geometry-weighted L_ℓ penalty on a hidden update matrix.
//!
//! Neuron `j` sits at `i(j)` on a manifold; the weight `w_jk` is penalized
//! by `c_jk · |w_jk|^ℓ` with `c_jk = f(d(i(j), i(k)))`.

use std::path::Path;

use ndarray::{Array2, Zip};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{distance_unchecked, gradient_unchecked, Embedding};
use crate::inhibitor::InhibitorSpec;
use crate::tensor_io;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoefficientSource {
    Moduli,
    Shuffled,
    Uniform,
}

/// Immutable grid of per-weight regularizing coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct CoefficientMatrix {
    values: Array2<f64>,
    source: CoefficientSource,
    ell: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CoefficientSidecar {
    rows: usize,
    cols: usize,
    source: CoefficientSource,
    ell: f64,
}

impl CoefficientMatrix {
    /// Every entry equal to `c`: plain L_ℓ regularization.
    pub fn uniform(rows: usize, cols: usize, c: f64, ell: f64) -> Result<Self> {
        check_ell(ell)?;
        if !c.is_finite() {
            return Err(Error::NonFinite("uniform coefficient".into()));
        }
        Ok(CoefficientMatrix {
            values: Array2::from_elem((rows, cols), c),
            source: CoefficientSource::Uniform,
            ell,
        })
    }

    pub fn from_values(values: Array2<f64>, source: CoefficientSource, ell: f64) -> Result<Self> {
        check_ell(ell)?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("coefficient matrix".into()));
        }
        Ok(CoefficientMatrix { values, source, ell })
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn source(&self) -> CoefficientSource {
        self.source
    }

    pub fn ell(&self) -> f64 {
        self.ell
    }

    pub fn shape(&self) -> (usize, usize) {
        self.values.dim()
    }

    /// Writes `path` as row-major little-endian `f64` and a JSON sidecar next to
    /// it with the same stem and a `.json` extension.
    pub fn export(&self, path: &Path) -> Result<()> {
        tensor_io::write_matrix(path, &self.values)?;
        let (rows, cols) = self.shape();
        let sidecar = CoefficientSidecar {
            rows,
            cols,
            source: self.source,
            ell: self.ell,
        };
        let side = path.with_extension("json");
        std::fs::write(&side, serde_json::to_string_pretty(&sidecar)?).map_err(|e| Error::io(&side, e))
    }

    pub fn import(path: &Path) -> Result<Self> {
        let side = path.with_extension("json");
        let text = std::fs::read_to_string(&side).map_err(|e| Error::io(&side, e))?;
        let meta: CoefficientSidecar = serde_json::from_str(&text)?;
        let values = tensor_io::read_matrix(path, meta.rows, meta.cols)?;
        Self::from_values(values, meta.source, meta.ell)
    }
}

fn check_ell(ell: f64) -> Result<()> {
    if !(ell.is_finite() && ell >= 1.0) {
        return Err(Error::InvalidArgument(format!("ell must be >= 1, got {ell}")));
    }
    Ok(())
}

fn check_shape(c: &CoefficientMatrix, w: &Array2<f64>) -> Result<()> {
    if c.values.dim() != w.dim() {
        let (a, b) = c.values.dim();
        let (x, y) = w.dim();
        return Err(Error::shape(&[a, b], &[x, y]));
    }
    Ok(())
}

#[inline]
fn abs_pow(w: f64, ell: f64) -> f64 {
    if ell == 1.0 {
        w.abs()
    } else {
        w.abs().powf(ell)
    }
}

/// `c_jk = f(d(rows[j], cols[k]))`.
pub fn build_coefficients(
    rows: &Embedding,
    cols: &Embedding,
    inhibitor: &InhibitorSpec,
    ell: f64,
) -> Result<CoefficientMatrix> {
    check_ell(ell)?;
    inhibitor.validate()?;
    let d = crate::geometry::pairwise_distances(rows, cols)?;
    CoefficientMatrix::from_values(d.mapv(|x| inhibitor.value(x)), CoefficientSource::Moduli, ell)
}

/// `Σ_jk C[j][k] · |W[j][k]|^ℓ`.
pub fn penalty(c: &CoefficientMatrix, w: &Array2<f64>) -> Result<f64> {
    check_shape(c, w)?;
    let ell = c.ell;
    Ok(Zip::from(&c.values)
        .and(w)
        .fold(0.0, |acc, &cv, &wv| acc + cv * abs_pow(wv, ell)))
}

/// Entrywise `ℓ · C · |w|^{ℓ-1} · sign(w)`, zero where `w == 0`.
pub fn penalty_weight_grad(c: &CoefficientMatrix, w: &Array2<f64>) -> Result<Array2<f64>> {
    check_shape(c, w)?;
    let ell = c.ell;
    Ok(Zip::from(&c.values).and(w).map_collect(|&cv, &wv| {
        if wv == 0.0 {
            0.0
        } else if ell == 1.0 {
            cv * wv.signum()
        } else {
            ell * cv * wv.abs().powf(ell - 1.0) * wv.signum()
        }
    }))
}

/// Row and column embeddings of a regularized matrix. `Shared` means the same
/// embedding indexes both axes, so each point receives gradient through its
/// row and its column.
#[derive(Clone, Copy, Debug)]
pub enum EmbeddingPair<'a> {
    Shared(&'a Embedding),
    Split { rows: &'a Embedding, cols: &'a Embedding },
}

impl<'a> EmbeddingPair<'a> {
    pub fn rows(&self) -> &'a Embedding {
        match *self {
            EmbeddingPair::Shared(e) => e,
            EmbeddingPair::Split { rows, .. } => rows,
        }
    }

    pub fn cols(&self) -> &'a Embedding {
        match *self {
            EmbeddingPair::Shared(e) => e,
            EmbeddingPair::Split { cols, .. } => cols,
        }
    }
}

/// Per-point gradients of the penalty, in the chart used by
/// [`crate::geometry::distance_gradient`].
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingGrad {
    pub rows: Vec<Vec<f64>>,
    /// Present only for split embeddings.
    pub cols: Option<Vec<Vec<f64>>>,
    /// Some contributing pair sat at a sphere antipode, where the distance
    /// gradient was replaced by zero.
    pub degenerate: bool,
}

/// Gradient of `Σ_jk f(d(p_j, q_k))·|w_jk|^ℓ` with respect to the embedding
/// points.
pub fn penalty_embedding_grad(
    pair: EmbeddingPair<'_>,
    inhibitor: &InhibitorSpec,
    w: &Array2<f64>,
    ell: f64,
) -> Result<EmbeddingGrad> {
    check_ell(ell)?;
    inhibitor.validate()?;
    let rows = pair.rows();
    let cols = pair.cols();
    if rows.manifold != cols.manifold {
        return Err(Error::ManifoldMismatch {
            left: rows.manifold.kind.to_string(),
            right: cols.manifold.kind.to_string(),
        });
    }
    if w.dim() != (rows.len(), cols.len()) {
        let (a, b) = w.dim();
        return Err(Error::shape(&[rows.len(), cols.len()], &[a, b]));
    }
    let m = &rows.manifold;
    let dim = m.coord_dim();
    let mut g_rows = vec![vec![0.0; dim]; rows.len()];
    let mut g_cols = vec![vec![0.0; dim]; cols.len()];
    let mut degenerate = false;

    for (j, p) in rows.points.iter().enumerate() {
        for (k, q) in cols.points.iter().enumerate() {
            let weight = abs_pow(w[[j, k]], ell);
            if weight == 0.0 {
                continue;
            }
            let d = distance_unchecked(m, &p.0, &q.0);
            let slope = inhibitor.slope(d);
            if slope.degenerate {
                return Err(Error::InvalidArgument(format!(
                    "inhibitor is not differentiable at distance {d} (pair {j},{k})"
                )));
            }
            if slope.value == 0.0 {
                continue;
            }
            let scale = slope.value * weight;
            let gp = gradient_unchecked(m, &p.0, &q.0);
            let gq = gradient_unchecked(m, &q.0, &p.0);
            degenerate |= gp.degenerate || gq.degenerate;
            for (acc, g) in g_rows[j].iter_mut().zip(&gp.grad) {
                *acc += scale * g;
            }
            for (acc, g) in g_cols[k].iter_mut().zip(&gq.grad) {
                *acc += scale * g;
            }
        }
    }

    match pair {
        EmbeddingPair::Shared(_) => {
            for (r, c) in g_rows.iter_mut().zip(&g_cols) {
                for (a, b) in r.iter_mut().zip(c) {
                    *a += b;
                }
            }
            Ok(EmbeddingGrad {
                rows: g_rows,
                cols: None,
                degenerate,
            })
        }
        EmbeddingPair::Split { .. } => Ok(EmbeddingGrad {
            rows: g_rows,
            cols: Some(g_cols),
            degenerate,
        }),
    }
}

/// Seeded Fisher–Yates permutation of all entries (diagonal included).
pub fn shuffle(c: &CoefficientMatrix, seed: u64) -> Result<CoefficientMatrix> {
    if c.source != CoefficientSource::Moduli {
        return Err(Error::InvalidArgument(format!(
            "only moduli coefficients can be shuffled, got {:?}",
            c.source
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut flat: Vec<f64> = c.values.iter().copied().collect();
    flat.shuffle(&mut rng);
    Ok(CoefficientMatrix {
        values: Array2::from_shape_vec(c.values.dim(), flat).expect("same length"),
        source: CoefficientSource::Shuffled,
        ell: c.ell,
    })
}
