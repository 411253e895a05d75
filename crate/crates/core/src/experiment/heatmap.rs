use std::path::Path;

use crate::checkpoint::{write_text, Checkpoint};
use crate::error::{Error, Result};

/// Writes `|W_hh|` of hidden layer `layer` as CSV, one matrix row per line.
///
/// With `order_by_embedding`, rows and columns are permuted so neurons appear
/// in lexicographic order of their embedding coordinates; this needs a
/// checkpoint saved with a shared embedding for that layer.
pub fn export_heatmap(checkpoint_dir: &Path, layer: usize, order_by_embedding: bool, out: &Path) -> Result<()> {
    let ck = Checkpoint::load(checkpoint_dir)?;
    let n_layers = ck.params.layers.len();
    let w = &ck
        .params
        .layers
        .get(layer)
        .ok_or_else(|| Error::InvalidArgument(format!("layer {layer} out of range; model has {n_layers} layers")))?
        .w_hh;
    let n = w.nrows();
    let order: Vec<usize> = if order_by_embedding {
        let e = ck
            .embeddings
            .iter()
            .find(|e| e.layer == layer)
            .ok_or_else(|| Error::InvalidArgument(format!("checkpoint has no embedding for layer {layer}")))?;
        if e.cols.is_some() {
            return Err(Error::InvalidArgument(
                "ordering needs a shared row/column embedding".into(),
            ));
        }
        let mut idx: Vec<usize> = (0..n).collect();
        idx.sort_by(|&a, &b| {
            let (p, q) = (&e.rows.points[a].0, &e.rows.points[b].0);
            p.iter()
                .zip(q)
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        idx
    } else {
        (0..n).collect()
    };
    let mut csv = String::with_capacity(n * n * 8);
    for &r in &order {
        let line: Vec<String> = order.iter().map(|&c| w[[r, c]].abs().to_string()).collect();
        csv.push_str(&line.join(","));
        csv.push('\n');
    }
    write_text(out, &csv)
}
