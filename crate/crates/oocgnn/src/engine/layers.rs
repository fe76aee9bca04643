//! GNN layer forward passes over a delta-encoded sample.

use super::matrix::Matrix;
use super::{Aggregation, ModelState, SageLayer};
use crate::error::{Error, Result};
use crate::sampler::DenseSample;

/// Additive aggregation: gather neighbor rows through `repr_map`, sum each
/// node's contiguous segment left to right, add the node's own input row.
/// Output row j belongs to the j-th listed node.
pub fn layer_forward_additive(d: &DenseSample, h_in: &Matrix) -> Result<Matrix> {
    if h_in.rows != d.node_ids.len() {
        return Err(Error::InvalidArgument(format!(
            "input has {} rows for {} sample nodes",
            h_in.rows,
            d.node_ids.len()
        )));
    }
    if d.repr_map.len() != d.nbrs.len() {
        return Err(Error::InvalidArgument("repr_map not built".into()));
    }
    let cols = h_in.cols;
    let listed = d.listed_nodes().len();
    let start = d.listed_start();
    let mut out = Matrix::zeros(listed, cols);
    for j in 0..listed {
        let orow = out.row_mut(j);
        for t in d.nbr_range(j) {
            let nrow = h_in.row(d.repr_map[t] as usize);
            for c in 0..cols {
                orow[c] += nrow[c];
            }
        }
        let srow = h_in.row(start + j);
        for c in 0..cols {
            orow[c] += srow[c];
        }
    }
    Ok(out)
}

/// Mean of each listed node's neighbor segment; empty segments give zero.
pub(crate) fn neighbor_means(d: &DenseSample, h_in: &Matrix) -> Matrix {
    let cols = h_in.cols;
    let listed = d.listed_nodes().len();
    let mut mean = Matrix::zeros(listed, cols);
    for j in 0..listed {
        let range = d.nbr_range(j);
        let len = range.len();
        if len == 0 {
            continue;
        }
        let mrow = mean.row_mut(j);
        for t in range {
            let nrow = h_in.row(d.repr_map[t] as usize);
            for c in 0..cols {
                mrow[c] += nrow[c];
            }
        }
        let inv = 1.0 / len as f64;
        for c in 0..cols {
            mrow[c] *= inv;
        }
    }
    mean
}

/// Mean-aggregating layer: ReLU(H_self W_self + mean(nbrs) W_nbr + bias);
/// `relu=false` on the final layer.
pub fn layer_forward_sage(
    d: &DenseSample,
    h_in: &Matrix,
    layer: &SageLayer,
    relu: bool,
) -> Result<Matrix> {
    if h_in.rows != d.node_ids.len() {
        return Err(Error::InvalidArgument(format!(
            "input has {} rows for {} sample nodes",
            h_in.rows,
            d.node_ids.len()
        )));
    }
    if h_in.cols != layer.w_self.rows {
        return Err(Error::InvalidArgument("layer dimension mismatch".into()));
    }
    if d.repr_map.len() != d.nbrs.len() {
        return Err(Error::InvalidArgument("repr_map not built".into()));
    }
    let listed = d.listed_nodes().len();
    let start = d.listed_start();
    let mean = neighbor_means(d, h_in);
    let mut h_self = Matrix::zeros(listed, h_in.cols);
    for j in 0..listed {
        h_self.row_mut(j).copy_from_slice(h_in.row(start + j));
    }
    let mut z = h_self.matmul(&layer.w_self);
    z.add_assign(&mean.matmul(&layer.w_nbr));
    for j in 0..listed {
        let zrow = z.row_mut(j);
        for c in 0..zrow.len() {
            zrow[c] += layer.bias[c];
            if relu && zrow[c] < 0.0 {
                zrow[c] = 0.0;
            }
        }
    }
    Ok(z)
}

/// Per-layer snapshot kept for the backward pass.
#[derive(Debug, Clone)]
pub struct LayerCache {
    /// Sample state before this layer ran (repr_map built).
    pub dense: DenseSample,
    pub h_in: Matrix,
    /// Neighbor means (mean aggregation only).
    pub mean: Option<Matrix>,
    /// Post-activation output.
    pub h_out: Matrix,
    pub relu: bool,
}

#[derive(Debug, Clone)]
pub struct ForwardCache {
    pub per_layer: Vec<LayerCache>,
    /// Final representations, one row per target node.
    pub final_h: Matrix,
}

/// Run all k layers, advancing the sample after each one so every layer sees
/// inputs aligned with its node array. Returns the target representations
/// plus cached activations for the backward pass.
pub fn gnn_forward(dense: &DenseSample, h0: &Matrix, model: &ModelState) -> Result<ForwardCache> {
    let k = dense.k();
    if k != model.cfg.layers {
        return Err(Error::InvalidArgument(format!(
            "sample has {} hops but the model expects {}",
            k, model.cfg.layers
        )));
    }
    let mut state = dense.clone();
    if state.repr_map.is_empty() && !state.nbrs.is_empty() {
        state.build_repr_map()?;
    }
    let mut h = h0.clone();
    let mut per_layer = Vec::with_capacity(k);
    for layer_idx in 0..k {
        let relu = layer_idx + 1 < k;
        let (h_out, mean) = match model.cfg.aggregation {
            Aggregation::Additive => (layer_forward_additive(&state, &h)?, None),
            Aggregation::Sage => {
                let layer = &model.layers[layer_idx];
                let mean = neighbor_means(&state, &h);
                let mut h_self = Matrix::zeros(state.listed_nodes().len(), h.cols);
                for j in 0..h_self.rows {
                    h_self.row_mut(j).copy_from_slice(h.row(state.listed_start() + j));
                }
                let mut z = h_self.matmul(&layer.w_self);
                z.add_assign(&mean.matmul(&layer.w_nbr));
                for j in 0..z.rows {
                    let zrow = z.row_mut(j);
                    for c in 0..zrow.len() {
                        zrow[c] += layer.bias[c];
                        if relu && zrow[c] < 0.0 {
                            zrow[c] = 0.0;
                        }
                    }
                }
                (z, Some(mean))
            }
        };
        per_layer.push(LayerCache {
            dense: state.clone(),
            h_in: h.clone(),
            mean,
            h_out: h_out.clone(),
            relu,
        });
        state = state.advance_layer()?;
        h = h_out;
    }
    Ok(ForwardCache { per_layer, final_h: h })
}
