//! Manual reverse-mode gradients through the decoder, the layer stack
//! (including the segment-sum transpose back through `repr_map`), and the
//! embedding gather.

use super::layers::ForwardCache;
use super::loss::{lp_loss, nc_loss};
use super::matrix::{dot, Matrix};
use super::{Aggregation, Batch, BatchTask, ModelState, SageLayer, Task, ADAGRAD_EPS};
use crate::error::{Error, Result};
use crate::graph::NodeId;

#[derive(Debug, Clone)]
pub struct EmbeddingGrad {
    pub node: NodeId,
    pub grad: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct SageLayerGrads {
    pub w_self: Matrix,
    pub w_nbr: Matrix,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Gradients {
    pub loss: f64,
    /// One entry per sampled node, in `node_ids` order. Nodes outside the
    /// sample carry no entry.
    pub emb: Vec<EmbeddingGrad>,
    pub rel: Matrix,
    pub layers: Vec<SageLayerGrads>,
    pub classifier: Option<(Matrix, Vec<f64>)>,
}

fn decoder_backward_lp(
    model: &ModelState,
    final_h: &Matrix,
    task: &BatchTask,
) -> Result<(f64, Matrix, Matrix)> {
    let BatchTask::LinkPrediction { pos_src, pos_rel, pos_dst, negs, num_negs } = task else {
        return Err(Error::InvalidArgument("link-prediction batch expected".into()));
    };
    let d = final_h.cols;
    let n = pos_src.len();
    let nn = *num_negs;
    let mut pos_scores = Vec::with_capacity(n);
    let mut neg_scores = Vec::with_capacity(n * nn);
    for i in 0..n {
        let hs = final_h.row(pos_src[i] as usize);
        let r = model.rel_emb.row(pos_rel[i] as usize);
        let q: Vec<f64> = hs.iter().zip(r).map(|(a, b)| a * b).collect();
        pos_scores.push(dot(&q, final_h.row(pos_dst[i] as usize)));
        for j in 0..nn {
            neg_scores.push(dot(&q, final_h.row(negs[i * nn + j] as usize)));
        }
    }
    let loss = lp_loss(&pos_scores, &neg_scores, nn)?;

    let mut d_final = Matrix::zeros(final_h.rows, d);
    let mut d_rel = Matrix::zeros(model.rel_emb.rows, d);
    let inv_n = 1.0 / n as f64;
    for i in 0..n {
        let pos = pos_scores[i];
        let block = &neg_scores[i * nn..(i + 1) * nn];
        let m = block.iter().copied().fold(pos, f64::max);
        let mut denom = (pos - m).exp();
        for &s in block {
            denom += (s - m).exp();
        }
        let lse = m + denom.ln();
        let w_pos = ((pos - lse).exp() - 1.0) * inv_n;
        let s_idx = pos_src[i] as usize;
        let o_idx = pos_dst[i] as usize;
        let r_idx = pos_rel[i] as usize;
        let hs = final_h.row(s_idx).to_vec();
        let ho = final_h.row(o_idx).to_vec();
        let r = model.rel_emb.row(r_idx).to_vec();
        // Positive term.
        {
            let ds = d_final.row_mut(s_idx);
            for k in 0..d {
                ds[k] += w_pos * r[k] * ho[k];
            }
            let do_ = d_final.row_mut(o_idx);
            for k in 0..d {
                do_[k] += w_pos * hs[k] * r[k];
            }
            let dr = d_rel.row_mut(r_idx);
            for k in 0..d {
                dr[k] += w_pos * hs[k] * ho[k];
            }
        }
        // Negative terms share the source and relation.
        for j in 0..nn {
            let w = (block[j] - lse).exp() * inv_n;
            let g_idx = negs[i * nn + j] as usize;
            let hg = final_h.row(g_idx).to_vec();
            let ds = d_final.row_mut(s_idx);
            for k in 0..d {
                ds[k] += w * r[k] * hg[k];
            }
            let dg = d_final.row_mut(g_idx);
            for k in 0..d {
                dg[k] += w * hs[k] * r[k];
            }
            let dr = d_rel.row_mut(r_idx);
            for k in 0..d {
                dr[k] += w * hs[k] * hg[k];
            }
        }
    }
    Ok((loss, d_final, d_rel))
}

fn decoder_backward_nc(
    model: &ModelState,
    final_h: &Matrix,
    task: &BatchTask,
) -> Result<(f64, Matrix, Matrix, Vec<f64>)> {
    let BatchTask::NodeClassification { labels } = task else {
        return Err(Error::InvalidArgument("node-classification batch expected".into()));
    };
    let (w, b) = model
        .classifier
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("model has no classifier".into()))?;
    let c = w.cols;
    let mut logits = final_h.matmul(w);
    for i in 0..logits.rows {
        let row = logits.row_mut(i);
        for j in 0..c {
            row[j] += b[j];
        }
    }
    let loss = nc_loss(&logits.data, c, labels)?;
    // dLogits = (softmax - onehot) / n
    let inv_n = 1.0 / labels.len() as f64;
    let mut d_logits = Matrix::zeros(logits.rows, c);
    for i in 0..logits.rows {
        let row = logits.row(i);
        let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let denom: f64 = row.iter().map(|&v| (v - m).exp()).sum();
        let drow = d_logits.row_mut(i);
        for j in 0..c {
            let p = (row[j] - m).exp() / denom;
            drow[j] = (p - if labels[i] as usize == j { 1.0 } else { 0.0 }) * inv_n;
        }
    }
    let d_w = final_h.matmul_at(&d_logits);
    let mut d_b = vec![0.0; c];
    for i in 0..d_logits.rows {
        for j in 0..c {
            d_b[j] += d_logits.row(i)[j];
        }
    }
    let d_final = d_logits.matmul_bt(w);
    Ok((loss, d_final, d_w, d_b))
}

fn layer_backward(
    aggregation: Aggregation,
    layer: Option<&SageLayer>,
    cache: &super::layers::LayerCache,
    d_out: &Matrix,
) -> (Matrix, Option<SageLayerGrads>) {
    let d = cache.h_in.cols;
    let listed = cache.dense.listed_nodes().len();
    let start = cache.dense.listed_start();
    let mut d_in = Matrix::zeros(cache.h_in.rows, d);
    match aggregation {
        Aggregation::Additive => {
            for j in 0..listed {
                let g = d_out.row(j).to_vec();
                for t in cache.dense.nbr_range(j) {
                    let row = d_in.row_mut(cache.dense.repr_map[t] as usize);
                    for c in 0..d {
                        row[c] += g[c];
                    }
                }
                let row = d_in.row_mut(start + j);
                for c in 0..d {
                    row[c] += g[c];
                }
            }
            (d_in, None)
        }
        Aggregation::Sage => {
            let layer = layer.expect("sage layer parameters");
            let mean = cache.mean.as_ref().expect("cached neighbor means");
            // ReLU mask from the post-activation output.
            let mut d_z = d_out.clone();
            if cache.relu {
                for i in 0..d_z.rows {
                    let out_row = cache.h_out.row(i);
                    let dz_row = d_z.row_mut(i);
                    for c in 0..d {
                        if out_row[c] <= 0.0 {
                            dz_row[c] = 0.0;
                        }
                    }
                }
            }
            let mut h_self = Matrix::zeros(listed, d);
            for j in 0..listed {
                h_self.row_mut(j).copy_from_slice(cache.h_in.row(start + j));
            }
            let g_w_self = h_self.matmul_at(&d_z);
            let g_w_nbr = mean.matmul_at(&d_z);
            let mut g_bias = vec![0.0; d];
            for i in 0..d_z.rows {
                for c in 0..d {
                    g_bias[c] += d_z.row(i)[c];
                }
            }
            let d_self = d_z.matmul_bt(&layer.w_self);
            let d_mean = d_z.matmul_bt(&layer.w_nbr);
            for j in 0..listed {
                let range = cache.dense.nbr_range(j);
                let len = range.len();
                if len > 0 {
                    let inv = 1.0 / len as f64;
                    let dm = d_mean.row(j).to_vec();
                    for t in range {
                        let row = d_in.row_mut(cache.dense.repr_map[t] as usize);
                        for c in 0..d {
                            row[c] += dm[c] * inv;
                        }
                    }
                }
                let ds = d_self.row(j).to_vec();
                let row = d_in.row_mut(start + j);
                for c in 0..d {
                    row[c] += ds[c];
                }
            }
            (d_in, Some(SageLayerGrads { w_self: g_w_self, w_nbr: g_w_nbr, bias: g_bias }))
        }
    }
}

/// Full backward pass. Does not mutate the model; `backward_and_step`
/// applies the dense updates.
pub fn backward(model: &ModelState, batch: &Batch, cache: &ForwardCache) -> Result<Gradients> {
    let (loss, mut d_h, rel_grad, classifier_grad) = match model.cfg.task {
        Task::LinkPrediction => {
            let (loss, d_final, d_rel) = decoder_backward_lp(model, &cache.final_h, &batch.task)?;
            (loss, d_final, d_rel, None)
        }
        Task::NodeClassification => {
            let (loss, d_final, d_w, d_b) = decoder_backward_nc(model, &cache.final_h, &batch.task)?;
            (loss, d_final, Matrix::zeros(0, model.cfg.dim), Some((d_w, d_b)))
        }
    };
    if !loss.is_finite() {
        return Err(Error::Train(format!("non-finite loss {loss}")));
    }

    let mut layer_grads: Vec<SageLayerGrads> = Vec::new();
    for (layer_idx, lc) in cache.per_layer.iter().enumerate().rev() {
        let layer = model.layers.get(layer_idx);
        let (d_in, grads) = layer_backward(model.cfg.aggregation, layer, lc, &d_h);
        if let Some(g) = grads {
            layer_grads.push(g);
        }
        d_h = d_in;
    }
    layer_grads.reverse();

    // d_h now spans the original sample's node array: the sparse embedding
    // gradient, keyed by global node id.
    let node_ids: &[NodeId] = if let Some(first) = cache.per_layer.first() {
        &first.dense.node_ids
    } else {
        &batch.dense.node_ids
    };
    if d_h.rows != node_ids.len() {
        return Err(Error::Train("gradient rows diverged from the sample".into()));
    }
    let mut emb = Vec::with_capacity(node_ids.len());
    for (i, &node) in node_ids.iter().enumerate() {
        let grad = d_h.row(i).to_vec();
        if grad.iter().any(|v| !v.is_finite()) {
            return Err(Error::Train(format!("non-finite embedding gradient for node {node}")));
        }
        emb.push(EmbeddingGrad { node, grad });
    }
    for g in &layer_grads {
        if !g.w_self.is_finite() || !g.w_nbr.is_finite() || g.bias.iter().any(|v| !v.is_finite()) {
            return Err(Error::Train("non-finite layer gradient".into()));
        }
    }
    if !rel_grad.is_finite() {
        return Err(Error::Train("non-finite relation gradient".into()));
    }

    Ok(Gradients { loss, emb, rel: rel_grad, layers: layer_grads, classifier: classifier_grad })
}

/// Apply the dense-parameter updates in place: Adagrad for relation
/// embeddings, plain SGD for layer and classifier weights. Embedding updates
/// are returned to flow through the buffer's write path.
pub fn backward_and_step(
    model: &mut ModelState,
    batch: &Batch,
    cache: &ForwardCache,
    lr: f64,
) -> Result<(f64, Vec<EmbeddingGrad>)> {
    let grads = backward(model, batch, cache)?;
    if model.cfg.task == Task::LinkPrediction {
        for i in 0..model.rel_emb.rows {
            let acc = model.rel_acc.row_mut(i);
            let g = grads.rel.row(i);
            for k in 0..g.len() {
                acc[k] += g[k] * g[k];
            }
        }
        for i in 0..model.rel_emb.rows {
            for k in 0..model.rel_emb.cols {
                let g = grads.rel.data[i * model.rel_emb.cols + k];
                let a = model.rel_acc.data[i * model.rel_emb.cols + k];
                model.rel_emb.data[i * model.rel_emb.cols + k] -= lr * g / (a.sqrt() + ADAGRAD_EPS);
            }
        }
    }
    for (layer, g) in model.layers.iter_mut().zip(&grads.layers) {
        for (w, gw) in layer.w_self.data.iter_mut().zip(&g.w_self.data) {
            *w -= lr * gw;
        }
        for (w, gw) in layer.w_nbr.data.iter_mut().zip(&g.w_nbr.data) {
            *w -= lr * gw;
        }
        for (b, gb) in layer.bias.iter_mut().zip(&g.bias) {
            *b -= lr * gb;
        }
    }
    if let (Some((w, b)), Some((gw, gb))) = (model.classifier.as_mut(), grads.classifier.as_ref()) {
        for (v, g) in w.data.iter_mut().zip(&gw.data) {
            *v -= lr * g;
        }
        for (v, g) in b.iter_mut().zip(gb) {
            *v -= lr * g;
        }
    }
    model.assert_finite()?;
    Ok((grads.loss, grads.emb))
}
