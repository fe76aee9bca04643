//! Scores and losses.

use crate::error::{Error, Result};

/// Trilinear product: sum_k src[k] * rel[k] * dst[k].
pub fn distmult_score(h_src: &[f64], rel_emb: &[f64], h_dst: &[f64]) -> f64 {
    let mut acc = 0.0;
    for k in 0..h_src.len() {
        acc += h_src[k] * rel_emb[k] * h_dst[k];
    }
    acc
}

/// Softmax cross-entropy ranking each positive against its block of
/// negatives; mean over positives. `neg_scores` is row-major with
/// `num_negs` entries per positive.
pub fn lp_loss(pos_scores: &[f64], neg_scores: &[f64], num_negs: usize) -> Result<f64> {
    if num_negs == 0 {
        return Err(Error::InvalidArgument("need at least one negative per positive".into()));
    }
    if neg_scores.len() != pos_scores.len() * num_negs {
        return Err(Error::InvalidArgument("negative score block has the wrong shape".into()));
    }
    let mut total = 0.0;
    for (i, &pos) in pos_scores.iter().enumerate() {
        let negs = &neg_scores[i * num_negs..(i + 1) * num_negs];
        let m = negs.iter().copied().fold(pos, f64::max);
        let mut denom = (pos - m).exp();
        for &n in negs {
            denom += (n - m).exp();
        }
        // -log softmax(pos) = logsumexp(all) - pos
        total += m + denom.ln() - pos;
    }
    Ok(total / pos_scores.len() as f64)
}

/// Mean softmax cross-entropy over `num_classes`-wide logit rows.
pub fn nc_loss(logits: &[f64], num_classes: usize, labels: &[u32]) -> Result<f64> {
    if logits.len() != labels.len() * num_classes {
        return Err(Error::InvalidArgument("logit block has the wrong shape".into()));
    }
    let mut total = 0.0;
    for (i, &label) in labels.iter().enumerate() {
        if label as usize >= num_classes {
            return Err(Error::InvalidArgument(format!(
                "label {label} out of range for {num_classes} classes"
            )));
        }
        let row = &logits[i * num_classes..(i + 1) * num_classes];
        let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let denom: f64 = row.iter().map(|&v| (v - m).exp()).sum();
        total += m + denom.ln() - row[label as usize];
    }
    Ok(total / labels.len() as f64)
}
