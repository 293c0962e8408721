//! Intermediate-CTC conditioning and loss aggregation.

use crate::autodiff::{Graph, Var};
use crate::error::{Error, Result};

/// Graph handles for the per-tap normalization and posterior projection.
#[derive(Debug, Clone, Copy)]
pub struct ConditionParams {
    pub norm_gain: Var,
    pub norm_bias: Var,
    /// `vocab x hidden`
    pub proj_weight: Var,
    /// `1 x hidden`
    pub proj_bias: Var,
}

/// `Norm(h) + Linear(softmax(logits))`: feeds the frame-wise CTC posteriors
/// of a tapped layer back into the encoder stream.
pub fn interctc_condition(
    g: &mut Graph,
    hidden: Var,
    ctc_logits: Var,
    p: &ConditionParams,
) -> Result<Var> {
    let (frames, width) = g.shape(hidden);
    let (lat_frames, vocab) = g.shape(ctc_logits);
    if lat_frames != frames {
        return Err(Error::ShapeMismatch(format!(
            "hidden has {frames} frames, lattice has {lat_frames}"
        )));
    }
    if g.shape(p.proj_weight) != (vocab, width) || g.shape(p.proj_bias) != (1, width) {
        return Err(Error::ShapeMismatch(format!(
            "projection must be {vocab}x{width}"
        )));
    }
    if g.shape(p.norm_gain) != (1, width) || g.shape(p.norm_bias) != (1, width) {
        return Err(Error::ShapeMismatch(format!("norm must be 1x{width}")));
    }
    let normed = g.layer_norm(hidden, p.norm_gain, p.norm_bias);
    let posteriors = g.softmax(ctc_logits);
    let projected = g.matmul(posteriors, p.proj_weight);
    let projected = g.add_row(projected, p.proj_bias);
    Ok(g.add(normed, projected))
}

/// Mean of the per-layer InterCTC losses.
pub fn interctc_loss_total(losses: &[f64]) -> Result<f64> {
    if losses.is_empty() {
        return Err(Error::EmptyList("no InterCTC layers"));
    }
    Ok(losses.iter().sum::<f64>() / losses.len() as f64)
}
