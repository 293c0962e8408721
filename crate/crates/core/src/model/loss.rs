use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{InterTarget, ModelConfig};
use super::network::{decoder_forward, encoder_forward};
use super::tags::insert_tags;
use super::vocab::{Vocabulary, SOS_EOS};
use crate::autodiff::{Bound, GradStore, Graph, ParamStore, Var};
use crate::corpus::FeatureMatrix;
use crate::ctc::ctc_loss_var;
use crate::error::Result;

/// One training utterance: features, untagged word ids and the label.
#[derive(Debug, Clone, Copy)]
pub struct Sample<'a> {
    pub features: &'a FeatureMatrix,
    pub tokens: &'a [usize],
    pub aphasia: bool,
}

/// Loss components, averaged over a batch. CTC and decoder terms are
/// summed over each utterance's frames/tokens before averaging.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub l_ctc: f64,
    /// One entry per tapped layer, in tap order.
    pub l_inter: Vec<f64>,
    pub l_inter_mean: Option<f64>,
    pub l_dec: f64,
    pub l_total: f64,
    /// Utterances whose final or intermediate CTC target could not be
    /// aligned; those terms contribute zero.
    pub infeasible: usize,
}

/// Closed-form combination of the loss components.
pub fn combine_losses(
    l_ctc: f64,
    l_inter: Option<f64>,
    l_dec: f64,
    ctc_weight: f64,
    interctc_weight: f64,
) -> f64 {
    let encoder = match l_inter {
        Some(inter) => interctc_weight * inter + (1.0 - interctc_weight) * l_ctc,
        None => l_ctc,
    };
    ctc_weight * encoder + (1.0 - ctc_weight) * l_dec
}

/// Weighted sum that drops zero-weight terms, so endpoint weights give
/// exactly the surviving component.
fn weighted_sum(g: &mut Graph, terms: &[(f64, Option<Var>)]) -> Var {
    let mut acc: Option<Var> = None;
    for &(w, v) in terms {
        let Some(v) = v else { continue };
        if w == 0.0 {
            continue;
        }
        let scaled = if w == 1.0 { v } else { g.scale(v, w) };
        acc = Some(match acc {
            Some(a) => g.add(a, scaled),
            None => scaled,
        });
    }
    acc.unwrap_or_else(|| g.scalar(0.0))
}

/// Decoder input (`sos + target`) and output (`target + eos`) sequences.
pub fn teacher_forcing_pair(target: &[usize]) -> (Vec<usize>, Vec<usize>) {
    let mut input = Vec::with_capacity(target.len() + 1);
    input.push(SOS_EOS);
    input.extend_from_slice(target);
    let mut output = target.to_vec();
    output.push(SOS_EOS);
    (input, output)
}

/// Builds the loss graph of one utterance. Returns the total-loss node and
/// the per-utterance breakdown.
pub fn sample_loss(
    g: &mut Graph,
    b: &mut Bound,
    cfg: &ModelConfig,
    vocab: &Vocabulary,
    sample: &Sample,
) -> Result<(Var, LossBreakdown)> {
    let enc = encoder_forward(g, b, cfg, sample.features)?;
    let tagged = insert_tags(sample.tokens, sample.aphasia, cfg.tag_mode, vocab)?;
    let mut infeasible = false;

    let (ctc_node, ctc) = ctc_loss_var(g, enc.logp, &tagged);
    infeasible |= !ctc.feasible;
    let l_ctc = if ctc.feasible {
        ctc.neg_log_likelihood
    } else {
        0.0
    };

    let mut inter_nodes = Vec::with_capacity(enc.taps.len());
    let mut l_inter = Vec::with_capacity(enc.taps.len());
    for tap in &enc.taps {
        let target = match tap.target {
            InterTarget::AsrTokens => sample.tokens.to_vec(),
            InterTarget::TagPrefixedTokens => {
                let mut t = vec![vocab.tag_for(sample.aphasia)];
                t.extend_from_slice(sample.tokens);
                t
            }
        };
        let (node, r) = ctc_loss_var(g, tap.logp, &target);
        infeasible |= !r.feasible;
        l_inter.push(if r.feasible {
            r.neg_log_likelihood
        } else {
            0.0
        });
        inter_nodes.push(node);
    }

    let (dec_in, dec_out) = teacher_forcing_pair(&tagged);
    let frames = g.shape(enc.hidden).0;
    let dec_logp = decoder_forward(g, b, cfg, enc.hidden, frames, &dec_in);
    let dec_node = g.smoothed_nll(dec_logp, &dec_out, cfg.label_smoothing);
    let l_dec = g.item(dec_node);

    let (lambda, alpha) = (cfg.ctc_weight, cfg.interctc_weight);
    let (total, l_inter_mean) = if enc.taps.is_empty() {
        let t = weighted_sum(g, &[(lambda, ctc_node), (1.0 - lambda, Some(dec_node))]);
        (t, None)
    } else {
        let n = inter_nodes.len() as f64;
        let mut terms: Vec<(f64, Option<Var>)> = inter_nodes
            .iter()
            .map(|&v| (lambda * alpha / n, v))
            .collect();
        terms.push((lambda * (1.0 - alpha), ctc_node));
        terms.push((1.0 - lambda, Some(dec_node)));
        let t = weighted_sum(g, &terms);
        (t, Some(l_inter.iter().sum::<f64>() / n))
    };
    let breakdown = LossBreakdown {
        l_ctc,
        l_inter,
        l_inter_mean,
        l_dec,
        l_total: g.item(total),
        infeasible: usize::from(infeasible),
    };
    Ok((total, breakdown))
}

fn mean_breakdown(parts: &[LossBreakdown]) -> LossBreakdown {
    let n = parts.len() as f64;
    let taps = parts.first().map_or(0, |p| p.l_inter.len());
    let avg = |f: &dyn Fn(&LossBreakdown) -> f64| parts.iter().map(f).sum::<f64>() / n;
    LossBreakdown {
        l_ctc: avg(&|p| p.l_ctc),
        l_inter: (0..taps).map(|i| avg(&|p| p.l_inter[i])).collect(),
        l_inter_mean: parts
            .first()
            .and_then(|p| p.l_inter_mean)
            .map(|_| avg(&|p| p.l_inter_mean.unwrap_or(0.0))),
        l_dec: avg(&|p| p.l_dec),
        l_total: avg(&|p| p.l_total),
        infeasible: parts.iter().map(|p| p.infeasible).sum(),
    }
}

/// Batch-mean loss and, if requested, its gradient. Utterances are
/// processed independently (in parallel) and reduced in batch order, so
/// the result does not depend on the thread count.
pub fn compute_loss(
    params: &ParamStore,
    cfg: &ModelConfig,
    vocab: &Vocabulary,
    batch: &[Sample],
    with_grad: bool,
) -> Result<(LossBreakdown, Option<GradStore>)> {
    if batch.is_empty() {
        return Ok((LossBreakdown::default(), with_grad.then(GradStore::default)));
    }
    let inv = 1.0 / batch.len() as f64;
    let per_sample: Vec<Result<(LossBreakdown, Option<GradStore>)>> = batch
        .par_iter()
        .map(|sample| {
            let mut g = Graph::new();
            let mut b = Bound::new(params);
            let (total, bd) = sample_loss(&mut g, &mut b, cfg, vocab, sample)?;
            let grads = if with_grad {
                let scaled = g.scale(total, inv);
                let mut gs = b.collect(&g.backward(scaled)?);
                // Parameters that this sample never touched get zeros so
                // every batch gradient covers the whole store.
                for (name, t) in params.iter() {
                    gs.0.entry(name.clone())
                        .or_insert_with(|| vec![0.0; t.len()]);
                }
                Some(gs)
            } else {
                None
            };
            Ok((bd, grads))
        })
        .collect();
    let mut parts = Vec::with_capacity(batch.len());
    let mut grads: Option<GradStore> = None;
    for r in per_sample {
        let (bd, gs) = r?;
        parts.push(bd);
        if let Some(gs) = gs {
            match grads.as_mut() {
                Some(acc) => acc.accumulate(&gs),
                None => grads = Some(gs),
            }
        }
    }
    Ok((mean_breakdown(&parts), grads))
}

/// Teacher-forced decoder accuracy counts `(correct, total)` over one
/// utterance's tagged target plus eos.
pub fn teacher_forced_hits(
    params: &ParamStore,
    cfg: &ModelConfig,
    vocab: &Vocabulary,
    sample: &Sample,
) -> Result<(usize, usize)> {
    let mut g = Graph::new();
    let mut b = Bound::new(params);
    let enc = encoder_forward(&mut g, &mut b, cfg, sample.features)?;
    let tagged = insert_tags(sample.tokens, sample.aphasia, cfg.tag_mode, vocab)?;
    let (dec_in, dec_out) = teacher_forcing_pair(&tagged);
    let frames = g.shape(enc.hidden).0;
    let logp = decoder_forward(&mut g, &mut b, cfg, enc.hidden, frames, &dec_in);
    let v = g.shape(logp).1;
    let values = g.value(logp);
    let correct = dec_out
        .iter()
        .enumerate()
        .filter(|&(r, &t)| argmax(&values[r * v..(r + 1) * v]) == t)
        .count();
    Ok((correct, dec_out.len()))
}

/// Index of the largest entry; the first one on ties.
pub(crate) fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}
