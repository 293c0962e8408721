//! Label-synchronous joint CTC/attention beam search.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::ctc::{CtcPrefixScorer, LogProbLattice, PrefixState, BLANK};
use crate::model::{AsrModel, Encoded, SOS_EOS};

/// Next-token log-probabilities of an autoregressive decoder.
pub trait StepScorer {
    /// Log-distribution over the vocabulary given `prefix`, which starts
    /// with sos.
    fn log_probs(&self, prefix: &[usize]) -> Vec<f64>;
}

/// Attention decoder of a model attending to one encoded utterance.
#[derive(Debug, Clone, Copy)]
pub struct ModelScorer<'a> {
    pub model: &'a AsrModel,
    pub encoded: &'a Encoded,
}

impl StepScorer for ModelScorer<'_> {
    fn log_probs(&self, prefix: &[usize]) -> Vec<f64> {
        let e = self.encoded;
        self.model.decode_step(&e.hidden, e.width, e.frames, prefix)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamConfig {
    pub beam: usize,
    /// Weight of the decoder score; the CTC prefix score gets the rest.
    pub decode_weight: f64,
    /// Maximum number of tokens before eos is forced.
    pub max_len: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hypothesis {
    /// Output tokens without sos/eos; tags included.
    pub tokens: Vec<usize>,
    pub joint_score: f64,
    pub dec_score: f64,
    pub ctc_score: f64,
    pub finished: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BeamOutput {
    pub best: Hypothesis,
    /// Finished hypotheses, best first.
    pub nbest: Vec<Hypothesis>,
    /// No hypothesis reached eos; `best` is the longest partial one.
    pub fallback: bool,
}

struct Running {
    hyp: Hypothesis,
    ctc: PrefixState,
}

fn joint(decode_weight: f64, dec: f64, ctc: f64) -> f64 {
    // Zero weights are skipped so a floored CTC score cannot leak in.
    let d = if decode_weight == 0.0 {
        0.0
    } else {
        decode_weight * dec
    };
    let c = if decode_weight == 1.0 {
        0.0
    } else {
        (1.0 - decode_weight) * ctc
    };
    d + c
}

/// Best first; ties broken by token sequence, then unfinished before
/// finished, so results are reproducible.
fn rank(a: &Hypothesis, b: &Hypothesis) -> Ordering {
    b.joint_score
        .total_cmp(&a.joint_score)
        .then_with(|| a.tokens.cmp(&b.tokens))
        .then_with(|| a.finished.cmp(&b.finished))
}

/// Expands every running hypothesis by every non-blank token plus eos,
/// keeps the `beam` best candidates, and moves finished ones aside. A
/// hypothesis of `max_len` tokens can only be closed with eos. Each
/// candidate is scored `w * decoder + (1 - w) * ctc_prefix`, where eos uses
/// the CTC probability of the prefix as a complete output.
pub fn joint_beam_search(
    scorer: &dyn StepScorer,
    lattice: &LogProbLattice,
    cfg: &BeamConfig,
) -> BeamOutput {
    assert!(cfg.beam >= 1, "beam must be at least 1");
    let w = cfg.decode_weight;
    let ctc = CtcPrefixScorer::new(lattice);
    let vocab = lattice.vocab();
    let mut running = vec![Running {
        hyp: Hypothesis {
            tokens: Vec::new(),
            joint_score: 0.0,
            dec_score: 0.0,
            ctc_score: 0.0,
            finished: false,
        },
        ctc: ctc.initial(),
    }];
    let mut finished: Vec<Hypothesis> = Vec::new();
    let mut longest: Option<Hypothesis> = None;

    while !running.is_empty() {
        let mut candidates: Vec<(Hypothesis, Option<PrefixState>)> = Vec::new();
        for r in &running {
            let mut prefix = Vec::with_capacity(r.hyp.tokens.len() + 1);
            prefix.push(SOS_EOS);
            prefix.extend_from_slice(&r.hyp.tokens);
            let dec = scorer.log_probs(&prefix);
            debug_assert_eq!(dec.len(), vocab);

            let dec_score = r.hyp.dec_score + dec[SOS_EOS];
            let ctc_score = r.ctc.complete_score();
            candidates.push((
                Hypothesis {
                    tokens: r.hyp.tokens.clone(),
                    joint_score: joint(w, dec_score, ctc_score),
                    dec_score,
                    ctc_score,
                    finished: true,
                },
                None,
            ));
            if r.hyp.tokens.len() >= cfg.max_len {
                continue;
            }
            for (k, &lp) in dec.iter().enumerate() {
                if k == BLANK || k == SOS_EOS {
                    continue;
                }
                let state = ctc.extend(&r.ctc, k);
                let dec_score = r.hyp.dec_score + lp;
                let ctc_score = state.prefix_score;
                let mut tokens = r.hyp.tokens.clone();
                tokens.push(k);
                candidates.push((
                    Hypothesis {
                        tokens,
                        joint_score: joint(w, dec_score, ctc_score),
                        dec_score,
                        ctc_score,
                        finished: false,
                    },
                    Some(state),
                ));
            }
        }
        candidates.sort_by(|a, b| rank(&a.0, &b.0));
        candidates.truncate(cfg.beam);
        running.clear();
        for (hyp, state) in candidates {
            match state {
                None => finished.push(hyp),
                Some(ctc) => {
                    if longest
                        .as_ref()
                        .is_none_or(|l| hyp.tokens.len() > l.tokens.len())
                    {
                        longest = Some(hyp.clone());
                    }
                    running.push(Running { hyp, ctc });
                }
            }
        }
    }

    finished.sort_by(rank);
    match finished.first() {
        Some(best) => BeamOutput {
            best: best.clone(),
            nbest: finished,
            fallback: false,
        },
        None => BeamOutput {
            best: longest.expect("at least one candidate is always kept"),
            nbest: Vec::new(),
            fallback: true,
        },
    }
}

/// Convenience wrapper decoding one encoded utterance with its model.
pub fn decode_encoded(model: &AsrModel, encoded: &Encoded, cfg: &BeamConfig) -> BeamOutput {
    let scorer = ModelScorer { model, encoded };
    joint_beam_search(&scorer, &encoded.lattice, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Decoder that ignores the prefix.
    struct Fixed(Vec<f64>);

    impl StepScorer for Fixed {
        fn log_probs(&self, _prefix: &[usize]) -> Vec<f64> {
            self.0.clone()
        }
    }

    fn uniform_lattice(frames: usize, vocab: usize) -> LogProbLattice {
        LogProbLattice::new(frames, vocab, vec![-(vocab as f64).ln(); frames * vocab]).unwrap()
    }

    #[test]
    fn max_len_zero_yields_empty_hypothesis() {
        let dec = Fixed(vec![-1.0, -1.0, -1.0, -1.0]);
        let out = joint_beam_search(
            &dec,
            &uniform_lattice(3, 4),
            &BeamConfig {
                beam: 3,
                decode_weight: 1.0,
                max_len: 0,
            },
        );
        assert!(!out.fallback);
        assert!(out.best.tokens.is_empty());
        assert_eq!(out.best.dec_score, -1.0);
    }

    #[test]
    fn joint_score_invariant_holds() {
        let dec = Fixed(vec![-9.0, -0.5, -1.2, -2.0]);
        let out = joint_beam_search(
            &dec,
            &uniform_lattice(4, 4),
            &BeamConfig {
                beam: 4,
                decode_weight: 0.7,
                max_len: 3,
            },
        );
        for h in &out.nbest {
            assert!(h.finished);
            let j = 0.7 * h.dec_score + 0.3 * h.ctc_score;
            assert!((h.joint_score - j).abs() < 1e-12);
        }
        assert!(out
            .nbest
            .windows(2)
            .all(|p| p[0].joint_score >= p[1].joint_score));
    }
}
