//! CTC prefix probabilities for label-synchronous joint decoding.
//!
//! For a prefix `g` the scorer tracks, per frame `t`, the log mass of all
//! alignments of `x_1..t` that collapse to exactly `g`, split by whether
//! the last frame is a label (`nonblank`) or a blank.

use super::lattice::{log_add, LogProbLattice, BLANK, LOG_ZERO};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct PrefixState {
    nonblank: Vec<f64>,
    blank: Vec<f64>,
    last: Option<usize>,
    len: usize,
    /// `log P(prefix is a prefix of the output)`.
    pub prefix_score: f64,
}

impl PrefixState {
    /// `log P(output == prefix)`.
    pub fn complete_score(&self) -> f64 {
        let t = self.blank.len() - 1;
        log_add(self.nonblank[t], self.blank[t])
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }
}

#[derive(Debug, Clone, Copy)]
pub struct CtcPrefixScorer<'a> {
    lattice: &'a LogProbLattice,
}

impl<'a> CtcPrefixScorer<'a> {
    pub fn new(lattice: &'a LogProbLattice) -> Self {
        Self { lattice }
    }

    pub fn initial(&self) -> PrefixState {
        let frames = self.lattice.frames();
        let mut blank = vec![LOG_ZERO; frames];
        let mut acc = 0.0;
        for (t, b) in blank.iter_mut().enumerate() {
            acc += self.lattice.at(t, BLANK);
            *b = acc.max(LOG_ZERO);
        }
        PrefixState {
            nonblank: vec![LOG_ZERO; frames],
            blank,
            last: None,
            len: 0,
            prefix_score: 0.0,
        }
    }

    pub fn extend(&self, state: &PrefixState, token: usize) -> PrefixState {
        assert!(token != BLANK && token < self.lattice.vocab());
        let frames = self.lattice.frames();
        let lat = self.lattice;
        let phi = |t: usize| {
            if state.last == Some(token) {
                state.blank[t]
            } else {
                log_add(state.blank[t], state.nonblank[t])
            }
        };
        let mut nonblank = vec![LOG_ZERO; frames];
        let mut blank = vec![LOG_ZERO; frames];
        if state.len == 0 {
            nonblank[0] = lat.at(0, token).max(LOG_ZERO);
        }
        let mut psi = nonblank[0];
        for t in 1..frames {
            let p = phi(t - 1);
            let emit = lat.at(t, token);
            nonblank[t] = (log_add(nonblank[t - 1], p) + emit).max(LOG_ZERO);
            blank[t] = (log_add(blank[t - 1], nonblank[t - 1]) + lat.at(t, BLANK)).max(LOG_ZERO);
            psi = log_add(psi, p + emit);
        }
        PrefixState {
            nonblank,
            blank,
            last: Some(token),
            len: state.len + 1,
            prefix_score: psi,
        }
    }

    pub fn state_for(&self, prefix: &[usize]) -> PrefixState {
        prefix
            .iter()
            .fold(self.initial(), |st, &k| self.extend(&st, k))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrefixScores {
    /// `log P(prefix ...)`: the prefix followed by any continuation.
    pub prefix: f64,
    /// `log P(prefix)` as a complete output.
    pub complete: f64,
    /// Prefix score of `prefix + [k]` for every `k`; the blank slot holds
    /// [`LOG_ZERO`].
    pub next: Vec<f64>,
}

pub fn ctc_prefix_score(lattice: &LogProbLattice, prefix: &[usize]) -> Result<PrefixScores> {
    let scorer = CtcPrefixScorer::new(lattice);
    let state = scorer.state_for(prefix);
    if state.prefix_score <= LOG_ZERO {
        return Err(Error::InfeasibleTarget {
            frames: lattice.frames(),
            target_len: prefix.len(),
        });
    }
    let mut next = vec![LOG_ZERO; lattice.vocab()];
    for (k, slot) in next.iter_mut().enumerate().skip(1) {
        *slot = scorer.extend(&state, k).prefix_score;
    }
    Ok(PrefixScores {
        prefix: state.prefix_score,
        complete: state.complete_score(),
        next,
    })
}
