//! CTC negative log-likelihood and its exact gradient via forward-backward
//! over the blank-interleaved label sequence.

use super::lattice::{log_add, LogProbLattice, BLANK, LOG_ZERO};

#[derive(Debug, Clone, PartialEq)]
pub struct CtcResult {
    /// `-log P(target | lattice)`; `+inf` when the target is infeasible.
    pub neg_log_likelihood: f64,
    /// `d nll / d logp`, `frames x vocab`; all zeros when infeasible.
    pub grad_logp: Vec<f64>,
    pub feasible: bool,
}

/// Minimum frames needed to emit `target`: one per label plus a separating
/// blank between adjacent duplicates.
pub fn min_frames(target: &[usize]) -> usize {
    target.len() + target.windows(2).filter(|w| w[0] == w[1]).count()
}

fn infeasible(lattice: &LogProbLattice) -> CtcResult {
    CtcResult {
        neg_log_likelihood: f64::INFINITY,
        grad_logp: vec![0.0; lattice.frames() * lattice.vocab()],
        feasible: false,
    }
}

pub fn ctc_loss(lattice: &LogProbLattice, target: &[usize]) -> CtcResult {
    let frames = lattice.frames();
    let vocab = lattice.vocab();
    assert!(
        target.iter().all(|&k| k != BLANK && k < vocab),
        "target ids must lie in [1, {vocab})"
    );
    if frames < min_frames(target) {
        return infeasible(lattice);
    }

    // Extended label sequence: blank, l1, blank, l2, ..., blank.
    let states: Vec<usize> = std::iter::once(BLANK)
        .chain(target.iter().flat_map(|&k| [k, BLANK]))
        .collect();
    let n = states.len();
    let can_skip = |s: usize| s >= 2 && states[s] != BLANK && states[s] != states[s - 2];

    let mut alpha = vec![LOG_ZERO; frames * n];
    alpha[0] = lattice.at(0, states[0]);
    if n > 1 {
        alpha[1] = lattice.at(0, states[1]);
    }
    for t in 1..frames {
        let (prev, cur) = alpha.split_at_mut(t * n);
        let prev = &prev[(t - 1) * n..];
        for s in 0..n {
            let mut a = prev[s];
            if s >= 1 {
                a = log_add(a, prev[s - 1]);
            }
            if can_skip(s) {
                a = log_add(a, prev[s - 2]);
            }
            cur[s] = (a + lattice.at(t, states[s])).max(LOG_ZERO);
        }
    }

    let mut beta = vec![LOG_ZERO; frames * n];
    let last = (frames - 1) * n;
    beta[last + n - 1] = lattice.at(frames - 1, states[n - 1]);
    if n > 1 {
        beta[last + n - 2] = lattice.at(frames - 1, states[n - 2]);
    }
    for t in (0..frames - 1).rev() {
        let (cur, next) = beta.split_at_mut((t + 1) * n);
        let cur = &mut cur[t * n..];
        for s in 0..n {
            let mut b = next[s];
            if s + 1 < n {
                b = log_add(b, next[s + 1]);
            }
            if s + 2 < n && can_skip(s + 2) {
                b = log_add(b, next[s + 2]);
            }
            cur[s] = (b + lattice.at(t, states[s])).max(LOG_ZERO);
        }
    }

    let mut log_p = alpha[last + n - 1];
    if n > 1 {
        log_p = log_add(log_p, alpha[last + n - 2]);
    }
    if log_p <= LOG_ZERO {
        return infeasible(lattice);
    }

    // Occupancy per (t, label): log sum over states s with states[s] = k of
    // alpha_t(s) beta_t(s). Both include the emission at t, so one copy of
    // logp is subtracted.
    let mut grad = vec![0.0; frames * vocab];
    let mut occupancy = vec![LOG_ZERO; vocab];
    for t in 0..frames {
        occupancy.iter_mut().for_each(|o| *o = LOG_ZERO);
        for s in 0..n {
            let k = states[s];
            occupancy[k] = log_add(occupancy[k], alpha[t * n + s] + beta[t * n + s]);
        }
        for k in 0..vocab {
            if occupancy[k] > LOG_ZERO {
                grad[t * vocab + k] = -(occupancy[k] - lattice.at(t, k) - log_p).exp();
            }
        }
    }

    CtcResult {
        neg_log_likelihood: -log_p,
        grad_logp: grad,
        feasible: true,
    }
}
