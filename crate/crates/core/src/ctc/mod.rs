//! CTC loss, decoding and intermediate-layer conditioning.

mod greedy;
mod interctc;
mod lattice;
mod loss;
mod prefix;

pub use greedy::{collapse_path, ctc_greedy};
pub use interctc::{interctc_condition, interctc_loss_total, ConditionParams};
pub use lattice::{LogProbLattice, BLANK, LOG_ZERO};
pub use loss::{ctc_loss, min_frames, CtcResult};
pub use prefix::{ctc_prefix_score, CtcPrefixScorer, PrefixScores, PrefixState};

use crate::autodiff::{Graph, Var};

/// CTC loss on a `frames x vocab` log-probability node. Returns the loss
/// node (absent for infeasible targets) together with the raw result.
pub fn ctc_loss_var(g: &mut Graph, logp: Var, target: &[usize]) -> (Option<Var>, CtcResult) {
    let (frames, vocab) = g.shape(logp);
    let lattice = LogProbLattice::from_raw(frames, vocab, g.value(logp).to_vec())
        .expect("graph node has valid dimensions");
    let result = ctc_loss(&lattice, target);
    if !result.feasible {
        return (None, result);
    }
    let node = g.external(logp, result.neg_log_likelihood, result.grad_logp.clone());
    (Some(node), result)
}
