mod common;

use aphasr::ctc::{
    ctc_greedy, ctc_loss, ctc_prefix_score, min_frames, CtcPrefixScorer, LogProbLattice, LOG_ZERO,
};
use common::{all_sequences, brute_force_prob, random_lattice, rng};
use proptest::prelude::*;
use rand::Rng;

fn random_target<R: Rng>(rng: &mut R, vocab: usize, max_len: usize) -> Vec<usize> {
    let len = rng.random_range(0..=max_len);
    (0..len).map(|_| rng.random_range(1..vocab)).collect()
}

#[test]
fn nll_matches_path_enumeration() {
    let mut r = rng(11);
    let mut checked = 0;
    while checked < 300 {
        let frames = r.random_range(1..=6);
        let vocab = r.random_range(2..=4);
        let target = random_target(&mut r, vocab, 3);
        let lat = random_lattice(&mut r, frames, vocab);
        let res = ctc_loss(&lat, &target);
        if frames < min_frames(&target) {
            assert!(!res.feasible);
            assert_eq!(brute_force_prob(&lat, &target), 0.0);
            continue;
        }
        let oracle = -brute_force_prob(&lat, &target).ln();
        assert!(
            (res.neg_log_likelihood - oracle).abs() < 1e-9,
            "T={frames} V={vocab} target={target:?}: {} vs {oracle}",
            res.neg_log_likelihood
        );
        checked += 1;
    }
}

#[test]
fn gradient_matches_central_differences() {
    let mut r = rng(12);
    let h = 1e-5;
    for _ in 0..100 {
        let frames = r.random_range(1..=6);
        let vocab = r.random_range(2..=4);
        let target = random_target(&mut r, vocab, 3);
        if frames < min_frames(&target) {
            continue;
        }
        let lat = random_lattice(&mut r, frames, vocab);
        let res = ctc_loss(&lat, &target);
        for i in 0..frames * vocab {
            let mut plus = lat.as_slice().to_vec();
            let mut minus = plus.clone();
            plus[i] += h;
            minus[i] -= h;
            let lp = LogProbLattice::from_raw(frames, vocab, plus).unwrap();
            let lm = LogProbLattice::from_raw(frames, vocab, minus).unwrap();
            let fd = (ctc_loss(&lp, &target).neg_log_likelihood
                - ctc_loss(&lm, &target).neg_log_likelihood)
                / (2.0 * h);
            let an = res.grad_logp[i];
            assert!(
                (fd - an).abs() <= 1e-5 * fd.abs().max(1.0),
                "entry {i}: analytic {an} vs fd {fd}"
            );
        }
    }
}

#[test]
fn prefix_complete_score_is_negative_loss() {
    let mut r = rng(13);
    for _ in 0..200 {
        let frames = r.random_range(1..=6);
        let vocab = r.random_range(2..=4);
        let target = random_target(&mut r, vocab, 3);
        if frames < min_frames(&target) {
            continue;
        }
        let lat = random_lattice(&mut r, frames, vocab);
        let scorer = CtcPrefixScorer::new(&lat);
        let st = scorer.state_for(&target);
        let nll = ctc_loss(&lat, &target).neg_log_likelihood;
        assert!((st.complete_score() + nll).abs() < 1e-9);
    }
}

#[test]
fn prefix_score_sums_complete_extensions() {
    // log P(g...) = log sum over every output that starts with g.
    let mut r = rng(14);
    for _ in 0..50 {
        let frames = r.random_range(1..=5);
        let vocab = r.random_range(2..=4);
        let lat = random_lattice(&mut r, frames, vocab);
        let outputs = all_sequences(vocab, frames);
        let prefix = random_target(&mut r, vocab, 2);
        let oracle: f64 = outputs
            .iter()
            .filter(|o| o.starts_with(&prefix))
            .map(|o| brute_force_prob(&lat, o))
            .sum();
        match ctc_prefix_score(&lat, &prefix) {
            Ok(s) => assert!((s.prefix.exp() - oracle).abs() < 1e-9),
            Err(_) => assert!(oracle < 1e-300),
        }
    }
}

#[test]
fn complete_scores_sum_to_one() {
    let mut r = rng(15);
    for _ in 0..30 {
        let frames = r.random_range(1..=5);
        let vocab = r.random_range(2..=4);
        let lat = random_lattice(&mut r, frames, vocab);
        let scorer = CtcPrefixScorer::new(&lat);
        let total: f64 = all_sequences(vocab, frames)
            .iter()
            .map(|s| {
                let c = scorer.state_for(s).complete_score();
                if c <= LOG_ZERO {
                    0.0
                } else {
                    c.exp()
                }
            })
            .sum();
        assert!(total <= 1.0 + 1e-9);
        assert!((total - 1.0).abs() < 1e-9);
    }
}

#[test]
fn next_token_scores_match_extension() {
    let mut r = rng(16);
    let lat = random_lattice(&mut r, 5, 4);
    let s = ctc_prefix_score(&lat, &[2]).unwrap();
    assert_eq!(s.next[0], LOG_ZERO);
    for k in 1..4 {
        let direct = ctc_prefix_score(&lat, &[2, k]).unwrap().prefix;
        assert!((s.next[k] - direct).abs() < 1e-12);
    }
}

proptest! {
    #[test]
    fn appending_preserves_infeasibility_and_shrinks_prefix_mass(
        seed in 0u64..10_000,
        frames in 1usize..=6,
        vocab in 2usize..=4,
        len in 0usize..=4,
    ) {
        let mut r = rng(seed);
        let lat = random_lattice(&mut r, frames, vocab);
        let target: Vec<usize> = (0..len).map(|_| r.random_range(1..vocab)).collect();
        let mut longer = target.clone();
        longer.push(r.random_range(1..vocab));
        if !ctc_loss(&lat, &target).feasible {
            prop_assert!(!ctc_loss(&lat, &longer).feasible);
        }
        let scorer = CtcPrefixScorer::new(&lat);
        let a = scorer.state_for(&target).prefix_score;
        let b = scorer.state_for(&longer).prefix_score;
        prop_assert!(b <= a + 1e-12);
    }

    #[test]
    fn greedy_recovers_one_hot_alignment(path in proptest::collection::vec(0usize..4, 1..10)) {
        let vocab = 4;
        let mut logp = vec![LOG_ZERO; path.len() * vocab];
        for (t, &k) in path.iter().enumerate() {
            logp[t * vocab + k] = 0.0;
        }
        let lat = LogProbLattice::from_raw(path.len(), vocab, logp).unwrap();
        prop_assert_eq!(ctc_greedy(&lat), aphasr::ctc::collapse_path(&path));
    }
}
