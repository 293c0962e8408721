//! Deterministic inputs shared by the benchmarks.

use aphasr::ctc::LogProbLattice;
use aphasr::decode::StepScorer;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_lattice(seed: u64, frames: usize, vocab: usize) -> LogProbLattice {
    let mut r = rng(seed);
    let logits: Vec<f64> = (0..frames * vocab)
        .map(|_| r.random_range(-2.0..2.0))
        .collect();
    LogProbLattice::from_logits(frames, vocab, &logits).expect("positive dimensions")
}

pub fn random_target(seed: u64, len: usize, vocab: usize) -> Vec<usize> {
    let mut r = rng(seed);
    (0..len).map(|_| r.random_range(1..vocab)).collect()
}

/// Decoder stand-in: a fixed bigram table indexed by the last token.
pub struct BigramScorer {
    table: Vec<Vec<f64>>,
}

impl BigramScorer {
    pub fn new(seed: u64, vocab: usize) -> Self {
        let mut r = rng(seed);
        let table = (0..vocab)
            .map(|_| {
                let logits: Vec<f64> = (0..vocab).map(|_| r.random_range(-3.0..3.0)).collect();
                let z = logits.iter().map(|l| l.exp()).sum::<f64>().ln();
                logits.iter().map(|l| l - z).collect()
            })
            .collect();
        Self { table }
    }
}

impl StepScorer for BigramScorer {
    fn log_probs(&self, prefix: &[usize]) -> Vec<f64> {
        self.table[*prefix.last().expect("prefix starts with sos")].clone()
    }
}
