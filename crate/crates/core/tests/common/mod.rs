#![allow(dead_code)]

use aphasr::ctc::{collapse_path, LogProbLattice};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_lattice<R: Rng>(rng: &mut R, frames: usize, vocab: usize) -> LogProbLattice {
    let logits: Vec<f64> = (0..frames * vocab)
        .map(|_| rng.random_range(-2.0..2.0))
        .collect();
    LogProbLattice::from_logits(frames, vocab, &logits).unwrap()
}

/// Calls `f` on every length-`frames` path over `vocab` symbols.
pub fn for_each_path(frames: usize, vocab: usize, mut f: impl FnMut(&[usize])) {
    let mut path = vec![0usize; frames];
    loop {
        f(&path);
        let mut i = 0;
        loop {
            if i == frames {
                return;
            }
            path[i] += 1;
            if path[i] < vocab {
                break;
            }
            path[i] = 0;
            i += 1;
        }
    }
}

/// Brute-force `P(target | lattice)` by summing every alignment.
pub fn brute_force_prob(lattice: &LogProbLattice, target: &[usize]) -> f64 {
    let mut total = 0.0;
    for_each_path(lattice.frames(), lattice.vocab(), |path| {
        if collapse_path(path) == target {
            let lp: f64 = path
                .iter()
                .enumerate()
                .map(|(t, &k)| lattice.at(t, k))
                .sum();
            total += lp.exp();
        }
    });
    total
}

/// Every label sequence over `1..vocab` of length at most `max_len`.
pub fn all_sequences(vocab: usize, max_len: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    let mut frontier = vec![Vec::new()];
    for _ in 0..max_len {
        let mut next = Vec::new();
        for s in &frontier {
            for k in 1..vocab {
                let mut e: Vec<usize> = s.clone();
                e.push(k);
                next.push(e);
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}

/// Deterministic pseudo-random decoder: the next-token distribution is a
/// fixed function of the prefix.
pub struct TableScorer {
    pub seed: u64,
    pub vocab: usize,
}

impl aphasr::decode::StepScorer for TableScorer {
    fn log_probs(&self, prefix: &[usize]) -> Vec<f64> {
        let mut key = self.seed;
        for &p in prefix {
            key = key
                .wrapping_mul(0x9E37_79B9_7F4A_7C15)
                .wrapping_add(p as u64 + 1);
        }
        let mut r = rng(key);
        let logits: Vec<f64> = (0..self.vocab).map(|_| r.random_range(-3.0..3.0)).collect();
        let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let z = logits.iter().map(|l| (l - m).exp()).sum::<f64>().ln() + m;
        logits.iter().map(|l| l - z).collect()
    }
}

/// Joint score of a complete hypothesis, with the CTC term from path
/// enumeration rather than prefix recursion.
pub fn brute_joint(
    scorer: &dyn aphasr::decode::StepScorer,
    lattice: &LogProbLattice,
    tokens: &[usize],
    decode_weight: f64,
) -> (f64, f64, f64) {
    let mut prefix = vec![aphasr::model::SOS_EOS];
    let mut dec = 0.0;
    for &t in tokens {
        dec += scorer.log_probs(&prefix)[t];
        prefix.push(t);
    }
    dec += scorer.log_probs(&prefix)[aphasr::model::SOS_EOS];
    let ctc = brute_force_prob(lattice, tokens)
        .ln()
        .max(aphasr::ctc::LOG_ZERO);
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
    (d + c, dec, ctc)
}

/// Every hypothesis over output tokens `2..vocab` (blank and sos/eos
/// excluded) of length at most `max_len`.
pub fn all_hypotheses(vocab: usize, max_len: usize) -> Vec<Vec<usize>> {
    all_sequences(vocab - 1, max_len)
        .into_iter()
        .map(|s| s.into_iter().map(|k| k + 1).collect())
        .collect()
}

pub fn random_features<R: Rng>(
    rng: &mut R,
    frames: usize,
    dims: usize,
) -> aphasr::corpus::FeatureMatrix {
    let data = (0..frames * dims)
        .map(|_| rng.random_range(-1.0f32..1.0))
        .collect();
    aphasr::corpus::FeatureMatrix::new(frames, dims, data, 100.0).unwrap()
}

/// Small model configuration for property tests.
pub fn tiny_model(layers: usize, hidden: usize, taps: &[usize]) -> aphasr::model::ModelConfig {
    aphasr::model::ModelConfig {
        num_layers: layers,
        hidden,
        heads: 2,
        mlp_hidden: hidden,
        interctc_targets: vec![aphasr::model::InterTarget::TagPrefixedTokens; taps.len()],
        interctc_layers: taps.to_vec(),
        decoder_ffn: hidden,
        ..aphasr::model::ModelConfig::default()
    }
}

pub struct SyntheticSplit {
    pub vocab: aphasr::model::Vocabulary,
    pub train: Vec<aphasr::model::Example>,
    pub valid: Vec<aphasr::model::Example>,
    pub test: Vec<aphasr::model::Example>,
}

/// Generates a synthetic corpus and splits it by speaker with the default
/// ratios.
pub fn synthetic_split(spec: &aphasr::corpus::SyntheticSpec) -> SyntheticSplit {
    use aphasr::corpus::{generate_synthetic, stratified_split, SplitSpec, UtteranceRecord};
    use aphasr::model::{Example, Vocabulary};
    let data = generate_synthetic(spec).unwrap();
    let records: Vec<UtteranceRecord> = data.iter().map(|u| u.record.clone()).collect();
    let split = stratified_split(&records, &SplitSpec::default()).unwrap();
    let vocab = Vocabulary::new(split.train.iter().flat_map(|r| r.tokens.iter().cloned()));
    let features: std::collections::HashMap<&str, &aphasr::corpus::FeatureMatrix> = data
        .iter()
        .map(|u| (u.record.utt_id.as_str(), &u.features))
        .collect();
    let examples = |rs: &[UtteranceRecord]| -> Vec<Example> {
        rs.iter()
            .map(|r| Example::from_record(r, &vocab, features[r.utt_id.as_str()].clone()))
            .collect()
    };
    SyntheticSplit {
        train: examples(&split.train),
        valid: examples(&split.valid),
        test: examples(&split.test),
        vocab: vocab.clone(),
    }
}

pub fn fixture(name: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

/// Parses and cleans a CHAT transcript into JSON lines.
pub fn clean_to_jsonl(text: &str) -> String {
    let doc = aphasr::chat::parse_chat(text).unwrap();
    aphasr::io::to_jsonl(&aphasr::chat::clean_document(&doc)).unwrap()
}
