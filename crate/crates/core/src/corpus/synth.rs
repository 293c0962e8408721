//! Desk-scale synthetic corpus: token templates plus class-specific
//! acoustic bias and vocabulary skew, so both detection routes have
//! something to learn.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::features::FeatureMatrix;
use super::manifest::{classify_severity, UtteranceRecord};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticSpec {
    pub speakers_per_class: usize,
    pub utterances_per_speaker: usize,
    pub vocab_size: usize,
    pub feature_dim: usize,
    pub frames_per_token: usize,
    pub min_tokens: usize,
    pub max_tokens: usize,
    pub noise_sigma: f64,
    /// Scale of the per-class bias vectors added to every frame.
    pub class_bias: f64,
    /// Probability that a token is drawn from the speaker class's preferred
    /// half of the vocabulary.
    pub skew: f64,
    pub frame_rate_hz: f32,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            speakers_per_class: 20,
            utterances_per_speaker: 20,
            vocab_size: 20,
            feature_dim: 16,
            frames_per_token: 3,
            min_tokens: 3,
            max_tokens: 6,
            noise_sigma: 0.05,
            class_bias: 0.5,
            skew: 0.7,
            frame_rate_hz: 10.0,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("synthetic spec: {m}")));
        if self.vocab_size < 2 {
            return bad("vocab_size must be at least 2");
        }
        if self.feature_dim == 0 || self.frames_per_token == 0 {
            return bad("feature_dim and frames_per_token must be positive");
        }
        if self.min_tokens == 0 || self.min_tokens > self.max_tokens {
            return bad("need 1 <= min_tokens <= max_tokens");
        }
        if !(0.0..=1.0).contains(&self.skew) || self.noise_sigma < 0.0 {
            return bad("skew must be in [0, 1] and noise_sigma non-negative");
        }
        Ok(())
    }
}

pub fn token_name(i: usize) -> String {
    format!("w{i:02}")
}

/// Deterministic acoustic model behind the generator.
#[derive(Debug, Clone)]
pub struct SyntheticWorld {
    /// Per token: `frames_per_token x dim` template, row-major.
    pub templates: Vec<Vec<f32>>,
    /// Index 0: control bias, index 1: Aphasia bias.
    pub class_bias: [Vec<f32>; 2],
    pub spec: SyntheticSpec,
}

impl SyntheticWorld {
    pub fn new(spec: &SyntheticSpec) -> Result<Self> {
        spec.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let normal = Normal::new(0.0f64, 1.0).expect("valid normal");
        let block = spec.frames_per_token * spec.feature_dim;
        let templates = (0..spec.vocab_size)
            .map(|_| (0..block).map(|_| normal.sample(&mut rng) as f32).collect())
            .collect();
        let mut bias = || -> Vec<f32> {
            (0..spec.feature_dim)
                .map(|_| (normal.sample(&mut rng) * spec.class_bias) as f32)
                .collect()
        };
        let class_bias = [bias(), bias()];
        Ok(Self {
            templates,
            class_bias,
            spec: spec.clone(),
        })
    }

    /// Noise-free frames for `tokens` spoken by a speaker of class `aphasia`.
    pub fn render(&self, tokens: &[usize], aphasia: bool) -> Vec<f32> {
        let d = self.spec.feature_dim;
        let bias = &self.class_bias[aphasia as usize];
        let mut out = Vec::with_capacity(tokens.len() * self.spec.frames_per_token * d);
        for &t in tokens {
            for row in self.templates[t].chunks(d) {
                out.extend(row.iter().zip(bias).map(|(a, b)| a + b));
            }
        }
        out
    }
}

/// Stable per-record seed from the corpus seed and an utterance id.
pub fn record_seed(seed: u64, utt_id: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(utt_id.as_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

fn sample_tokens<R: Rng>(rng: &mut R, spec: &SyntheticSpec, aphasia: bool) -> Vec<usize> {
    let len = rng.random_range(spec.min_tokens..=spec.max_tokens);
    let half = spec.vocab_size / 2;
    let mut out: Vec<usize> = Vec::with_capacity(len);
    while out.len() < len {
        let preferred = rng.random_bool(spec.skew);
        let low_half = preferred == aphasia;
        let t = if low_half {
            rng.random_range(0..half.max(1))
        } else {
            rng.random_range(half..spec.vocab_size)
        };
        // Adjacent duplicates render identical frames with no boundary cue.
        if out.last() != Some(&t) {
            out.push(t);
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticUtterance {
    pub record: UtteranceRecord,
    pub features: FeatureMatrix,
    pub token_ids: Vec<usize>,
}

/// Speakers `aph000..` and `ctl000..`; Aphasia speakers cycle through the
/// four severity buckets.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<Vec<SyntheticUtterance>> {
    let world = SyntheticWorld::new(spec)?;
    let mut jobs = Vec::new();
    for aphasia in [true, false] {
        for s in 0..spec.speakers_per_class {
            let speaker = format!("{}{s:03}", if aphasia { "aph" } else { "ctl" });
            let aq = aphasia.then(|| {
                let bucket = (s % 4) as f64;
                let mut rng = ChaCha8Rng::seed_from_u64(record_seed(spec.seed, &speaker));
                25.0 * bucket + 1.0 + 23.0 * rng.random::<f64>()
            });
            for u in 0..spec.utterances_per_speaker {
                jobs.push((speaker.clone(), format!("{speaker}-{u:03}"), aphasia, aq));
            }
        }
    }

    jobs.into_par_iter()
        .map(|(speaker, utt_id, aphasia, aq)| {
            let mut rng = ChaCha8Rng::seed_from_u64(record_seed(spec.seed, &utt_id));
            let ids = sample_tokens(&mut rng, spec, aphasia);
            let mut data = world.render(&ids, aphasia);
            if spec.noise_sigma > 0.0 {
                let noise = Normal::new(0.0, spec.noise_sigma).expect("valid sigma");
                for v in data.iter_mut() {
                    *v += noise.sample(&mut rng) as f32;
                }
            }
            let frames = ids.len() * spec.frames_per_token;
            let features = FeatureMatrix::new(frames, spec.feature_dim, data, spec.frame_rate_hz)?;
            let severity = classify_severity(aq.unwrap_or(100.0), aphasia)?;
            let record = UtteranceRecord {
                utt_id,
                speaker_id: speaker,
                tokens: ids.iter().map(|&i| token_name(i)).collect(),
                duration_s: features.duration_s(),
                aphasia,
                aq,
                severity,
                feature_path: None,
            };
            Ok(SyntheticUtterance {
                record,
                features,
                token_ids: ids,
            })
        })
        .collect()
}
