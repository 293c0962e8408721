//! Severity-stratified speaker splits.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::manifest::{SeverityLevel, UtteranceRecord};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    /// (train, valid, test)
    pub ratios: [f64; 3],
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            ratios: [0.56, 0.19, 0.25],
            seed: 0,
        }
    }
}

impl SplitSpec {
    pub fn new(ratios: [f64; 3], seed: u64) -> Result<Self> {
        let s = Self { ratios, seed };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let sum: f64 = self.ratios.iter().sum();
        if self.ratios.iter().any(|&r| r.is_nan() || r <= 0.0) || (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidRatios(self.ratios));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Split {
    pub train: Vec<UtteranceRecord>,
    pub valid: Vec<UtteranceRecord>,
    pub test: Vec<UtteranceRecord>,
}

/// Largest-remainder apportionment of `n` items over `ratios`. Ties in the
/// fractional part go to the earlier split.
pub fn apportion(n: usize, ratios: &[f64; 3]) -> [usize; 3] {
    let exact = ratios.map(|r| r * n as f64);
    let mut counts = exact.map(|e| e.floor() as usize);
    let assigned: usize = counts.iter().sum();
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| {
        let fa = exact[a] - exact[a].floor();
        let fb = exact[b] - exact[b].floor();
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    for &i in order.iter().take(n.saturating_sub(assigned)) {
        counts[i] += 1;
    }
    counts
}

fn stratum_seed(seed: u64, stratum: SeverityLevel) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (stratum as u64 + 1)
}

/// Splits speakers per severity stratum (controls form their own stratum),
/// then routes every utterance to its speaker's split. Record order within
/// each split follows the input.
pub fn stratified_split(records: &[UtteranceRecord], spec: &SplitSpec) -> Result<Split> {
    spec.validate()?;
    let mut strata: BTreeMap<SeverityLevel, BTreeSet<&str>> = BTreeMap::new();
    for r in records {
        strata.entry(r.severity).or_default().insert(&r.speaker_id);
    }

    let mut assignment: BTreeMap<&str, usize> = BTreeMap::new();
    for level in SeverityLevel::ALL {
        let Some(speakers) = strata.get(&level) else {
            log::warn!("stratum `{level}` has no speakers; skipping");
            continue;
        };
        let mut speakers: Vec<&str> = speakers.iter().copied().collect();
        let mut rng = ChaCha8Rng::seed_from_u64(stratum_seed(spec.seed, level));
        speakers.shuffle(&mut rng);
        let counts = apportion(speakers.len(), &spec.ratios);
        let mut it = speakers.into_iter();
        for (split, &count) in counts.iter().enumerate() {
            for s in it.by_ref().take(count) {
                assignment.insert(s, split);
            }
        }
    }

    let mut out = Split::default();
    for r in records {
        let dst = match assignment[r.speaker_id.as_str()] {
            0 => &mut out.train,
            1 => &mut out.valid,
            _ => &mut out.test,
        };
        dst.push(r.clone());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn apportion_default_ratios() {
        assert_eq!(apportion(100, &[0.56, 0.19, 0.25]), [56, 19, 25]);
        assert_eq!(apportion(1, &[0.56, 0.19, 0.25]), [1, 0, 0]);
        assert_eq!(apportion(0, &[0.56, 0.19, 0.25]), [0, 0, 0]);
        assert_eq!(apportion(3, &[1.0 / 3.0; 3]), [1, 1, 1]);
    }

    #[test]
    fn bad_ratios_rejected() {
        assert!(SplitSpec::new([0.5, 0.5, 0.5], 0).is_err());
        assert!(SplitSpec::new([1.0, 0.0, 0.0], 0).is_err());
        assert!(SplitSpec::new([0.56, 0.19, 0.25], 0).is_ok());
    }
}
