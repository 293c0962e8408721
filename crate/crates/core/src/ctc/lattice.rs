use crate::error::{Error, Result};

/// Blank symbol index in every lattice and vocabulary.
pub const BLANK: usize = 0;

/// Floor used for log(0).
pub const LOG_ZERO: f64 = -1e30;

pub(crate) fn log_add(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    if hi <= LOG_ZERO {
        return LOG_ZERO;
    }
    (hi + (lo - hi).exp().ln_1p()).max(LOG_ZERO)
}

pub(crate) fn log_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().fold(LOG_ZERO, log_add)
}

/// `frames x vocab` matrix of per-frame log probabilities, blank at 0.
#[derive(Debug, Clone, PartialEq)]
pub struct LogProbLattice {
    frames: usize,
    vocab: usize,
    logp: Vec<f64>,
}

impl LogProbLattice {
    /// Validating constructor: rows must be normalized log distributions.
    pub fn new(frames: usize, vocab: usize, logp: Vec<f64>) -> Result<Self> {
        let lat = Self::from_raw(frames, vocab, logp)?;
        for (t, row) in lat.logp.chunks(vocab).enumerate() {
            let lse = log_sum(row.iter().copied());
            if (lse).abs() > 1e-6 || row.iter().any(|&v| v > 1e-6 || v.is_nan()) {
                return Err(Error::InvalidFeatures(format!(
                    "lattice row {t} is not a log distribution (logsumexp {lse})"
                )));
            }
        }
        Ok(lat)
    }

    /// Unchecked apart from dimensions; entries are treated as independent
    /// log-emission scores.
    pub fn from_raw(frames: usize, vocab: usize, logp: Vec<f64>) -> Result<Self> {
        if frames == 0 || vocab < 2 || logp.len() != frames * vocab {
            return Err(Error::ShapeMismatch(format!(
                "lattice {frames}x{vocab} with {} entries",
                logp.len()
            )));
        }
        Ok(Self {
            frames,
            vocab,
            logp,
        })
    }

    /// Row-wise log-softmax of raw scores.
    pub fn from_logits(frames: usize, vocab: usize, logits: &[f64]) -> Result<Self> {
        let mut logp = logits.to_vec();
        for row in logp.chunks_mut(vocab.max(1)) {
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
            for v in row.iter_mut() {
                *v -= lse;
            }
        }
        Self::from_raw(frames, vocab, logp)
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn vocab(&self) -> usize {
        self.vocab
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.logp[t * self.vocab..(t + 1) * self.vocab]
    }

    #[inline]
    pub fn at(&self, t: usize, k: usize) -> f64 {
        self.logp[t * self.vocab + k]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.logp
    }

    /// First `frames` rows, for dropping padded frames.
    pub fn truncated(&self, frames: usize) -> Self {
        let frames = frames.clamp(1, self.frames);
        Self {
            frames,
            vocab: self.vocab,
            logp: self.logp[..frames * self.vocab].to_vec(),
        }
    }
}
