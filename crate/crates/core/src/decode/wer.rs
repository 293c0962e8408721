use std::ops::AddAssign;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{strip_tags, Vocabulary};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct WerStats {
    pub substitutions: usize,
    pub insertions: usize,
    pub deletions: usize,
    pub ref_words: usize,
}

impl WerStats {
    pub fn errors(&self) -> usize {
        self.substitutions + self.insertions + self.deletions
    }

    /// `None` when there are no reference words.
    pub fn rate(&self) -> Option<f64> {
        (self.ref_words > 0).then(|| self.errors() as f64 / self.ref_words as f64)
    }
}

impl AddAssign for WerStats {
    fn add_assign(&mut self, o: Self) {
        self.substitutions += o.substitutions;
        self.insertions += o.insertions;
        self.deletions += o.deletions;
        self.ref_words += o.ref_words;
    }
}

/// Minimal unit-cost edit script between `reference` and `hypothesis`.
/// Among minimal scripts the backtrace prefers match/substitution, then
/// deletion, then insertion.
pub fn edit_counts<T: PartialEq>(reference: &[T], hypothesis: &[T]) -> WerStats {
    let (n, m) = (reference.len(), hypothesis.len());
    let w = m + 1;
    let mut d = vec![0usize; (n + 1) * w];
    for i in 0..=n {
        d[i * w] = i;
    }
    for (j, cell) in d[..w].iter_mut().enumerate() {
        *cell = j;
    }
    for i in 1..=n {
        for j in 1..=m {
            let sub = d[(i - 1) * w + j - 1] + usize::from(reference[i - 1] != hypothesis[j - 1]);
            let del = d[(i - 1) * w + j] + 1;
            let ins = d[i * w + j - 1] + 1;
            d[i * w + j] = sub.min(del).min(ins);
        }
    }
    let mut stats = WerStats {
        ref_words: n,
        ..WerStats::default()
    };
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        let here = d[i * w + j];
        if i > 0 && j > 0 {
            let same = reference[i - 1] == hypothesis[j - 1];
            if d[(i - 1) * w + j - 1] + usize::from(!same) == here {
                stats.substitutions += usize::from(!same);
                i -= 1;
                j -= 1;
                continue;
            }
        }
        if i > 0 && d[(i - 1) * w + j] + 1 == here {
            stats.deletions += 1;
            i -= 1;
        } else {
            stats.insertions += 1;
            j -= 1;
        }
    }
    stats
}

/// Word error statistics with detection tags removed from both sides.
pub fn wer(reference: &[usize], hypothesis: &[usize], vocab: &Vocabulary) -> Result<WerStats> {
    let (r, _) = strip_tags(reference, vocab);
    let (h, _) = strip_tags(hypothesis, vocab);
    if r.is_empty() {
        return Err(Error::EmptyReference);
    }
    Ok(edit_counts(&r, &h))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{APH, NONAPH};

    #[test]
    fn hand_worked_alignment() {
        let s = edit_counts(&["a", "b", "c"], &["a", "x", "c", "d"]);
        assert_eq!((s.substitutions, s.insertions, s.deletions), (1, 1, 0));
        assert!((s.rate().unwrap() - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn substitution_preferred_over_insert_delete() {
        let s = edit_counts(&["a"], &["b"]);
        assert_eq!((s.substitutions, s.insertions, s.deletions), (1, 0, 0));
    }

    #[test]
    fn empty_sides() {
        let s = edit_counts(&["a", "b"], &[]);
        assert_eq!(s.deletions, 2);
        let s = edit_counts::<&str>(&[], &["a"]);
        assert_eq!((s.insertions, s.rate()), (1, None));
    }

    #[test]
    fn tags_are_ignored() {
        let v = Vocabulary::new(["a"]);
        let a = v.id("a").unwrap();
        let s = wer(&[APH, a], &[NONAPH, a], &v).unwrap();
        assert_eq!(s.rate(), Some(0.0));
        assert!(matches!(wer(&[APH], &[a], &v), Err(Error::EmptyReference)));
    }
}
