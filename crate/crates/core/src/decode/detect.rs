//! Sentence- and speaker-level Aphasia decisions.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::ctc::{ctc_greedy, LogProbLattice};
use crate::model::{Vocabulary, APH, NONAPH};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Aph,
    NonAph,
    /// No usable tag was decoded.
    Abstain,
}

impl Label {
    pub fn from_bool(aphasia: bool) -> Self {
        if aphasia {
            Label::Aph
        } else {
            Label::NonAph
        }
    }

    /// Binary decision; abstentions count as Aphasia.
    pub fn coerced(self) -> bool {
        !matches!(self, Label::NonAph)
    }

    fn from_tag(id: usize) -> Option<Self> {
        match id {
            APH => Some(Label::Aph),
            NONAPH => Some(Label::NonAph),
            _ => None,
        }
    }
}

/// Label carried by the tags of a decoded hypothesis: the common label if
/// all tags agree, otherwise (or without tags) [`Label::Abstain`].
pub fn resolve_sentence_tag(tokens: &[usize], vocab: &Vocabulary) -> Label {
    let mut labels = tokens
        .iter()
        .filter(|&&t| vocab.is_tag(t))
        .filter_map(|&t| Label::from_tag(t));
    match labels.next() {
        Some(first) if labels.all(|l| l == first) => first,
        _ => Label::Abstain,
    }
}

/// Label of the first tag in the greedy CTC output of a tapped layer.
pub fn interctc_detect(lattice: &LogProbLattice, vocab: &Vocabulary) -> Label {
    ctc_greedy(lattice)
        .into_iter()
        .find(|&t| vocab.is_tag(t))
        .and_then(Label::from_tag)
        .unwrap_or(Label::Abstain)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct VoteTally {
    pub aph: usize,
    pub nonaph: usize,
    pub abstain: usize,
}

impl VoteTally {
    pub fn from_labels(labels: &[Label]) -> Self {
        let mut t = Self::default();
        for l in labels {
            match l {
                Label::Aph => t.aph += 1,
                Label::NonAph => t.nonaph += 1,
                Label::Abstain => t.abstain += 1,
            }
        }
        t
    }

    pub fn total(&self) -> usize {
        self.aph + self.nonaph + self.abstain
    }

    /// Majority over non-abstaining votes; ties and all-abstain go to
    /// Aphasia.
    pub fn winner(&self) -> Label {
        if self.nonaph > self.aph {
            Label::NonAph
        } else {
            Label::Aph
        }
    }
}

/// Speaker-level label by majority vote over utterance labels.
pub fn majority_vote(labels: &[Label]) -> Label {
    VoteTally::from_labels(labels).winner()
}

/// Binary confusion counts with Aphasia as the positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl Confusion {
    pub fn record(&mut self, truth: bool, predicted: bool) {
        match (truth, predicted) {
            (true, true) => self.tp += 1,
            (false, true) => self.fp += 1,
            (false, false) => self.tn += 1,
            (true, false) => self.fn_ += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn accuracy(&self) -> f64 {
        if self.total() == 0 {
            0.0
        } else {
            (self.tp + self.tn) as f64 / self.total() as f64
        }
    }
}

/// Detection quality of one detector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionReport {
    /// Abstentions coerced to Aphasia.
    pub sentence_accuracy: f64,
    /// Abstentions counted as errors.
    pub sentence_accuracy_raw: f64,
    pub speaker_accuracy: f64,
    pub abstain_rate: f64,
    pub sentence_confusion: Confusion,
    pub speaker_confusion: Confusion,
    pub votes: BTreeMap<String, VoteTally>,
}

/// One detector decision: `(speaker, true label, predicted label)`.
pub type Decision<'a> = (&'a str, bool, Label);

pub fn detection_report(decisions: &[Decision]) -> DetectionReport {
    let mut sentence = Confusion::default();
    let mut raw_hits = 0usize;
    let mut abstains = 0usize;
    let mut per_speaker: BTreeMap<String, (bool, Vec<Label>)> = BTreeMap::new();
    for &(speaker, truth, label) in decisions {
        sentence.record(truth, label.coerced());
        raw_hits += usize::from(label == Label::from_bool(truth));
        abstains += usize::from(label == Label::Abstain);
        per_speaker
            .entry(speaker.to_string())
            .or_insert_with(|| (truth, Vec::new()))
            .1
            .push(label);
    }
    let mut speaker = Confusion::default();
    let mut votes = BTreeMap::new();
    for (name, (truth, labels)) in per_speaker {
        let tally = VoteTally::from_labels(&labels);
        speaker.record(truth, tally.winner().coerced());
        votes.insert(name, tally);
    }
    let n = decisions.len().max(1) as f64;
    DetectionReport {
        sentence_accuracy: sentence.accuracy(),
        sentence_accuracy_raw: raw_hits as f64 / n,
        speaker_accuracy: speaker.accuracy(),
        abstain_rate: abstains as f64 / n,
        sentence_confusion: sentence,
        speaker_confusion: speaker,
        votes,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use Label::*;

    #[test]
    fn sentence_resolution() {
        let v = Vocabulary::new(["w"]);
        let w = v.id("w").unwrap();
        assert_eq!(resolve_sentence_tag(&[APH, w], &v), Aph);
        assert_eq!(resolve_sentence_tag(&[w], &v), Abstain);
        assert_eq!(resolve_sentence_tag(&[APH, w, NONAPH], &v), Abstain);
        assert_eq!(resolve_sentence_tag(&[NONAPH, w, NONAPH], &v), NonAph);
    }

    #[test]
    fn voting_rules() {
        assert_eq!(majority_vote(&[Aph, Aph, NonAph]), Aph);
        assert_eq!(majority_vote(&[Aph, NonAph]), Aph);
        assert_eq!(majority_vote(&[NonAph; 7]), NonAph);
        assert_eq!(majority_vote(&[Abstain, Abstain]), Aph);
        assert_eq!(majority_vote(&[Abstain, Abstain, NonAph]), NonAph);
    }

    #[test]
    fn greedy_tag_detection() {
        let v = Vocabulary::new(["w1", "w2"]);
        let (w1, w2) = (v.id("w1").unwrap(), v.id("w2").unwrap());
        let one_hot = |path: &[usize]| {
            let n = v.len();
            let mut lp = vec![-50.0; path.len() * n];
            for (t, &k) in path.iter().enumerate() {
                lp[t * n + k] = 0.0;
            }
            LogProbLattice::from_raw(path.len(), n, lp).unwrap()
        };
        assert_eq!(interctc_detect(&one_hot(&[APH, 0, w1]), &v), Aph);
        assert_eq!(interctc_detect(&one_hot(&[w1, w2]), &v), Abstain);
        assert_eq!(interctc_detect(&one_hot(&[0, NONAPH, NONAPH]), &v), NonAph);
    }

    #[test]
    fn constant_aph_on_balanced_speakers() {
        let d: Vec<Decision> = vec![("a", true, Aph), ("a", true, Aph), ("b", false, Aph)];
        let r = detection_report(&d);
        assert_eq!(r.speaker_accuracy, 0.5);
        assert_eq!(r.sentence_confusion.fp, 1);
        let c = r.sentence_confusion;
        assert_eq!(r.sentence_accuracy, (c.tp + c.tn) as f64 / c.total() as f64);
    }
}
