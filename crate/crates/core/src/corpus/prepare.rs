//! Turning cleaned CHAT transcripts into manifest records.

use log::warn;

use super::manifest::{classify_severity, UtteranceRecord};
use crate::chat::{ChatDocument, CleanUtterance, DiagnosisGroup};

/// Manifest records for the Aphasia and control participants of one
/// transcript. Speakers are named `{stem}-{code}` and utterances
/// `{stem}-{code}-{index}`. Utterances without time stamps, participants
/// of unknown group and Aphasia participants without an AQ are skipped.
pub fn records_from_chat(
    stem: &str,
    doc: &ChatDocument,
    utterances: &[CleanUtterance],
) -> Vec<UtteranceRecord> {
    let mut out = Vec::new();
    let mut counters = std::collections::BTreeMap::<&str, usize>::new();
    for u in utterances {
        let Some(p) = doc.participant(&u.speaker_code) else {
            continue;
        };
        let aphasia = match p.diagnosis_group {
            DiagnosisGroup::Aphasia => true,
            DiagnosisGroup::Control => false,
            DiagnosisGroup::Unknown => continue,
        };
        let aq = if aphasia {
            match p.aq {
                Some(aq) => Some(aq),
                None => {
                    warn!("{stem}: participant {} has no AQ; skipped", p.speaker_code);
                    continue;
                }
            }
        } else {
            None
        };
        let severity = match classify_severity(aq.unwrap_or(100.0), aphasia) {
            Ok(s) => s,
            Err(e) => {
                warn!("{stem}: {e}; skipped");
                continue;
            }
        };
        let Some(duration_s) = u.duration_s() else {
            continue;
        };
        let n = counters.entry(&u.speaker_code).or_default();
        let utt_id = format!("{stem}-{}-{n:04}", u.speaker_code);
        *n += 1;
        out.push(UtteranceRecord {
            utt_id,
            speaker_id: format!("{stem}-{}", u.speaker_code),
            tokens: u.tokens.clone(),
            duration_s,
            aphasia,
            aq,
            severity,
            feature_path: None,
        });
    }
    out
}
