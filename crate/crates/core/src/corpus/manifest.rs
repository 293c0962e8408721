use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{from_jsonl, to_jsonl, write_atomic};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeverityLevel {
    Mild,
    Moderate,
    Severe,
    VerySevere,
    Control,
}

impl SeverityLevel {
    pub const ALL: [SeverityLevel; 5] = [
        SeverityLevel::Mild,
        SeverityLevel::Moderate,
        SeverityLevel::Severe,
        SeverityLevel::VerySevere,
        SeverityLevel::Control,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SeverityLevel::Mild => "mild",
            SeverityLevel::Moderate => "moderate",
            SeverityLevel::Severe => "severe",
            SeverityLevel::VerySevere => "very_severe",
            SeverityLevel::Control => "control",
        }
    }
}

impl fmt::Display for SeverityLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Buckets an Aphasia Quotient: mild (AQ > 75), moderate (50 < AQ <= 75),
/// severe (25 < AQ <= 50), very severe (0 <= AQ <= 25). Healthy speakers
/// are `Control` regardless of `aq`.
pub fn classify_severity(aq: f64, aphasia: bool) -> Result<SeverityLevel> {
    if !aphasia {
        return Ok(SeverityLevel::Control);
    }
    if !(0.0..=100.0).contains(&aq) {
        return Err(Error::AqOutOfRange(aq));
    }
    Ok(if aq > 75.0 {
        SeverityLevel::Mild
    } else if aq > 50.0 {
        SeverityLevel::Moderate
    } else if aq > 25.0 {
        SeverityLevel::Severe
    } else {
        SeverityLevel::VerySevere
    })
}

/// One manifest row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtteranceRecord {
    pub utt_id: String,
    pub speaker_id: String,
    pub tokens: Vec<String>,
    pub duration_s: f64,
    pub aphasia: bool,
    pub aq: Option<f64>,
    pub severity: SeverityLevel,
    /// Feature file, relative to the manifest's directory.
    pub feature_path: Option<String>,
}

pub const MIN_DURATION_S: f64 = 0.3;
pub const MAX_DURATION_S: f64 = 30.0;

/// Keeps utterances with `0.3 <= duration <= 30` seconds.
pub fn filter_duration(records: Vec<UtteranceRecord>) -> Vec<UtteranceRecord> {
    records
        .into_iter()
        .filter(|r| (MIN_DURATION_S..=MAX_DURATION_S).contains(&r.duration_s))
        .collect()
}

/// Rejects manifests where one speaker carries different labels.
pub fn check_speaker_consistency(records: &[UtteranceRecord]) -> Result<()> {
    let mut seen: BTreeMap<&str, (bool, SeverityLevel)> = BTreeMap::new();
    for r in records {
        let label = (r.aphasia, r.severity);
        match seen.get(r.speaker_id.as_str()) {
            Some(&prev) if prev != label => {
                return Err(Error::InconsistentSpeaker(r.speaker_id.clone()))
            }
            Some(_) => {}
            None => {
                seen.insert(&r.speaker_id, label);
            }
        }
        if (r.severity == SeverityLevel::Control) == r.aphasia {
            return Err(Error::InconsistentSpeaker(r.speaker_id.clone()));
        }
    }
    Ok(())
}

pub fn manifest_to_string(records: &[UtteranceRecord]) -> Result<String> {
    to_jsonl(records)
}

pub fn parse_manifest(text: &str) -> Result<Vec<UtteranceRecord>> {
    let records: Vec<UtteranceRecord> = from_jsonl(text, "manifest")?;
    check_speaker_consistency(&records)?;
    Ok(records)
}

pub fn read_manifest(path: &Path) -> Result<Vec<UtteranceRecord>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_manifest(&text)
}

pub fn write_manifest(path: &Path, records: &[UtteranceRecord]) -> Result<()> {
    write_atomic(path, manifest_to_string(records)?.as_bytes())
}
