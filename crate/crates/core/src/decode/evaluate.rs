use std::collections::BTreeMap;

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::beam::{decode_encoded, BeamConfig, Hypothesis};
use super::detect::{
    detection_report, interctc_detect, resolve_sentence_tag, DetectionReport, Label,
};
use super::wer::{wer, WerStats};
use crate::corpus::SeverityLevel;
use crate::error::{Error, Result};
use crate::model::{AsrModel, Example, InterTarget, TagMode};

/// Decoding outcome for one utterance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtteranceResult {
    pub utt_id: String,
    pub speaker_id: String,
    pub severity: SeverityLevel,
    pub aphasia: bool,
    /// Untagged reference ids.
    pub reference: Vec<usize>,
    pub hypothesis: Hypothesis,
    pub nbest: Vec<Hypothesis>,
    pub fallback: bool,
    /// `None` for an empty reference.
    pub wer: Option<WerStats>,
    pub tag_label: Label,
    /// Detector label per tag-prefixed InterCTC layer.
    pub interctc_labels: Vec<(usize, Label)>,
}

/// Beam settings for `model` on an utterance of `frames` encoder frames.
pub fn beam_config(model: &AsrModel, frames: usize) -> BeamConfig {
    let cfg = &model.config;
    BeamConfig {
        beam: cfg.decode.beam,
        decode_weight: cfg.decode_weight(),
        max_len: cfg.decode.max_len.unwrap_or(frames).min(frames),
    }
}

pub fn decode_example(model: &AsrModel, example: &Example) -> Result<UtteranceResult> {
    let encoded = model.encode(&example.features)?;
    let out = decode_encoded(model, &encoded, &beam_config(model, encoded.frames));
    if out.fallback {
        warn!("{}: no hypothesis reached eos", example.utt_id);
    }
    let wer = match wer(&example.tokens, &out.best.tokens, &model.vocab) {
        Ok(s) => Some(s),
        Err(Error::EmptyReference) => None,
        Err(e) => return Err(e),
    };
    let interctc_labels = encoded
        .taps
        .iter()
        .filter(|(_, target, _)| *target == InterTarget::TagPrefixedTokens)
        .map(|(layer, _, lat)| (*layer, interctc_detect(lat, &model.vocab)))
        .collect();
    let mut nbest = out.nbest;
    nbest.truncate(model.config.decode.nbest.max(1));
    Ok(UtteranceResult {
        utt_id: example.utt_id.clone(),
        speaker_id: example.speaker_id.clone(),
        severity: example.severity,
        aphasia: example.aphasia,
        reference: example.tokens.clone(),
        tag_label: resolve_sentence_tag(&out.best.tokens, &model.vocab),
        hypothesis: out.best,
        nbest,
        fallback: out.fallback,
        wer,
        interctc_labels,
    })
}

/// Decodes every example in parallel; results keep the input order.
pub fn decode_all(model: &AsrModel, examples: &[Example]) -> Result<Vec<UtteranceResult>> {
    examples
        .par_iter()
        .map(|e| decode_example(model, e))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionPair {
    pub sentence: super::detect::Confusion,
    pub speaker: super::detect::Confusion,
}

/// Evaluation summary as written to the report file. The top-level
/// detection fields belong to the primary detector: the decoder tags when
/// tagging is enabled, otherwise the first tag-prefixed InterCTC layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub utterances: usize,
    pub overall_wer: Option<f64>,
    pub wer_stats: WerStats,
    pub per_severity: BTreeMap<SeverityLevel, Option<f64>>,
    pub per_severity_stats: BTreeMap<SeverityLevel, WerStats>,
    pub empty_references: usize,
    pub fallbacks: usize,
    pub primary_detector: Option<String>,
    pub sentence_acc: Option<f64>,
    pub sentence_acc_raw: Option<f64>,
    pub speaker_acc: Option<f64>,
    pub confusion: Option<ConfusionPair>,
    pub abstain_rate: Option<f64>,
    pub detectors: BTreeMap<String, DetectionReport>,
}

pub fn tag_detector_name() -> String {
    "tag".to_string()
}

pub fn interctc_detector_name(layer: usize) -> String {
    format!("interctc_layer_{layer}")
}

pub fn build_report(results: &[UtteranceResult], tag_mode: TagMode) -> EvalReport {
    let mut total = WerStats::default();
    let mut per_sev: BTreeMap<SeverityLevel, WerStats> = SeverityLevel::ALL
        .iter()
        .map(|&s| (s, WerStats::default()))
        .collect();
    let mut empty = 0;
    for r in results {
        match r.wer {
            Some(s) => {
                total += s;
                *per_sev.get_mut(&r.severity).expect("all levels present") += s;
            }
            None => empty += 1,
        }
    }

    let mut detectors = BTreeMap::new();
    if tag_mode != TagMode::None {
        let d: Vec<_> = results
            .iter()
            .map(|r| (r.speaker_id.as_str(), r.aphasia, r.tag_label))
            .collect();
        detectors.insert(tag_detector_name(), detection_report(&d));
    }
    let layers: Vec<usize> = results
        .first()
        .map(|r| r.interctc_labels.iter().map(|l| l.0).collect())
        .unwrap_or_default();
    for (i, &layer) in layers.iter().enumerate() {
        let d: Vec<_> = results
            .iter()
            .map(|r| (r.speaker_id.as_str(), r.aphasia, r.interctc_labels[i].1))
            .collect();
        detectors.insert(interctc_detector_name(layer), detection_report(&d));
    }
    let primary = if tag_mode != TagMode::None {
        Some(tag_detector_name())
    } else {
        layers.first().map(|&l| interctc_detector_name(l))
    };
    let main = primary.as_ref().and_then(|p| detectors.get(p));

    EvalReport {
        utterances: results.len(),
        overall_wer: total.rate(),
        wer_stats: total,
        per_severity: per_sev.iter().map(|(&k, s)| (k, s.rate())).collect(),
        per_severity_stats: per_sev,
        empty_references: empty,
        fallbacks: results.iter().filter(|r| r.fallback).count(),
        sentence_acc: main.map(|d| d.sentence_accuracy),
        sentence_acc_raw: main.map(|d| d.sentence_accuracy_raw),
        speaker_acc: main.map(|d| d.speaker_accuracy),
        confusion: main.map(|d| ConfusionPair {
            sentence: d.sentence_confusion,
            speaker: d.speaker_confusion,
        }),
        abstain_rate: main.map(|d| d.abstain_rate),
        primary_detector: primary,
        detectors,
    }
}

pub fn evaluate(
    model: &AsrModel,
    examples: &[Example],
) -> Result<(EvalReport, Vec<UtteranceResult>)> {
    let results = decode_all(model, examples)?;
    Ok((build_report(&results, model.config.model.tag_mode), results))
}

/// One line of the n-best output file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NbestEntry {
    pub utt_id: String,
    pub rank: usize,
    pub score: f64,
    pub tokens: Vec<String>,
}

pub fn nbest_entries(model: &AsrModel, results: &[UtteranceResult]) -> Vec<NbestEntry> {
    results
        .iter()
        .flat_map(|r| {
            let hyps = if r.nbest.is_empty() {
                std::slice::from_ref(&r.hypothesis)
            } else {
                r.nbest.as_slice()
            };
            hyps.iter().enumerate().map(|(i, h)| NbestEntry {
                utt_id: r.utt_id.clone(),
                rank: i + 1,
                score: h.joint_score,
                tokens: model.vocab.decode(&h.tokens),
            })
        })
        .collect()
}
