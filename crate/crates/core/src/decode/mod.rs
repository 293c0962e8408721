//! Joint decoding, word error rate, detection decisions and evaluation
//! reports.

mod beam;
mod detect;
mod evaluate;
mod wer;

pub use beam::{
    decode_encoded, joint_beam_search, BeamConfig, BeamOutput, Hypothesis, ModelScorer, StepScorer,
};
pub use detect::{
    detection_report, interctc_detect, majority_vote, resolve_sentence_tag, Confusion, Decision,
    DetectionReport, Label, VoteTally,
};
pub use evaluate::{
    beam_config, build_report, decode_all, decode_example, evaluate, interctc_detector_name,
    nbest_entries, tag_detector_name, ConfusionPair, EvalReport, NbestEntry, UtteranceResult,
};
pub use wer::{edit_counts, wer, WerStats};
