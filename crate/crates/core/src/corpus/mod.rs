//! Manifests, severity strata, speaker splits, augmentation and the
//! synthetic corpus generator.

mod augment;
mod features;
mod manifest;
mod prepare;
mod split;
mod synth;

pub use augment::{spec_augment, speed_perturb, SpecAugmentConfig};
pub use features::FeatureMatrix;
pub use manifest::{
    check_speaker_consistency, classify_severity, filter_duration, manifest_to_string,
    parse_manifest, read_manifest, write_manifest, SeverityLevel, UtteranceRecord, MAX_DURATION_S,
    MIN_DURATION_S,
};
pub use prepare::records_from_chat;
pub use split::{apportion, stratified_split, Split, SplitSpec};
pub use synth::{
    generate_synthetic, record_seed, token_name, SyntheticSpec, SyntheticUtterance, SyntheticWorld,
};
