use std::path::Path;

use serde::{Deserialize, Serialize};

use super::tags::TagMode;
use crate::autodiff::AdamConfig;
use crate::corpus::SpecAugmentConfig;
use crate::error::{Error, Result};
use crate::io::write_atomic;

/// What an intermediate CTC layer is trained to emit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InterTarget {
    AsrTokens,
    TagPrefixedTokens,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub num_layers: usize,
    pub hidden: usize,
    pub heads: usize,
    /// Width of each half of the gated MLP branch.
    pub mlp_hidden: usize,
    /// 1 or 2; 2 concatenates frame pairs before the input projection.
    pub subsample: usize,
    /// 1-based block indices after which a CTC lattice is tapped.
    pub interctc_layers: Vec<usize>,
    /// Parallel to `interctc_layers`.
    pub interctc_targets: Vec<InterTarget>,
    /// Feed tapped posteriors back into the encoder stream.
    pub self_condition: bool,
    pub ctc_weight: f64,
    pub interctc_weight: f64,
    pub tag_mode: TagMode,
    pub decoder_layers: usize,
    pub decoder_ffn: usize,
    pub label_smoothing: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            num_layers: 4,
            hidden: 64,
            heads: 4,
            mlp_hidden: 128,
            subsample: 1,
            interctc_layers: vec![2],
            interctc_targets: vec![InterTarget::TagPrefixedTokens],
            self_condition: true,
            ctc_weight: 0.3,
            interctc_weight: 0.3,
            tag_mode: TagMode::Both,
            decoder_layers: 1,
            decoder_ffn: 128,
            label_smoothing: 0.1,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.num_layers == 0 || self.hidden == 0 || self.mlp_hidden == 0 {
            return bad("num_layers, hidden and mlp_hidden must be positive".into());
        }
        if self.heads == 0 || !self.hidden.is_multiple_of(self.heads) {
            return bad(format!(
                "hidden ({}) must be a multiple of heads ({})",
                self.hidden, self.heads
            ));
        }
        if !matches!(self.subsample, 1 | 2) {
            return bad(format!("subsample must be 1 or 2, got {}", self.subsample));
        }
        if self.interctc_layers.len() != self.interctc_targets.len() {
            return bad("interctc_layers and interctc_targets differ in length".into());
        }
        let mut sorted = self.interctc_layers.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.interctc_layers.len() {
            return bad("duplicate InterCTC layer".into());
        }
        if let Some(&e) = self
            .interctc_layers
            .iter()
            .find(|&&e| e == 0 || e >= self.num_layers)
        {
            return bad(format!("InterCTC layer {e} outside 1..{}", self.num_layers));
        }
        for (name, w) in [
            ("ctc_weight", self.ctc_weight),
            ("interctc_weight", self.interctc_weight),
        ] {
            if !(0.0..=1.0).contains(&w) {
                return bad(format!("{name} must lie in [0, 1], got {w}"));
            }
        }
        if !(0.0..1.0).contains(&self.label_smoothing) {
            return bad("label_smoothing must lie in [0, 1)".into());
        }
        if self.decoder_layers == 0 || self.decoder_ffn == 0 {
            return bad("decoder_layers and decoder_ffn must be positive".into());
        }
        Ok(())
    }

    /// Tap target for 1-based block `e`, if tapped.
    pub fn tap_target(&self, e: usize) -> Option<InterTarget> {
        self.interctc_layers
            .iter()
            .position(|&l| l == e)
            .map(|i| self.interctc_targets[i])
    }

    /// Output frame count for `frames` input frames.
    pub fn output_frames(&self, frames: usize) -> usize {
        frames.div_ceil(self.subsample)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentConfig {
    /// Speed factors drawn uniformly per utterance per epoch.
    pub speed_ratios: Vec<f64>,
    pub spec_augment: Option<SpecAugmentConfig>,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            speed_ratios: vec![0.9, 1.0, 1.1],
            spec_augment: Some(SpecAugmentConfig::default()),
        }
    }
}

impl AugmentConfig {
    pub fn disabled() -> Self {
        Self {
            speed_ratios: vec![1.0],
            spec_augment: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub base_lr: f64,
    pub warmup_steps: u64,
    pub clip: Option<f64>,
    pub weight_decay: f64,
    /// Number of best validation checkpoints averaged into the final model.
    pub top_k: usize,
    pub seed: u64,
    pub augment: AugmentConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 40,
            batch_size: 16,
            base_lr: 1e-3,
            warmup_steps: 2500,
            clip: Some(1.0),
            weight_decay: 1e-6,
            top_k: 10,
            seed: 0,
            augment: AugmentConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 || self.top_k == 0 {
            return Err(Error::Config(
                "epochs, batch_size and top_k must be positive".into(),
            ));
        }
        if self.base_lr.is_nan() || self.base_lr <= 0.0 || self.weight_decay < 0.0 {
            return Err(Error::Config(
                "invalid learning rate or weight decay".into(),
            ));
        }
        if self.augment.speed_ratios.is_empty()
            || self
                .augment
                .speed_ratios
                .iter()
                .any(|&r| r.is_nan() || r <= 0.0)
        {
            return Err(Error::Config("speed ratios must be positive".into()));
        }
        Ok(())
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            base_lr: self.base_lr,
            warmup_steps: self.warmup_steps,
            weight_decay: self.weight_decay,
            clip: self.clip,
            ..AdamConfig::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecodeConfig {
    pub beam: usize,
    /// Weight of the attention decoder in the joint score; `None` means
    /// `1 - ctc_weight`.
    pub decode_weight: Option<f64>,
    /// Hypothesis length cap; `None` bounds it by the encoder frame count.
    pub max_len: Option<usize>,
    pub nbest: usize,
}

impl Default for DecodeConfig {
    fn default() -> Self {
        Self {
            beam: 10,
            decode_weight: None,
            max_len: None,
            nbest: 1,
        }
    }
}

/// Everything a run needs, as stored in `config.toml`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub decode: DecodeConfig,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.train.validate()?;
        if self.decode.beam == 0 {
            return Err(Error::Config("beam must be at least 1".into()));
        }
        if let Some(w) = self.decode.decode_weight {
            if !(0.0..=1.0).contains(&w) {
                return Err(Error::Config(format!("decode_weight {w} outside [0, 1]")));
            }
        }
        Ok(())
    }

    pub fn decode_weight(&self) -> f64 {
        self.decode
            .decode_weight
            .unwrap_or(1.0 - self.model.ctc_weight)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_toml()?.as_bytes())
    }
}
