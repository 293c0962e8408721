//! Toy hybrid CTC/attention network with intermediate CTC taps and
//! detection tags in the output vocabulary.

mod config;
mod loss;
mod network;
mod tags;
mod train;
mod vocab;

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use config::{
    AugmentConfig, DecodeConfig, ExperimentConfig, InterTarget, ModelConfig, TrainConfig,
};
pub use loss::{
    combine_losses, compute_loss, sample_loss, teacher_forced_hits, teacher_forcing_pair,
    LossBreakdown, Sample,
};
pub use network::{
    decoder_forward, encoder_forward, init_params, positional_encoding, EncoderOutput, Tap,
};
pub use tags::{insert_tags, strip_tags, TagMode};
pub use train::{train, validation_accuracy, EpochLog, Example, TrainOutcome};
pub use vocab::{
    Vocabulary, APH, APH_TAG, BLANK_TOKEN, NONAPH, NONAPH_TAG, SOS_EOS, SOS_EOS_TOKEN, UNK,
    UNK_TOKEN,
};

use crate::autodiff::{load_checkpoint, save_checkpoint, Bound, Graph, ParamStore};
use crate::corpus::FeatureMatrix;
use crate::ctc::LogProbLattice;
use crate::error::{Error, Result};

pub const CHECKPOINT_FILE: &str = "model.ckpt";
pub const CONFIG_FILE: &str = "config.toml";
pub const VOCAB_FILE: &str = "vocab.txt";

/// Encoder results for one utterance, detached from any graph.
#[derive(Debug, Clone)]
pub struct Encoded {
    /// Row-major `frames x hidden`.
    pub hidden: Vec<f64>,
    pub frames: usize,
    pub width: usize,
    pub lattice: LogProbLattice,
    /// `(layer, target kind, lattice)` for every tap, in layer order.
    pub taps: Vec<(usize, InterTarget, LogProbLattice)>,
}

/// Trained (or freshly initialized) network together with its vocabulary
/// and configuration.
#[derive(Debug, Clone)]
pub struct AsrModel {
    pub config: ExperimentConfig,
    pub vocab: Vocabulary,
    pub params: ParamStore,
}

impl AsrModel {
    pub fn new(
        config: ExperimentConfig,
        vocab: Vocabulary,
        feature_dim: usize,
        seed: u64,
    ) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = init_params(&config.model, feature_dim, vocab.len(), &mut rng)?;
        Ok(Self {
            config,
            vocab,
            params,
        })
    }

    pub fn feature_dim(&self) -> usize {
        self.params
            .get("enc.in.w")
            .map_or(0, |t| t.matrix_dims().0 / self.config.model.subsample)
    }

    pub fn encode(&self, features: &FeatureMatrix) -> Result<Encoded> {
        let mut g = Graph::new();
        let mut b = Bound::new(&self.params);
        let out = encoder_forward(&mut g, &mut b, &self.config.model, features)?;
        let (frames, width) = g.shape(out.hidden);
        let vocab = self.vocab.len();
        let lattice = |g: &Graph, v| LogProbLattice::from_raw(frames, vocab, g.value(v).to_vec());
        let taps = out
            .taps
            .iter()
            .map(|t| Ok((t.layer, t.target, lattice(&g, t.logp)?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Encoded {
            hidden: g.value(out.hidden).to_vec(),
            frames,
            width,
            lattice: lattice(&g, out.logp)?,
            taps,
        })
    }

    /// Decoder log-distribution over the vocabulary for the token after
    /// `prefix` (which begins with sos). Only the first `memory_len` rows
    /// of `hidden` are attended.
    pub fn decode_step(
        &self,
        hidden: &[f64],
        width: usize,
        memory_len: usize,
        prefix: &[usize],
    ) -> Vec<f64> {
        assert_eq!(prefix.first(), Some(&SOS_EOS), "prefix must begin with sos");
        let rows = hidden.len() / width;
        let mut g = Graph::new();
        let mut b = Bound::new(&self.params);
        let memory = g.constant(rows, width, hidden.to_vec());
        let logp = decoder_forward(
            &mut g,
            &mut b,
            &self.config.model,
            memory,
            memory_len,
            prefix,
        );
        let v = self.vocab.len();
        g.value(logp)[(prefix.len() - 1) * v..].to_vec()
    }

    /// Writes `model.ckpt`, `config.toml` and `vocab.txt` into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        save_checkpoint(&self.params, &dir.join(CHECKPOINT_FILE))?;
        self.config.save(&dir.join(CONFIG_FILE))?;
        self.vocab.save(&dir.join(VOCAB_FILE))
    }

    /// Loads a model from a checkpoint file with `config.toml` and
    /// `vocab.txt` next to it.
    pub fn load(checkpoint: &Path) -> Result<Self> {
        let dir = checkpoint.parent().unwrap_or(Path::new("."));
        let config = ExperimentConfig::load(&dir.join(CONFIG_FILE))?;
        let vocab = Vocabulary::load(&dir.join(VOCAB_FILE))?;
        let params = load_checkpoint(checkpoint)?;
        let model = Self {
            config,
            vocab,
            params,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let reference = init_params(
            &model.config.model,
            model.feature_dim(),
            model.vocab.len(),
            &mut rng,
        )?;
        reference.check_compatible(&model.params)?;
        Ok(model)
    }
}
