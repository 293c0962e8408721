use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    // CHAT parsing
    #[error("malformed CHAT header: {0}")]
    MalformedHeader(String),
    #[error("line {line}: main tier for undeclared speaker `{speaker}`")]
    OrphanTier { line: usize, speaker: String },

    // corpus
    #[error("AQ {0} outside [0, 100]")]
    AqOutOfRange(f64),
    #[error("invalid split ratios {0:?}: must be positive and sum to 1")]
    InvalidRatios([f64; 3]),
    #[error("speaker `{0}` has inconsistent labels across utterances")]
    InconsistentSpeaker(String),
    #[error("invalid feature matrix: {0}")]
    InvalidFeatures(String),

    // autodiff / optimization
    #[error("backward requires a scalar loss, got shape {0}x{1}")]
    NonScalarLoss(usize, usize),
    #[error("computation graph references node {child} from earlier node {parent}")]
    GraphCycle { parent: usize, child: usize },
    #[error("no gradient for parameter `{0}`")]
    MissingGrad(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("checkpoint version {found} not supported (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("corrupt payload: {0}")]
    CorruptPayload(String),
    #[error("target of length {target_len} cannot be aligned to {frames} frames")]
    InfeasibleTarget { frames: usize, target_len: usize },
    #[error("empty input: {0}")]
    EmptyList(&'static str),

    // model / training
    #[error("token sequence already carries an Aphasia tag")]
    AlreadyTagged,
    #[error("non-finite value detected in {0}")]
    NaNDetected(String),
    #[error("training diverged at epoch {epoch}, step {step}")]
    Diverged { epoch: usize, step: usize },
    #[error("invalid config: {0}")]
    Config(String),

    // evaluation
    #[error("reference has no words after removing tags")]
    EmptyReference,

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
