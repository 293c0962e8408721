//! Joint recognition of disordered speech and Aphasia detection with a
//! hybrid CTC/attention model.
//!
//! - [`chat`]: CHAT transcript parsing and cleaning
//! - [`corpus`]: manifests, severity strata, splits, augmentation, synthetic data
//! - [`autodiff`]: tape autodiff, Adam, warmup schedule, checkpoints
//! - [`ctc`]: CTC loss, greedy and prefix scoring, InterCTC conditioning
//! - [`model`]: vocabulary, tags, encoder/decoder, multi-task loss, training
//! - [`decode`]: joint beam search, WER, detectors and evaluation reports

pub mod autodiff;
pub mod chat;
pub mod corpus;
pub mod ctc;
pub mod decode;
pub mod error;
pub mod io;
pub mod model;

pub use error::{Error, Result};
