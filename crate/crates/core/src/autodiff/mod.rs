//! Minimal dense autodiff, optimizer and checkpoint plumbing for training
//! the toy recognizer.

mod checkpoint;
mod graph;
mod optim;
mod params;

pub use checkpoint::{
    decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, CHECKPOINT_VERSION,
};
pub use graph::{Gradients, Graph, Var};
pub use optim::{
    adam_step, average_checkpoints, clip_global_norm, warmup_lr, AdamConfig, OptimizerState,
    StepInfo,
};
pub use params::{Bound, GradStore, ParamStore, Tensor};
