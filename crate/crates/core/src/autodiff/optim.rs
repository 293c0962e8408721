//! Adam with L2 weight decay, global-norm clipping, the warmup schedule and
//! checkpoint averaging.

use std::collections::BTreeMap;

use super::params::{round_f32, GradStore, ParamStore, Tensor};
use crate::error::{Error, Result};

/// `base_lr * warmup^0.5 * min(step^-0.5, step * warmup^-1.5)`: linear ramp
/// to `base_lr` at `warmup_steps`, inverse square-root decay afterwards.
pub fn warmup_lr(step: u64, base_lr: f64, warmup_steps: u64) -> f64 {
    let step = step.max(1) as f64;
    if warmup_steps == 0 {
        return base_lr;
    }
    let w = warmup_steps as f64;
    base_lr * w.sqrt() * (step.powf(-0.5)).min(step * w.powf(-1.5))
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamConfig {
    pub base_lr: f64,
    pub warmup_steps: u64,
    pub weight_decay: f64,
    /// Global gradient-norm threshold; `None` disables clipping.
    pub clip: Option<f64>,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            base_lr: 1e-3,
            warmup_steps: 2500,
            weight_decay: 1e-6,
            clip: Some(1.0),
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone)]
pub struct OptimizerState {
    pub config: AdamConfig,
    pub step: u64,
    first: BTreeMap<String, Vec<f64>>,
    second: BTreeMap<String, Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepInfo {
    pub lr: f64,
    /// Gradient norm before clipping.
    pub grad_norm: f64,
}

impl OptimizerState {
    pub fn new(config: AdamConfig, params: &ParamStore) -> Self {
        let zeros = |t: &Tensor| vec![0.0; t.len()];
        let first = params.iter().map(|(n, t)| (n.clone(), zeros(t))).collect();
        let second = params.iter().map(|(n, t)| (n.clone(), zeros(t))).collect();
        Self {
            config,
            step: 0,
            first,
            second,
        }
    }

    pub fn first_moment(&self, name: &str) -> Option<&[f64]> {
        self.first.get(name).map(Vec::as_slice)
    }

    pub fn second_moment(&self, name: &str) -> Option<&[f64]> {
        self.second.get(name).map(Vec::as_slice)
    }
}

/// Scales `grads` in place so their global norm is at most `max_norm`.
/// Returns the norm before scaling.
pub fn clip_global_norm(grads: &mut GradStore, max_norm: f64) -> f64 {
    let norm = grads.global_norm();
    if norm > max_norm && norm > 0.0 {
        grads.scale(max_norm / norm);
    }
    norm
}

/// One Adam update. Clipping happens on the raw gradients; weight decay is
/// then added as `weight_decay * theta` before the moment updates. Updated
/// parameters are rounded to `f32`.
pub fn adam_step(
    params: &mut ParamStore,
    grads: &GradStore,
    state: &mut OptimizerState,
) -> Result<StepInfo> {
    for name in params.names() {
        if grads.get(name).is_none() {
            return Err(Error::MissingGrad(name.to_string()));
        }
    }
    let mut grads = grads.clone();
    let grad_norm = match state.config.clip {
        Some(c) => clip_global_norm(&mut grads, c),
        None => grads.global_norm(),
    };

    state.step += 1;
    let cfg = &state.config;
    let lr = warmup_lr(state.step, cfg.base_lr, cfg.warmup_steps);
    let t = state.step as i32;
    let bias1 = 1.0 - cfg.beta1.powi(t);
    let bias2 = 1.0 - cfg.beta2.powi(t);

    for (name, tensor) in params.iter_mut() {
        let g = grads.get(name).expect("checked above");
        let m = state
            .first
            .entry(name.clone())
            .or_insert_with(|| vec![0.0; tensor.len()]);
        let v = state
            .second
            .entry(name.clone())
            .or_insert_with(|| vec![0.0; tensor.len()]);
        if m.len() != tensor.len() || g.len() != tensor.len() {
            return Err(Error::ShapeMismatch(format!(
                "optimizer state for `{name}`"
            )));
        }
        for i in 0..tensor.len() {
            let theta = tensor.values[i];
            let gi = g[i] + cfg.weight_decay * theta;
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * gi;
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * gi * gi;
            let mhat = m[i] / bias1;
            let vhat = v[i] / bias2;
            tensor.values[i] = round_f32(theta - lr * mhat / (vhat.sqrt() + cfg.eps));
        }
    }
    Ok(StepInfo { lr, grad_norm })
}

/// Element-wise arithmetic mean of parameter stores with identical layout.
/// Values are summed in sorted order, so the result does not depend on the
/// order of `checkpoints`.
pub fn average_checkpoints(checkpoints: &[ParamStore]) -> Result<ParamStore> {
    let first = checkpoints
        .first()
        .ok_or(Error::EmptyList("no checkpoints to average"))?;
    for other in &checkpoints[1..] {
        first.check_compatible(other)?;
    }
    let k = checkpoints.len() as f64;
    let mut out = ParamStore::new();
    let mut column = Vec::with_capacity(checkpoints.len());
    for (name, tensor) in first.iter() {
        let sources: Vec<&Tensor> = checkpoints
            .iter()
            .map(|c| c.get(name).expect("compatible"))
            .collect();
        let values = (0..tensor.len())
            .map(|i| {
                column.clear();
                column.extend(sources.iter().map(|t| t.values[i]));
                column.sort_by(f64::total_cmp);
                round_f32(column.iter().sum::<f64>() / k)
            })
            .collect();
        out.insert(
            name.clone(),
            Tensor {
                shape: tensor.shape.clone(),
                values,
            },
        );
    }
    Ok(out)
}
