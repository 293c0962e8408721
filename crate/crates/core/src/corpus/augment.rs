//! Feature-level augmentation: time-axis speed perturbation and
//! SpecAugment-style masking.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::features::FeatureMatrix;

/// Resamples the time axis to `round(frames / ratio)` frames by linear
/// interpolation between the first and last frame. `ratio < 1` slows the
/// utterance down (more frames).
pub fn speed_perturb(f: &FeatureMatrix, ratio: f64) -> FeatureMatrix {
    assert!(ratio > 0.0, "speed ratio must be positive");
    let frames = f.frames();
    let dims = f.dims();
    let out_frames = ((frames as f64 / ratio).round() as usize).max(1);
    if out_frames == frames {
        return f.clone();
    }
    let mut data = Vec::with_capacity(out_frames * dims);
    let step = if out_frames > 1 {
        (frames - 1) as f64 / (out_frames - 1) as f64
    } else {
        0.0
    };
    for j in 0..out_frames {
        let pos = j as f64 * step;
        let lo = (pos.floor() as usize).min(frames - 1);
        let hi = (lo + 1).min(frames - 1);
        let w = pos - lo as f64;
        let (a, b) = (f.row(lo), f.row(hi));
        data.extend(
            a.iter()
                .zip(b)
                .map(|(&x, &y)| (x as f64 * (1.0 - w) + y as f64 * w) as f32),
        );
    }
    FeatureMatrix::new(out_frames, dims, data, f.frame_rate_hz).expect("finite interpolation")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpecAugmentConfig {
    pub time_masks: usize,
    pub time_width: usize,
    pub freq_masks: usize,
    pub freq_width: usize,
}

impl Default for SpecAugmentConfig {
    fn default() -> Self {
        Self {
            time_masks: 2,
            time_width: 20,
            freq_masks: 2,
            freq_width: 10,
        }
    }
}

/// Fills `time_masks` spans of `time_width` frames and `freq_masks` spans
/// of `freq_width` dims with the matrix mean. Widths are clipped to the
/// axis length; starts are uniform over the valid range.
pub fn spec_augment<R: Rng + ?Sized>(
    f: &FeatureMatrix,
    cfg: &SpecAugmentConfig,
    rng: &mut R,
) -> FeatureMatrix {
    let mut out = f.clone();
    if cfg.time_masks == 0 && cfg.freq_masks == 0 {
        return out;
    }
    let fill = f.mean();
    let (frames, dims) = (f.frames(), f.dims());
    let data = out.data_mut();
    for _ in 0..cfg.time_masks {
        let w = cfg.time_width.min(frames);
        if w == 0 {
            continue;
        }
        let start = rng.random_range(0..=frames - w);
        data[start * dims..(start + w) * dims].fill(fill);
    }
    for _ in 0..cfg.freq_masks {
        let w = cfg.freq_width.min(dims);
        if w == 0 {
            continue;
        }
        let start = rng.random_range(0..=dims - w);
        for row in data.chunks_mut(dims) {
            row[start..start + w].fill(fill);
        }
    }
    out
}
