//! Feature matrices and their on-disk format: a 16-byte header
//! (`b"FEAT"`, frames u32, dims u32, frame rate f32; all little-endian)
//! followed by `frames * dims` little-endian f32 values, row-major.

use std::path::Path;

use crate::error::{Error, Result};
use crate::io::write_atomic;

const MAGIC: &[u8; 4] = b"FEAT";
const HEADER_LEN: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    frames: usize,
    dims: usize,
    data: Vec<f32>,
    pub frame_rate_hz: f32,
}

impl FeatureMatrix {
    pub fn new(frames: usize, dims: usize, data: Vec<f32>, frame_rate_hz: f32) -> Result<Self> {
        if frames == 0 || dims == 0 {
            return Err(Error::InvalidFeatures(format!(
                "empty matrix {frames}x{dims}"
            )));
        }
        if data.len() != frames * dims {
            return Err(Error::InvalidFeatures(format!(
                "{frames}x{dims} matrix with {} values",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidFeatures("non-finite entry".into()));
        }
        if frame_rate_hz.is_nan() || frame_rate_hz <= 0.0 {
            return Err(Error::InvalidFeatures(format!(
                "frame rate {frame_rate_hz}"
            )));
        }
        Ok(Self {
            frames,
            dims,
            data,
            frame_rate_hz,
        })
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn row(&self, t: usize) -> &[f32] {
        &self.data[t * self.dims..(t + 1) * self.dims]
    }

    pub fn duration_s(&self) -> f64 {
        self.frames as f64 / self.frame_rate_hz as f64
    }

    pub fn mean(&self) -> f32 {
        (self.data.iter().map(|&v| v as f64).sum::<f64>() / self.data.len() as f64) as f32
    }

    pub(crate) fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::with_capacity(HEADER_LEN + self.data.len() * 4);
        buf.extend_from_slice(MAGIC);
        buf.extend_from_slice(&(self.frames as u32).to_le_bytes());
        buf.extend_from_slice(&(self.dims as u32).to_le_bytes());
        buf.extend_from_slice(&self.frame_rate_hz.to_le_bytes());
        for v in &self.data {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        buf
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN || &bytes[..4] != MAGIC {
            return Err(Error::InvalidFeatures("bad feature header".into()));
        }
        let word = |i: usize| bytes[i..i + 4].try_into().expect("4 bytes");
        let frames = u32::from_le_bytes(word(4)) as usize;
        let dims = u32::from_le_bytes(word(8)) as usize;
        let rate = f32::from_le_bytes(word(12));
        let expected = frames
            .checked_mul(dims)
            .and_then(|n| n.checked_mul(4))
            .and_then(|n| n.checked_add(HEADER_LEN));
        if expected != Some(bytes.len()) {
            return Err(Error::InvalidFeatures(format!(
                "{frames}x{dims} header but {} bytes",
                bytes.len()
            )));
        }
        let data = bytes[HEADER_LEN..]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect();
        Self::new(frames, dims, data, rate)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_bytes())
    }
}
