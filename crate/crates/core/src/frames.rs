//! Raw video frames ↔ order-4 tensors.
//!
//! A frame file holds `channels × height × width` little-endian f32 values,
//! one full plane per channel (planar layout). A plain-text sidecar lists
//! `height`, `width`, `channels`, `frames`, `min` and `max`; values must lie in
//! `[min, max]` and are rescaled to `[0, 1]` on ingestion.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::config::{parse_key_values, parse_value};
use crate::error::{Result, TensorError};
use crate::tensor::DenseTensor;

#[derive(Clone, Debug, PartialEq)]
pub struct FrameMeta {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub frames: usize,
    pub min: f32,
    pub max: f32,
}

impl FrameMeta {
    pub fn parse(text: &str) -> Result<Self> {
        let mut fields: [Option<String>; 6] = Default::default();
        const KEYS: [&str; 6] = ["height", "width", "channels", "frames", "min", "max"];
        for (key, value) in parse_key_values(text)? {
            let slot = KEYS
                .iter()
                .position(|k| *k == key)
                .ok_or_else(|| TensorError::Config(format!("unknown frame sidecar key `{key}`")))?;
            fields[slot] = Some(value);
        }
        let get = |i: usize| {
            fields[i]
                .as_deref()
                .ok_or_else(|| TensorError::Config(format!("frame sidecar is missing `{}`", KEYS[i])))
        };
        let meta = FrameMeta {
            height: parse_value(KEYS[0], get(0)?)?,
            width: parse_value(KEYS[1], get(1)?)?,
            channels: parse_value(KEYS[2], get(2)?)?,
            frames: parse_value(KEYS[3], get(3)?)?,
            min: parse_value(KEYS[4], get(4)?)?,
            max: parse_value(KEYS[5], get(5)?)?,
        };
        meta.validate()?;
        Ok(meta)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in [
            ("height", self.height.to_string()),
            ("width", self.width.to_string()),
            ("channels", self.channels.to_string()),
            ("frames", self.frames.to_string()),
            ("min", self.min.to_string()),
            ("max", self.max.to_string()),
        ] {
            writeln!(s, "{k}={v}").expect("writing to a String");
        }
        s
    }

    fn validate(&self) -> Result<()> {
        if self.height == 0 || self.width == 0 || self.channels == 0 || self.frames == 0 {
            return Err(TensorError::Config(format!("frame extents must be positive: {self:?}")));
        }
        if !(self.min.is_finite() && self.max.is_finite() && self.min < self.max) {
            return Err(TensorError::Config(format!(
                "frame range needs finite min < max, got [{}, {}]",
                self.min, self.max
            )));
        }
        Ok(())
    }

    pub fn frame_len(&self) -> usize {
        self.height * self.width * self.channels
    }

    pub fn shape(&self) -> [usize; 4] {
        [self.height, self.width, self.channels, self.frames]
    }
}

/// Stacks planar frames into a `height × width × channels × frames` tensor in `[0, 1]`.
pub fn ingest_frames(frames: &[Vec<f32>], meta: &FrameMeta) -> Result<DenseTensor> {
    meta.validate()?;
    if frames.len() != meta.frames {
        return Err(TensorError::ShapeMismatch(format!(
            "sidecar declares {} frames, got {}",
            meta.frames,
            frames.len()
        )));
    }
    let (h, w, c, n) = (meta.height, meta.width, meta.channels, meta.frames);
    let span = f64::from(meta.max) - f64::from(meta.min);
    let mut data = vec![0.0; meta.frame_len() * n];
    for (f, frame) in frames.iter().enumerate() {
        if frame.len() != meta.frame_len() {
            return Err(TensorError::ShapeMismatch(format!(
                "frame {f} has {} values, expected {}",
                frame.len(),
                meta.frame_len()
            )));
        }
        for ch in 0..c {
            for y in 0..h {
                for x in 0..w {
                    let v = frame[(ch * h + y) * w + x];
                    if !(v >= meta.min && v <= meta.max) {
                        return Err(TensorError::InvalidArgument(format!(
                            "frame {f} value {v} at (y={y}, x={x}, c={ch}) outside [{}, {}]",
                            meta.min, meta.max
                        )));
                    }
                    data[((y * w + x) * c + ch) * n + f] = (f64::from(v) - f64::from(meta.min)) / span;
                }
            }
        }
    }
    DenseTensor::new(meta.shape().to_vec(), data)
}

/// Inverse of [`ingest_frames`]: maps `[0, 1]` back to `[min, max]` and splits
/// the tensor into planar frames. Values are clamped to the declared range.
pub fn emit_frames(t: &DenseTensor, meta: &FrameMeta) -> Result<Vec<Vec<f32>>> {
    meta.validate()?;
    if t.shape() != meta.shape() {
        return Err(TensorError::ShapeMismatch(format!(
            "tensor {:?} vs sidecar {:?}",
            t.shape(),
            meta.shape()
        )));
    }
    let (h, w, c, n) = (meta.height, meta.width, meta.channels, meta.frames);
    let span = f64::from(meta.max) - f64::from(meta.min);
    let mut frames = vec![vec![0f32; meta.frame_len()]; n];
    for (f, frame) in frames.iter_mut().enumerate() {
        for ch in 0..c {
            for y in 0..h {
                for x in 0..w {
                    let u = t.data()[((y * w + x) * c + ch) * n + f];
                    let v = (u * span + f64::from(meta.min)) as f32;
                    frame[(ch * h + y) * w + x] = v.clamp(meta.min, meta.max);
                }
            }
        }
    }
    Ok(frames)
}

pub fn read_frame_file(path: impl AsRef<Path>) -> Result<Vec<f32>> {
    let path = path.as_ref();
    let bytes = fs::read(path)?;
    if bytes.len() % 4 != 0 {
        return Err(TensorError::Format(format!(
            "{}: length {} is not a multiple of 4",
            path.display(),
            bytes.len()
        )));
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().expect("4 bytes")))
        .collect())
}

pub fn write_frame_file(path: impl AsRef<Path>, frame: &[f32]) -> Result<()> {
    let bytes: Vec<u8> = frame.iter().flat_map(|v| v.to_le_bytes()).collect();
    fs::write(path, bytes)?;
    Ok(())
}

/// Reads the sidecar and every frame file, then ingests them.
pub fn ingest_frame_files<P: AsRef<Path>>(paths: &[P], meta_path: impl AsRef<Path>) -> Result<DenseTensor> {
    let meta = FrameMeta::read(meta_path)?;
    let frames = paths.iter().map(read_frame_file).collect::<Result<Vec<_>>>()?;
    ingest_frames(&frames, &meta)
}
