//! Binary tensor (`WTEN1`) and mask (`WMSK1`) files.
//!
//! Both share a header: 5-byte magic, order as u32 LE, then one u64 LE extent
//! per mode. Tensors follow with f64 LE values in buffer order, masks with one
//! 0/1 byte per entry. Readers reject anything that does not match exactly.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Result, TensorError};
use crate::mask::SamplingPattern;
use crate::tensor::DenseTensor;
use crate::weight::Rank1Weight;

pub const TENSOR_MAGIC: &[u8; 5] = b"WTEN1";
pub const MASK_MAGIC: &[u8; 5] = b"WMSK1";

fn encode_header(magic: &[u8; 5], shape: &[usize]) -> Vec<u8> {
    let mut out = Vec::with_capacity(9 + 8 * shape.len());
    out.extend_from_slice(magic);
    out.extend_from_slice(&(shape.len() as u32).to_le_bytes());
    for &d in shape {
        out.extend_from_slice(&(d as u64).to_le_bytes());
    }
    out
}

/// Parses the header and returns the shape and the payload slice.
fn decode_header<'a>(magic: &[u8; 5], bytes: &'a [u8], entry_size: usize) -> Result<(Vec<usize>, &'a [u8])> {
    let name = String::from_utf8_lossy(magic);
    if bytes.len() < 9 || &bytes[..5] != magic {
        return Err(TensorError::Format(format!("missing {name} magic")));
    }
    let order = u32::from_le_bytes(bytes[5..9].try_into().expect("4 bytes")) as usize;
    let header_len = order
        .checked_mul(8)
        .and_then(|n| n.checked_add(9))
        .filter(|&n| n <= bytes.len())
        .ok_or_else(|| TensorError::Format(format!("{name} header truncated (order {order})")))?;
    let mut shape = Vec::with_capacity(order);
    for k in 0..order {
        let at = 9 + 8 * k;
        let d = u64::from_le_bytes(bytes[at..at + 8].try_into().expect("8 bytes"));
        shape.push(usize::try_from(d).map_err(|_| TensorError::Format(format!("extent {d} too large")))?);
    }
    let payload = &bytes[header_len..];
    let expected = shape
        .iter()
        .try_fold(entry_size, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| TensorError::Format(format!("{name} shape {shape:?} overflows")))?;
    if payload.len() != expected {
        return Err(TensorError::Format(format!(
            "{name} payload for shape {shape:?} must be {expected} bytes, found {}",
            payload.len()
        )));
    }
    Ok((shape, payload))
}

pub fn encode_tensor(t: &DenseTensor) -> Vec<u8> {
    let mut out = encode_header(TENSOR_MAGIC, t.shape());
    out.reserve(8 * t.len());
    for v in t.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_tensor(bytes: &[u8]) -> Result<DenseTensor> {
    let (shape, payload) = decode_header(TENSOR_MAGIC, bytes, 8)?;
    let data = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    DenseTensor::new(shape, data)
}

pub fn encode_mask(m: &SamplingPattern) -> Vec<u8> {
    let mut out = encode_header(MASK_MAGIC, m.shape());
    out.extend(m.mask().iter().map(|&b| b as u8));
    out
}

pub fn decode_mask(bytes: &[u8]) -> Result<SamplingPattern> {
    let (shape, payload) = decode_header(MASK_MAGIC, bytes, 1)?;
    let mask = payload
        .iter()
        .enumerate()
        .map(|(i, &b)| match b {
            0 => Ok(false),
            1 => Ok(true),
            other => Err(TensorError::Format(format!("mask byte {other} at entry {i}"))),
        })
        .collect::<Result<Vec<_>>>()?;
    SamplingPattern::new(shape, mask)
}

pub fn write_tensor(path: impl AsRef<Path>, t: &DenseTensor) -> Result<()> {
    fs::write(path, encode_tensor(t))?;
    Ok(())
}

pub fn read_tensor(path: impl AsRef<Path>) -> Result<DenseTensor> {
    decode_tensor(&fs::read(path)?)
}

pub fn write_mask(path: impl AsRef<Path>, m: &SamplingPattern) -> Result<()> {
    fs::write(path, encode_mask(m))?;
    Ok(())
}

pub fn read_mask(path: impl AsRef<Path>) -> Result<SamplingPattern> {
    decode_mask(&fs::read(path)?)
}

/// Path of the mode-`k` factor file (`<prefix>.f1`, `<prefix>.f2`, ...).
pub fn factor_path(prefix: impl AsRef<Path>, mode: usize) -> PathBuf {
    let mut s = prefix.as_ref().as_os_str().to_owned();
    s.push(format!(".f{}", mode + 1));
    PathBuf::from(s)
}

/// Writes each factor of `w` as an order-1 tensor next to `prefix`.
pub fn write_weight_factors(prefix: impl AsRef<Path>, w: &Rank1Weight) -> Result<()> {
    for (k, f) in w.factors().iter().enumerate() {
        write_tensor(factor_path(&prefix, k), &DenseTensor::new(vec![f.len()], f.clone())?)?;
    }
    Ok(())
}

/// Reads `order` factor files written by [`write_weight_factors`].
pub fn read_weight_factors(prefix: impl AsRef<Path>, order: usize) -> Result<Rank1Weight> {
    let factors = (0..order)
        .map(|k| {
            let path = factor_path(&prefix, k);
            let t = read_tensor(&path)?;
            if t.order() != 1 {
                return Err(TensorError::Format(format!(
                    "{} is not a vector (shape {:?})",
                    path.display(),
                    t.shape()
                )));
            }
            Ok(t.into_data())
        })
        .collect::<Result<Vec<_>>>()?;
    Rank1Weight::new(factors)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tensor_round_trip() {
        let t = DenseTensor::new(vec![2, 3], vec![1.5, -0.0, 3.25, 1e-300, -7.0, 2.0]).unwrap();
        let bytes = encode_tensor(&t);
        assert_eq!(&bytes[..5], b"WTEN1");
        assert_eq!(bytes.len(), 5 + 4 + 16 + 48);
        let back = decode_tensor(&bytes).unwrap();
        assert_eq!(back.shape(), t.shape());
        assert!(back.data().iter().zip(t.data()).all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    #[test]
    fn mask_round_trip() {
        let m = SamplingPattern::new(vec![2, 2, 1], vec![true, false, false, true]).unwrap();
        let bytes = encode_mask(&m);
        assert_eq!(&bytes[bytes.len() - 4..], &[1, 0, 0, 1]);
        assert_eq!(decode_mask(&bytes).unwrap(), m);
    }

    #[test]
    fn strict_validation() {
        let t = DenseTensor::filled(&[2, 2], 1.0).unwrap();
        let good = encode_tensor(&t);
        let mut bad_magic = good.clone();
        bad_magic[0] = b'X';
        assert!(matches!(decode_tensor(&bad_magic), Err(TensorError::Format(_))));
        assert!(decode_tensor(&good[..good.len() - 1]).is_err());
        let mut long = good.clone();
        long.push(0);
        assert!(decode_tensor(&long).is_err());
        assert!(decode_tensor(&good[..7]).is_err());
        assert!(decode_mask(&good).is_err());

        let m = SamplingPattern::full(&[2]).unwrap();
        let mut bytes = encode_mask(&m);
        *bytes.last_mut().unwrap() = 2;
        assert!(decode_mask(&bytes).is_err());

        let mut huge = encode_header(TENSOR_MAGIC, &[1]);
        huge[5..9].copy_from_slice(&u32::MAX.to_le_bytes());
        assert!(decode_tensor(&huge).is_err());
    }

    #[test]
    fn weight_factor_files() {
        let dir = tempfile::tempdir().unwrap();
        let prefix = dir.path().join("w.bin");
        let w = Rank1Weight::new(vec![vec![0.5, 1.0], vec![2.0, 0.25, 1.0]]).unwrap();
        write_weight_factors(&prefix, &w).unwrap();
        assert!(dir.path().join("w.bin.f1").exists());
        assert!(dir.path().join("w.bin.f2").exists());
        assert_eq!(read_weight_factors(&prefix, 2).unwrap(), w);
        assert!(read_weight_factors(&prefix, 3).is_err());
    }
}
