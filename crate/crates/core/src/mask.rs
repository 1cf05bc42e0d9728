//! Sampling patterns Ω and the seeded generators used by the experiments.

use rand::Rng;

use crate::error::{Result, TensorError};
use crate::rng::{stream_rng, StreamRng, STREAM_MASK};
use crate::tensor::{strides, DenseTensor};

/// Boolean mask over the index grid, stored in tensor buffer order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SamplingPattern {
    shape: Vec<usize>,
    mask: Vec<bool>,
    count: usize,
}

impl SamplingPattern {
    pub fn new(shape: Vec<usize>, mask: Vec<bool>) -> Result<Self> {
        // Reuse the tensor shape checks.
        DenseTensor::zeros(&shape)?;
        let len: usize = shape.iter().product();
        if mask.len() != len {
            return Err(TensorError::ShapeMismatch(format!(
                "mask for {shape:?} needs {len} entries, got {}",
                mask.len()
            )));
        }
        let count = mask.iter().filter(|&&b| b).count();
        Ok(Self { shape, mask, count })
    }

    pub fn full(shape: &[usize]) -> Result<Self> {
        let len: usize = shape.iter().product();
        Self::new(shape.to_vec(), vec![true; len])
    }

    /// Builds Ω from a tensor whose nonzero entries mark observed positions.
    pub fn from_support(t: &DenseTensor) -> Self {
        let mask: Vec<bool> = t.data().iter().map(|&v| v != 0.0).collect();
        let count = mask.iter().filter(|&&b| b).count();
        Self {
            shape: t.shape().to_vec(),
            mask,
            count,
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    /// |Ω|.
    pub fn count(&self) -> usize {
        self.count
    }

    pub fn len(&self) -> usize {
        self.mask.len()
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    /// |Ω| / Π d_k.
    pub fn rate(&self) -> f64 {
        self.count as f64 / self.mask.len() as f64
    }

    #[inline]
    pub fn contains(&self, flat: usize) -> bool {
        self.mask[flat]
    }

    /// Flat indices of observed entries in buffer order.
    pub fn observed(&self) -> impl Iterator<Item = usize> + '_ {
        self.mask
            .iter()
            .enumerate()
            .filter_map(|(i, &b)| b.then_some(i))
    }

    /// The indicator tensor 1_Ω.
    pub fn indicator(&self) -> DenseTensor {
        DenseTensor::from_raw(
            self.shape.clone(),
            self.mask.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect(),
        )
    }

    /// `t` with every entry outside Ω set to zero.
    pub fn restrict(&self, t: &DenseTensor) -> Result<DenseTensor> {
        self.require_shape(t.shape())?;
        Ok(DenseTensor::from_raw(
            self.shape.clone(),
            t.data()
                .iter()
                .zip(&self.mask)
                .map(|(&v, &b)| if b { v } else { 0.0 })
                .collect(),
        ))
    }

    pub(crate) fn require_shape(&self, shape: &[usize]) -> Result<()> {
        if self.shape != shape {
            return Err(TensorError::ShapeMismatch(format!(
                "mask {:?} vs tensor {:?}",
                self.shape, shape
            )));
        }
        Ok(())
    }

    pub(crate) fn require_nonempty(&self) -> Result<()> {
        if self.count == 0 {
            return Err(TensorError::EmptyMask);
        }
        Ok(())
    }
}

fn check_rate(p: f64) -> Result<()> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(TensorError::InvalidArgument(format!(
            "sampling rate must lie in (0, 1], got {p}"
        )));
    }
    Ok(())
}

/// Draws each entry independently with its own inclusion probability.
/// An empty draw is retried once from the continuing stream.
fn draw(shape: &[usize], rng: &mut StreamRng, prob: impl Fn(usize) -> f64) -> Result<SamplingPattern> {
    let len: usize = shape.iter().product();
    for _ in 0..2 {
        let mask: Vec<bool> = (0..len).map(|i| rng.random::<f64>() < prob(i)).collect();
        let pattern = SamplingPattern::new(shape.to_vec(), mask)?;
        if !pattern.is_empty() {
            return Ok(pattern);
        }
    }
    Err(TensorError::EmptyMask)
}

/// Uniform random Ω: each entry kept independently with probability `p`.
pub fn gen_mask_uniform(shape: &[usize], p: f64, seed: u64) -> Result<SamplingPattern> {
    check_rate(p)?;
    let mut rng = stream_rng(seed, STREAM_MASK);
    draw(shape, &mut rng, |_| p)
}

/// Separable non-uniform Ω.
///
/// Entry `(i_1, .., i_n)` is kept with probability `c · Π_k q_k(i_k)`, where
/// `q_k` ramps linearly from 1 to `skew` over mode k and `c` makes the mean
/// inclusion probability equal to `p`. Probabilities above 1 are clipped.
/// With `skew = 1` this draws exactly the same mask as [`gen_mask_uniform`].
pub fn gen_mask_nonuniform(shape: &[usize], p: f64, skew: f64, seed: u64) -> Result<SamplingPattern> {
    check_rate(p)?;
    if !(skew >= 1.0) || !skew.is_finite() {
        return Err(TensorError::InvalidArgument(format!(
            "skew must be finite and at least 1, got {skew}"
        )));
    }
    DenseTensor::zeros(shape)?;
    let ramps: Vec<Vec<f64>> = shape
        .iter()
        .map(|&d| {
            (0..d)
                .map(|i| {
                    if d == 1 {
                        1.0
                    } else {
                        1.0 + (skew - 1.0) * i as f64 / (d - 1) as f64
                    }
                })
                .collect()
        })
        .collect();
    let mean: f64 = ramps
        .iter()
        .map(|q| q.iter().sum::<f64>() / q.len() as f64)
        .product();
    let c = p / mean;
    let st = strides(shape);
    let mut rng = stream_rng(seed, STREAM_MASK);
    draw(shape, &mut rng, |flat| {
        let mut prob = c;
        for (k, q) in ramps.iter().enumerate() {
            prob *= q[(flat / st[k]) % shape[k]];
        }
        prob.min(1.0)
    })
}
