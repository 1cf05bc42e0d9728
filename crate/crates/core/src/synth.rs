//! Synthetic low-rank data and Gaussian noise.

use rand_distr::{Distribution, Normal, StandardNormal};

use crate::error::{Result, TensorError};
use crate::rng::{stream_rng, STREAM_NOISE, STREAM_SMOOTH, STREAM_TUCKER};
use crate::svd::orthonormalize_columns;
use crate::tensor::{DenseTensor, Matrix, TuckerRank};

/// I.i.d. `N(0, sigma²)` noise drawn from a seeded stream.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseModel {
    pub sigma: f64,
    pub seed: u64,
}

impl NoiseModel {
    pub fn new(sigma: f64, seed: u64) -> Result<Self> {
        if !(sigma >= 0.0) || !sigma.is_finite() {
            return Err(TensorError::InvalidArgument(format!(
                "noise sigma must be finite and non-negative, got {sigma}"
            )));
        }
        Ok(Self { sigma, seed })
    }
}

/// `C ×_1 U_1 ⋯ ×_n U_n` with a standard normal core and standard normal
/// factors orthonormalized per mode.
pub fn generate_tucker(shape: &[usize], ranks: &TuckerRank, seed: u64) -> Result<DenseTensor> {
    ranks.validate_for(shape)?;
    let mut rng = stream_rng(seed, STREAM_TUCKER);
    let core_len: usize = ranks.ranks().iter().product();
    let core_data: Vec<f64> = (0..core_len).map(|_| StandardNormal.sample(&mut rng)).collect();
    let mut t = DenseTensor::new(ranks.ranks().to_vec(), core_data)?;
    for (k, (&d, &r)) in shape.iter().zip(ranks.ranks()).enumerate() {
        let raw: Vec<f64> = (0..d * r).map(|_| StandardNormal.sample(&mut rng)).collect();
        let u = orthonormalize_columns(&Matrix::new(d, r, raw)?);
        t = t.mode_product(k, &u)?;
    }
    Ok(t)
}

/// Low-rank tensor with smooth factors, scaled to unit ∞-norm.
///
/// Each factor column is a random combination of the lowest `max(4, r + 1)`
/// cosine modes on the grid, orthonormalized per mode, so the Tucker rank is
/// still exactly `ranks` while neighbouring entries vary slowly. This is the
/// regime (images, video) where total-variation completion is meaningful.
pub fn generate_smooth_tucker(shape: &[usize], ranks: &TuckerRank, seed: u64) -> Result<DenseTensor> {
    ranks.validate_for(shape)?;
    let mut rng = stream_rng(seed, STREAM_SMOOTH);
    let core_len: usize = ranks.ranks().iter().product();
    let core_data: Vec<f64> = (0..core_len).map(|_| StandardNormal.sample(&mut rng)).collect();
    let mut t = DenseTensor::new(ranks.ranks().to_vec(), core_data)?;
    for (k, (&d, &r)) in shape.iter().zip(ranks.ranks()).enumerate() {
        let freqs = 4.max(r + 1).min(d);
        let mut raw = vec![0.0; d * r];
        for c in 0..r {
            let coefs: Vec<f64> = (0..freqs).map(|_| StandardNormal.sample(&mut rng)).collect();
            for i in 0..d {
                let x = (i as f64 + 0.5) / d as f64;
                raw[i * r + c] = coefs
                    .iter()
                    .enumerate()
                    .map(|(f, a)| a * (std::f64::consts::PI * f as f64 * x).cos())
                    .sum();
            }
        }
        let u = orthonormalize_columns(&Matrix::new(d, r, raw)?);
        t = t.mode_product(k, &u)?;
    }
    let peak = t.inf_norm();
    Ok(if peak > 0.0 { t.scale(1.0 / peak) } else { t })
}

/// `t + Z`; `sigma = 0` returns `t` unchanged.
pub fn add_noise(t: &DenseTensor, noise: &NoiseModel) -> DenseTensor {
    if noise.sigma == 0.0 {
        return t.clone();
    }
    let normal = Normal::new(0.0, noise.sigma).expect("sigma validated");
    let mut rng = stream_rng(noise.seed, STREAM_NOISE);
    t.map(|v| v + normal.sample(&mut rng))
}
