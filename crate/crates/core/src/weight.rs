//! Rank-1 weight estimation.
//!
//! The weight tensor `W = w_1 ∘ ⋯ ∘ w_n` is the best strictly positive
//! rank-1 fit to the indicator 1_Ω, found by alternating least squares.
//! After each factor update entries are clamped to [`WEIGHT_FLOOR`], and
//! after each sweep the factors are rescaled to a common norm.

use crate::error::{Result, TensorError};
use crate::mask::SamplingPattern;
use crate::tensor::{strides, DenseTensor};

/// Lower bound on every factor entry.
pub const WEIGHT_FLOOR: f64 = 1e-6;
pub const DEFAULT_WEIGHT_ITERS: usize = 100;
pub const DEFAULT_WEIGHT_TOL: f64 = 1e-8;

/// Factor vectors of a strictly positive rank-1 tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct Rank1Weight {
    factors: Vec<Vec<f64>>,
}

impl Rank1Weight {
    pub fn new(factors: Vec<Vec<f64>>) -> Result<Self> {
        if factors.is_empty() || factors.iter().any(Vec::is_empty) {
            return Err(TensorError::InvalidShape(
                "weight needs at least one non-empty factor".into(),
            ));
        }
        for v in factors.iter().flatten() {
            if !v.is_finite() {
                return Err(TensorError::NonFinite(0));
            }
            if *v < WEIGHT_FLOOR {
                return Err(TensorError::WeightBelowFloor {
                    value: *v,
                    floor: WEIGHT_FLOOR,
                });
            }
        }
        Ok(Self { factors })
    }

    /// All-ones weight.
    pub fn unit(shape: &[usize]) -> Result<Self> {
        Self::new(shape.iter().map(|&d| vec![1.0; d]).collect())
    }

    /// Constant factors whose outer product is the constant `value`.
    pub fn constant(shape: &[usize], value: f64) -> Result<Self> {
        let c = value.powf(1.0 / shape.len() as f64);
        Self::new(shape.iter().map(|&d| vec![c; d]).collect())
    }

    pub fn factors(&self) -> &[Vec<f64>] {
        &self.factors
    }

    pub fn shape(&self) -> Vec<usize> {
        self.factors.iter().map(Vec::len).collect()
    }

    pub fn order(&self) -> usize {
        self.factors.len()
    }

    /// W as a dense tensor.
    pub fn materialize(&self) -> DenseTensor {
        DenseTensor::outer(&self.factors).expect("factors validated at construction")
    }

    /// Rescales the factors to a common Euclidean norm without changing W.
    pub fn rebalanced(&self) -> Rank1Weight {
        let norms: Vec<f64> = self.factors.iter().map(|f| norm(f)).collect();
        let target = norms.iter().map(|n| n.ln()).sum::<f64>() / norms.len() as f64;
        let target = target.exp();
        Rank1Weight {
            factors: self
                .factors
                .iter()
                .zip(&norms)
                .map(|(f, &n)| {
                    let s = target / n;
                    f.iter().map(|v| v * s).collect()
                })
                .collect(),
        }
    }

    fn clamp_to_floor(&mut self) {
        for v in self.factors.iter_mut().flatten() {
            if *v < WEIGHT_FLOOR {
                *v = WEIGHT_FLOOR;
            }
        }
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// ‖outer(factors) − 1_Ω‖_F.
pub fn weight_residual(omega: &SamplingPattern, w: &Rank1Weight) -> Result<f64> {
    omega.require_shape(&w.shape())?;
    let wt = w.materialize();
    Ok(wt
        .data()
        .iter()
        .zip(omega.mask())
        .map(|(&x, &b)| {
            let d = x - if b { 1.0 } else { 0.0 };
            d * d
        })
        .sum::<f64>()
        .sqrt())
}

/// One ALS pass over all modes followed by rebalancing.
///
/// For mode k the update is `w_k(i) = Σ_{Ω, i_k = i} Π_{j≠k} w_j(i_j) / Π_{j≠k} ‖w_j‖²`,
/// the exact least-squares minimizer with the other factors fixed, clamped to
/// the floor (the objective is separable per entry, so clamping stays optimal).
pub fn als_sweep(omega: &SamplingPattern, current: &Rank1Weight) -> Result<Rank1Weight> {
    let shape = current.shape();
    omega.require_shape(&shape)?;
    omega.require_nonempty()?;
    let n = shape.len();
    let st = strides(&shape);
    let observed: Vec<Vec<usize>> = omega
        .observed()
        .map(|flat| (0..n).map(|k| (flat / st[k]) % shape[k]).collect())
        .collect();

    let mut next = current.clone();
    for k in 0..n {
        for (j, f) in next.factors.iter().enumerate() {
            if j != k && f.iter().all(|&v| v <= WEIGHT_FLOOR) {
                return Err(TensorError::DegenerateFactor(k));
            }
        }
        let denom: f64 = next
            .factors
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != k)
            .map(|(_, f)| f.iter().map(|v| v * v).sum::<f64>())
            .product();
        let mut numer = vec![0.0; shape[k]];
        for idx in &observed {
            let mut prod = 1.0;
            for (j, &i) in idx.iter().enumerate() {
                if j != k {
                    prod *= next.factors[j][i];
                }
            }
            numer[idx[k]] += prod;
        }
        next.factors[k] = numer
            .into_iter()
            .map(|v| (v / denom).max(WEIGHT_FLOOR))
            .collect();
    }
    let mut balanced = next.rebalanced();
    balanced.clamp_to_floor();
    Ok(balanced)
}

/// Result of a weight fit.
#[derive(Clone, Debug)]
pub struct WeightFit {
    pub weight: Rank1Weight,
    /// Residual of the initial guess followed by the residual after each sweep.
    pub residuals: Vec<f64>,
    pub converged: bool,
}

impl WeightFit {
    pub fn sweeps(&self) -> usize {
        self.residuals.len() - 1
    }
}

/// Fits the rank-1 weight to 1_Ω starting from the constant tensor at the
/// sampling rate. Stops when a sweep improves the residual by less than
/// `tol` relative, or after `max_iters` sweeps.
pub fn estimate_weight_traced(omega: &SamplingPattern, max_iters: usize, tol: f64) -> Result<WeightFit> {
    omega.require_nonempty()?;
    let mut weight = Rank1Weight::constant(omega.shape(), omega.rate())?;
    let mut residuals = vec![weight_residual(omega, &weight)?];
    let mut converged = false;
    for _ in 0..max_iters {
        let prev = *residuals.last().unwrap();
        if prev == 0.0 {
            converged = true;
            break;
        }
        weight = als_sweep(omega, &weight)?;
        let cur = weight_residual(omega, &weight)?;
        residuals.push(cur);
        if (prev - cur) / prev < tol {
            converged = true;
            break;
        }
    }
    Ok(WeightFit {
        weight,
        residuals,
        converged,
    })
}

pub fn estimate_weight(omega: &SamplingPattern, max_iters: usize, tol: f64) -> Result<Rank1Weight> {
    estimate_weight_traced(omega, max_iters, tol).map(|fit| fit.weight)
}
