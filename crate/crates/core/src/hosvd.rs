//! Truncated HOSVD and the completion estimators built on it.
//!
//! * [`hosvd_truncate`]: classic HOSVD; every mode basis comes from the same input.
//! * [`hosvd_plain`]: HOSVD of the zero-filled observations.
//! * [`hosvd_p`]: HOSVD of the observations rescaled by the inverse sampling rate.
//! * [`weighted_hosvd`]: `W^(-1/2) ∘ HOSVD(W^(-1/2) ∘ Y_Ω)`.

use crate::error::{Result, TensorError};
use crate::mask::SamplingPattern;
use crate::svd::truncated_left_singular;
use crate::tensor::{DenseTensor, Matrix, TuckerRank};
use crate::weight::{Rank1Weight, WEIGHT_FLOOR};

/// Orthonormal per-mode bases `Û_k` (`d_k × r_k`).
#[derive(Clone, Debug)]
pub struct HosvdFactors {
    pub bases: Vec<Matrix>,
}

impl HosvdFactors {
    /// Leading left singular vectors of each mode unfolding of `y`.
    pub fn compute(y: &DenseTensor, ranks: &TuckerRank) -> Result<Self> {
        ranks.validate_for(y.shape())?;
        let bases = ranks
            .ranks()
            .iter()
            .enumerate()
            .map(|(k, &r)| truncated_left_singular(&y.unfold(k)?, r))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { bases })
    }

    /// `y ×_1 Û_1Û_1ᵀ ⋯ ×_n Û_nÛ_nᵀ`, computed as a compress-then-expand pass.
    pub fn project(&self, y: &DenseTensor) -> Result<DenseTensor> {
        let mut core = y.clone();
        for (k, u) in self.bases.iter().enumerate() {
            core = core.mode_product(k, &u.transpose())?;
        }
        let mut out = core;
        for (k, u) in self.bases.iter().enumerate() {
            out = out.mode_product(k, u)?;
        }
        Ok(out)
    }
}

pub fn hosvd_truncate(y: &DenseTensor, ranks: &TuckerRank) -> Result<(DenseTensor, HosvdFactors)> {
    let factors = HosvdFactors::compute(y, ranks)?;
    let projected = factors.project(y)?;
    Ok((projected, factors))
}

/// HOSVD of the zero-filled observations Y_Ω.
pub fn hosvd_plain(y_omega: &DenseTensor, omega: &SamplingPattern, ranks: &TuckerRank) -> Result<DenseTensor> {
    let y = omega.restrict(y_omega)?;
    Ok(hosvd_truncate(&y, ranks)?.0)
}

/// HOSVD of `Y_Ω / p` with `p = |Ω| / Π d_k`.
pub fn hosvd_p(y_omega: &DenseTensor, omega: &SamplingPattern, ranks: &TuckerRank) -> Result<DenseTensor> {
    omega.require_nonempty()?;
    let y = omega.restrict(y_omega)?.scale(1.0 / omega.rate());
    Ok(hosvd_truncate(&y, ranks)?.0)
}

/// Weighted HOSVD estimate `W^(-1/2) ∘ HOSVD_r(W^(-1/2) ∘ Y_Ω)`.
///
/// Entries of `y_omega` outside Ω are ignored.
pub fn weighted_hosvd(
    y_omega: &DenseTensor,
    omega: &SamplingPattern,
    w: &Rank1Weight,
    ranks: &TuckerRank,
) -> Result<DenseTensor> {
    omega.require_shape(y_omega.shape())?;
    if w.shape() != y_omega.shape() {
        return Err(TensorError::ShapeMismatch(format!(
            "weight {:?} vs data {:?}",
            w.shape(),
            y_omega.shape()
        )));
    }
    ranks.validate_for(y_omega.shape())?;
    if let Some(&v) = w.factors().iter().flatten().find(|&&v| v < WEIGHT_FLOOR) {
        return Err(TensorError::WeightBelowFloor {
            value: v,
            floor: WEIGHT_FLOOR,
        });
    }
    let inv_sqrt = w.materialize().pointwise_pow(-0.5)?;
    let scaled = inv_sqrt.hadamard(&omega.restrict(y_omega)?)?;
    let (projected, _) = hosvd_truncate(&scaled, ranks)?;
    inv_sqrt.hadamard(&projected)
}
