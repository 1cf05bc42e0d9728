//! Error metrics, computable bound evaluators and spectrum diagnostics.

use rand::Rng;

use crate::error::{Result, TensorError};
use crate::mask::SamplingPattern;
use crate::rng::{stream_rng, STREAM_POWER};
use crate::svd::singular_values;
use crate::tensor::{DenseTensor, Matrix, TuckerRank};
use crate::weight::Rank1Weight;

pub const POWER_TOL: f64 = 1e-8;
pub const POWER_MAX_ITERS: usize = 1000;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ErrorMetrics {
    /// ‖T̂ − T‖_F / ‖T‖_F.
    pub rse: f64,
    /// ‖T̂ − T‖_F / √size.
    pub rmse: f64,
    pub rel_unweighted: f64,
    /// ‖W^½∘(T̂ − T)‖_F / ‖W^½∘T‖_F, or 0 without a weight.
    pub rel_weighted: f64,
}

pub fn metrics(estimate: &DenseTensor, truth: &DenseTensor, w: Option<&Rank1Weight>) -> Result<ErrorMetrics> {
    let diff = estimate.sub(truth)?;
    let err = diff.frobenius_norm();
    let truth_norm = truth.frobenius_norm();
    if truth_norm == 0.0 {
        return Err(TensorError::InvalidArgument(
            "relative metrics need a reference with nonzero norm".into(),
        ));
    }
    let rel_weighted = match w {
        None => 0.0,
        Some(w) => {
            if w.shape() != truth.shape() {
                return Err(TensorError::ShapeMismatch(format!(
                    "weight {:?} vs data {:?}",
                    w.shape(),
                    truth.shape()
                )));
            }
            let sqrt_w = w.materialize().map(f64::sqrt);
            let num = sqrt_w.hadamard(&diff)?.frobenius_norm();
            let den = sqrt_w.hadamard(truth)?.frobenius_norm();
            num / den
        }
    };
    Ok(ErrorMetrics {
        rse: err / truth_norm,
        rmse: err / (truth.len() as f64).sqrt(),
        rel_unweighted: err / truth_norm,
        rel_weighted,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Theorem1 {
    pub mu: f64,
    pub bound1: f64,
    pub prob1: f64,
}

/// All quantities entering both error bounds for one (W, Ω, σ, ‖T‖_∞).
#[derive(Clone, Debug, PartialEq)]
pub struct BoundReport {
    pub mu: f64,
    pub bound1: f64,
    pub prob1: f64,
    pub mu_k: Vec<f64>,
    pub spectral_terms: Vec<f64>,
    pub noise_term2: f64,
    pub signal_term2: f64,
    /// `1 − Σ_k 1/(d_k + Π_{j≠k} d_j)`.
    pub prob2_sum: f64,
    /// `Π_k (1 − 1/(d_k + Π_{j≠k} d_j))`.
    pub prob2_prod: f64,
}

/// The Tucker-rank bound pieces of a [`BoundReport`].
#[derive(Clone, Debug, PartialEq)]
pub struct Theorem2Terms {
    pub mu_k: Vec<f64>,
    pub spectral_terms: Vec<f64>,
    pub noise_term2: f64,
    pub signal_term2: f64,
    pub prob2_sum: f64,
    pub prob2_prod: f64,
}

fn check_inputs(w: &Rank1Weight, omega: &SamplingPattern, sigma: f64, t_inf: f64) -> Result<()> {
    omega.require_shape(&w.shape())?;
    for (name, v) in [("sigma", sigma), ("t_inf", t_inf)] {
        if !(v >= 0.0) || !v.is_finite() {
            return Err(TensorError::InvalidArgument(format!(
                "{name} must be finite and non-negative, got {v}"
            )));
        }
    }
    Ok(())
}

/// `W^(-1/2)∘1_Ω − W^(1/2)`.
fn weight_gap(w: &DenseTensor, omega: &SamplingPattern) -> DenseTensor {
    let data = w
        .data()
        .iter()
        .zip(omega.mask())
        .map(|(&x, &b)| if b { 1.0 / x.sqrt() - x.sqrt() } else { -x.sqrt() })
        .collect();
    DenseTensor::new(w.shape().to_vec(), data).expect("weights are finite")
}

/// μ² = max_Ω 1/W, the Frobenius error bound
/// `4σμ√(|Ω| ln 2) + 2‖T‖_∞ ‖W^½ − W^(-½)∘1_Ω‖_F`, and its success probability.
pub fn bound_theorem1(w: &Rank1Weight, omega: &SamplingPattern, sigma: f64, t_inf: f64) -> Result<Theorem1> {
    check_inputs(w, omega, sigma, t_inf)?;
    let wt = w.materialize();
    Ok(theorem1_from(&wt, omega, sigma, t_inf))
}

fn theorem1_from(wt: &DenseTensor, omega: &SamplingPattern, sigma: f64, t_inf: f64) -> Theorem1 {
    let mu_sq = omega
        .observed()
        .map(|i| 1.0 / wt.data()[i])
        .fold(0.0, f64::max);
    let mu = mu_sq.sqrt();
    let count = omega.count() as f64;
    let gap = weight_gap(wt, omega).frobenius_norm();
    Theorem1 {
        mu,
        bound1: 4.0 * sigma * mu * (count * std::f64::consts::LN_2).sqrt() + 2.0 * t_inf * gap,
        prob1: 1.0 - (-count / 2.0).exp2(),
    }
}

/// Per-mode μ_k, spectral norms of the unfolded weight gap, and the two
/// constant-free noise and signal summands of the Tucker-rank bound.
pub fn bound_theorem2_terms(
    w: &Rank1Weight,
    omega: &SamplingPattern,
    ranks: &TuckerRank,
    sigma: f64,
    t_inf: f64,
) -> Result<Theorem2Terms> {
    check_inputs(w, omega, sigma, t_inf)?;
    let shape = omega.shape().to_vec();
    ranks.validate_for(&shape)?;
    let wt = w.materialize();
    theorem2_from(&wt, omega, ranks, sigma, t_inf)
}

fn theorem2_from(
    wt: &DenseTensor,
    omega: &SamplingPattern,
    ranks: &TuckerRank,
    sigma: f64,
    t_inf: f64,
) -> Result<Theorem2Terms> {
    let shape = omega.shape();
    let total: usize = shape.iter().product();
    let inv_on_omega = DenseTensor::new(
        shape.to_vec(),
        wt.data()
            .iter()
            .zip(omega.mask())
            .map(|(&x, &b)| if b { 1.0 / x } else { 0.0 })
            .collect(),
    )?;
    let gap = weight_gap(wt, omega);

    let mut mu_k = Vec::with_capacity(shape.len());
    let mut spectral_terms = Vec::with_capacity(shape.len());
    let (mut noise, mut signal) = (0.0, 0.0);
    let (mut prob_sum, mut prob_prod) = (1.0, 1.0);
    for (k, (&d, &r)) in shape.iter().zip(ranks.ranks()).enumerate() {
        let m = inv_on_omega.unfold(k)?;
        let row_max = (0..m.rows())
            .map(|i| m.row(i).iter().sum::<f64>())
            .fold(0.0, f64::max);
        let mut col_sums = vec![0.0; m.cols()];
        for i in 0..m.rows() {
            for (s, v) in col_sums.iter_mut().zip(m.row(i)) {
                *s += v;
            }
        }
        let col_max = col_sums.into_iter().fold(0.0, f64::max);
        let mu = row_max.max(col_max).sqrt();

        let spec = spectral_norm(&gap.unfold(k)?)?;
        let rest = total / d;
        let dim_sum = (d + rest) as f64;
        noise += (r as f64 * dim_sum.ln()).sqrt() * mu;
        signal += r as f64 * spec;
        prob_sum -= 1.0 / dim_sum;
        prob_prod *= 1.0 - 1.0 / dim_sum;
        mu_k.push(mu);
        spectral_terms.push(spec);
    }
    Ok(Theorem2Terms {
        mu_k,
        spectral_terms,
        noise_term2: noise * sigma,
        signal_term2: signal * t_inf,
        prob2_sum: prob_sum,
        prob2_prod: prob_prod,
    })
}

/// Both bounds from a single materialization of W.
pub fn bound_report(
    w: &Rank1Weight,
    omega: &SamplingPattern,
    ranks: &TuckerRank,
    sigma: f64,
    t_inf: f64,
) -> Result<BoundReport> {
    check_inputs(w, omega, sigma, t_inf)?;
    ranks.validate_for(omega.shape())?;
    let wt = w.materialize();
    let t1 = theorem1_from(&wt, omega, sigma, t_inf);
    let t2 = theorem2_from(&wt, omega, ranks, sigma, t_inf)?;
    Ok(BoundReport {
        mu: t1.mu,
        bound1: t1.bound1,
        prob1: t1.prob1,
        mu_k: t2.mu_k,
        spectral_terms: t2.spectral_terms,
        noise_term2: t2.noise_term2,
        signal_term2: t2.signal_term2,
        prob2_sum: t2.prob2_sum,
        prob2_prod: t2.prob2_prod,
    })
}

/// Largest singular value by power iteration on `M Mᵀ`.
///
/// The start vector comes from a fixed stream; iteration stops once the
/// Rayleigh quotient changes by less than [`POWER_TOL`] relative.
pub fn spectral_norm(m: &Matrix) -> Result<f64> {
    let gram = m.gram_rows();
    let n = gram.rows();
    if n == 0 || gram.data().iter().all(|&v| v == 0.0) {
        return Ok(0.0);
    }
    let mut rng = stream_rng(0, STREAM_POWER);
    let mut v: Vec<f64> = (0..n).map(|_| rng.random::<f64>() + 0.5).collect();
    normalize(&mut v);
    let mut rayleigh = 0.0;
    for _ in 0..POWER_MAX_ITERS {
        let gv = mat_vec(&gram, &v);
        let next = dot(&v, &gv);
        let norm = dot(&gv, &gv).sqrt();
        if norm == 0.0 {
            // Start vector landed in the null space of a nonzero PSD matrix.
            return Ok(0.0);
        }
        v = gv.into_iter().map(|x| x / norm).collect();
        if (next - rayleigh).abs() <= POWER_TOL * next.abs() {
            return Ok(next.max(0.0).sqrt());
        }
        rayleigh = next;
    }
    Err(TensorError::NoConvergence {
        iterations: POWER_MAX_ITERS,
        rayleigh,
    })
}

fn mat_vec(m: &Matrix, v: &[f64]) -> Vec<f64> {
    (0..m.rows()).map(|i| dot(m.row(i), v)).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize(v: &mut [f64]) {
    let n = dot(v, v).sqrt();
    v.iter_mut().for_each(|x| *x /= n);
}

/// All singular values of the mode-k unfolding, descending.
pub fn mode_spectrum(t: &DenseTensor, mode: usize) -> Result<Vec<f64>> {
    Ok(singular_values(&t.unfold(mode)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mask::gen_mask_uniform;
    use crate::synth::generate_tucker;
    use crate::weight::estimate_weight;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1.0)
    }

    #[test]
    fn identical_tensors_have_zero_error() {
        let t = generate_tucker(&[4, 4, 4], &TuckerRank::uniform(2, 3).unwrap(), 1).unwrap();
        let w = Rank1Weight::constant(&[4, 4, 4], 0.3).unwrap();
        let m = metrics(&t, &t, Some(&w)).unwrap();
        assert_eq!(m, ErrorMetrics { rse: 0.0, rmse: 0.0, rel_unweighted: 0.0, rel_weighted: 0.0 });
    }

    #[test]
    fn ones_versus_zeros() {
        let ones = DenseTensor::filled(&[2, 2, 2], 1.0).unwrap();
        let zeros = DenseTensor::zeros(&[2, 2, 2]).unwrap();
        let m = metrics(&zeros, &ones, None).unwrap();
        assert!(close(m.rse, 1.0, 1e-15));
        assert!(close(m.rmse, 1.0, 1e-15));
        assert_eq!(m.rel_weighted, 0.0);
        assert!(metrics(&ones, &zeros, None).is_err());
    }

    #[test]
    fn unit_weight_matches_unweighted() {
        let shape = [5, 4, 3];
        let a = generate_tucker(&shape, &TuckerRank::uniform(2, 3).unwrap(), 2).unwrap();
        let b = generate_tucker(&shape, &TuckerRank::uniform(2, 3).unwrap(), 3).unwrap();
        let m = metrics(&a, &b, Some(&Rank1Weight::unit(&shape).unwrap())).unwrap();
        assert!((m.rel_weighted - m.rel_unweighted).abs() <= 1e-12);
    }

    #[test]
    fn bound1_trivial_cases() {
        let shape = [3, 4, 5];
        let w = Rank1Weight::unit(&shape).unwrap();
        let full = SamplingPattern::full(&shape).unwrap();
        assert_eq!(bound_theorem1(&w, &full, 0.0, 2.0).unwrap().bound1, 0.0);
        let t1 = bound_theorem1(&w, &full, 0.1, 2.0).unwrap();
        assert!(close(t1.mu, 1.0, 1e-15));
        assert!(close(t1.bound1, 0.4 * (60.0 * 2f64.ln()).sqrt(), 1e-14));
        assert!(close(t1.prob1, 1.0 - 2f64.powf(-30.0), 1e-15));
    }

    #[test]
    fn bound1_monotone_in_sigma_and_weight() {
        let shape = [6, 6, 6];
        let omega = gen_mask_uniform(&shape, 0.3, 4).unwrap();
        let w = estimate_weight(&omega, 100, 1e-8).unwrap();
        let lo = bound_theorem1(&w, &omega, 0.01, 1.0).unwrap();
        let hi = bound_theorem1(&w, &omega, 0.02, 1.0).unwrap();
        assert!(hi.bound1 > lo.bound1);
        let mut f = w.factors().to_vec();
        f[0].iter_mut().for_each(|v| *v *= 0.5);
        let smaller = Rank1Weight::new(f).unwrap();
        assert!(bound_theorem1(&smaller, &omega, 0.01, 1.0).unwrap().mu >= lo.mu);
    }

    #[test]
    fn rank_bound_full_unit_weight() {
        let shape = [3, 4, 5];
        let w = Rank1Weight::unit(&shape).unwrap();
        let full = SamplingPattern::full(&shape).unwrap();
        let ranks = TuckerRank::uniform(2, 3).unwrap();
        let t2 = bound_theorem2_terms(&w, &full, &ranks, 0.1, 1.0).unwrap();
        assert_eq!(t2.spectral_terms, vec![0.0; 3]);
        assert_eq!(t2.signal_term2, 0.0);
        for (k, &d) in shape.iter().enumerate() {
            let expected = (60 / d).max(d) as f64;
            assert!(close(t2.mu_k[k] * t2.mu_k[k], expected, 1e-14));
        }
        assert!(t2.prob2_sum <= t2.prob2_prod);
    }

    #[test]
    fn spectral_norm_matches_jacobi() {
        let omega = gen_mask_uniform(&[8, 8, 8], 0.3, 9).unwrap();
        let w = estimate_weight(&omega, 100, 1e-8).unwrap();
        let ranks = TuckerRank::uniform(2, 3).unwrap();
        let t2 = bound_theorem2_terms(&w, &omega, &ranks, 0.01, 1.0).unwrap();
        let gap = weight_gap(&w.materialize(), &omega);
        for k in 0..3 {
            let s = singular_values(&gap.unfold(k).unwrap());
            assert!(close(t2.spectral_terms[k], s[0], 1e-6), "{} vs {}", t2.spectral_terms[k], s[0]);
        }
    }

    #[test]
    fn report_combines_both_bounds() {
        let omega = gen_mask_uniform(&[5, 6, 7], 0.4, 2).unwrap();
        let w = estimate_weight(&omega, 100, 1e-8).unwrap();
        let ranks = TuckerRank::new(vec![2, 3, 2]).unwrap();
        let r = bound_report(&w, &omega, &ranks, 0.05, 3.0).unwrap();
        let t1 = bound_theorem1(&w, &omega, 0.05, 3.0).unwrap();
        let t2 = bound_theorem2_terms(&w, &omega, &ranks, 0.05, 3.0).unwrap();
        assert_eq!((r.mu, r.bound1, r.prob1), (t1.mu, t1.bound1, t1.prob1));
        assert_eq!(r.mu_k, t2.mu_k);
        assert_eq!(r.noise_term2, t2.noise_term2);
        assert!(bound_report(&w, &omega, &ranks, -1.0, 3.0).is_err());
    }

    #[test]
    fn spectra() {
        let t = DenseTensor::outer(&[vec![1.0, 2.0], vec![3.0, -1.0, 0.5], vec![1.0, 1.0]]).unwrap();
        for k in 0..3 {
            let s = mode_spectrum(&t, k).unwrap();
            assert!(s[1..].iter().all(|&x| x <= 1e-10 * s[0]));
        }
        let id = DenseTensor::new(vec![3, 3], Matrix::identity(3).into_data()).unwrap();
        let s = mode_spectrum(&id, 0).unwrap();
        assert!(s.iter().all(|&x| close(x, 1.0, 1e-14)));
        assert!(mode_spectrum(&id, 2).is_err());
    }
}
