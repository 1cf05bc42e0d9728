//! Cross-checks against independent implementations: naive index loops,
//! nalgebra's dense SVD, and straight-line transcriptions of the bound formulas.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use tensor_complete::eval::{bound_theorem1, bound_theorem2_terms, mode_spectrum, spectral_norm};
use tensor_complete::svd::{projector, truncated_left_singular, truncated_left_singular_with, SvdMethod};
use tensor_complete::tv::{forward_diff, laplacian, tv_norm};
use tensor_complete::weight::estimate_weight_traced;
use tensor_complete::{estimate_weight, gen_mask_uniform, generate_tucker, DenseTensor, Matrix, SamplingPattern, TuckerRank};

fn random_tensor(rng: &mut ChaCha8Rng, max_order: usize, max_dim: usize) -> DenseTensor {
    let order = rng.random_range(1..=max_order);
    let shape: Vec<usize> = (0..order).map(|_| rng.random_range(1..=max_dim)).collect();
    let len = shape.iter().product();
    let data = (0..len).map(|_| rng.sample(StandardNormal)).collect();
    DenseTensor::new(shape, data).unwrap()
}

fn unravel(mut flat: usize, shape: &[usize]) -> Vec<usize> {
    let mut idx = vec![0; shape.len()];
    for k in (0..shape.len()).rev() {
        idx[k] = flat % shape[k];
        flat /= shape[k];
    }
    idx
}

fn naive_forward(x: &DenseTensor, mode: usize, idx: &[usize]) -> f64 {
    if idx[mode] + 1 < x.shape()[mode] {
        let mut next = idx.to_vec();
        next[mode] += 1;
        x.get(&next) - x.get(idx)
    } else {
        0.0
    }
}

fn naive_second(x: &DenseTensor, mode: usize, idx: &[usize]) -> f64 {
    let c = idx[mode];
    if c > 0 && c + 1 < x.shape()[mode] {
        let (mut lo, mut hi) = (idx.to_vec(), idx.to_vec());
        lo[mode] -= 1;
        hi[mode] += 1;
        x.get(&lo) + x.get(&hi) - 2.0 * x.get(idx)
    } else {
        0.0
    }
}

#[test]
fn difference_operators_match_naive_loops() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..50 {
        let x = random_tensor(&mut rng, 4, 6);
        let n = x.order();
        let mut tv = 0.0;
        let lap = laplacian(&x);
        for flat in 0..x.len() {
            let idx = unravel(flat, x.shape());
            let mut acc = 0.0;
            let mut g2 = 0.0;
            for k in 0..n {
                acc += naive_second(&x, k, &idx);
                let g = naive_forward(&x, k, &idx);
                g2 += g * g;
            }
            assert_eq!(lap.data()[flat], acc);
            tv += g2.sqrt();
        }
        for k in 0..n {
            let d = forward_diff(&x, k).unwrap();
            for flat in 0..x.len() {
                assert_eq!(d.data()[flat], naive_forward(&x, k, &unravel(flat, x.shape())));
            }
        }
        assert_eq!(tv_norm(&x), tv);
    }
}

fn to_nalgebra(m: &Matrix) -> DMatrix<f64> {
    DMatrix::from_row_slice(m.rows(), m.cols(), m.data())
}

/// Projector onto the leading `r` left singular vectors from nalgebra's SVD.
fn oracle_projector(m: &Matrix, r: usize) -> DMatrix<f64> {
    let svd = to_nalgebra(m).svd(true, false);
    let u = svd.u.unwrap();
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let cols: Vec<_> = order[..r].iter().map(|&c| u.column(c).into_owned()).collect();
    let ur = DMatrix::from_columns(&cols);
    &ur * ur.transpose()
}

fn max_abs_diff(a: &DMatrix<f64>, b: &Matrix) -> f64 {
    a.iter()
        .zip(to_nalgebra(b).iter())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

#[test]
fn truncated_svd_projectors_match_full_svd() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..50 {
        let rows = rng.random_range(1..=32);
        let cols = rng.random_range(1..=32);
        let data = (0..rows * cols).map(|_| rng.sample(StandardNormal)).collect();
        let m = Matrix::new(rows, cols, data).unwrap();
        let r = rng.random_range(1..=rows.min(cols));
        let u = truncated_left_singular(&m, r).unwrap();
        let diff = max_abs_diff(&oracle_projector(&m, r), &projector(&u));
        assert!(diff <= 1e-8, "{rows}x{cols} rank {r}: {diff}");
    }
}

#[test]
fn randomized_path_matches_full_svd_on_low_rank_data() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (rows, cols, r) = (80, 150, 4);
    let a = DMatrix::<f64>::from_fn(rows, r, |_, _| rng.sample(StandardNormal));
    let b = DMatrix::<f64>::from_fn(r, cols, |_, _| rng.sample(StandardNormal));
    let noise = DMatrix::<f64>::from_fn(rows, cols, |_, _| 1e-3 * rng.sample::<f64, _>(StandardNormal));
    let dense = a * b + noise;
    let m = Matrix::new(rows, cols, dense.transpose().as_slice().to_vec()).unwrap();
    let u = truncated_left_singular_with(&m, r, SvdMethod::Randomized).unwrap();
    let diff = max_abs_diff(&oracle_projector(&m, r), &projector(&u));
    assert!(diff <= 1e-8, "{diff}");
}

#[test]
fn als_residuals_are_monotone() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for seed in 0..50 {
        let order = rng.random_range(2..=3);
        let shape: Vec<usize> = (0..order).map(|_| rng.random_range(3..=15)).collect();
        let p = rng.random_range(0.2..0.9);
        let omega = gen_mask_uniform(&shape, p, seed).unwrap();
        let fit = estimate_weight_traced(&omega, 100, 0.0).unwrap();
        for pair in fit.residuals.windows(2) {
            assert!(pair[1] <= pair[0] * (1.0 + 1e-12), "{shape:?} p={p}: {:?}", fit.residuals);
        }
    }
}

#[test]
fn spectral_terms_match_full_svd() {
    let shape = [8, 8, 8];
    let omega = gen_mask_uniform(&shape, 0.35, 21).unwrap();
    let w = estimate_weight(&omega, 100, 1e-8).unwrap();
    let terms = bound_theorem2_terms(&w, &omega, &TuckerRank::uniform(2, 3).unwrap(), 0.01, 1.0).unwrap();
    let wt = w.materialize();
    let gap: Vec<f64> = wt
        .data()
        .iter()
        .zip(omega.mask())
        .map(|(&x, &b)| (if b { 1.0 } else { 0.0 }) / x.sqrt() - x.sqrt())
        .collect();
    let gap = DenseTensor::new(shape.to_vec(), gap).unwrap();
    for k in 0..3 {
        let s = to_nalgebra(&gap.unfold(k).unwrap()).singular_values();
        let top = s.iter().cloned().fold(0.0, f64::max);
        let rel = (terms.spectral_terms[k] - top).abs() / top;
        assert!(rel <= 1e-6, "mode {k}: {} vs {top}", terms.spectral_terms[k]);
    }
}

#[test]
fn spectral_norm_of_random_matrices() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..20 {
        let (rows, cols) = (rng.random_range(1..=20), rng.random_range(1..=20));
        let data = (0..rows * cols).map(|_| rng.sample(StandardNormal)).collect();
        let m = Matrix::new(rows, cols, data).unwrap();
        let top = to_nalgebra(&m).singular_values().max();
        let got = spectral_norm(&m).unwrap();
        assert!((got - top).abs() <= 1e-6 * top, "{got} vs {top}");
    }
}

#[test]
fn bound1_matches_formula_transcription() {
    let shape = [10, 10, 10];
    let omega = gen_mask_uniform(&shape, 0.3, 1).unwrap();
    let w = estimate_weight(&omega, 100, 1e-8).unwrap();
    let t = generate_tucker(&shape, &TuckerRank::uniform(2, 3).unwrap(), 1).unwrap();
    let sigma = 1e-2;
    let t_inf = t.inf_norm();

    // Straight-line evaluation over multi-indices.
    let f = w.factors();
    let mut mu_sq: f64 = 0.0;
    let mut gap_sq = 0.0;
    let mut count = 0.0;
    for i in 0..10 {
        for j in 0..10 {
            for k in 0..10 {
                let wv = f[0][i] * f[1][j] * f[2][k];
                let on = omega.contains(i * 100 + j * 10 + k);
                if on {
                    mu_sq = mu_sq.max(1.0 / wv);
                    count += 1.0;
                }
                let d = wv.sqrt() - if on { 1.0 / wv.sqrt() } else { 0.0 };
                gap_sq += d * d;
            }
        }
    }
    let expected = 4.0 * sigma * mu_sq.sqrt() * (count * 2f64.ln()).sqrt() + 2.0 * t_inf * gap_sq.sqrt();

    let got = bound_theorem1(&w, &omega, sigma, t_inf).unwrap();
    assert!((got.mu - mu_sq.sqrt()).abs() <= 1e-12 * got.mu);
    assert!((got.bound1 - expected).abs() <= 1e-10 * expected, "{} vs {expected}", got.bound1);
    assert_eq!(got.prob1, 1.0 - 0.5f64.powf(count / 2.0));
}

#[test]
fn rank_bound_terms_match_formula_transcription() {
    let shape = [4, 5, 6];
    let omega = gen_mask_uniform(&shape, 0.5, 8).unwrap();
    let w = estimate_weight(&omega, 100, 1e-8).unwrap();
    let ranks = TuckerRank::new(vec![2, 2, 3]).unwrap();
    let terms = bound_theorem2_terms(&w, &omega, &ranks, 0.1, 2.0).unwrap();
    let f = w.factors();
    let val = |i: usize, j: usize, k: usize| {
        if omega.contains((i * 5 + j) * 6 + k) {
            1.0 / (f[0][i] * f[1][j] * f[2][k])
        } else {
            0.0
        }
    };
    // Mode 1: slices i (sum over j, k) and fibres (j, k) (sum over i).
    let slices = (0..4).map(|i| (0..5).flat_map(|j| (0..6).map(move |k| (j, k))).map(|(j, k)| val(i, j, k)).sum::<f64>());
    let fibres = (0..5).flat_map(|j| (0..6).map(move |k| (j, k))).map(|(j, k)| (0..4).map(|i| val(i, j, k)).sum::<f64>());
    let mu1 = slices.chain(fibres).fold(0.0, f64::max).sqrt();
    assert!((terms.mu_k[0] - mu1).abs() <= 1e-12 * mu1);

    let noise: f64 = (0..3)
        .map(|k| {
            let d = shape[k] as f64;
            let rest = 120.0 / d;
            (ranks.ranks()[k] as f64 * (d + rest).ln()).sqrt() * terms.mu_k[k]
        })
        .sum::<f64>()
        * 0.1;
    assert!((terms.noise_term2 - noise).abs() <= 1e-12 * noise);
    let signal: f64 = terms.spectral_terms.iter().zip(ranks.ranks()).map(|(s, &r)| r as f64 * s).sum::<f64>() * 2.0;
    assert!((terms.signal_term2 - signal).abs() <= 1e-12 * signal);
}

#[test]
fn rank_bound_terms_respond_to_rank_and_sigma() {
    let shape = [6, 6, 6];
    let omega = gen_mask_uniform(&shape, 0.4, 2).unwrap();
    let w = estimate_weight(&omega, 100, 1e-8).unwrap();
    let lo = bound_theorem2_terms(&w, &omega, &TuckerRank::uniform(1, 3).unwrap(), 0.01, 1.0).unwrap();
    let hi = bound_theorem2_terms(&w, &omega, &TuckerRank::uniform(3, 3).unwrap(), 0.01, 1.0).unwrap();
    assert!(hi.noise_term2 > lo.noise_term2 && hi.signal_term2 > lo.signal_term2);
    let loud = bound_theorem2_terms(&w, &omega, &TuckerRank::uniform(1, 3).unwrap(), 0.02, 1.0).unwrap();
    assert!(loud.noise_term2 > lo.noise_term2);
    assert_eq!(loud.signal_term2, lo.signal_term2);
}

#[test]
fn spectrum_energy_and_sign_flip_invariance() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let data: Vec<f64> = (0..216).map(|_| rng.sample(StandardNormal)).collect();
    let t = DenseTensor::new(vec![6, 6, 6], data).unwrap();
    let energy = t.frobenius_norm().powi(2);
    // Negate the slab i_2 = 3.
    let flipped: Vec<f64> = t
        .data()
        .iter()
        .enumerate()
        .map(|(f, &v)| if (f / 6) % 6 == 3 { -v } else { v })
        .collect();
    let flipped = DenseTensor::new(vec![6, 6, 6], flipped).unwrap();
    for k in 0..3 {
        let s = mode_spectrum(&t, k).unwrap();
        assert_eq!(s.len(), 6);
        assert!(s.windows(2).all(|p| p[0] >= p[1]) && s[5] >= 0.0);
        let e: f64 = s.iter().map(|x| x * x).sum();
        assert!((e - energy).abs() <= 1e-10 * energy);
        let nuc: f64 = s.iter().sum();
        let nuc_flipped: f64 = mode_spectrum(&flipped, k).unwrap().iter().sum();
        assert!((nuc - nuc_flipped).abs() <= 1e-8 * nuc);
    }
}

#[test]
fn bound_masks_with_full_support() {
    let shape = [3, 3, 3];
    let full = SamplingPattern::full(&shape).unwrap();
    let w = estimate_weight(&full, 100, 1e-8).unwrap();
    let t1 = bound_theorem1(&w, &full, 0.0, 5.0).unwrap();
    assert!(t1.bound1 <= 1e-6, "{}", t1.bound1);
}
