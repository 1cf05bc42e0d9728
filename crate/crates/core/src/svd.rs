//! Left singular subspaces.
//!
//! The exact path is one-sided (Hestenes) Jacobi on the rows of the input:
//! plane rotations orthogonalize the rows, which diagonalizes `M Mᵀ`
//! implicitly and keeps small singular values accurate. Inputs whose short
//! side exceeds [`JACOBI_MAX_DIM`] go through randomized subspace iteration
//! with a Jacobi solve on the projected matrix.
//!
//! Columns are ordered by descending singular value (ties keep the earlier
//! Jacobi index) and signed so the largest-magnitude entry is positive.

use rand_distr::{Distribution, StandardNormal};

use crate::error::{Result, TensorError};
use crate::rng::stream_rng;
use crate::tensor::Matrix;

pub const JACOBI_MAX_DIM: usize = 64;
pub const OVERSAMPLING: usize = 8;
pub const POWER_ITERATIONS: usize = 4;
const SKETCH_SEED: u64 = 0x5eed_5eed;
const JACOBI_EPS: f64 = 1e-15;
const JACOBI_MAX_SWEEPS: usize = 80;

/// Left singular vectors with their singular values, descending.
#[derive(Clone, Debug)]
pub struct LeftSvd {
    /// `rows × k`, orthonormal columns.
    pub u: Matrix,
    pub singular_values: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum SvdMethod {
    #[default]
    Auto,
    Jacobi,
    Randomized,
}

/// Full left SVD by one-sided Jacobi. Returns all `rows` left vectors; the
/// singular values beyond `min(rows, cols)` are zero.
pub fn jacobi_left_svd(m: &Matrix) -> LeftSvd {
    let d = m.rows();
    let n = m.cols();
    let mut b = m.data().to_vec();
    let mut j = Matrix::identity(d).into_data();

    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..d {
            for q in p + 1..d {
                let (bp, bq) = rows_pair(&mut b, n, p, q);
                let mut alpha = 0.0;
                let mut beta = 0.0;
                let mut gamma = 0.0;
                for (x, y) in bp.iter().zip(bq.iter()) {
                    alpha += x * x;
                    beta += y * y;
                    gamma += x * y;
                }
                if gamma == 0.0 || gamma.abs() <= JACOBI_EPS * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(bp, bq, c, s);
                let (jp, jq) = rows_pair(&mut j, d, p, q);
                rotate(jp, jq, c, s);
            }
        }
        if !rotated {
            break;
        }
    }

    let norms: Vec<f64> = (0..d)
        .map(|i| b[i * n..(i + 1) * n].iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &c| norms[c].total_cmp(&norms[a]));

    let mut u = Matrix::zeros(d, d);
    for (col, &src) in order.iter().enumerate() {
        let v = &j[src * d..(src + 1) * d];
        let sign = sign_of_largest(v);
        for (row, &x) in v.iter().enumerate() {
            u.set(row, col, sign * x);
        }
    }
    LeftSvd {
        u,
        singular_values: order.iter().map(|&i| norms[i]).collect(),
    }
}

fn rows_pair(buf: &mut [f64], width: usize, p: usize, q: usize) -> (&mut [f64], &mut [f64]) {
    debug_assert!(p < q);
    let (head, tail) = buf.split_at_mut(q * width);
    (&mut head[p * width..(p + 1) * width], &mut tail[..width])
}

fn rotate(x: &mut [f64], y: &mut [f64], c: f64, s: f64) {
    for (a, b) in x.iter_mut().zip(y.iter_mut()) {
        let (xa, yb) = (*a, *b);
        *a = c * xa - s * yb;
        *b = s * xa + c * yb;
    }
}

fn sign_of_largest(v: &[f64]) -> f64 {
    let mut best = 0.0f64;
    let mut sign = 1.0;
    for &x in v {
        if x.abs() > best {
            best = x.abs();
            sign = if x < 0.0 { -1.0 } else { 1.0 };
        }
    }
    sign
}

/// All `min(rows, cols)` singular values, descending.
pub fn singular_values(m: &Matrix) -> Vec<f64> {
    let k = m.rows().min(m.cols());
    let mut s = if m.rows() <= m.cols() {
        jacobi_left_svd(m).singular_values
    } else {
        jacobi_left_svd(&m.transpose()).singular_values
    };
    s.truncate(k);
    s
}

fn keep_columns(u: &Matrix, r: usize) -> Matrix {
    let mut out = Matrix::zeros(u.rows(), r);
    for i in 0..u.rows() {
        for c in 0..r {
            out.set(i, c, u.get(i, c));
        }
    }
    out
}

fn check_rank(m: &Matrix, r: usize) -> Result<()> {
    let max = m.rows().min(m.cols());
    if r == 0 || r > max {
        return Err(TensorError::InvalidRank(format!(
            "rank {r} outside 1..={max} for a {}x{} matrix",
            m.rows(),
            m.cols()
        )));
    }
    Ok(())
}

/// Leading `r` left singular vectors of `m`.
pub fn truncated_left_singular(m: &Matrix, r: usize) -> Result<Matrix> {
    truncated_left_singular_with(m, r, SvdMethod::Auto)
}

pub fn truncated_left_singular_with(m: &Matrix, r: usize, method: SvdMethod) -> Result<Matrix> {
    check_rank(m, r)?;
    let use_jacobi = match method {
        SvdMethod::Jacobi => true,
        SvdMethod::Randomized => false,
        SvdMethod::Auto => m.rows().min(m.cols()) <= JACOBI_MAX_DIM,
    };
    if use_jacobi {
        Ok(keep_columns(&jacobi_left_svd(m).u, r))
    } else {
        randomized_left_singular(m, r, OVERSAMPLING, POWER_ITERATIONS)
    }
}

/// Randomized range finder with power iterations, followed by an exact
/// Jacobi SVD of the projected `k × cols` matrix.
pub fn randomized_left_singular(m: &Matrix, r: usize, oversampling: usize, power_iters: usize) -> Result<Matrix> {
    check_rank(m, r)?;
    let k = (r + oversampling).min(m.rows()).min(m.cols());
    let mut rng = stream_rng(SKETCH_SEED, (m.rows() as u64) << 32 | m.cols() as u64);
    let sketch: Vec<f64> = (0..m.cols() * k)
        .map(|_| StandardNormal.sample(&mut rng))
        .collect();
    let omega = Matrix::from_raw(m.cols(), k, sketch);
    let mt = m.transpose();
    let mut q = orthonormalize_columns(&m.matmul(&omega)?);
    for _ in 0..power_iters {
        let z = orthonormalize_columns(&mt.matmul(&q)?);
        q = orthonormalize_columns(&m.matmul(&z)?);
    }
    // B = Qᵀ M is k × cols; its left vectors rotate Q onto the dominant subspace.
    let b = q.transpose().matmul(m)?;
    let small = jacobi_left_svd(&b);
    let u = q.matmul(&keep_columns(&small.u, r))?;
    Ok(canonical_signs(u))
}

fn canonical_signs(mut u: Matrix) -> Matrix {
    for c in 0..u.cols() {
        let sign = sign_of_largest(&u.column(c));
        if sign < 0.0 {
            for r in 0..u.rows() {
                let v = u.get(r, c);
                u.set(r, c, -v);
            }
        }
    }
    u
}

/// Modified Gram-Schmidt, applied twice. Columns that vanish are replaced
/// by zero columns.
pub(crate) fn orthonormalize_columns(a: &Matrix) -> Matrix {
    let mut cols: Vec<Vec<f64>> = (0..a.cols()).map(|c| a.column(c)).collect();
    for _ in 0..2 {
        for i in 0..cols.len() {
            let (done, rest) = cols.split_at_mut(i);
            let v = &mut rest[0];
            for prev in done.iter() {
                let dot: f64 = prev.iter().zip(v.iter()).map(|(x, y)| x * y).sum();
                for (x, p) in v.iter_mut().zip(prev) {
                    *x -= dot * p;
                }
            }
            let nrm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if nrm > 1e-300 {
                v.iter_mut().for_each(|x| *x /= nrm);
            } else {
                v.iter_mut().for_each(|x| *x = 0.0);
            }
        }
    }
    let mut out = Matrix::zeros(a.rows(), a.cols());
    for (c, col) in cols.iter().enumerate() {
        for (r, &v) in col.iter().enumerate() {
            out.set(r, c, v);
        }
    }
    out
}

/// `U Uᵀ` for a matrix with orthonormal columns.
pub fn projector(u: &Matrix) -> Matrix {
    u.matmul(&u.transpose()).expect("square product")
}
