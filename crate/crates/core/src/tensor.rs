//! Dense n-mode tensors and the multilinear primitives built on them.
//!
//! Storage is a flat `f64` buffer with the last index varying fastest.
//! Modes are 0-based throughout the crate.
//!
//! The mode-k unfolding orders its columns lexicographically over the
//! remaining modes with the lowest remaining mode varying fastest. For the
//! 3×4×2 tensor with frontal slices `[[1,4,7,10],[2,5,8,11],[3,6,9,12]]` and
//! `[[13,..,22],[14,..,23],[15,..,24]]` this gives
//!
//! ```text
//! T_(1) = [[1,4,7,10,13,16,19,22], [2,5,..,23], [3,6,..,24]]
//! T_(3) = [[1,2,3,..,12], [13,14,..,24]]
//! ```

use crate::error::{Result, TensorError};

/// Row-major dense matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(TensorError::ShapeMismatch(format!(
                "{rows}x{cols} matrix needs {} values, got {}",
                rows * cols,
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(TensorError::NonFinite(i));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    /// Builds a matrix from nested rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(TensorError::ShapeMismatch("ragged rows".into()));
        }
        Self::new(r, c, rows.concat())
    }

    pub(crate) fn from_raw(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), rows * cols);
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub(crate) fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }

    pub fn transpose(&self) -> Matrix {
        let mut out = Matrix::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.data[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        out
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(TensorError::ShapeMismatch(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for p in 0..self.cols {
                let a = self.data[i * self.cols + p];
                if a == 0.0 {
                    continue;
                }
                let b_row = &other.data[p * other.cols..(p + 1) * other.cols];
                for (o, b) in out_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// `self * selfᵀ`, exploiting symmetry.
    pub fn gram_rows(&self) -> Matrix {
        let n = self.rows;
        let mut g = Matrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v: f64 = self.row(i).iter().zip(self.row(j)).map(|(a, b)| a * b).sum();
                g.data[i * n + j] = v;
                g.data[j * n + i] = v;
            }
        }
        g
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Per-mode target ranks for a Tucker approximation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TuckerRank(Vec<usize>);

impl TuckerRank {
    pub fn new(ranks: Vec<usize>) -> Result<Self> {
        if ranks.is_empty() || ranks.contains(&0) {
            return Err(TensorError::InvalidRank(format!(
                "ranks must be positive and non-empty, got {ranks:?}"
            )));
        }
        Ok(Self(ranks))
    }

    /// `[r; order]`.
    pub fn uniform(r: usize, order: usize) -> Result<Self> {
        Self::new(vec![r; order])
    }

    pub fn ranks(&self) -> &[usize] {
        &self.0
    }

    pub fn validate_for(&self, shape: &[usize]) -> Result<()> {
        if self.0.len() != shape.len() {
            return Err(TensorError::InvalidRank(format!(
                "{} ranks for an order-{} tensor",
                self.0.len(),
                shape.len()
            )));
        }
        for (k, (&r, &d)) in self.0.iter().zip(shape).enumerate() {
            if r > d {
                return Err(TensorError::InvalidRank(format!(
                    "rank {r} exceeds extent {d} in mode {k}"
                )));
            }
        }
        Ok(())
    }
}

/// Dense real tensor of order ≥ 1.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseTensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

fn check_shape(shape: &[usize]) -> Result<usize> {
    if shape.is_empty() {
        return Err(TensorError::InvalidShape("order must be at least 1".into()));
    }
    if shape.contains(&0) {
        return Err(TensorError::InvalidShape(format!(
            "every extent must be at least 1, got {shape:?}"
        )));
    }
    shape
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| TensorError::InvalidShape(format!("{shape:?} overflows")))
}

impl DenseTensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let len = check_shape(&shape)?;
        if data.len() != len {
            return Err(TensorError::ShapeMismatch(format!(
                "shape {shape:?} needs {len} values, got {}",
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(TensorError::NonFinite(i));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Result<Self> {
        Self::filled(shape, 0.0)
    }

    pub fn filled(shape: &[usize], value: f64) -> Result<Self> {
        let len = check_shape(shape)?;
        if !value.is_finite() {
            return Err(TensorError::NonFinite(0));
        }
        Ok(Self {
            shape: shape.to_vec(),
            data: vec![value; len],
        })
    }

    /// Internal constructor for kernels whose outputs are finite by construction.
    pub(crate) fn from_raw(shape: Vec<usize>, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), shape.iter().product::<usize>());
        Self { shape, data }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn order(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn strides(&self) -> Vec<usize> {
        strides(&self.shape)
    }

    pub fn flat_index(&self, index: &[usize]) -> usize {
        debug_assert_eq!(index.len(), self.shape.len());
        index
            .iter()
            .zip(self.strides())
            .map(|(i, s)| i * s)
            .sum()
    }

    pub fn get(&self, index: &[usize]) -> f64 {
        self.data[self.flat_index(index)]
    }

    pub fn map(&self, mut f: impl FnMut(f64) -> f64) -> DenseTensor {
        Self::from_raw(self.shape.clone(), self.data.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_with(&self, other: &DenseTensor, f: impl Fn(f64, f64) -> f64) -> Result<DenseTensor> {
        self.require_same_shape(other)?;
        Ok(Self::from_raw(
            self.shape.clone(),
            self.data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        ))
    }

    pub fn scale(&self, c: f64) -> DenseTensor {
        self.map(|v| c * v)
    }

    pub fn add(&self, other: &DenseTensor) -> Result<DenseTensor> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &DenseTensor) -> Result<DenseTensor> {
        self.zip_with(other, |a, b| a - b)
    }

    pub(crate) fn require_same_shape(&self, other: &DenseTensor) -> Result<()> {
        if self.shape != other.shape {
            return Err(TensorError::ShapeMismatch(format!(
                "{:?} vs {:?}",
                self.shape, other.shape
            )));
        }
        Ok(())
    }

    fn check_mode(&self, mode: usize) -> Result<()> {
        if mode >= self.order() {
            return Err(TensorError::InvalidMode {
                mode,
                order: self.order(),
            });
        }
        Ok(())
    }

    /// Mode-`mode` matricization: `d_mode` rows, remaining modes on columns
    /// with the lowest remaining mode varying fastest.
    pub fn unfold(&self, mode: usize) -> Result<Matrix> {
        self.check_mode(mode)?;
        let layout = ModeLayout::new(&self.shape, mode);
        let d = self.shape[mode];
        let cols = layout.left * layout.right;
        let mut out = vec![0.0; d * cols];
        for a in 0..layout.left {
            let ca = layout.left_col[a];
            for i in 0..d {
                let src = &self.data[(a * d + i) * layout.right..(a * d + i + 1) * layout.right];
                let row = &mut out[i * cols..(i + 1) * cols];
                for (b, &v) in src.iter().enumerate() {
                    row[ca + layout.left * layout.right_col[b]] = v;
                }
            }
        }
        Ok(Matrix::from_raw(d, cols, out))
    }

    /// Inverse of [`DenseTensor::unfold`].
    pub fn fold(m: &Matrix, mode: usize, shape: &[usize]) -> Result<DenseTensor> {
        check_shape(shape)?;
        if mode >= shape.len() {
            return Err(TensorError::InvalidMode {
                mode,
                order: shape.len(),
            });
        }
        let layout = ModeLayout::new(shape, mode);
        let d = shape[mode];
        let cols = layout.left * layout.right;
        if m.rows() != d || m.cols() != cols {
            return Err(TensorError::ShapeMismatch(format!(
                "mode-{mode} fold into {shape:?} needs a {d}x{cols} matrix, got {}x{}",
                m.rows(),
                m.cols()
            )));
        }
        let mut data = vec![0.0; d * cols];
        for a in 0..layout.left {
            let ca = layout.left_col[a];
            for i in 0..d {
                let row = m.row(i);
                let dst = &mut data[(a * d + i) * layout.right..(a * d + i + 1) * layout.right];
                for (b, v) in dst.iter_mut().enumerate() {
                    *v = row[ca + layout.left * layout.right_col[b]];
                }
            }
        }
        Ok(DenseTensor::from_raw(shape.to_vec(), data))
    }

    /// Mode-k product `fold_k(A · T_(k))`.
    pub fn mode_product(&self, mode: usize, a: &Matrix) -> Result<DenseTensor> {
        self.check_mode(mode)?;
        let d = self.shape[mode];
        if a.cols() != d {
            return Err(TensorError::ShapeMismatch(format!(
                "mode-{mode} product needs {d} matrix columns, got {}",
                a.cols()
            )));
        }
        let left: usize = self.shape[..mode].iter().product();
        let right: usize = self.shape[mode + 1..].iter().product();
        let m = a.rows();
        let mut out = vec![0.0; left * m * right];
        for l in 0..left {
            let src = &self.data[l * d * right..(l + 1) * d * right];
            let dst = &mut out[l * m * right..(l + 1) * m * right];
            for j in 0..m {
                let dst_fiber = &mut dst[j * right..(j + 1) * right];
                for i in 0..d {
                    let coef = a.get(j, i);
                    if coef == 0.0 {
                        continue;
                    }
                    for (o, s) in dst_fiber.iter_mut().zip(&src[i * right..(i + 1) * right]) {
                        *o += coef * s;
                    }
                }
            }
        }
        let mut shape = self.shape.clone();
        shape[mode] = m;
        Ok(DenseTensor::from_raw(shape, out))
    }

    /// Outer product `a_1 ∘ ⋯ ∘ a_n`.
    pub fn outer(vectors: &[Vec<f64>]) -> Result<DenseTensor> {
        if vectors.is_empty() {
            return Err(TensorError::InvalidShape("outer product of no vectors".into()));
        }
        let shape: Vec<usize> = vectors.iter().map(Vec::len).collect();
        check_shape(&shape)?;
        if vectors.iter().flatten().any(|v| !v.is_finite()) {
            return Err(TensorError::NonFinite(0));
        }
        let mut data = vec![1.0];
        for v in vectors {
            let mut next = Vec::with_capacity(data.len() * v.len());
            for &acc in &data {
                next.extend(v.iter().map(|&x| acc * x));
            }
            data = next;
        }
        Ok(DenseTensor::from_raw(shape, data))
    }

    pub fn hadamard(&self, other: &DenseTensor) -> Result<DenseTensor> {
        self.zip_with(other, |a, b| a * b)
    }

    /// Entrywise power. Fractional or negative exponents need strictly positive entries.
    pub fn pointwise_pow(&self, alpha: f64) -> Result<DenseTensor> {
        let integral = alpha.fract() == 0.0;
        if alpha < 0.0 || !integral {
            if let Some((index, &value)) = self.data.iter().enumerate().find(|(_, &v)| v <= 0.0) {
                return Err(TensorError::NonPositive { index, value, alpha });
            }
        }
        let out = if alpha == 1.0 {
            self.clone()
        } else if alpha == 0.5 {
            self.map(f64::sqrt)
        } else if alpha == -0.5 {
            self.map(|v| 1.0 / v.sqrt())
        } else if integral && alpha.abs() <= i32::MAX as f64 {
            let e = alpha as i32;
            self.map(|v| v.powi(e))
        } else {
            self.map(|v| v.powf(alpha))
        };
        if let Some(i) = out.data.iter().position(|v| !v.is_finite()) {
            return Err(TensorError::NonFinite(i));
        }
        Ok(out)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn inf_norm(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Khatri-Rao product: column-wise Kronecker product of two matrices with
/// the same column count. Row `i * b.rows() + j` of column `c` is `a[i,c] * b[j,c]`.
pub fn khatri_rao(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if a.cols() != b.cols() {
        return Err(TensorError::ShapeMismatch(format!(
            "Khatri-Rao needs equal column counts, got {} and {}",
            a.cols(),
            b.cols()
        )));
    }
    let r = a.cols();
    let mut out = Matrix::zeros(a.rows() * b.rows(), r);
    for i in 0..a.rows() {
        for j in 0..b.rows() {
            for c in 0..r {
                out.set(i * b.rows() + j, c, a.get(i, c) * b.get(j, c));
            }
        }
    }
    Ok(out)
}

pub(crate) fn strides(shape: &[usize]) -> Vec<usize> {
    let mut s = vec![1; shape.len()];
    for k in (0..shape.len().saturating_sub(1)).rev() {
        s[k] = s[k + 1] * shape[k + 1];
    }
    s
}

/// Splits a row-major shape around one mode and maps the row-major
/// offsets on either side to their column-major (lowest-fastest) positions.
struct ModeLayout {
    left: usize,
    right: usize,
    left_col: Vec<usize>,
    right_col: Vec<usize>,
}

impl ModeLayout {
    fn new(shape: &[usize], mode: usize) -> Self {
        let left_col = row_to_col_major(&shape[..mode]);
        let right_col = row_to_col_major(&shape[mode + 1..]);
        Self {
            left: left_col.len(),
            right: right_col.len(),
            left_col,
            right_col,
        }
    }
}

fn row_to_col_major(shape: &[usize]) -> Vec<usize> {
    let len: usize = shape.iter().product();
    let mut col_strides = vec![1; shape.len()];
    for k in 1..shape.len() {
        col_strides[k] = col_strides[k - 1] * shape[k - 1];
    }
    let mut idx = vec![0usize; shape.len()];
    let mut out = Vec::with_capacity(len);
    for _ in 0..len {
        out.push(idx.iter().zip(&col_strides).map(|(i, s)| i * s).sum());
        for k in (0..shape.len()).rev() {
            idx[k] += 1;
            if idx[k] < shape[k] {
                break;
            }
            idx[k] = 0;
        }
    }
    out
}
