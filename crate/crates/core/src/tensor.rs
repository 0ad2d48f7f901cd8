//! Dense tensor algebra.
//!
//! Tensors and matrices are stored as flat row-major buffers (last index
//! fastest). Matricization follows the Kolda–Bader convention: the column
//! index of a mode-`n` unfolding enumerates the remaining modes with the
//! earliest remaining mode varying fastest. Every Kronecker product in this
//! crate is written in the matching reversed order (`U_m ⊗ … ⊗ U_1`).

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TensorError {
    #[error("data length {got} does not match shape product {expected}")]
    DataLength { expected: usize, got: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("mode {mode} out of range for order-{order} tensor")]
    ModeOutOfRange { mode: usize, order: usize },
    #[error("invalid rank {rank} for mode {mode} of dimension {dim}")]
    InvalidRank { mode: usize, rank: usize, dim: usize },
    #[error("non-finite entry")]
    NonFinite,
}

pub type Result<T> = std::result::Result<T, TensorError>;

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(TensorError::DataLength {
                expected: rows * cols,
                got: data.len(),
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(TensorError::NonFinite);
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

    /// Builds a matrix from equally sized rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(TensorError::ShapeMismatch("ragged rows".into()));
        }
        Self::new(rows.len(), cols, rows.concat())
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

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        let c = self.cols;
        &mut self.data[r * c..(r + 1) * c]
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
                "matmul {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == 0.0 {
                    continue;
                }
                let b_row = &other.data[k * other.cols..(k + 1) * other.cols];
                for (o, b) in out_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// `self · v`.
    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        debug_assert_eq!(v.len(), self.cols);
        (0..self.rows).map(|r| dot(self.row(r), v)).collect()
    }

    /// `vᵀ · self`.
    pub fn vec_mul(&self, v: &[f64]) -> Vec<f64> {
        debug_assert_eq!(v.len(), self.rows);
        let mut out = vec![0.0; self.cols];
        for (r, &a) in v.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            for (o, b) in out.iter_mut().zip(self.row(r)) {
                *o += a * b;
            }
        }
        out
    }

    /// Column concatenation `[self | other]`.
    pub fn hcat(&self, other: &Matrix) -> Result<Matrix> {
        if self.rows != other.rows {
            return Err(TensorError::ShapeMismatch(format!(
                "hcat with {} and {} rows",
                self.rows, other.rows
            )));
        }
        let cols = self.cols + other.cols;
        let mut data = Vec::with_capacity(self.rows * cols);
        for r in 0..self.rows {
            data.extend_from_slice(self.row(r));
            data.extend_from_slice(other.row(r));
        }
        Ok(Matrix {
            rows: self.rows,
            cols,
            data,
        })
    }

    /// Columns `start..end` as a new matrix.
    pub fn columns(&self, start: usize, end: usize) -> Matrix {
        assert!(start <= end && end <= self.cols);
        let cols = end - start;
        let mut data = Vec::with_capacity(self.rows * cols);
        for r in 0..self.rows {
            data.extend_from_slice(&self.row(r)[start..end]);
        }
        Matrix {
            rows: self.rows,
            cols,
            data,
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn l1_norm(&self) -> f64 {
        self.data.iter().map(|v| v.abs()).sum()
    }

    pub(crate) fn to_nalgebra(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }
}

/// N-mode real array with explicit shape, row-major storage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseTensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl DenseTensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let expected: usize = shape.iter().product();
        if data.len() != expected {
            return Err(TensorError::DataLength {
                expected,
                got: data.len(),
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(TensorError::NonFinite);
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Self {
            shape,
            data: vec![0.0; n],
        }
    }

    /// Views a matrix as an order-2 tensor.
    pub fn from_matrix(m: &Matrix) -> Self {
        Self {
            shape: vec![m.rows, m.cols],
            data: m.data.clone(),
        }
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

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// Same data under a new shape with equal element count.
    pub fn reshape(self, shape: Vec<usize>) -> Result<Self> {
        Self::new(shape, self.data)
    }

    pub fn get(&self, index: &[usize]) -> f64 {
        self.data[self.flat_index(index)]
    }

    pub fn flat_index(&self, index: &[usize]) -> usize {
        debug_assert_eq!(index.len(), self.shape.len());
        index
            .iter()
            .zip(&self.shape)
            .fold(0, |acc, (&i, &d)| acc * d + i)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn l1_norm(&self) -> f64 {
        self.data.iter().map(|v| v.abs()).sum()
    }

    pub fn sub(&self, other: &DenseTensor) -> Result<DenseTensor> {
        if self.shape != other.shape {
            return Err(TensorError::ShapeMismatch(format!(
                "{:?} vs {:?}",
                self.shape, other.shape
            )));
        }
        Ok(DenseTensor {
            shape: self.shape.clone(),
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a - b)
                .collect(),
        })
    }

    fn check_mode(&self, mode: usize) -> Result<()> {
        if mode >= self.order() {
            return Err(TensorError::ModeOutOfRange {
                mode,
                order: self.order(),
            });
        }
        Ok(())
    }

    /// Mode-`mode` unfolding (Kolda–Bader column order).
    pub fn matricize(&self, mode: usize) -> Result<Matrix> {
        self.check_mode(mode)?;
        let rows = self.shape[mode];
        let cols = if rows == 0 { 0 } else { self.len() / rows };
        let strides = self.unfolding_strides(mode);
        let mut out = Matrix::zeros(rows, cols);
        let mut index = vec![0usize; self.order()];
        for &v in &self.data {
            let col: usize = index
                .iter()
                .zip(&strides)
                .enumerate()
                .filter(|(k, _)| *k != mode)
                .map(|(_, (i, s))| i * s)
                .sum();
            out.data[index[mode] * cols + col] = v;
            increment(&mut index, &self.shape);
        }
        Ok(out)
    }

    /// Inverse of [`DenseTensor::matricize`].
    pub fn fold(m: &Matrix, mode: usize, shape: &[usize]) -> Result<DenseTensor> {
        if mode >= shape.len() {
            return Err(TensorError::ModeOutOfRange {
                mode,
                order: shape.len(),
            });
        }
        let total: usize = shape.iter().product();
        if m.rows != shape[mode] || m.rows * m.cols != total {
            return Err(TensorError::ShapeMismatch(format!(
                "cannot fold {}x{} into {:?} along mode {}",
                m.rows, m.cols, shape, mode
            )));
        }
        let mut out = DenseTensor::zeros(shape.to_vec());
        let strides = out.unfolding_strides(mode);
        let mut index = vec![0usize; shape.len()];
        for flat in 0..total {
            let col: usize = index
                .iter()
                .zip(&strides)
                .enumerate()
                .filter(|(k, _)| *k != mode)
                .map(|(_, (i, s))| i * s)
                .sum();
            out.data[flat] = m.data[index[mode] * m.cols + col];
            increment(&mut index, shape);
        }
        Ok(out)
    }

    // Column stride of each mode in the mode-`mode` unfolding; earlier modes fastest.
    fn unfolding_strides(&self, mode: usize) -> Vec<usize> {
        let mut strides = vec![0; self.order()];
        let mut acc = 1;
        for (k, &d) in self.shape.iter().enumerate() {
            if k == mode {
                continue;
            }
            strides[k] = acc;
            acc *= d;
        }
        strides
    }

    /// Mode-`mode` product `self ×_mode a`: replaces dimension `shape[mode]` by `a.rows()`.
    pub fn mode_product(&self, a: &Matrix, mode: usize) -> Result<DenseTensor> {
        self.check_mode(mode)?;
        if a.cols != self.shape[mode] {
            return Err(TensorError::ShapeMismatch(format!(
                "mode-{} product needs {} columns, matrix has {}",
                mode, self.shape[mode], a.cols
            )));
        }
        let left: usize = self.shape[..mode].iter().product();
        let right: usize = self.shape[mode + 1..].iter().product();
        let mid = self.shape[mode];
        let out_mid = a.rows;
        let mut shape = self.shape.clone();
        shape[mode] = out_mid;
        let mut data = vec![0.0; left * out_mid * right];
        for l in 0..left {
            let src = &self.data[l * mid * right..(l + 1) * mid * right];
            let dst = &mut data[l * out_mid * right..(l + 1) * out_mid * right];
            for r_out in 0..out_mid {
                let arow = a.row(r_out);
                let drow = &mut dst[r_out * right..(r_out + 1) * right];
                for (k, &coef) in arow.iter().enumerate() {
                    if coef == 0.0 {
                        continue;
                    }
                    let srow = &src[k * right..(k + 1) * right];
                    for (d, s) in drow.iter_mut().zip(srow) {
                        *d += coef * s;
                    }
                }
            }
        }
        Ok(DenseTensor { shape, data })
    }

    /// Sum of elementwise products.
    pub fn inner_product(&self, other: &DenseTensor) -> Result<f64> {
        if self.shape != other.shape {
            return Err(TensorError::ShapeMismatch(format!(
                "inner product of {:?} and {:?}",
                self.shape, other.shape
            )));
        }
        Ok(dot(&self.data, &other.data))
    }
}

fn increment(index: &mut [usize], shape: &[usize]) {
    for k in (0..shape.len()).rev() {
        index[k] += 1;
        if index[k] < shape[k] {
            return;
        }
        index[k] = 0;
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Kronecker product: block `(i, j)` equals `a[i, j] · b`.
pub fn kronecker(a: &Matrix, b: &Matrix) -> Matrix {
    let rows = a.rows * b.rows;
    let cols = a.cols * b.cols;
    let mut out = Matrix::zeros(rows, cols);
    for i in 0..a.rows {
        for j in 0..a.cols {
            let s = a.get(i, j);
            for k in 0..b.rows {
                for l in 0..b.cols {
                    out.data[(i * b.rows + k) * cols + j * b.cols + l] = s * b.get(k, l);
                }
            }
        }
    }
    out
}

/// Core tensor plus one factor matrix per mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuckerFactors {
    pub core: DenseTensor,
    pub factors: Vec<Matrix>,
}

impl TuckerFactors {
    pub fn validate(&self) -> Result<()> {
        if self.factors.len() != self.core.order() {
            return Err(TensorError::ShapeMismatch(format!(
                "{} factors for order-{} core",
                self.factors.len(),
                self.core.order()
            )));
        }
        for (k, f) in self.factors.iter().enumerate() {
            if f.cols != self.core.shape[k] {
                return Err(TensorError::ShapeMismatch(format!(
                    "factor {} has {} columns, core dimension is {}",
                    k, f.cols, self.core.shape[k]
                )));
            }
        }
        Ok(())
    }
}

/// `core ×_0 U_0 ×_1 U_1 … ×_n U_n`.
pub fn tucker_reconstruct(f: &TuckerFactors) -> Result<DenseTensor> {
    f.validate()?;
    let mut out = f.core.clone();
    for (k, u) in f.factors.iter().enumerate() {
        out = out.mode_product(u, k)?;
    }
    Ok(out)
}

/// Truncated higher-order SVD.
///
/// Factor `k` holds the leading `ranks[k]` left singular vectors of the
/// mode-`k` unfolding; the core is the input contracted with every factor
/// transpose.
pub fn hosvd(t: &DenseTensor, ranks: &[usize]) -> Result<TuckerFactors> {
    if ranks.len() != t.order() {
        return Err(TensorError::ShapeMismatch(format!(
            "{} ranks for order-{} tensor",
            ranks.len(),
            t.order()
        )));
    }
    for (mode, (&rank, &dim)) in ranks.iter().zip(&t.shape).enumerate() {
        if rank == 0 || rank > dim {
            return Err(TensorError::InvalidRank { mode, rank, dim });
        }
    }
    let mut factors = Vec::with_capacity(t.order());
    for (mode, &rank) in ranks.iter().enumerate() {
        let unfolded = t.matricize(mode)?;
        factors.push(leading_left_singular_vectors(&unfolded, rank));
    }
    let mut core = t.clone();
    for (mode, u) in factors.iter().enumerate() {
        core = core.mode_product(&u.transpose(), mode)?;
    }
    Ok(TuckerFactors { core, factors })
}

/// Singular values in descending order.
pub fn singular_values(m: &Matrix) -> Vec<f64> {
    if m.rows == 0 || m.cols == 0 {
        return Vec::new();
    }
    let mut s: Vec<f64> = m.to_nalgebra().singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Leading `rank` left singular vectors of `m` (`rank ≤ m.rows()`).
///
/// When `rank` exceeds the number of computable singular vectors the basis
/// is completed with an orthonormal complement. Each column's sign is fixed
/// so that its largest-magnitude entry is positive.
pub fn leading_left_singular_vectors(m: &Matrix, rank: usize) -> Matrix {
    let rows = m.rows;
    assert!(rank <= rows);
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(rank);
    if m.cols > 0 && rows > 0 {
        let svd = m.to_nalgebra().svd(true, false);
        let u = svd.u.expect("left singular vectors requested");
        let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
        order.sort_by(|&a, &b| {
            svd.singular_values[b]
                .total_cmp(&svd.singular_values[a])
                .then(a.cmp(&b))
        });
        for &k in order.iter().take(rank) {
            basis.push(u.column(k).iter().copied().collect());
        }
    }
    // complete with standard basis vectors orthogonalized against the current set
    let mut e = 0;
    while basis.len() < rank && e < rows {
        let mut v = vec![0.0; rows];
        v[e] = 1.0;
        for _ in 0..2 {
            for b in &basis {
                let p = dot(&v, b);
                for (vi, bi) in v.iter_mut().zip(b) {
                    *vi -= p * bi;
                }
            }
        }
        let norm = dot(&v, &v).sqrt();
        if norm > 1e-8 {
            v.iter_mut().for_each(|x| *x /= norm);
            basis.push(v);
        }
        e += 1;
    }
    let mut out = Matrix::zeros(rows, rank);
    for (c, mut v) in basis.into_iter().enumerate() {
        let pivot = v
            .iter()
            .copied()
            .fold(0.0f64, |acc, x| if x.abs() > acc.abs() { x } else { acc });
        if pivot < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        for (r, x) in v.into_iter().enumerate() {
            out.set(r, c, x);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq_tensor(shape: &[usize]) -> DenseTensor {
        let n = shape.iter().product::<usize>();
        DenseTensor::new(shape.to_vec(), (0..n).map(|v| v as f64 + 1.0).collect()).unwrap()
    }

    #[test]
    fn matricize_matrix_mode0_is_identity() {
        let t = DenseTensor::new(vec![2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let m = t.matricize(0).unwrap();
        assert_eq!(m.data(), &[1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn matricize_matrix_mode1_is_transpose() {
        let t = seq_tensor(&[2, 3]);
        let m = t.matricize(1).unwrap();
        assert_eq!((m.rows(), m.cols()), (3, 2));
        assert_eq!(m.data(), &[1.0, 4.0, 2.0, 5.0, 3.0, 6.0]);
    }

    #[test]
    fn matricize_rejects_bad_mode() {
        let t = seq_tensor(&[2, 3]);
        assert!(matches!(
            t.matricize(2),
            Err(TensorError::ModeOutOfRange { mode: 2, order: 2 })
        ));
    }

    #[test]
    fn mode_product_identity_and_scaling() {
        let t = seq_tensor(&[2, 3, 2]);
        for mode in 0..3 {
            let id = Matrix::identity(t.shape()[mode]);
            assert_eq!(t.mode_product(&id, mode).unwrap(), t);
        }
        let m = seq_tensor(&[2, 2]);
        let two = Matrix::from_rows(&[vec![2.0, 0.0], vec![0.0, 2.0]]).unwrap();
        let out = m.mode_product(&two, 0).unwrap();
        assert_eq!(out.data(), &[2.0, 4.0, 6.0, 8.0]);
    }

    #[test]
    fn mode_product_dimension_mismatch() {
        let t = seq_tensor(&[2, 3]);
        let a = Matrix::zeros(4, 2);
        assert!(matches!(
            t.mode_product(&a, 1),
            Err(TensorError::ShapeMismatch(_))
        ));
    }

    #[test]
    fn kronecker_hand_cases() {
        let b = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(kronecker(&Matrix::identity(1), &b), b);
        let a = Matrix::from_rows(&[vec![1.0, 2.0]]).unwrap();
        let b = Matrix::from_rows(&[vec![0.0, 1.0]]).unwrap();
        assert_eq!(kronecker(&a, &b).data(), &[0.0, 1.0, 0.0, 2.0]);
    }

    #[test]
    fn tucker_reconstruct_identity_and_rank_one() {
        let t = seq_tensor(&[2, 3]);
        let f = TuckerFactors {
            core: t.clone(),
            factors: vec![Matrix::identity(2), Matrix::identity(3)],
        };
        assert_eq!(tucker_reconstruct(&f).unwrap(), t);

        let f = TuckerFactors {
            core: DenseTensor::new(vec![1, 1], vec![1.0]).unwrap(),
            factors: vec![
                Matrix::new(2, 1, vec![1.0, 2.0]).unwrap(),
                Matrix::new(3, 1, vec![3.0, 4.0, 5.0]).unwrap(),
            ],
        };
        let out = tucker_reconstruct(&f).unwrap();
        assert_eq!(out.data(), &[3.0, 4.0, 5.0, 6.0, 8.0, 10.0]);
    }

    #[test]
    fn hosvd_exact_rank_recovery() {
        // rank-2 matrix as a 4x3 tensor
        let a = Matrix::from_rows(&[
            vec![1.0, 0.0],
            vec![0.0, 1.0],
            vec![1.0, 1.0],
            vec![2.0, -1.0],
        ])
        .unwrap();
        let b = Matrix::from_rows(&[vec![1.0, 2.0, 3.0], vec![-1.0, 0.5, 2.0]]).unwrap();
        let m = a.matmul(&b).unwrap();
        let t = DenseTensor::from_matrix(&m);
        let f = hosvd(&t, &[2, 2]).unwrap();
        let err = tucker_reconstruct(&f).unwrap().sub(&t).unwrap().frobenius_norm();
        assert!(err <= 1e-10, "error {err}");
    }

    #[test]
    fn hosvd_rejects_invalid_ranks() {
        let t = seq_tensor(&[2, 3]);
        assert!(matches!(
            hosvd(&t, &[3, 1]),
            Err(TensorError::InvalidRank { mode: 0, .. })
        ));
        assert!(hosvd(&t, &[0, 1]).is_err());
        assert!(hosvd(&t, &[1]).is_err());
    }

    #[test]
    fn hosvd_rank_above_unfolding_width_completes_basis() {
        // mode-1 unfolding is 5x2, rank 4 needs completion
        let t = seq_tensor(&[2, 5]);
        let f = hosvd(&t, &[2, 4]).unwrap();
        let u = &f.factors[1];
        let gram = u.transpose().matmul(u).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((gram.get(i, j) - want).abs() < 1e-12);
            }
        }
        let err = tucker_reconstruct(&f).unwrap().sub(&t).unwrap().frobenius_norm();
        assert!(err < 1e-10);
    }

    #[test]
    fn inner_product_cases() {
        let z = DenseTensor::zeros(vec![2, 2]);
        assert_eq!(z.inner_product(&z).unwrap(), 0.0);
        let u = DenseTensor::new(vec![2], vec![0.6, 0.8]).unwrap();
        assert!((u.inner_product(&u).unwrap() - 1.0).abs() < 1e-15);
        assert!(u.inner_product(&z).is_err());
    }

    #[test]
    fn rejects_nan_and_bad_length() {
        assert!(matches!(
            DenseTensor::new(vec![2], vec![1.0]),
            Err(TensorError::DataLength { .. })
        ));
        assert!(matches!(
            DenseTensor::new(vec![1], vec![f64::NAN]),
            Err(TensorError::NonFinite)
        ));
    }
}
