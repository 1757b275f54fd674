//! Banded symmetric operators, a compressed sparse general operator and the
//! banded Cholesky factorization shared by every solver.
//!
//! Symmetric operators keep only their lower band. A dense matrix is the
//! special case `bandwidth = dim - 1`, so small random test problems and the
//! interleaved finite element operators go through the same code.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::error::invalid_arg;
use crate::{Error, Result};

/// Symmetric matrix stored as its lower band.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricOperator {
    dim: usize,
    bandwidth: usize,
    // Row `i` occupies `data[i * (bw + 1)..(i + 1) * (bw + 1)]`; slot `bw` is the diagonal.
    data: Vec<f64>,
}

impl SymmetricOperator {
    pub fn zeros(dim: usize, bandwidth: usize) -> Self {
        let bandwidth = bandwidth.min(dim.saturating_sub(1));
        Self {
            dim,
            bandwidth,
            data: vec![0.0; dim * (bandwidth + 1)],
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_diagonal(&vec![1.0; dim])
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let mut op = Self::zeros(diag.len(), 0);
        op.data.copy_from_slice(diag);
        op
    }

    /// Builds an operator from `(row, col, value)` entries, summing duplicates.
    /// Only one triangle needs to be given; an entry `(i, j)` also sets `(j, i)`.
    pub fn from_triplets(dim: usize, entries: &[(usize, usize, f64)]) -> Result<Self> {
        let mut bw = 0;
        for &(i, j, _) in entries {
            if i >= dim || j >= dim {
                return Err(invalid_arg!(
                    "entry ({i}, {j}) outside a {dim}x{dim} operator"
                ));
            }
            bw = bw.max(i.abs_diff(j));
        }
        let mut op = Self::zeros(dim, bw);
        for &(i, j, v) in entries {
            op.add(i, j, v);
        }
        Ok(op)
    }

    /// Builds an operator from a row-major dense matrix; only the lower
    /// triangle is read.
    pub fn from_dense_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.len();
        if rows.iter().any(|r| r.len() != dim) {
            return Err(invalid_arg!("dense rows must form a square matrix"));
        }
        let mut bw = 0;
        for (i, row) in rows.iter().enumerate() {
            for (j, &v) in row.iter().enumerate().take(i) {
                if v != 0.0 {
                    bw = bw.max(i - j);
                }
            }
        }
        let mut op = Self::zeros(dim, bw);
        for (i, row) in rows.iter().enumerate() {
            for j in i.saturating_sub(op.bandwidth)..=i {
                op.set(i, j, row[j]);
            }
        }
        Ok(op)
    }

    pub fn from_nalgebra(m: &DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(invalid_arg!("matrix must be square"));
        }
        let rows: Vec<Vec<f64>> = (0..m.nrows())
            .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
            .collect();
        Self::from_dense_rows(&rows)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn bandwidth(&self) -> usize {
        self.bandwidth
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> usize {
        debug_assert!(j <= i && i - j <= self.bandwidth);
        i * (self.bandwidth + 1) + self.bandwidth - (i - j)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        if i - j > self.bandwidth {
            0.0
        } else {
            self.data[self.slot(i, j)]
        }
    }

    /// Sets entries `(i, j)` and `(j, i)`.
    ///
    /// Panics when the entry lies outside the band.
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        assert!(
            i - j <= self.bandwidth,
            "entry ({i}, {j}) outside bandwidth {}",
            self.bandwidth
        );
        let s = self.slot(i, j);
        self.data[s] = v;
    }

    /// Adds `v` to the symmetric pair `(i, j)`, `(j, i)` (once on the diagonal).
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        assert!(
            i - j <= self.bandwidth,
            "entry ({i}, {j}) outside bandwidth {}",
            self.bandwidth
        );
        let s = self.slot(i, j);
        self.data[s] += v;
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self.data[self.slot(i, i)]).collect()
    }

    /// `y = A x`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.dim];
        self.apply_into(x, &mut y);
        y
    }

    pub fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.dim);
        assert_eq!(y.len(), self.dim);
        y.iter_mut().for_each(|v| *v = 0.0);
        let bw = self.bandwidth;
        for i in 0..self.dim {
            let row = &self.data[i * (bw + 1)..(i + 1) * (bw + 1)];
            let j0 = i.saturating_sub(bw);
            let mut acc = row[bw] * x[i];
            for j in j0..i {
                let a = row[bw - (i - j)];
                acc += a * x[j];
                y[j] += a * x[i];
            }
            y[i] += acc;
        }
    }

    /// `xᵀ A x`.
    pub fn quad_form(&self, x: &[f64]) -> f64 {
        dot(x, &self.apply(x))
    }

    /// `xᵀ A y`.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        dot(x, &self.apply(y))
    }

    /// Principal submatrix on `indices`, which must be strictly increasing.
    pub fn restrict(&self, indices: &[usize]) -> Result<Self> {
        check_increasing(indices, self.dim)?;
        let m = indices.len();
        // Original band |i - j| <= bw maps to a new band no wider than bw.
        let mut new_bw = 0;
        let mut lo = 0;
        for (r, &i) in indices.iter().enumerate() {
            while indices[lo] + self.bandwidth < i {
                lo += 1;
            }
            new_bw = new_bw.max(r - lo);
        }
        let mut out = Self::zeros(m, new_bw);
        let mut lo = 0;
        for (r, &i) in indices.iter().enumerate() {
            while indices[lo] + self.bandwidth < i {
                lo += 1;
            }
            for c in lo..=r {
                out.set(r, c, self.get(i, indices[c]));
            }
        }
        Ok(out)
    }

    /// Rows of `self` at `rows` and columns at `cols`, as a dense block.
    pub fn block(&self, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
        DMatrix::from_fn(rows.len(), cols.len(), |r, c| self.get(rows[r], cols[c]))
    }

    /// `alpha * self + beta * other`.
    pub fn combine(&self, alpha: f64, other: &Self, beta: f64) -> Result<Self> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: other.dim,
            });
        }
        let bw = self.bandwidth.max(other.bandwidth);
        let mut out = Self::zeros(self.dim, bw);
        for i in 0..self.dim {
            for j in i.saturating_sub(bw)..=i {
                out.set(i, j, alpha * self.get(i, j) + beta * other.get(i, j));
            }
        }
        Ok(out)
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|v| *v *= alpha);
        out
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Maximum absolute row sum, an upper bound on the spectral radius.
    pub fn norm_inf(&self) -> f64 {
        let mut sums = vec![0.0; self.dim];
        for i in 0..self.dim {
            for j in i.saturating_sub(self.bandwidth)..=i {
                let a = self.get(i, j).abs();
                sums[i] += a;
                if j != i {
                    sums[j] += a;
                }
            }
        }
        sums.into_iter().fold(0.0, f64::max)
    }

    /// True when every entry of row `i` is exactly zero.
    pub fn row_is_zero(&self, i: usize) -> bool {
        let lo = i.saturating_sub(self.bandwidth);
        let hi = (i + self.bandwidth).min(self.dim.saturating_sub(1));
        (lo..=hi).all(|j| self.get(i, j) == 0.0)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.dim, self.dim, |i, j| self.get(i, j))
    }

    pub fn cholesky(&self) -> Result<BandCholesky> {
        BandCholesky::new(self)
    }
}

/// Lower-triangular banded Cholesky factor `A = L Lᵀ`.
#[derive(Debug, Clone)]
pub struct BandCholesky {
    factor: SymmetricOperator,
}

impl BandCholesky {
    /// Factorizes `a`; fails when a pivot is not safely positive.
    pub fn new(a: &SymmetricOperator) -> Result<Self> {
        let n = a.dim;
        let bw = a.bandwidth;
        let scale = a.diagonal().iter().fold(0.0_f64, |m, d| m.max(d.abs()));
        let floor = 64.0 * f64::EPSILON * scale;
        let mut l = a.clone();
        for j in 0..n {
            let k0 = j.saturating_sub(bw);
            let mut s = l.get(j, j);
            for k in k0..j {
                let v = l.get(j, k);
                s -= v * v;
            }
            if !(s > floor) || !s.is_finite() {
                return Err(Error::NotPositiveDefinite { pivot: j });
            }
            let d = libm::sqrt(s);
            l.set(j, j, d);
            for i in j + 1..=(j + bw).min(n.saturating_sub(1)) {
                let k0 = i.saturating_sub(bw);
                let mut s = l.get(i, j);
                for k in k0..j {
                    s -= l.get(i, k) * l.get(j, k);
                }
                l.set(i, j, s / d);
            }
        }
        Ok(Self { factor: l })
    }

    pub fn dim(&self) -> usize {
        self.factor.dim
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    pub fn solve_in_place(&self, x: &mut [f64]) {
        let l = &self.factor;
        let n = l.dim;
        let bw = l.bandwidth;
        assert_eq!(x.len(), n);
        for i in 0..n {
            let mut s = x[i];
            for k in i.saturating_sub(bw)..i {
                s -= l.get(i, k) * x[k];
            }
            x[i] = s / l.get(i, i);
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in i + 1..=(i + bw).min(n.saturating_sub(1)) {
                s -= l.get(k, i) * x[k];
            }
            x[i] = s / l.get(i, i);
        }
    }

    /// Solves `L y = b` only.
    pub fn forward(&self, b: &[f64]) -> Vec<f64> {
        let l = &self.factor;
        let mut x = b.to_vec();
        for i in 0..l.dim {
            let mut s = x[i];
            for k in i.saturating_sub(l.bandwidth)..i {
                s -= l.get(i, k) * x[k];
            }
            x[i] = s / l.get(i, i);
        }
        x
    }
}

/// General sparse matrix in compressed row form.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Builds the matrix from `(row, col, value)` entries, summing duplicates.
    pub fn from_triplets(
        rows: usize,
        cols: usize,
        entries: &[(usize, usize, f64)],
    ) -> Result<Self> {
        let mut sorted: Vec<(usize, usize, f64)> = entries.to_vec();
        for &(i, j, _) in &sorted {
            if i >= rows || j >= cols {
                return Err(invalid_arg!(
                    "entry ({i}, {j}) outside a {rows}x{cols} matrix"
                ));
            }
        }
        sorted.sort_by_key(|e| (e.0, e.1));
        let mut row_ptr = vec![0; rows + 1];
        let mut col_idx = Vec::with_capacity(sorted.len());
        let mut values: Vec<f64> = Vec::with_capacity(sorted.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in sorted {
            if last == Some((i, j)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(j);
                values.push(v);
                row_ptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..rows {
            row_ptr[i + 1] += row_ptr[i];
        }
        Ok(Self {
            rows,
            cols,
            row_ptr,
            col_idx,
            values,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (lo, hi) = (self.row_ptr[i], self.row_ptr[i + 1]);
        match self.col_idx[lo..hi].binary_search(&j) {
            Ok(k) => self.values[lo + k],
            Err(_) => 0.0,
        }
    }

    /// Iterates stored entries as `(row, col, value)`.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.rows).flat_map(move |i| {
            (self.row_ptr[i]..self.row_ptr[i + 1])
                .map(move |k| (i, self.col_idx[k], self.values[k]))
        })
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols);
        (0..self.rows)
            .map(|i| {
                (self.row_ptr[i]..self.row_ptr[i + 1])
                    .map(|k| self.values[k] * x[self.col_idx[k]])
                    .sum()
            })
            .collect()
    }

    /// `Aᵀ x`.
    pub fn apply_transpose(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.rows);
        let mut y = vec![0.0; self.cols];
        for (i, j, v) in self.entries() {
            y[j] += v * x[i];
        }
        y
    }

    pub fn transpose(&self) -> Self {
        let t: Vec<_> = self.entries().map(|(i, j, v)| (j, i, v)).collect();
        Self::from_triplets(self.cols, self.rows, &t).expect("transposed entries are in range")
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.rows, self.cols);
        for (i, j, v) in self.entries() {
            m[(i, j)] += v;
        }
        m
    }
}

pub(crate) fn check_increasing(indices: &[usize], dim: usize) -> Result<()> {
    for w in indices.windows(2) {
        if w[0] >= w[1] {
            return Err(invalid_arg!("index set must be strictly increasing"));
        }
    }
    if let Some(&last) = indices.last() {
        if last >= dim {
            return Err(invalid_arg!(
                "index {last} out of range for dimension {dim}"
            ));
        }
    }
    Ok(())
}

#[inline]
pub fn dot(x: &[f64], y: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), y.len());
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

#[inline]
pub fn norm(x: &[f64]) -> f64 {
    libm::sqrt(dot(x, x))
}

pub fn norm_inf(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// `‖x - y‖₂`.
pub fn distance(x: &[f64], y: &[f64]) -> f64 {
    libm::sqrt(x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum())
}

/// `y += alpha * x`.
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    y.iter_mut().zip(x).for_each(|(yi, xi)| *yi += alpha * xi);
}

pub fn gather(x: &[f64], indices: &[usize]) -> Vec<f64> {
    indices.iter().map(|&i| x[i]).collect()
}

pub fn scatter(values: &[f64], indices: &[usize], out: &mut [f64]) {
    for (&i, &v) in indices.iter().zip(values) {
        out[i] = v;
    }
}

/// Complement of a strictly increasing index set in `0..dim`.
pub fn complement(indices: &[usize], dim: usize) -> Vec<usize> {
    let mut mask = vec![true; dim];
    for &i in indices {
        mask[i] = false;
    }
    (0..dim).filter(|&i| mask[i]).collect()
}

/// Deterministic pseudo-random values in `[-1, 1)` for starting vectors and
/// structural checks that must not depend on an external RNG.
pub(crate) fn pseudo_random(len: usize, seed: u64) -> Vec<f64> {
    let mut state = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) | 1;
    (0..len)
        .map(|_| {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 52) as f64 - 1.0
        })
        .collect()
}
