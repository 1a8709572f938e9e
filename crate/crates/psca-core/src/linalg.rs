//! Design-matrix storage and kernels.
//!
//! A matrix is held together with its transpose so that both `A x` and
//! `Aᵀ r` stream over contiguous rows, and column access (needed by
//! coordinate updates) is contiguous through the transpose. Every kernel
//! computes each output element with a fixed-order dot product, so results
//! are bit-identical regardless of thread count.

use rayon::prelude::*;

use crate::error::{CoreError, Result};
use crate::rng::SplitMix64;

/// Entry count above which generated matrices are stored compressed.
pub const DENSE_ENTRY_LIMIT: usize = 10_000_000;

/// Work threshold below which matvecs stay on the calling thread.
const PAR_FLOP_THRESHOLD: usize = 1 << 21;

/// Fixed-tree dot product: four independent accumulators combined in a
/// deterministic order. Unrolling buys instruction-level parallelism
/// without giving the compiler licence to reassociate.
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for k in 0..chunks {
        let i = 4 * k;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut tail = 0.0;
    for i in 4 * chunks..a.len() {
        tail += a[i] * b[i];
    }
    ((acc[0] + acc[1]) + (acc[2] + acc[3])) + tail
}

#[inline]
pub fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    norm_sq(a).sqrt()
}

#[inline]
pub fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut s = 0.0;
    for k in 0..a.len() {
        let d = a[k] - b[k];
        s += d * d;
    }
    s
}

#[inline]
pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    dist_sq(a, b).sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Storage {
    Dense,
    Csr,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    pub rows: usize,
    pub cols: usize,
    pub indptr: Vec<usize>,
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
}

impl CsrMatrix {
    pub fn from_dense(rows: usize, cols: usize, data: &[f64]) -> Self {
        let mut indptr = Vec::with_capacity(rows + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for i in 0..rows {
            for j in 0..cols {
                let v = data[i * cols + j];
                if v != 0.0 {
                    indices.push(j);
                    values.push(v);
                }
            }
            indptr.push(indices.len());
        }
        CsrMatrix {
            rows,
            cols,
            indptr,
            indices,
            values,
        }
    }

    fn row_dot(&self, i: usize, x: &[f64]) -> f64 {
        let lo = self.indptr[i];
        let hi = self.indptr[i + 1];
        let mut s = 0.0;
        for k in lo..hi {
            s += self.values[k] * x[self.indices[k]];
        }
        s
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Rep {
    /// Row-major `a` plus row-major transpose `at`.
    Dense { a: Vec<f64>, at: Vec<f64> },
    /// CSR of A plus CSR of Aᵀ.
    Csr { a: CsrMatrix, at: CsrMatrix },
}

/// A data matrix with precomputed transpose and column norms.
#[derive(Clone, Debug, PartialEq)]
pub struct DesignMatrix {
    rows: usize,
    cols: usize,
    rep: Rep,
    col_norms_sq: Vec<f64>,
}

impl DesignMatrix {
    /// Builds from row-major dense data, choosing storage by entry count.
    pub fn from_dense(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        let kind = if rows * cols > DENSE_ENTRY_LIMIT {
            Storage::Csr
        } else {
            Storage::Dense
        };
        Self::from_dense_with_storage(rows, cols, data, kind)
    }

    pub fn from_dense_with_storage(
        rows: usize,
        cols: usize,
        data: Vec<f64>,
        kind: Storage,
    ) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(CoreError::invalid("matrix dimensions must be positive"));
        }
        if data.len() != rows * cols {
            return Err(CoreError::DimensionMismatch {
                expected: rows * cols,
                got: data.len(),
            });
        }
        let mut col_norms_sq = vec![0.0; cols];
        let rep = match kind {
            Storage::Dense => {
                let mut at = vec![0.0; rows * cols];
                for i in 0..rows {
                    for j in 0..cols {
                        at[j * rows + i] = data[i * cols + j];
                    }
                }
                for (j, norm) in col_norms_sq.iter_mut().enumerate() {
                    *norm = norm_sq(&at[j * rows..(j + 1) * rows]);
                }
                Rep::Dense { a: data, at }
            }
            Storage::Csr => {
                let a = CsrMatrix::from_dense(rows, cols, &data);
                let mut t = vec![0.0; rows * cols];
                for i in 0..rows {
                    for j in 0..cols {
                        t[j * rows + i] = data[i * cols + j];
                    }
                }
                let at = CsrMatrix::from_dense(cols, rows, &t);
                for j in 0..cols {
                    let lo = at.indptr[j];
                    let hi = at.indptr[j + 1];
                    col_norms_sq[j] = dot(&at.values[lo..hi], &at.values[lo..hi]);
                }
                Rep::Csr { a, at }
            }
        };
        Ok(DesignMatrix {
            rows,
            cols,
            rep,
            col_norms_sq,
        })
    }

    pub fn from_csr(a: CsrMatrix) -> Result<Self> {
        if a.rows == 0 || a.cols == 0 {
            return Err(CoreError::invalid("matrix dimensions must be positive"));
        }
        // Transpose by two passes over the entries.
        let (rows, cols) = (a.rows, a.cols);
        let mut counts = vec![0usize; cols + 1];
        for &j in &a.indices {
            counts[j + 1] += 1;
        }
        for j in 0..cols {
            counts[j + 1] += counts[j];
        }
        let nnz = a.values.len();
        let mut indptr = counts.clone();
        let mut indices = vec![0usize; nnz];
        let mut values = vec![0.0f64; nnz];
        for i in 0..rows {
            for k in a.indptr[i]..a.indptr[i + 1] {
                let j = a.indices[k];
                let slot = indptr[j];
                indices[slot] = i;
                values[slot] = a.values[k];
                indptr[j] += 1;
            }
        }
        let at = CsrMatrix {
            rows: cols,
            cols: rows,
            indptr: counts,
            indices,
            values,
        };
        let mut col_norms_sq = vec![0.0; cols];
        for (j, norm) in col_norms_sq.iter_mut().enumerate() {
            let lo = at.indptr[j];
            let hi = at.indptr[j + 1];
            *norm = dot(&at.values[lo..hi], &at.values[lo..hi]);
        }
        Ok(DesignMatrix {
            rows,
            cols,
            rep: Rep::Csr { a, at },
            col_norms_sq,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn storage(&self) -> Storage {
        match self.rep {
            Rep::Dense { .. } => Storage::Dense,
            Rep::Csr { .. } => Storage::Csr,
        }
    }

    pub fn col_norm_sq(&self, j: usize) -> f64 {
        self.col_norms_sq[j]
    }

    pub fn col_norms_sq(&self) -> &[f64] {
        &self.col_norms_sq
    }

    /// out = A x
    pub fn ax_into(&self, x: &[f64], out: &mut [f64]) {
        assert_eq!(x.len(), self.cols);
        assert_eq!(out.len(), self.rows);
        match &self.rep {
            Rep::Dense { a, .. } => dense_matvec(a, self.rows, self.cols, x, out),
            Rep::Csr { a, .. } => csr_matvec(a, x, out),
        }
    }

    /// out = Aᵀ r
    pub fn atx_into(&self, r: &[f64], out: &mut [f64]) {
        assert_eq!(r.len(), self.rows);
        assert_eq!(out.len(), self.cols);
        match &self.rep {
            Rep::Dense { at, .. } => dense_matvec(at, self.cols, self.rows, r, out),
            Rep::Csr { at, .. } => csr_matvec(at, r, out),
        }
    }

    /// a_jᵀ v for a vector of row dimension.
    pub fn col_dot(&self, j: usize, v: &[f64]) -> f64 {
        assert_eq!(v.len(), self.rows);
        match &self.rep {
            Rep::Dense { at, .. } => dot(&at[j * self.rows..(j + 1) * self.rows], v),
            Rep::Csr { at, .. } => at.row_dot(j, v),
        }
    }

    /// out += scale * a_j
    pub fn col_axpy(&self, j: usize, scale: f64, out: &mut [f64]) {
        assert_eq!(out.len(), self.rows);
        match &self.rep {
            Rep::Dense { at, .. } => {
                let col = &at[j * self.rows..(j + 1) * self.rows];
                for (o, c) in out.iter_mut().zip(col) {
                    *o += scale * c;
                }
            }
            Rep::Csr { at, .. } => {
                for k in at.indptr[j]..at.indptr[j + 1] {
                    out[at.indices[k]] += scale * at.values[k];
                }
            }
        }
    }

    /// Copies the raw entries back out in row-major order.
    pub fn to_dense(&self) -> Vec<f64> {
        match &self.rep {
            Rep::Dense { a, .. } => a.clone(),
            Rep::Csr { a, .. } => {
                let mut out = vec![0.0; self.rows * self.cols];
                for i in 0..self.rows {
                    for k in a.indptr[i]..a.indptr[i + 1] {
                        out[i * self.cols + a.indices[k]] = a.values[k];
                    }
                }
                out
            }
        }
    }

    pub fn csr(&self) -> Option<&CsrMatrix> {
        match &self.rep {
            Rep::Csr { a, .. } => Some(a),
            Rep::Dense { .. } => None,
        }
    }
}

fn dense_matvec(data: &[f64], out_dim: usize, in_dim: usize, x: &[f64], out: &mut [f64]) {
    let run = |out: &mut [f64], base: usize| {
        for (i, o) in out.iter_mut().enumerate() {
            let row = &data[(base + i) * in_dim..(base + i + 1) * in_dim];
            *o = dot(row, x);
        }
    };
    if out_dim * in_dim >= PAR_FLOP_THRESHOLD && rayon::current_num_threads() > 1 {
        let chunk = out_dim.div_ceil(rayon::current_num_threads() * 4).max(16);
        out.par_chunks_mut(chunk)
            .enumerate()
            .for_each(|(c, slab)| run(slab, c * chunk));
    } else {
        run(out, 0);
    }
}

fn csr_matvec(m: &CsrMatrix, x: &[f64], out: &mut [f64]) {
    if m.values.len() >= PAR_FLOP_THRESHOLD && rayon::current_num_threads() > 1 {
        out.par_iter_mut()
            .enumerate()
            .for_each(|(i, o)| *o = m.row_dot(i, x));
    } else {
        for (i, o) in out.iter_mut().enumerate() {
            *o = m.row_dot(i, x);
        }
    }
}

/// Largest eigenvalue of a symmetric positive semidefinite operator by
/// power iteration with a seeded start vector.
pub fn power_iteration(
    dim: usize,
    mut op: impl FnMut(&[f64], &mut [f64]),
    seed: u64,
    rel_tol: f64,
    max_iters: usize,
) -> f64 {
    let mut rng = SplitMix64::new(seed);
    let mut v = vec![0.0; dim];
    rng.fill_gaussian(&mut v);
    let mut w = vec![0.0; dim];
    let mut eig = 0.0f64;
    for _ in 0..max_iters {
        let n = norm(&v);
        if n == 0.0 {
            rng.fill_gaussian(&mut v);
            continue;
        }
        let inv = 1.0 / n;
        for s in v.iter_mut() {
            *s *= inv;
        }
        op(&v, &mut w);
        let next = dot(&v, &w);
        let done = (next - eig).abs() <= rel_tol * next.abs().max(1e-300);
        eig = next;
        std::mem::swap(&mut v, &mut w);
        if done {
            break;
        }
    }
    eig
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dense_and_csr_kernels_agree() {
        let mut rng = SplitMix64::new(5);
        let (rows, cols) = (13, 29);
        let mut data = vec![0.0; rows * cols];
        rng.fill_gaussian(&mut data);
        // Sprinkle zeros so the CSR path skips entries.
        for k in (0..data.len()).step_by(7) {
            data[k] = 0.0;
        }
        let dense =
            DesignMatrix::from_dense_with_storage(rows, cols, data.clone(), Storage::Dense)
                .unwrap();
        let csr =
            DesignMatrix::from_dense_with_storage(rows, cols, data.clone(), Storage::Csr).unwrap();

        let x: Vec<f64> = (0..cols).map(|j| (j as f64 * 0.37).sin()).collect();
        let r: Vec<f64> = (0..rows).map(|i| (i as f64 * 0.73).cos()).collect();
        let (mut y1, mut y2) = (vec![0.0; rows], vec![0.0; rows]);
        dense.ax_into(&x, &mut y1);
        csr.ax_into(&x, &mut y2);
        for (a, b) in y1.iter().zip(&y2) {
            assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
        }
        let (mut g1, mut g2) = (vec![0.0; cols], vec![0.0; cols]);
        dense.atx_into(&r, &mut g1);
        csr.atx_into(&r, &mut g2);
        for j in 0..cols {
            assert!((g1[j] - g2[j]).abs() <= 1e-12 * (1.0 + g1[j].abs()));
            assert!((dense.col_norm_sq(j) - csr.col_norm_sq(j)).abs() <= 1e-12);
            assert!((dense.col_dot(j, &r) - csr.col_dot(j, &r)).abs() <= 1e-12);
        }
        assert_eq!(dense.to_dense(), data);
        assert_eq!(csr.to_dense(), data);
    }

    #[test]
    fn col_axpy_matches_dense_column() {
        let data = vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let m = DesignMatrix::from_dense(2, 3, data).unwrap();
        let mut out = vec![1.0, 1.0];
        m.col_axpy(1, 2.0, &mut out);
        assert_eq!(out, vec![1.0 + 2.0 * 2.0, 1.0 + 2.0 * 5.0]);
    }

    #[test]
    fn power_iteration_identity() {
        let eig = power_iteration(8, |v, out| out.copy_from_slice(v), 3, 1e-12, 1000);
        assert!((eig - 1.0).abs() < 1e-9);
    }

    #[test]
    fn power_iteration_diagonal() {
        let d = [0.5, 2.0, 7.25, 1.0];
        let eig = power_iteration(
            4,
            |v, out| {
                for i in 0..4 {
                    out[i] = d[i] * v[i];
                }
            },
            11,
            1e-14,
            10_000,
        );
        assert!((eig - 7.25).abs() < 1e-8, "eig {eig}");
    }
}
