//! Minimal real sparse matrices.
//!
//! Every operator in this crate has real matrix elements in the computational
//! basis; only state amplitudes are complex. Row-major adjacency lists are
//! enough for the matrix sizes involved (≤ a few thousand).

use ndarray::Array2;
use num_complex::Complex64 as C64;

#[derive(Debug, Clone)]
pub struct SpMat {
    nrows: usize,
    ncols: usize,
    rows: Vec<Vec<(usize, f64)>>,
}

impl SpMat {
    pub fn new(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            rows: vec![Vec::new(); nrows],
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    /// Accumulate `v` into entry `(r, c)`.
    pub fn push(&mut self, r: usize, c: usize, v: f64) {
        if v != 0.0 {
            self.rows[r].push((c, v));
        }
    }

    /// Sort columns within each row and merge duplicates.
    pub fn compress(&mut self) {
        for row in &mut self.rows {
            row.sort_unstable_by_key(|&(c, _)| c);
            let mut out: Vec<(usize, f64)> = Vec::with_capacity(row.len());
            for &(c, v) in row.iter() {
                match out.last_mut() {
                    Some((lc, lv)) if *lc == c => *lv += v,
                    _ => out.push((c, v)),
                }
            }
            out.retain(|&(_, v)| v.abs() > 0.0);
            out.shrink_to_fit();
            *row = out;
        }
    }

    pub fn row(&self, r: usize) -> &[(usize, f64)] {
        &self.rows[r]
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(|r| r.len()).sum()
    }

    pub fn matvec_f64(&self, x: &[f64], out: &mut [f64]) {
        for (r, row) in self.rows.iter().enumerate() {
            let mut acc = 0.0;
            for &(c, v) in row {
                acc += v * x[c];
            }
            out[r] = acc;
        }
    }

    pub fn apply_f64(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.nrows];
        self.matvec_f64(x, &mut out);
        out
    }

    pub fn matvec_c64(&self, x: &[C64], out: &mut [C64]) {
        for (r, row) in self.rows.iter().enumerate() {
            let mut acc = C64::new(0.0, 0.0);
            for &(c, v) in row {
                acc += v * x[c];
            }
            out[r] = acc;
        }
    }

    pub fn transpose(&self) -> SpMat {
        let mut t = SpMat::new(self.ncols, self.nrows);
        for (r, row) in self.rows.iter().enumerate() {
            for &(c, v) in row {
                t.push(c, r, v);
            }
        }
        t.compress();
        t
    }

    pub fn matmul(&self, other: &SpMat) -> SpMat {
        assert_eq!(self.ncols, other.nrows);
        let mut out = SpMat::new(self.nrows, other.ncols);
        for (r, row) in self.rows.iter().enumerate() {
            for &(k, v) in row {
                for &(c, w) in &other.rows[k] {
                    out.push(r, c, v * w);
                }
            }
        }
        out.compress();
        out
    }

    pub fn scaled(&self, s: f64) -> SpMat {
        let mut out = self.clone();
        for row in &mut out.rows {
            for (_, v) in row.iter_mut() {
                *v *= s;
            }
        }
        out
    }

    pub fn add(&self, other: &SpMat) -> SpMat {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        let mut out = self.clone();
        for (r, row) in other.rows.iter().enumerate() {
            for &(c, v) in row {
                out.push(r, c, v);
            }
        }
        out.compress();
        out
    }

    pub fn sub(&self, other: &SpMat) -> SpMat {
        self.add(&other.scaled(-1.0))
    }

    /// [A, B] = AB - BA.
    pub fn commutator(&self, other: &SpMat) -> SpMat {
        self.matmul(other).sub(&other.matmul(self))
    }

    pub fn max_abs(&self) -> f64 {
        self.rows
            .iter()
            .flat_map(|r| r.iter().map(|&(_, v)| v.abs()))
            .fold(0.0, f64::max)
    }

    /// Largest absolute row sum (an upper bound on the spectral radius for
    /// symmetric matrices).
    pub fn inf_norm(&self) -> f64 {
        self.rows
            .iter()
            .map(|r| r.iter().map(|&(_, v)| v.abs()).sum())
            .fold(0.0, f64::max)
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let mut m = Array2::zeros((self.nrows, self.ncols));
        for (r, row) in self.rows.iter().enumerate() {
            for &(c, v) in row {
                m[(r, c)] += v;
            }
        }
        m
    }
}

/// Compressed-row form used in the propagation hot loop.
#[derive(Debug, Clone)]
pub struct Csr {
    pub row_ptr: Vec<usize>,
    pub col: Vec<usize>,
    pub val: Vec<f64>,
}

impl Csr {
    pub fn from_spmat(m: &SpMat) -> Self {
        let mut row_ptr = Vec::with_capacity(m.nrows() + 1);
        let mut col = Vec::with_capacity(m.nnz());
        let mut val = Vec::with_capacity(m.nnz());
        row_ptr.push(0);
        for r in 0..m.nrows() {
            for &(c, v) in m.row(r) {
                col.push(c);
                val.push(v);
            }
            row_ptr.push(col.len());
        }
        Self { row_ptr, col, val }
    }

    #[inline]
    pub fn matvec_c64(&self, x: &[C64], out: &mut [C64]) {
        for r in 0..self.row_ptr.len() - 1 {
            let mut acc = C64::new(0.0, 0.0);
            for i in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.val[i] * x[self.col[i]];
            }
            out[r] = acc;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matmul_and_commutator() {
        // Pauli-like check: [sx, sz] on 2x2
        let mut sx = SpMat::new(2, 2);
        sx.push(0, 1, 1.0);
        sx.push(1, 0, 1.0);
        sx.compress();
        let mut sz = SpMat::new(2, 2);
        sz.push(0, 0, 1.0);
        sz.push(1, 1, -1.0);
        sz.compress();
        let comm = sx.commutator(&sz).to_dense();
        assert_eq!(comm[(0, 1)], -2.0);
        assert_eq!(comm[(1, 0)], 2.0);
    }

    #[test]
    fn csr_matches_spmat() {
        let mut m = SpMat::new(3, 3);
        m.push(0, 1, 2.0);
        m.push(1, 0, -1.0);
        m.push(2, 2, 0.5);
        m.push(0, 1, 1.0); // duplicate accumulates
        m.compress();
        let x = vec![C64::new(1.0, 0.0), C64::new(0.0, 1.0), C64::new(2.0, 0.0)];
        let mut a = vec![C64::new(0.0, 0.0); 3];
        let mut b = a.clone();
        m.matvec_c64(&x, &mut a);
        Csr::from_spmat(&m).matvec_c64(&x, &mut b);
        assert_eq!(a, b);
        assert_eq!(a[0], C64::new(0.0, 3.0));
    }
}
