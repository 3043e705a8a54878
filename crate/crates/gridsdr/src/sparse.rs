//! Compressed sparse column matrices.
//!
//! A single generic container backs every sparse object in the crate: the
//! real constraint matrix, the complex bus admittance matrix, and the
//! quasidefinite KKT systems inside the solver. Columns are always sorted by
//! row index and duplicate-free; constructors enforce this so downstream
//! code (symbolic factorization in particular) can rely on it.

use std::ops::AddAssign;

/// Sparse matrix in compressed sparse column form.
#[derive(Debug, Clone, PartialEq)]
pub struct Csc<T> {
    nrows: usize,
    ncols: usize,
    /// Length `ncols + 1`; `colptr[j]..colptr[j+1]` indexes column `j`.
    colptr: Vec<usize>,
    /// Row index of each stored entry, strictly increasing within a column.
    rowind: Vec<usize>,
    values: Vec<T>,
}

pub type CscMatrix = Csc<f64>;

impl<T: Copy + Default + PartialEq + AddAssign> Csc<T> {
    /// Builds a matrix from (row, col, value) triplets.
    ///
    /// Duplicates are summed; entries that are exactly the additive identity
    /// after summation are dropped so the stored pattern has no spurious
    /// structural entries.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, T)]) -> Self {
        let zero = T::default();
        let mut count = vec![0usize; ncols];
        for &(r, c, _) in triplets {
            assert!(r < nrows && c < ncols, "triplet ({r}, {c}) out of bounds");
            count[c] += 1;
        }
        let mut start = vec![0usize; ncols + 1];
        for j in 0..ncols {
            start[j + 1] = start[j] + count[j];
        }
        // Bucket by column, then sort each column by row and compact.
        let mut rows = vec![0usize; triplets.len()];
        let mut vals = vec![zero; triplets.len()];
        let mut next = start.clone();
        for &(r, c, v) in triplets {
            let k = next[c];
            rows[k] = r;
            vals[k] = v;
            next[c] += 1;
        }
        let mut colptr = Vec::with_capacity(ncols + 1);
        let mut rowind = Vec::new();
        let mut values = Vec::new();
        colptr.push(0);
        let mut scratch: Vec<(usize, T)> = Vec::new();
        for j in 0..ncols {
            scratch.clear();
            scratch.extend(rows[start[j]..start[j + 1]].iter().copied().zip(vals[start[j]..start[j + 1]].iter().copied()));
            scratch.sort_by_key(|&(r, _)| r);
            let mut i = 0;
            while i < scratch.len() {
                let r = scratch[i].0;
                let mut acc = scratch[i].1;
                i += 1;
                while i < scratch.len() && scratch[i].0 == r {
                    acc += scratch[i].1;
                    i += 1;
                }
                if acc != zero {
                    rowind.push(r);
                    values.push(acc);
                }
            }
            colptr.push(rowind.len());
        }
        Csc { nrows, ncols, colptr, rowind, values }
    }

    /// Builds a matrix directly from CSC arrays, validating the structure.
    pub fn from_parts(
        nrows: usize,
        ncols: usize,
        colptr: Vec<usize>,
        rowind: Vec<usize>,
        values: Vec<T>,
    ) -> Self {
        assert_eq!(colptr.len(), ncols + 1);
        assert_eq!(rowind.len(), values.len());
        assert_eq!(*colptr.last().unwrap(), rowind.len());
        for j in 0..ncols {
            assert!(colptr[j] <= colptr[j + 1]);
            let col = &rowind[colptr[j]..colptr[j + 1]];
            for w in col.windows(2) {
                assert!(w[0] < w[1], "rows not strictly increasing in column {j}");
            }
            if let Some(&r) = col.last() {
                assert!(r < nrows);
            }
        }
        Csc { nrows, ncols, colptr, rowind, values }
    }

    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Csc { nrows, ncols, colptr: vec![0; ncols + 1], rowind: Vec::new(), values: Vec::new() }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.rowind.len()
    }

    pub fn colptr(&self) -> &[usize] {
        &self.colptr
    }

    pub fn rowind(&self) -> &[usize] {
        &self.rowind
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    /// Iterates over `(row, value)` pairs of column `j`.
    pub fn col(&self, j: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        let lo = self.colptr[j];
        let hi = self.colptr[j + 1];
        self.rowind[lo..hi].iter().copied().zip(self.values[lo..hi].iter().copied())
    }

    /// Iterates over all `(row, col, value)` entries in column-major order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, T)> + '_ {
        (0..self.ncols).flat_map(move |j| self.col(j).map(move |(r, v)| (r, j, v)))
    }

    /// Stored entry at `(i, j)`, or the additive identity if absent.
    pub fn get(&self, i: usize, j: usize) -> T {
        let lo = self.colptr[j];
        let hi = self.colptr[j + 1];
        match self.rowind[lo..hi].binary_search(&i) {
            Ok(k) => self.values[lo + k],
            Err(_) => T::default(),
        }
    }

    pub fn transpose(&self) -> Self {
        let mut count = vec![0usize; self.nrows];
        for &r in &self.rowind {
            count[r] += 1;
        }
        let mut colptr = vec![0usize; self.nrows + 1];
        for i in 0..self.nrows {
            colptr[i + 1] = colptr[i] + count[i];
        }
        let mut rowind = vec![0usize; self.nnz()];
        let mut values = vec![T::default(); self.nnz()];
        let mut next = colptr.clone();
        for j in 0..self.ncols {
            for (r, v) in self.col(j) {
                let k = next[r];
                rowind[k] = j;
                values[k] = v;
                next[r] += 1;
            }
        }
        Csc { nrows: self.ncols, ncols: self.nrows, colptr, rowind, values }
    }
}

impl CscMatrix {
    /// `y += alpha * A * x`.
    pub fn gemv(&self, alpha: f64, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(y.len(), self.nrows);
        for j in 0..self.ncols {
            let xj = alpha * x[j];
            if xj != 0.0 {
                for (r, v) in self.col(j) {
                    y[r] += v * xj;
                }
            }
        }
    }

    /// `y += alpha * A' * x`.
    pub fn gemv_t(&self, alpha: f64, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.nrows);
        assert_eq!(y.len(), self.ncols);
        for j in 0..self.ncols {
            let mut acc = 0.0;
            for (r, v) in self.col(j) {
                acc += v * x[r];
            }
            y[j] += alpha * acc;
        }
    }

    /// `A * x` as a fresh vector.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        self.gemv(1.0, x, &mut y);
        y
    }

    /// `A' * x` as a fresh vector.
    pub fn mul_vec_t(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.ncols];
        self.gemv_t(1.0, x, &mut y);
        y
    }

    /// Scales row `i` by `d[i]` in place.
    pub fn scale_rows(&mut self, d: &[f64]) {
        assert_eq!(d.len(), self.nrows);
        for (k, &r) in self.rowind.iter().enumerate() {
            self.values[k] *= d[r];
        }
    }

    /// Scales column `j` by `e[j]` in place.
    pub fn scale_cols(&mut self, e: &[f64]) {
        assert_eq!(e.len(), self.ncols);
        for j in 0..self.ncols {
            for k in self.colptr[j]..self.colptr[j + 1] {
                self.values[k] *= e[j];
            }
        }
    }

    /// Maximum absolute entry of each row (zero for empty rows).
    pub fn row_norms_inf(&self) -> Vec<f64> {
        let mut out = vec![0.0f64; self.nrows];
        for (k, &r) in self.rowind.iter().enumerate() {
            out[r] = out[r].max(self.values[k].abs());
        }
        out
    }

    /// Maximum absolute entry of each column (zero for empty columns).
    pub fn col_norms_inf(&self) -> Vec<f64> {
        (0..self.ncols)
            .map(|j| self.col(j).fold(0.0f64, |m, (_, v)| m.max(v.abs())))
            .collect()
    }

    /// Largest and smallest nonzero magnitude per row; both zero for
    /// empty rows.
    pub fn row_norm_extremes(&self) -> (Vec<f64>, Vec<f64>) {
        let mut hi = vec![0.0f64; self.nrows];
        let mut lo = vec![f64::INFINITY; self.nrows];
        for (k, &r) in self.rowind.iter().enumerate() {
            let v = self.values[k].abs();
            if v > 0.0 {
                hi[r] = hi[r].max(v);
                lo[r] = lo[r].min(v);
            }
        }
        for (h, l) in hi.iter().zip(lo.iter_mut()) {
            if *h == 0.0 {
                *l = 0.0;
            }
        }
        (hi, lo)
    }

    /// Largest and smallest nonzero magnitude per column; both zero for
    /// empty columns.
    pub fn col_norm_extremes(&self) -> (Vec<f64>, Vec<f64>) {
        let mut hi = vec![0.0f64; self.ncols];
        let mut lo = vec![f64::INFINITY; self.ncols];
        for j in 0..self.ncols {
            for (_, v) in self.col(j) {
                let v = v.abs();
                if v > 0.0 {
                    hi[j] = hi[j].max(v);
                    lo[j] = lo[j].min(v);
                }
            }
            if hi[j] == 0.0 {
                lo[j] = 0.0;
            }
        }
        (hi, lo)
    }

    #[cfg(test)]
    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut m = nalgebra::DMatrix::zeros(self.nrows, self.ncols);
        for (i, j, v) in self.iter() {
            m[(i, j)] += v;
        }
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn random_triplets(rng: &mut ChaCha8Rng, nrows: usize, ncols: usize, nnz: usize) -> Vec<(usize, usize, f64)> {
        (0..nnz)
            .map(|_| {
                (
                    rng.random_range(0..nrows),
                    rng.random_range(0..ncols),
                    rng.random_range(-2.0..2.0),
                )
            })
            .collect()
    }

    #[test]
    fn triplets_sum_duplicates_and_drop_zeros() {
        let t = vec![(0, 0, 1.0), (0, 0, 2.0), (1, 1, 5.0), (1, 1, -5.0), (2, 0, -1.0)];
        let a = CscMatrix::from_triplets(3, 2, &t);
        assert_eq!(a.nnz(), 2);
        assert_eq!(a.get(0, 0), 3.0);
        assert_eq!(a.get(1, 1), 0.0);
        assert_eq!(a.get(2, 0), -1.0);
    }

    #[test]
    fn columns_are_sorted() {
        let t = vec![(5, 0, 1.0), (1, 0, 1.0), (3, 0, 1.0)];
        let a = CscMatrix::from_triplets(6, 1, &t);
        assert_eq!(a.rowind(), &[1, 3, 5]);
    }

    #[test]
    fn matvec_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let (m, n) = (rng.random_range(1..12), rng.random_range(1..12));
            let nnz = rng.random_range(0..40);
            let t = random_triplets(&mut rng, m, n, nnz);
            let a = CscMatrix::from_triplets(m, n, &t);
            let d = a.to_dense();
            let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let y: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();

            let got = a.mul_vec(&x);
            let want = &d * nalgebra::DVector::from_column_slice(&x);
            for i in 0..m {
                assert!((got[i] - want[i]).abs() < 1e-12);
            }

            let got_t = a.mul_vec_t(&y);
            let want_t = d.transpose() * nalgebra::DVector::from_column_slice(&y);
            for j in 0..n {
                assert!((got_t[j] - want_t[j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn transpose_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let t = random_triplets(&mut rng, 9, 7, 30);
        let a = CscMatrix::from_triplets(9, 7, &t);
        let att = a.transpose().transpose();
        assert_eq!(a, att);
        assert_eq!(a.transpose().to_dense(), a.to_dense().transpose());
    }

    #[test]
    fn scaling_and_norms() {
        let t = vec![(0, 0, 2.0), (1, 0, -4.0), (1, 1, 1.0)];
        let mut a = CscMatrix::from_triplets(2, 2, &t);
        assert_eq!(a.row_norms_inf(), vec![2.0, 4.0]);
        assert_eq!(a.col_norms_inf(), vec![4.0, 1.0]);
        a.scale_rows(&[0.5, 0.25]);
        a.scale_cols(&[1.0, 3.0]);
        assert_eq!(a.get(0, 0), 1.0);
        assert_eq!(a.get(1, 0), -1.0);
        assert_eq!(a.get(1, 1), 0.75);
    }

    #[test]
    fn complex_entries_supported() {
        use num_complex::Complex64;
        let t = vec![
            (0, 0, Complex64::new(1.0, 2.0)),
            (0, 0, Complex64::new(0.5, -1.0)),
            (1, 0, Complex64::new(0.0, 1.0)),
        ];
        let a: Csc<Complex64> = Csc::from_triplets(2, 1, &t);
        assert_eq!(a.get(0, 0), Complex64::new(1.5, 1.0));
        assert_eq!(a.get(1, 0), Complex64::new(0.0, 1.0));
    }
}
