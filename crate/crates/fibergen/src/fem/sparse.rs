//! Compressed sparse row matrix, just large enough for symmetric stiffness
//! matrices and conjugate gradients.

use crate::parallel::{dispatch_map, seq_map};

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl CsrMatrix {
    /// Builds an all-zero matrix with the given sparsity pattern; `rows[i]`
    /// must hold the ascending column indices of row `i`.
    pub(crate) fn from_structure(rows: &[Vec<usize>]) -> CsrMatrix {
        let n = rows.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        row_ptr.push(0);
        let mut cols = Vec::new();
        for row in rows {
            debug_assert!(row.windows(2).all(|w| w[0] < w[1]), "columns must ascend");
            cols.extend_from_slice(row);
            row_ptr.push(cols.len());
        }
        let vals = vec![0.0; cols.len()];
        CsrMatrix { n, row_ptr, cols, vals }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.cols.len()
    }

    /// Adds `v` to entry `(i, j)`; the entry must exist in the pattern.
    pub(crate) fn add_at(&mut self, i: usize, j: usize, v: f64) {
        let (lo, hi) = (self.row_ptr[i], self.row_ptr[i + 1]);
        let idx = self.cols[lo..hi]
            .binary_search(&j)
            .expect("entry missing from sparsity pattern");
        self.vals[lo + idx] += v;
    }

    /// Entry `(i, j)`, zero when outside the pattern.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (lo, hi) = (self.row_ptr[i], self.row_ptr[i + 1]);
        match self.cols[lo..hi].binary_search(&j) {
            Ok(idx) => self.vals[lo + idx],
            Err(_) => 0.0,
        }
    }

    pub(crate) fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (lo, hi) = (self.row_ptr[i], self.row_ptr[i + 1]);
        (&self.cols[lo..hi], &self.vals[lo..hi])
    }

    pub(crate) fn row_mut(&mut self, i: usize) -> (&[usize], &mut [f64]) {
        let (lo, hi) = (self.row_ptr[i], self.row_ptr[i + 1]);
        (&self.cols[lo..hi], &mut self.vals[lo..hi])
    }

    fn row_dot(&self, i: usize, x: &[f64]) -> f64 {
        let (cols, vals) = self.row(i);
        let mut sum = 0.0;
        for (c, v) in cols.iter().zip(vals) {
            sum += v * x[*c];
        }
        sum
    }

    /// `A * x`, rows computed in parallel. Each row is reduced sequentially
    /// in column order, so the result is bitwise independent of threading.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n, "dimension mismatch");
        dispatch_map(self.n, |i| self.row_dot(i, x))
    }

    /// `A * x` on a single thread; bitwise identical to [`Self::mul_vec`].
    pub fn mul_vec_sequential(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n, "dimension mismatch");
        seq_map(self.n, |i| self.row_dot(i, x))
    }

    /// The main diagonal (zero where the pattern has no diagonal entry).
    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    /// All stored values in row-major pattern order.
    pub fn values(&self) -> &[f64] {
        &self.vals
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// 3x3 pattern with an empty spot: [[2, 1, 0], [1, 3, 0], [0, 0, 1]].
    fn sample() -> CsrMatrix {
        let mut m = CsrMatrix::from_structure(&[vec![0, 1], vec![0, 1], vec![2]]);
        m.add_at(0, 0, 2.0);
        m.add_at(0, 1, 1.0);
        m.add_at(1, 0, 1.0);
        m.add_at(1, 1, 3.0);
        m.add_at(2, 2, 1.0);
        m
    }

    #[test]
    fn mul_vec_matches_dense_arithmetic() {
        let m = sample();
        let y = m.mul_vec(&[1.0, -2.0, 4.0]);
        assert_eq!(y, vec![0.0, -5.0, 4.0]);
        assert_eq!(m.get(0, 2), 0.0);
        assert_eq!(m.get(1, 1), 3.0);
        assert_eq!(m.diagonal(), vec![2.0, 3.0, 1.0]);
        assert_eq!(m.nnz(), 5);
    }

    #[test]
    fn parallel_and_sequential_products_are_bitwise_equal() {
        // Irrational-ish values catch any reassociation.
        let mut m = CsrMatrix::from_structure(&[
            vec![0, 1, 2, 3],
            vec![0, 1, 2],
            vec![0, 1, 2, 3],
            vec![0, 2, 3],
        ]);
        let mut seed = 0.123456789f64;
        for i in 0..4 {
            let (cols, _) = m.row(i);
            for j in cols.to_vec() {
                seed = (seed * 997.0).fract() + 1e-3;
                m.add_at(i, j, seed * 3.0_f64.sqrt());
            }
        }
        let x: Vec<f64> = (0..4).map(|i| (i as f64 + 0.5) * 2.0_f64.sqrt()).collect();
        let a = m.mul_vec(&x);
        let b = m.mul_vec_sequential(&x);
        assert!(a.iter().zip(&b).all(|(u, v)| u.to_bits() == v.to_bits()));
    }

    #[test]
    #[should_panic(expected = "entry missing")]
    fn add_outside_pattern_panics() {
        let mut m = sample();
        m.add_at(0, 2, 1.0);
    }
}
