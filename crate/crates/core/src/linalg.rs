//! Dense and sparse linear algebra helpers shared by the operator and solver modules.

use std::io::Write;

use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Minimum-norm least-squares solution of `a x = b` via SVD.
///
/// Singular values below `rel_tol * sigma_max` are treated as zero.
/// Returns the solution together with the numerical rank.
pub fn min_norm_solve(a: &DMatrix<f64>, b: &DVector<f64>, rel_tol: f64) -> (DVector<f64>, usize) {
    let (m, n) = a.shape();
    if m == 0 || n == 0 {
        return (DVector::zeros(n), 0);
    }
    let svd = a.clone().svd(true, true);
    let u = svd.u.as_ref().expect("left singular vectors requested");
    let vt = svd.v_t.as_ref().expect("right singular vectors requested");
    let smax = svd.singular_values.max();
    let cut = rel_tol * smax;
    let mut x = DVector::zeros(n);
    let mut rank = 0;
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s > cut && s > 0.0 {
            rank += 1;
            let coef = u.column(k).dot(b) / s;
            x.axpy(coef, &vt.row(k).transpose(), 1.0);
        }
    }
    (x, rank)
}

/// Eigen-decomposition of a symmetric matrix with eigenvalues in ascending order.
pub fn sym_eigen(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let sym = (m + m.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vecs = DMatrix::zeros(n, n);
    for (c, &k) in order.iter().enumerate() {
        vecs.set_column(c, &eig.eigenvectors.column(k));
    }
    (vals, vecs)
}

/// Eigenvalues of `H^{-1} M` for symmetric `M` and positive diagonal `H`, ascending.
pub fn h_eigenvalues(m: &DMatrix<f64>, h: &[f64]) -> Vec<f64> {
    let n = h.len();
    let scaled = DMatrix::from_fn(n, n, |i, j| m[(i, j)] / (h[i] * h[j]).sqrt());
    sym_eigen(&scaled).0
}

/// Eigenvalues of a general real square matrix.
pub fn complex_eigenvalues(m: &DMatrix<f64>) -> Result<Vec<(f64, f64)>> {
    let n = m.nrows();
    let a = faer::Mat::<f64>::from_fn(n, n, |i, j| m[(i, j)]);
    let ev = a
        .eigenvalues()
        .map_err(|e| Error::LinearSolve(format!("eigenvalue iteration failed: {e:?}")))?;
    Ok(ev.iter().map(|z| (z.re, z.im)).collect())
}

/// Compressed sparse row matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    pub nrows: usize,
    pub ncols: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds a matrix from `(row, col, value)` triplets, summing duplicates.
    pub fn from_triplets(nrows: usize, ncols: usize, trip: &[(usize, usize, f64)]) -> Self {
        let mut sorted: Vec<(usize, usize, f64)> = trip.to_vec();
        sorted.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_ptr = vec![0usize; nrows + 1];
        let mut col_idx = Vec::with_capacity(sorted.len());
        let mut values: Vec<f64> = Vec::with_capacity(sorted.len());
        let mut last: Option<(usize, usize)> = None;
        for &(r, c, v) in &sorted {
            assert!(r < nrows && c < ncols, "triplet ({r}, {c}) out of bounds");
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..nrows {
            row_ptr[r + 1] += row_ptr[r];
        }
        CsrMatrix { nrows, ncols, row_ptr, col_idx, values }
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols);
        (0..self.nrows)
            .map(|r| {
                (self.row_ptr[r]..self.row_ptr[r + 1])
                    .map(|k| self.values[k] * x[self.col_idx[k]])
                    .sum()
            })
            .collect()
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let row = &self.col_idx[self.row_ptr[r]..self.row_ptr[r + 1]];
        match row.binary_search(&c) {
            Ok(k) => self.values[self.row_ptr[r] + k],
            Err(_) => 0.0,
        }
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.nrows).flat_map(move |r| {
            (self.row_ptr[r]..self.row_ptr[r + 1]).map(move |k| (r, self.col_idx[k], self.values[k]))
        })
    }

    pub fn transpose(&self) -> CsrMatrix {
        let trip: Vec<_> = self.triplets().map(|(r, c, v)| (c, r, v)).collect();
        CsrMatrix::from_triplets(self.ncols, self.nrows, &trip)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut d = DMatrix::zeros(self.nrows, self.ncols);
        for (r, c, v) in self.triplets() {
            d[(r, c)] += v;
        }
        d
    }

    /// Writes one `row col value` line per stored entry.
    pub fn write_triplets<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "# {} {} {}", self.nrows, self.ncols, self.nnz())?;
        for (r, c, v) in self.triplets() {
            writeln!(w, "{r} {c} {v:.17e}")?;
        }
        Ok(())
    }
}

/// Sparse LU factorization of a square matrix.
pub struct SparseLu {
    n: usize,
    lu: faer::sparse::linalg::solvers::Lu<usize, f64>,
}

impl SparseLu {
    pub fn factor(a: &CsrMatrix) -> Result<Self> {
        if a.nrows != a.ncols {
            return Err(Error::LinearSolve("matrix is not square".into()));
        }
        let trip: Vec<Triplet<usize, usize, f64>> =
            a.triplets().map(|(r, c, v)| Triplet::new(r, c, v)).collect();
        let m = SparseColMat::<usize, f64>::try_new_from_triplets(a.nrows, a.ncols, &trip)
            .map_err(|e| Error::LinearSolve(format!("{e:?}")))?;
        let lu = m.sp_lu().map_err(|e| Error::LinearSolve(format!("{e:?}")))?;
        Ok(SparseLu { n: a.nrows, lu })
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        if b.len() != self.n {
            return Err(Error::LinearSolve("right-hand side length mismatch".into()));
        }
        let rhs = faer::Mat::<f64>::from_fn(self.n, 1, |i, _| b[i]);
        let x = self.lu.solve(&rhs);
        let out: Vec<f64> = (0..self.n).map(|i| x[(i, 0)]).collect();
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::LinearSolve("singular or ill-conditioned matrix".into()));
        }
        Ok(out)
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn min_norm_picks_smallest_solution() {
        let a = DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
        let b = DVector::from_vec(vec![2.0]);
        let (x, rank) = min_norm_solve(&a, &b, 1e-12);
        assert_eq!(rank, 1);
        assert!((x[0] - 1.0).abs() < 1e-14 && (x[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn csr_sums_duplicates_and_solves() {
        let trip = vec![(0, 0, 2.0), (0, 0, 2.0), (1, 1, 3.0), (0, 1, 1.0), (1, 0, 1.0)];
        let a = CsrMatrix::from_triplets(2, 2, &trip);
        assert_eq!(a.nnz(), 4);
        assert_eq!(a.get(0, 0), 4.0);
        let lu = SparseLu::factor(&a).unwrap();
        let x = lu.solve(&[5.0, 4.0]).unwrap();
        let r = a.matvec(&x);
        assert!((r[0] - 5.0).abs() < 1e-13 && (r[1] - 4.0).abs() < 1e-13);
    }

    #[test]
    fn h_eigenvalues_of_identity_scaling() {
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 6.0]));
        let ev = h_eigenvalues(&m, &[1.0, 2.0]);
        assert!((ev[0] - 2.0).abs() < 1e-14 && (ev[1] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn complex_eigenvalues_of_rotation() {
        let m = DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
        let mut ev = complex_eigenvalues(&m).unwrap();
        ev.sort_by(|a, b| a.1.total_cmp(&b.1));
        assert!(ev[0].0.abs() < 1e-14 && (ev[0].1 + 1.0).abs() < 1e-14);
    }
}
