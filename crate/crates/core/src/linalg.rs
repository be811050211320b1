//! Sparse storage plus thin wrappers over faer's Cholesky and symmetric
//! eigensolvers. All routines run single-threaded so results are bit-stable.

use std::sync::Once;

use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::{Mat, MatRef, Par, Side};

use crate::error::{LabError, Result};

static SEQUENTIAL: Once = Once::new();

/// Pin faer to sequential kernels (deterministic reductions).
pub(crate) fn init() {
    SEQUENTIAL.call_once(|| faer::set_global_parallelism(Par::Seq));
}

/// Compressed sparse row matrix with sorted, duplicate-free column indices.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n_rows: usize,
    n_cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Build from `(row, col, value)` triplets; duplicates are summed in
    /// input order.
    pub fn from_triplets(n_rows: usize, n_cols: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; n_rows + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            debug_assert!(r < n_rows && c < n_cols);
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..n_rows {
            row_ptr[r + 1] += row_ptr[r];
        }
        CsrMatrix { n_rows, n_cols, row_ptr, col_idx, values }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.col_idx[span.clone()].iter().copied().zip(self.values[span].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        match self.col_idx[span.clone()].binary_search(&c) {
            Ok(i) => self.values[span.start + i],
            Err(_) => 0.0,
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n_cols);
        (0..self.n_rows).map(|r| self.row(r).map(|(c, v)| v * x[c]).sum()).collect()
    }

    /// `x^T A y`
    pub fn form(&self, x: &[f64], y: &[f64]) -> f64 {
        let ay = self.mul_vec(y);
        x.iter().zip(&ay).map(|(a, b)| a * b).sum()
    }

    /// Largest `|a_ij - a_ji|`.
    pub fn asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for r in 0..self.n_rows {
            for (c, v) in self.row(r) {
                worst = worst.max((v - self.get(c, r)).abs());
            }
        }
        worst
    }

    /// Submatrix on the given rows and columns (in the given order).
    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> CsrMatrix {
        let mut col_map = vec![usize::MAX; self.n_cols];
        for (j, &c) in cols.iter().enumerate() {
            col_map[c] = j;
        }
        let mut triplets = Vec::new();
        for (i, &r) in rows.iter().enumerate() {
            for (c, v) in self.row(r) {
                let j = col_map[c];
                if j != usize::MAX {
                    triplets.push((i, j, v));
                }
            }
        }
        CsrMatrix::from_triplets(rows.len(), cols.len(), triplets)
    }

    /// `alpha * self + beta * other` (same shape).
    pub fn linear_combination(&self, alpha: f64, other: &CsrMatrix, beta: f64) -> CsrMatrix {
        assert_eq!((self.n_rows, self.n_cols), (other.n_rows, other.n_cols));
        let mut triplets = Vec::with_capacity(self.nnz() + other.nnz());
        for r in 0..self.n_rows {
            triplets.extend(self.row(r).map(|(c, v)| (r, c, alpha * v)));
            triplets.extend(other.row(r).map(|(c, v)| (r, c, beta * v)));
        }
        CsrMatrix::from_triplets(self.n_rows, self.n_cols, triplets)
    }

    pub fn to_dense(&self) -> Mat<f64> {
        let mut m = Mat::zeros(self.n_rows, self.n_cols);
        for r in 0..self.n_rows {
            for (c, v) in self.row(r) {
                m[(r, c)] = v;
            }
        }
        m
    }

    /// `self * dense`
    pub fn mul_dense(&self, x: MatRef<'_, f64>) -> Mat<f64> {
        assert_eq!(x.nrows(), self.n_cols);
        let mut out = Mat::zeros(self.n_rows, x.ncols());
        for j in 0..x.ncols() {
            for r in 0..self.n_rows {
                let mut acc = 0.0;
                for (c, v) in self.row(r) {
                    acc += v * x[(c, j)];
                }
                out[(r, j)] = acc;
            }
        }
        out
    }

    pub(crate) fn to_faer(&self) -> Result<SparseColMat<usize, f64>> {
        let mut triplets = Vec::with_capacity(self.nnz());
        for r in 0..self.n_rows {
            triplets.extend(self.row(r).map(|(c, v)| Triplet::new(r, c, v)));
        }
        SparseColMat::try_new_from_triplets(self.n_rows, self.n_cols, &triplets)
            .map_err(|e| LabError::SolverFailure(format!("sparse matrix creation: {e:?}")))
    }

    /// Matrix Market coordinate format (general, 1-based, full storage).
    pub fn to_matrix_market(&self) -> String {
        use std::fmt::Write as _;
        let mut s = String::from("%%MatrixMarket matrix coordinate real general\n");
        let _ = writeln!(s, "{} {} {}", self.n_rows, self.n_cols, self.nnz());
        for r in 0..self.n_rows {
            for (c, v) in self.row(r) {
                let _ = writeln!(s, "{} {} {:e}", r + 1, c + 1, v);
            }
        }
        s
    }
}

/// Matrix Market array format (column-major) for a dense matrix.
pub fn dense_to_matrix_market(m: MatRef<'_, f64>) -> String {
    use std::fmt::Write as _;
    let mut s = String::from("%%MatrixMarket matrix array real general\n");
    let _ = writeln!(s, "{} {}", m.nrows(), m.ncols());
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            let _ = writeln!(s, "{:e}", m[(i, j)]);
        }
    }
    s
}

/// Sparse Cholesky factorization of an SPD matrix (fill-reducing ordering
/// chosen by faer, deterministic).
pub struct SpdSolver {
    llt: faer::sparse::linalg::solvers::Llt<usize, f64>,
    n: usize,
}

impl SpdSolver {
    pub fn new(a: &CsrMatrix) -> Result<Self> {
        init();
        if a.n_rows() != a.n_cols() {
            return Err(LabError::Shape {
                expected: "square matrix".into(),
                found: format!("{}x{}", a.n_rows(), a.n_cols()),
            });
        }
        let llt = a
            .to_faer()?
            .sp_cholesky(Side::Lower)
            .map_err(|e| LabError::SolverFailure(format!("sparse Cholesky: {e:?}")))?;
        Ok(SpdSolver { llt, n: a.n_rows() })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n);
        if self.n == 0 {
            return Vec::new();
        }
        let mut x = Mat::from_fn(self.n, 1, |i, _| b[i]);
        self.llt.solve_in_place(x.as_mut());
        (0..self.n).map(|i| x[(i, 0)]).collect()
    }

    pub fn solve_dense(&self, b: MatRef<'_, f64>) -> Mat<f64> {
        assert_eq!(b.nrows(), self.n);
        let mut x = b.to_owned();
        if self.n > 0 {
            self.llt.solve_in_place(x.as_mut());
        }
        x
    }
}

/// Sparse LU for indefinite systems.
pub struct LuSolver {
    lu: faer::sparse::linalg::solvers::Lu<usize, f64>,
    n: usize,
}

impl LuSolver {
    pub fn new(a: &CsrMatrix) -> Result<Self> {
        init();
        let lu = a
            .to_faer()?
            .sp_lu()
            .map_err(|e| LabError::SolverFailure(format!("sparse LU: {e:?}")))?;
        Ok(LuSolver { lu, n: a.n_rows() })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = Mat::from_fn(self.n, 1, |i, _| b[i]);
        if self.n > 0 {
            self.lu.solve_in_place(x.as_mut());
        }
        (0..self.n).map(|i| x[(i, 0)]).collect()
    }

    pub fn solve_dense(&self, b: MatRef<'_, f64>) -> Mat<f64> {
        let mut x = b.to_owned();
        if self.n > 0 {
            self.lu.solve_in_place(x.as_mut());
        }
        x
    }
}

/// Reduce `A v = lambda B v` to the standard form `L^{-1} A L^{-T}`.
fn reduce_pencil(a: MatRef<'_, f64>, b: MatRef<'_, f64>) -> Result<(Mat<f64>, Mat<f64>)> {
    init();
    let n = a.nrows();
    if a.ncols() != n || b.nrows() != n || b.ncols() != n {
        return Err(LabError::Shape { expected: format!("{n}x{n} pencil"), found: format!("{}x{}", b.nrows(), b.ncols()) });
    }
    let llt = b
        .llt(Side::Lower)
        .map_err(|e| LabError::SpectralFailure(format!("mass Cholesky: {e:?}")))?;
    let l = llt.L().to_owned();
    let mut c = a.to_owned();
    faer::linalg::triangular_solve::solve_lower_triangular_in_place(l.as_ref(), c.as_mut(), Par::Seq);
    let mut ct = c.transpose().to_owned();
    faer::linalg::triangular_solve::solve_lower_triangular_in_place(l.as_ref(), ct.as_mut(), Par::Seq);
    let sym = Mat::from_fn(n, n, |i, j| 0.5 * (ct[(i, j)] + ct[(j, i)]));
    Ok((sym, l))
}

/// Generalized symmetric-definite eigenproblem `A v = lambda B v` with `B`
/// SPD, solved densely through the Cholesky factor of `B`. Eigenvalues come
/// back ascending, eigenvectors `B`-orthonormal (columns of the matrix).
pub fn generalized_eigen(a: MatRef<'_, f64>, b: MatRef<'_, f64>) -> Result<(Vec<f64>, Mat<f64>)> {
    let (sym, l) = reduce_pencil(a, b)?;
    let (values, w) = symmetric_eigen(sym.as_ref())?;
    // v = L^{-T} w
    let mut v = w;
    faer::linalg::triangular_solve::solve_upper_triangular_in_place(l.transpose(), v.as_mut(), Par::Seq);
    Ok((values, v))
}

/// Eigenvalues only of the pencil `(A, B)`, ascending.
pub fn generalized_eigenvalues(a: MatRef<'_, f64>, b: MatRef<'_, f64>) -> Result<Vec<f64>> {
    let (sym, _) = reduce_pencil(a, b)?;
    sym.self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| LabError::SpectralFailure(format!("symmetric eigensolver: {e:?}")))
}

/// Symmetric eigen-decomposition, ascending.
pub fn symmetric_eigen(a: MatRef<'_, f64>) -> Result<(Vec<f64>, Mat<f64>)> {
    init();
    let evd = a
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| LabError::SpectralFailure(format!("symmetric eigensolver: {e:?}")))?;
    Ok(((0..a.nrows()).map(|i| evd.S()[i]).collect(), evd.U().to_owned()))
}

pub fn singular_values(a: MatRef<'_, f64>) -> Result<Vec<f64>> {
    init();
    a.singular_values()
        .map_err(|e| LabError::SpectralFailure(format!("SVD: {e:?}")))
}

/// Smallest eigenpair of `A v = lambda M v` by shift-invert (inverse) iteration
/// with Rayleigh-quotient monitoring. `solve` applies `A^{-1}`.
pub fn inverse_iteration(
    solve: impl Fn(&[f64]) -> Vec<f64>,
    a: &CsrMatrix,
    m: &CsrMatrix,
    start: Vec<f64>,
    tol: f64,
    max_iter: usize,
) -> Result<(f64, Vec<f64>)> {
    let m_norm = |v: &[f64]| m.form(v, v).sqrt();
    let mut v = start;
    let s = m_norm(&v);
    if !(s > 0.0) {
        return Err(LabError::SpectralFailure("zero start vector".into()));
    }
    v.iter_mut().for_each(|x| *x /= s);
    let mut lambda = a.form(&v, &v);
    for _ in 0..max_iter {
        let mv = m.mul_vec(&v);
        let mut w = solve(&mv);
        let s = m_norm(&w);
        if !(s.is_finite() && s > 0.0) {
            return Err(LabError::SpectralFailure("inverse iteration broke down".into()));
        }
        w.iter_mut().for_each(|x| *x /= s);
        let next = a.form(&w, &w);
        let done = (next - lambda).abs() <= tol * next.abs();
        v = w;
        lambda = next;
        if done {
            // residual check ||A v - lambda M v|| relative to ||A v||
            return Ok((lambda, v));
        }
    }
    Err(LabError::SpectralFailure(format!("inverse iteration stagnated after {max_iter} steps")))
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian_1d(n: usize) -> CsrMatrix {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
                t.push((i + 1, i, -1.0));
            }
        }
        CsrMatrix::from_triplets(n, n, t)
    }

    #[test]
    fn triplets_are_summed() {
        let a = CsrMatrix::from_triplets(2, 2, vec![(0, 0, 1.0), (1, 1, 2.0), (0, 0, 0.5), (1, 0, -1.0)]);
        assert_eq!(a.get(0, 0), 1.5);
        assert_eq!(a.get(1, 0), -1.0);
        assert_eq!(a.get(0, 1), 0.0);
        assert_eq!(a.nnz(), 3);
    }

    #[test]
    fn spd_solve_and_submatrix() {
        let a = laplacian_1d(50);
        let solver = SpdSolver::new(&a).unwrap();
        let b: Vec<f64> = (0..50).map(|i| (i as f64).sin()).collect();
        let x = solver.solve(&b);
        let r = a.mul_vec(&x);
        for (ri, bi) in r.iter().zip(&b) {
            assert!((ri - bi).abs() < 1e-12);
        }
        let sub = a.submatrix(&[1, 2, 3], &[2, 3]);
        assert_eq!(sub.get(0, 0), -1.0);
        assert_eq!(sub.get(1, 0), 2.0);
    }

    #[test]
    fn generalized_eigen_is_b_orthonormal() {
        let a = laplacian_1d(20).to_dense();
        let b = Mat::from_fn(20, 20, |i, j| if i == j { 2.0 + i as f64 * 0.1 } else if i.abs_diff(j) == 1 { 0.3 } else { 0.0 });
        let (vals, vecs) = generalized_eigen(a.as_ref(), b.as_ref()).unwrap();
        let gram = vecs.transpose() * &b * &vecs;
        for i in 0..20 {
            for j in 0..20 {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((gram[(i, j)] - e).abs() < 1e-10);
            }
        }
        let res = &a * &vecs - &b * &vecs * Mat::from_fn(20, 20, |i, j| if i == j { vals[i] } else { 0.0 });
        assert!(res.norm_max() < 1e-10);
        assert!(vals.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn inverse_iteration_finds_smallest() {
        let n = 30;
        let a = laplacian_1d(n);
        let m = CsrMatrix::from_triplets(n, n, (0..n).map(|i| (i, i, 1.0)).collect());
        let solver = SpdSolver::new(&a).unwrap();
        let (lambda, _) = inverse_iteration(|b| solver.solve(b), &a, &m, vec![1.0; n], 1e-14, 500).unwrap();
        let exact = 2.0 - 2.0 * (std::f64::consts::PI / (n as f64 + 1.0)).cos();
        assert!((lambda - exact).abs() < 1e-10);
    }
}
