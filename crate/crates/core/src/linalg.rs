//! Sparse helpers: CSR construction and products, sparse direct factorizations
//! and Matrix Market output.

use std::io::{self, Write};

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Llt, Lu};
use faer::sparse::{SparseRowMatRef, SymbolicSparseRowMatRef};
use faer::{MatMut, Side};
use sprs::CsMat;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("matrix is not symmetric positive definite")]
    NotPositiveDefinite,
    #[error("matrix is singular or the factorization failed: {0}")]
    Singular(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Builds a CSR matrix from triplets, summing duplicates in input order.
pub fn csr_from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> CsMat<f64> {
    let mut counts = vec![0usize; nrows + 1];
    for &(r, _, _) in triplets {
        counts[r + 1] += 1;
    }
    for i in 0..nrows {
        counts[i + 1] += counts[i];
    }
    let mut next = counts.clone();
    let mut order = vec![0usize; triplets.len()];
    for (k, &(r, _, _)) in triplets.iter().enumerate() {
        order[next[r]] = k;
        next[r] += 1;
    }
    let mut indptr = Vec::with_capacity(nrows + 1);
    let mut indices = Vec::with_capacity(triplets.len());
    let mut data = Vec::with_capacity(triplets.len());
    indptr.push(0);
    for r in 0..nrows {
        let row = &mut order[counts[r]..counts[r + 1]];
        // Stable, so duplicates keep their input order.
        row.sort_by_key(|&k| triplets[k].1);
        for &k in row.iter() {
            let (_, c, v) = triplets[k];
            if indices.len() > indptr[r] && *indices.last().unwrap() == c {
                *data.last_mut().unwrap() += v;
            } else {
                indices.push(c);
                data.push(v);
            }
        }
        indptr.push(indices.len());
    }
    CsMat::new((nrows, ncols), indptr, indices, data)
}

/// `y = A x`
pub fn spmv(a: &CsMat<f64>, x: &[f64], y: &mut [f64]) {
    assert!(a.is_csr());
    assert_eq!(a.cols(), x.len());
    assert_eq!(a.rows(), y.len());
    for (r, row) in a.outer_iterator().enumerate() {
        y[r] = row.iter().map(|(c, v)| v * x[c]).sum();
    }
}

pub fn mul(a: &CsMat<f64>, x: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; a.rows()];
    spmv(a, x, &mut y);
    y
}

/// `y = Aᵀ x`
pub fn mul_transpose(a: &CsMat<f64>, x: &[f64]) -> Vec<f64> {
    assert!(a.is_csr());
    assert_eq!(a.rows(), x.len());
    let mut y = vec![0.0; a.cols()];
    for (r, row) in a.outer_iterator().enumerate() {
        let xr = x[r];
        for (c, v) in row.iter() {
            y[c] += v * xr;
        }
    }
    y
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `y += alpha x`
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn diagonal(a: &CsMat<f64>) -> Vec<f64> {
    let n = a.rows().min(a.cols());
    (0..n).map(|i| a.get(i, i).copied().unwrap_or(0.0)).collect()
}

pub fn transpose(a: &CsMat<f64>) -> CsMat<f64> {
    a.transpose_view().to_csr()
}

pub fn max_asymmetry(a: &CsMat<f64>) -> f64 {
    let t = transpose(a);
    let mut worst: f64 = 0.0;
    for (r, row) in a.outer_iterator().enumerate() {
        for (c, v) in row.iter() {
            let other = t.get(r, c).copied().unwrap_or(0.0);
            worst = worst.max((v - other).abs());
        }
    }
    worst
}

fn faer_view(a: &CsMat<f64>) -> SparseRowMatRef<'_, usize, f64> {
    assert!(a.is_csr());
    let symbolic = SymbolicSparseRowMatRef::new_checked(
        a.rows(),
        a.cols(),
        a.indptr().into_raw_storage(),
        None,
        a.indices(),
    );
    SparseRowMatRef::new(symbolic, a.data())
}

/// Sparse Cholesky factorization of an SPD matrix. Only the lower triangle is
/// read.
pub struct SpdFactor {
    llt: Llt<usize, f64>,
    n: usize,
}

impl SpdFactor {
    pub fn new(a: &CsMat<f64>) -> Result<Self, LinalgError> {
        if a.rows() != a.cols() {
            return Err(LinalgError::DimensionMismatch(format!("{}x{} is not square", a.rows(), a.cols())));
        }
        let llt = faer_view(a).sp_cholesky(Side::Lower).map_err(|_| LinalgError::NotPositiveDefinite)?;
        Ok(SpdFactor { llt, n: a.rows() })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve_in_place(&self, x: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        self.llt.solve_in_place(MatMut::from_column_major_slice_mut(x, self.n, 1));
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}

/// Sparse LU factorization with partial pivoting.
pub struct LuFactor {
    lu: Lu<usize, f64>,
    n: usize,
}

impl LuFactor {
    pub fn new(a: &CsMat<f64>) -> Result<Self, LinalgError> {
        if a.rows() != a.cols() {
            return Err(LinalgError::DimensionMismatch(format!("{}x{} is not square", a.rows(), a.cols())));
        }
        let lu = faer_view(a).sp_lu().map_err(|e| LinalgError::Singular(format!("{e:?}")))?;
        Ok(LuFactor { lu, n: a.rows() })
    }

    /// Solves and rejects non-finite output, which is how a singular pivot shows.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>, LinalgError> {
        assert_eq!(b.len(), self.n);
        let mut x = b.to_vec();
        self.lu.solve_in_place(MatMut::from_column_major_slice_mut(&mut x, self.n, 1));
        if x.iter().all(|v| v.is_finite()) {
            Ok(x)
        } else {
            Err(LinalgError::Singular("non-finite solution".into()))
        }
    }
}

/// Writes `a` in Matrix Market coordinate format (1-based indices).
pub fn write_matrix_market(a: &CsMat<f64>, mut out: impl Write) -> io::Result<()> {
    writeln!(out, "%%MatrixMarket matrix coordinate real general")?;
    writeln!(out, "{} {} {}", a.rows(), a.cols(), a.nnz())?;
    for (v, (r, c)) in a.iter() {
        writeln!(out, "{} {} {:.17e}", r + 1, c + 1, v)?;
    }
    Ok(())
}

/// Dense column vector in Matrix Market array format.
pub fn write_matrix_market_vector(v: &[f64], mut out: impl Write) -> io::Result<()> {
    writeln!(out, "%%MatrixMarket matrix array real general")?;
    writeln!(out, "{} 1", v.len())?;
    for x in v {
        writeln!(out, "{x:.17e}")?;
    }
    Ok(())
}
