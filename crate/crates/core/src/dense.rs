//! Small dense helpers backing the analysis module and the test oracles.
//!
//! Nothing here is meant for production-sized grids; every caller sits behind
//! an explicit size guard.

use nalgebra::{DMatrix, DVector};

use crate::transforms::{GridShape, ToeplitzSymbol};

/// Dense symmetric Toeplitz matrix from its first column.
pub fn toeplitz_dense(sym: &ToeplitzSymbol) -> DMatrix<f64> {
    let t = sym.first_column();
    DMatrix::from_fn(t.len(), t.len(), |i, j| t[i.abs_diff(j)])
}

/// Dense orthonormal DST-I matrix Q_M. The angle is formed from the exact
/// integer product (j+1)(k+1) so the matrix is bit-for-bit symmetric.
pub fn sine_matrix(m: usize) -> DMatrix<f64> {
    let norm = (2.0 / (m as f64 + 1.0)).sqrt();
    DMatrix::from_fn(m, m, |j, k| {
        let jk = ((j + 1) * (k + 1)) as f64;
        norm * (std::f64::consts::PI * jk / (m as f64 + 1.0)).sin()
    })
}

/// Kronecker product a (x) b.
pub fn kron(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    DMatrix::from_fn(ar * br, ac * bc, |i, j| {
        a[(i / br, j / bc)] * b[(i % br, j % bc)]
    })
}

/// Dense matrix acting as `kernel` along `axis` of a grid vector and as the
/// identity on every other axis. Under the first-dimension-fastest ordering
/// this is I_{M_m} (x) ... (x) K (x) ... (x) I_{M_1} with K in slot `axis`.
pub fn axis_operator_dense(shape: &GridShape, axis: usize, kernel: &DMatrix<f64>) -> DMatrix<f64> {
    assert_eq!(kernel.nrows(), shape.dims()[axis]);
    let mut acc = DMatrix::identity(1, 1);
    for j in (0..shape.num_axes()).rev() {
        let factor = if j == axis {
            kernel.clone()
        } else {
            DMatrix::identity(shape.dims()[j], shape.dims()[j])
        };
        acc = kron(&acc, &factor);
    }
    acc
}

/// Dense multi-dimensional sine transform matrix for a grid shape.
pub fn multi_sine_matrix(shape: &GridShape) -> DMatrix<f64> {
    let mut acc = DMatrix::identity(1, 1);
    for j in (0..shape.num_axes()).rev() {
        acc = kron(&acc, &sine_matrix(shape.dims()[j]));
    }
    acc
}

/// Eigenvalues of a symmetric matrix, unsorted.
pub fn symmetric_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    nalgebra::SymmetricEigen::new(m.clone())
        .eigenvalues
        .iter()
        .copied()
        .collect()
}

/// Extremes of the symmetric eigenvalue spectrum.
pub fn symmetric_eig_extremes(m: &DMatrix<f64>) -> (f64, f64) {
    let eigs = symmetric_eigenvalues(m);
    let min = eigs.iter().copied().fold(f64::INFINITY, f64::min);
    let max = eigs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (min, max)
}

/// Spectral radius of a real skew-symmetric matrix (its eigenvalues are
/// purely imaginary, so this is sqrt(lambda_max(K^T K))).
pub fn skew_spectral_radius(k: &DMatrix<f64>) -> f64 {
    let sym = k.transpose() * k;
    let (_, max) = symmetric_eig_extremes(&sym);
    max.max(0.0).sqrt()
}

/// 2-norm of a symmetric matrix.
pub fn symmetric_two_norm(m: &DMatrix<f64>) -> f64 {
    let (min, max) = symmetric_eig_extremes(m);
    min.abs().max(max.abs())
}

/// Dense matrix-vector helper for slices.
pub fn matvec(m: &DMatrix<f64>, v: &[f64]) -> Vec<f64> {
    (m * DVector::from_column_slice(v)).as_slice().to_vec()
}
