//! Fast transform kernels.
//!
//! Everything here reduces to complex FFTs of modest power-friendly lengths:
//!
//! * the orthonormal DST-I of length M runs through an odd extension of
//!   length 2(M+1),
//! * tau-matrix eigenvalues come from one FFT of the zero-padded symbol,
//! * symmetric Toeplitz products embed the matrix in a circulant of size 2M.
//!
//! [`apply_along_axis`] lifts any 1-D kernel to an axis of an m-dimensional
//! grid vector stored with the first dimension varying fastest, which is how
//! the Kronecker-structured operators act without ever being formed.

use num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

use crate::error::{check_len, Error, Result};

/// Shape of an m-dimensional grid vector, first dimension fastest-varying:
/// the entry for multi-index (k_1, ..., k_m) (all 0-based) sits at
/// k_1 + k_2 M_1 + k_3 M_1 M_2 + ...
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridShape {
    dims: Vec<usize>,
}

impl GridShape {
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::domain("grid shape needs at least one dimension"));
        }
        if dims.contains(&0) {
            return Err(Error::domain("grid dimensions must be positive"));
        }
        Ok(GridShape { dims })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn num_axes(&self) -> usize {
        self.dims.len()
    }

    /// Total number of grid points J.
    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Distance in the flat vector between neighbours along `axis`.
    pub fn stride(&self, axis: usize) -> usize {
        self.dims[..axis].iter().product()
    }

    /// 0-based index along `axis` of flat position `p`.
    pub fn axis_index(&self, p: usize, axis: usize) -> usize {
        (p / self.stride(axis)) % self.dims[axis]
    }
}

/// First column t_0..t_{M-1} of a symmetric Toeplitz matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ToeplitzSymbol {
    col: Vec<f64>,
}

impl ToeplitzSymbol {
    pub fn new(first_column: Vec<f64>) -> Result<Self> {
        if first_column.is_empty() {
            return Err(Error::domain("Toeplitz symbol must be non-empty"));
        }
        Ok(ToeplitzSymbol { col: first_column })
    }

    pub fn first_column(&self) -> &[f64] {
        &self.col
    }

    pub fn len(&self) -> usize {
        self.col.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Cached orthonormal DST-I of a fixed length.
///
/// Applying it twice restores the input to roundoff; the plan is shareable
/// across threads.
#[derive(Clone)]
pub(crate) struct Dst1Plan {
    m: usize,
    fft: Arc<dyn Fft<f64>>,
}

impl Dst1Plan {
    pub(crate) fn new(m: usize) -> Self {
        let mut planner = FftPlanner::new();
        Dst1Plan {
            m,
            fft: planner.plan_fft_forward(2 * (m + 1)),
        }
    }

    /// In-place transform of one fiber. `work` is resized as needed and can
    /// be reused across calls on the same thread.
    pub(crate) fn apply(&self, fiber: &mut [f64], work: &mut Workspace) {
        let m = self.m;
        debug_assert_eq!(fiber.len(), m);
        let l = 2 * (m + 1);
        work.buf.clear();
        work.buf.resize(l, Complex::new(0.0, 0.0));
        for (j, &v) in fiber.iter().enumerate() {
            work.buf[j + 1] = Complex::new(v, 0.0);
            work.buf[l - 1 - j] = Complex::new(-v, 0.0);
        }
        work.scratch
            .resize(self.fft.get_inplace_scratch_len(), Complex::new(0.0, 0.0));
        self.fft.process_with_scratch(&mut work.buf, &mut work.scratch);
        let norm = (2.0 / (m as f64 + 1.0)).sqrt() * 0.5;
        for (k, out) in fiber.iter_mut().enumerate() {
            *out = -norm * work.buf[k + 1].im;
        }
    }
}

/// Cached circulant embedding of a symmetric Toeplitz matrix: multiplies by
/// T_M in O(M log M). The embedding size is 2M rounded up to the next power
/// of two (extra middle zeros leave the product unchanged and keep every
/// FFT radix-2).
#[derive(Clone)]
pub(crate) struct ToeplitzPlan {
    m: usize,
    len: usize,
    spectrum: Vec<Complex<f64>>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl ToeplitzPlan {
    pub(crate) fn new(symbol: &ToeplitzSymbol) -> Self {
        let m = symbol.len();
        let l = (2 * m).next_power_of_two();
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(l);
        let inv = planner.plan_fft_inverse(l);
        // Circulant first column [t_0..t_{M-1}, 0...0, t_{M-1}..t_1].
        let mut col = vec![Complex::new(0.0, 0.0); l];
        for (k, &t) in symbol.first_column().iter().enumerate() {
            col[k] = Complex::new(t, 0.0);
            if k > 0 {
                col[l - k] = Complex::new(t, 0.0);
            }
        }
        let mut scratch = vec![Complex::new(0.0, 0.0); fwd.get_inplace_scratch_len()];
        fwd.process_with_scratch(&mut col, &mut scratch);
        ToeplitzPlan {
            m,
            len: l,
            spectrum: col,
            fwd,
            inv,
        }
    }

    /// In-place product T v for one fiber. Returns the largest imaginary
    /// residue so callers can enforce their own tolerance.
    pub(crate) fn apply(&self, fiber: &mut [f64], work: &mut Workspace) -> f64 {
        let m = self.m;
        debug_assert_eq!(fiber.len(), m);
        let l = self.len;
        work.buf.clear();
        work.buf.resize(l, Complex::new(0.0, 0.0));
        for (j, &v) in fiber.iter().enumerate() {
            work.buf[j] = Complex::new(v, 0.0);
        }
        let scratch_len = self
            .fwd
            .get_inplace_scratch_len()
            .max(self.inv.get_inplace_scratch_len());
        work.scratch.resize(scratch_len, Complex::new(0.0, 0.0));
        self.fwd.process_with_scratch(&mut work.buf, &mut work.scratch);
        for (b, s) in work.buf.iter_mut().zip(&self.spectrum) {
            *b *= s;
        }
        self.inv.process_with_scratch(&mut work.buf, &mut work.scratch);
        let scale = 1.0 / l as f64;
        let mut max_im = 0.0f64;
        for (out, b) in fiber.iter_mut().zip(&work.buf) {
            *out = b.re * scale;
            max_im = max_im.max((b.im * scale).abs());
        }
        max_im
    }
}

/// Reusable complex scratch storage for the transform plans.
#[derive(Default)]
pub(crate) struct Workspace {
    buf: Vec<Complex<f64>>,
    scratch: Vec<Complex<f64>>,
}

/// Orthonormal DST-I: returns Q_M v with (Q_M)_{jk} = sqrt(2/(M+1)) sin(pi j k/(M+1)).
pub fn dst1(v: &[f64]) -> Result<Vec<f64>> {
    if v.is_empty() {
        return Err(Error::domain("dst1 input must be non-empty"));
    }
    let plan = Dst1Plan::new(v.len());
    let mut out = v.to_vec();
    plan.apply(&mut out, &mut Workspace::default());
    Ok(out)
}

/// Multi-dimensional sine transform: DST-I along every axis. Involutory, and
/// the axis order does not affect the result.
pub fn apply_sine_transform(shape: &GridShape, v: &[f64]) -> Result<Vec<f64>> {
    check_len(shape.len(), v.len())?;
    let mut out = v.to_vec();
    let mut work = Workspace::default();
    for axis in 0..shape.num_axes() {
        let plan = Dst1Plan::new(shape.dims()[axis]);
        apply_along_axis(shape, axis, &mut out, |fiber| plan.apply(fiber, &mut work))?;
    }
    Ok(out)
}

/// All M eigenvalues of the tau approximation of the symmetric Toeplitz
/// matrix with the given symbol, in index order i = 1..M:
/// lambda_i = t_0 + 2 sum_{j<M} t_j cos(pi i j/(M+1)).
///
/// Computed with a single FFT of the zero-padded symbol.
pub fn tau_eigenvalues(sym: &ToeplitzSymbol) -> Vec<f64> {
    let m = sym.len();
    let l = 2 * (m + 1);
    let t = sym.first_column();
    let mut buf = vec![Complex::new(0.0, 0.0); l];
    buf[0] = Complex::new(t[0], 0.0);
    for (j, &tj) in t.iter().enumerate().skip(1) {
        buf[j] = Complex::new(tj, 0.0);
        buf[l - j] = Complex::new(tj, 0.0);
    }
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(l);
    fft.process(&mut buf);
    buf[1..=m].iter().map(|c| c.re).collect()
}

/// Dense tau matrix tau(T_M) = T_M - H_M, where H_M is the Hankel correction
/// with first column [t_2, ..., t_{M-1}, 0, 0] and last column
/// [0, 0, t_{M-1}, ..., t_2]. Small-scale oracle.
pub fn tau_matrix_dense(sym: &ToeplitzSymbol) -> nalgebra::DMatrix<f64> {
    let m = sym.len();
    let t = sym.first_column();
    nalgebra::DMatrix::from_fn(m, m, |i, j| {
        let toeplitz = t[i.abs_diff(j)];
        let k = i + j;
        let hankel = if k + 2 < m {
            t[k + 2]
        } else if k > m {
            t[2 * m - k]
        } else {
            0.0
        };
        toeplitz - hankel
    })
}

/// Symmetric Toeplitz matrix-vector product T_M v through a zero-padded
/// circulant embedding. The imaginary residue of the inverse transform must
/// stay below 1e-10 * ||v||_2.
pub fn toeplitz_matvec(sym: &ToeplitzSymbol, v: &[f64]) -> Result<Vec<f64>> {
    check_len(sym.len(), v.len())?;
    let plan = ToeplitzPlan::new(sym);
    let mut out = v.to_vec();
    let max_im = plan.apply(&mut out, &mut Workspace::default());
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if max_im > 1e-10 * norm.max(f64::MIN_POSITIVE) {
        return Err(Error::numerical(format!(
            "imaginary residue {max_im:.3e} exceeds 1e-10 * ||v||"
        )));
    }
    Ok(out)
}

/// Applies a 1-D kernel to every fiber of `v` along `axis`. Equivalent to
/// multiplying by I x K x I with identities on the other axes (under the
/// first-dimension-fastest ordering).
pub fn apply_along_axis<F>(
    shape: &GridShape,
    axis: usize,
    v: &mut [f64],
    mut kernel: F,
) -> Result<()>
where
    F: FnMut(&mut [f64]),
{
    if axis >= shape.num_axes() {
        return Err(Error::domain(format!(
            "axis {axis} out of range for {}-dimensional shape",
            shape.num_axes()
        )));
    }
    check_len(shape.len(), v.len())?;
    let m = shape.dims()[axis];
    let stride = shape.stride(axis);
    if stride == 1 {
        // Fibers are contiguous.
        for chunk in v.chunks_exact_mut(m) {
            kernel(chunk);
        }
        return Ok(());
    }
    // Strided fibers are moved through a small tile of adjacent fibers so
    // the large array is only ever touched in contiguous runs; the strided
    // writes land in the cache-resident tile.
    const TILE: usize = 8;
    let block = stride * m;
    let mut tile = vec![0.0; TILE * m];
    for outer in v.chunks_exact_mut(block) {
        let mut s = 0;
        while s < stride {
            let width = TILE.min(stride - s);
            for k in 0..m {
                let base = s + k * stride;
                for (t, &x) in outer[base..base + width].iter().enumerate() {
                    tile[t * m + k] = x;
                }
            }
            for row in tile.chunks_exact_mut(m).take(width) {
                kernel(row);
            }
            for k in 0..m {
                let base = s + k * stride;
                for (t, x) in outer[base..base + width].iter_mut().enumerate() {
                    *x = tile[t * m + k];
                }
            }
            s += width;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense;
    use approx::assert_relative_eq;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn random_vec(rng: &mut StdRng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn dst1_small_closed_forms() {
        assert_eq!(dst1(&[3.0]).unwrap(), vec![3.0]);
        let out = dst1(&[1.0, 0.0, 0.0]).unwrap();
        assert_relative_eq!(out[0], 0.5, max_relative = 1e-14);
        assert_relative_eq!(out[1], std::f64::consts::FRAC_1_SQRT_2, max_relative = 1e-14);
        assert_relative_eq!(out[2], 0.5, max_relative = 1e-14);
        assert!(dst1(&[]).is_err());
    }

    #[test]
    fn dst1_matches_dense_sine_matrix() {
        let mut rng = StdRng::seed_from_u64(7);
        let v = random_vec(&mut rng, 100);
        let q = dense::sine_matrix(100);
        let expected = &q * nalgebra::DVector::from_column_slice(&v);
        let got = dst1(&v).unwrap();
        for i in 0..100 {
            assert_relative_eq!(got[i], expected[i], max_relative = 1e-12, epsilon = 1e-13);
        }
    }

    #[test]
    fn sine_transform_single_axis_equals_dst1() {
        let mut rng = StdRng::seed_from_u64(8);
        let v = random_vec(&mut rng, 17);
        let shape = GridShape::new(vec![17]).unwrap();
        assert_eq!(apply_sine_transform(&shape, &v).unwrap(), dst1(&v).unwrap());

        let shape1 = GridShape::new(vec![1, 1, 1]).unwrap();
        let out = apply_sine_transform(&shape1, &[4.25]).unwrap();
        assert_relative_eq!(out[0], 4.25, max_relative = 1e-14);
    }

    #[test]
    fn sine_transform_matches_dense_kronecker() {
        let mut rng = StdRng::seed_from_u64(9);
        let shape = GridShape::new(vec![4, 3]).unwrap();
        let v = random_vec(&mut rng, 12);
        // First dimension fastest: the dense action is Q_3 (x) Q_4.
        let q = dense::kron(&dense::sine_matrix(3), &dense::sine_matrix(4));
        let expected = &q * nalgebra::DVector::from_column_slice(&v);
        let got = apply_sine_transform(&shape, &v).unwrap();
        for i in 0..12 {
            assert_relative_eq!(got[i], expected[i], max_relative = 1e-12, epsilon = 1e-13);
        }
    }

    #[test]
    fn sine_transform_is_involutory() {
        let mut rng = StdRng::seed_from_u64(10);
        for dims in [vec![64], vec![12, 9], vec![5, 6, 7], vec![317, 317]] {
            let shape = GridShape::new(dims).unwrap();
            let v = random_vec(&mut rng, shape.len());
            let twice =
                apply_sine_transform(&shape, &apply_sine_transform(&shape, &v).unwrap()).unwrap();
            let scale = v.iter().fold(0.0f64, |a, x| a.max(x.abs()));
            assert!(max_abs_diff(&twice, &v) <= 1e-12 * scale.max(1.0));
        }
    }

    #[test]
    fn dense_sine_matrix_is_symmetric_and_orthogonal() {
        for m in [2usize, 17, 64, 256] {
            let q = dense::sine_matrix(m);
            assert_eq!(q, q.transpose());
            let qq = &q * &q;
            let mut max_err = 0.0f64;
            for i in 0..m {
                for j in 0..m {
                    let expected = if i == j { 1.0 } else { 0.0 };
                    max_err = max_err.max((qq[(i, j)] - expected).abs());
                }
            }
            assert!(max_err <= 1e-12, "M={m}: ||QQ - I|| = {max_err:.3e}");
        }
    }

    #[test]
    fn tau_eigenvalues_closed_forms() {
        let sym = ToeplitzSymbol::new(vec![2.0]).unwrap();
        assert_eq!(tau_eigenvalues(&sym), vec![2.0]);

        let sym = ToeplitzSymbol::new(vec![3.0, -1.25]).unwrap();
        let eigs = tau_eigenvalues(&sym);
        assert_relative_eq!(eigs[0], 3.0 - 1.25, max_relative = 1e-13);
        assert_relative_eq!(eigs[1], 3.0 + 1.25, max_relative = 1e-13);
    }

    #[test]
    fn tau_eigenvalues_match_dense_tau_matrix() {
        let seq = crate::coefficients::centered_difference_coeffs(1.5, 64).unwrap();
        let sym = seq.to_symbol();
        let dense_tau = tau_matrix_dense(&sym);
        let mut expected = dense::symmetric_eigenvalues(&dense_tau);
        expected.sort_by(f64::total_cmp);
        let mut got = tau_eigenvalues(&sym);
        got.sort_by(f64::total_cmp);
        for (g, e) in got.iter().zip(&expected) {
            assert_relative_eq!(g, e, max_relative = 1e-10, epsilon = 1e-12);
        }
    }

    #[test]
    fn tau_matrix_hankel_layout() {
        let t = [10.0, 1.0, 2.0, 3.0];
        let sym = ToeplitzSymbol::new(t.to_vec()).unwrap();
        let tau = tau_matrix_dense(&sym);
        let toeplitz = dense::toeplitz_dense(&sym);
        let h = &toeplitz - &tau;
        // First column [t2, t3, 0, 0], last column [0, 0, t3, t2].
        assert_eq!(h.column(0).as_slice(), &[2.0, 3.0, 0.0, 0.0]);
        assert_eq!(h.column(3).as_slice(), &[0.0, 0.0, 3.0, 2.0]);

        // M = 2: the Hankel part vanishes.
        let sym2 = ToeplitzSymbol::new(vec![5.0, -1.0]).unwrap();
        assert_eq!(tau_matrix_dense(&sym2), dense::toeplitz_dense(&sym2));
    }

    #[test]
    fn tau_diagonalization_consistency() {
        // Q^T tau(T) Q must be the diagonal of tau eigenvalues.
        for m in [16usize, 64, 128] {
            let seq = crate::coefficients::cubic_spline_coeffs(1.3, m).unwrap();
            let sym = seq.to_symbol();
            let q = dense::sine_matrix(m);
            let d = &q * tau_matrix_dense(&sym) * &q;
            let eigs = tau_eigenvalues(&sym);
            for i in 0..m {
                assert_relative_eq!(d[(i, i)], eigs[i], max_relative = 1e-10, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn toeplitz_matvec_trivial_symbols() {
        let ident = ToeplitzSymbol::new(vec![1.0, 0.0, 0.0, 0.0]).unwrap();
        let v = vec![4.0, -2.0, 0.5, 9.0];
        let out = toeplitz_matvec(&ident, &v).unwrap();
        assert!(max_abs_diff(&out, &v) < 1e-13);

        let stencil = ToeplitzSymbol::new(vec![2.0, -1.0, 0.0]).unwrap();
        let out = toeplitz_matvec(&stencil, &[1.0, 1.0, 1.0]).unwrap();
        assert!(max_abs_diff(&out, &[1.0, 0.0, 1.0]) < 1e-13);
    }

    #[test]
    fn toeplitz_matvec_matches_dense() {
        let mut rng = StdRng::seed_from_u64(11);
        for m in [3usize, 17, 64, 257] {
            let sym = ToeplitzSymbol::new(random_vec(&mut rng, m)).unwrap();
            let dense_t = dense::toeplitz_dense(&sym);
            for _ in 0..50 {
                let v = random_vec(&mut rng, m);
                let expected = &dense_t * nalgebra::DVector::from_column_slice(&v);
                let got = toeplitz_matvec(&sym, &v).unwrap();
                let norm = v.iter().fold(0.0f64, |a, x| a.max(x.abs())).max(1e-30);
                for i in 0..m {
                    assert!(
                        (got[i] - expected[i]).abs() <= 1e-11 * norm * m as f64,
                        "m={m} i={i}: {} vs {}",
                        got[i],
                        expected[i]
                    );
                }
            }
        }
    }

    #[test]
    fn toeplitz_matvec_is_linear() {
        let mut rng = StdRng::seed_from_u64(12);
        let sym = ToeplitzSymbol::new(random_vec(&mut rng, 40)).unwrap();
        let v = random_vec(&mut rng, 40);
        let w = random_vec(&mut rng, 40);
        let (a, b) = (1.7, -0.4);
        let combo: Vec<f64> = v.iter().zip(&w).map(|(x, y)| a * x + b * y).collect();
        let lhs = toeplitz_matvec(&sym, &combo).unwrap();
        let tv = toeplitz_matvec(&sym, &v).unwrap();
        let tw = toeplitz_matvec(&sym, &w).unwrap();
        let rhs: Vec<f64> = tv.iter().zip(&tw).map(|(x, y)| a * x + b * y).collect();
        assert!(max_abs_diff(&lhs, &rhs) < 1e-12);
    }

    #[test]
    fn along_axis_matches_dense_kronecker() {
        let mut rng = StdRng::seed_from_u64(13);

        // shape (3,2), axis 0: (I_2 (x) S_3) v
        let shape = GridShape::new(vec![3, 2]).unwrap();
        let s3 = nalgebra::DMatrix::from_fn(3, 3, |_, _| rng.random_range(-1.0..1.0));
        let v = random_vec(&mut rng, 6);
        let mut got = v.clone();
        apply_along_axis(&shape, 0, &mut got, |fiber| {
            let out = &s3 * nalgebra::DVector::from_column_slice(fiber);
            fiber.copy_from_slice(out.as_slice());
        })
        .unwrap();
        let full = dense::kron(&nalgebra::DMatrix::identity(2, 2), &s3);
        let expected = &full * nalgebra::DVector::from_column_slice(&v);
        assert!(max_abs_diff(&got, expected.as_slice()) < 1e-13);

        // shape (2,3,4), axis 1: (I_4 (x) S_3 (x) I_2) v
        let shape = GridShape::new(vec![2, 3, 4]).unwrap();
        let v = random_vec(&mut rng, 24);
        let mut got = v.clone();
        apply_along_axis(&shape, 1, &mut got, |fiber| {
            let out = &s3 * nalgebra::DVector::from_column_slice(fiber);
            fiber.copy_from_slice(out.as_slice());
        })
        .unwrap();
        let full = dense::kron(
            &dense::kron(&nalgebra::DMatrix::identity(4, 4), &s3),
            &nalgebra::DMatrix::identity(2, 2),
        );
        let expected = &full * nalgebra::DVector::from_column_slice(&v);
        assert!(max_abs_diff(&got, expected.as_slice()) < 1e-13);
    }

    #[test]
    fn along_axis_identity_kernel_is_noop() {
        let shape = GridShape::new(vec![4, 5]).unwrap();
        let v: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let mut got = v.clone();
        apply_along_axis(&shape, 1, &mut got, |_| {}).unwrap();
        assert_eq!(got, v);
        let mut w = v.clone();
        assert!(apply_along_axis(&shape, 2, &mut w, |_| {}).is_err());
    }
}
