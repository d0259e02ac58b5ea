//! The matrix-free system operator
//! A = I_J + sum_i eta_i D_i (I (x) S_{alpha_i, M_i} (x) I),
//! where D_i is the diagonal of the i-th variable coefficient sampled over
//! the grid and S is the symmetric Toeplitz matrix of the discretization
//! coefficients. Applying A costs O(J log J); a dense materializer exists
//! only as a small-scale oracle.

use nalgebra::DMatrix;

use crate::coefficients::{self, Scheme};
use crate::dense;
use crate::error::{check_len, Error, Result};
use crate::transforms::{apply_along_axis, GridShape, ToeplitzSymbol, ToeplitzPlan, Workspace};

/// Uniform grid over a box: interior points only, Dirichlet boundary
/// implicit. Along axis i the spacing is h_i = (r_i - l_i)/(M_i + 1) and the
/// interior points are l_i + h_i, ..., l_i + M_i h_i.
#[derive(Debug, Clone)]
pub struct Grid {
    shape: GridShape,
    bounds: Vec<(f64, f64)>,
    spacing: Vec<f64>,
}

impl Grid {
    pub fn new(bounds: Vec<(f64, f64)>, interior: Vec<usize>) -> Result<Self> {
        if bounds.len() != interior.len() {
            return Err(Error::domain(
                "grid bounds and dimension counts must agree",
            ));
        }
        for &(l, r) in &bounds {
            if !(l < r) || !l.is_finite() || !r.is_finite() {
                return Err(Error::domain(format!("invalid interval ({l}, {r})")));
            }
        }
        let shape = GridShape::new(interior)?;
        let spacing = bounds
            .iter()
            .zip(shape.dims())
            .map(|(&(l, r), &m)| (r - l) / (m as f64 + 1.0))
            .collect();
        Ok(Grid {
            shape,
            bounds,
            spacing,
        })
    }

    pub fn shape(&self) -> &GridShape {
        &self.shape
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing
    }

    pub fn len(&self) -> usize {
        self.shape.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Coordinates of the flat grid index `p`, written into `out`.
    pub fn coords_into(&self, p: usize, out: &mut Vec<f64>) {
        out.clear();
        for axis in 0..self.shape.num_axes() {
            let k = self.shape.axis_index(p, axis);
            out.push(self.bounds[axis].0 + (k as f64 + 1.0) * self.spacing[axis]);
        }
    }

    /// Samples a scalar function at every interior grid point, in grid order.
    pub fn sample(&self, f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
        let mut coords = Vec::with_capacity(self.shape.num_axes());
        (0..self.len())
            .map(|p| {
                self.coords_into(p, &mut coords);
                f(&coords)
            })
            .collect()
    }
}

struct DimensionTerm {
    eta: f64,
    symbol: ToeplitzSymbol,
    diag: Vec<f64>,
    diag_bounds: (f64, f64),
    plan: ToeplitzPlan,
}

/// Matrix-free representation of the system matrix. Immutable after
/// construction; `apply` is safe to call concurrently.
pub struct SfdeOperator {
    shape: GridShape,
    terms: Vec<DimensionTerm>,
}

impl std::fmt::Debug for SfdeOperator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SfdeOperator")
            .field("shape", &self.shape)
            .field("eta", &self.terms.iter().map(|t| t.eta).collect::<Vec<_>>())
            .finish_non_exhaustive()
    }
}

impl SfdeOperator {
    /// Assembles the operator from raw per-dimension data: the scale
    /// eta_i = dt/h_i^{alpha_i}, the Toeplitz symbol of length M_i and the
    /// sampled coefficient diagonal of length J (all entries positive).
    pub fn from_parts(
        shape: GridShape,
        parts: Vec<(f64, ToeplitzSymbol, Vec<f64>)>,
    ) -> Result<Self> {
        if parts.len() != shape.num_axes() {
            return Err(Error::domain(format!(
                "expected {} dimension terms, got {}",
                shape.num_axes(),
                parts.len()
            )));
        }
        let j = shape.len();
        let mut terms = Vec::with_capacity(parts.len());
        for (axis, (eta, symbol, diag)) in parts.into_iter().enumerate() {
            if !(eta >= 0.0) || !eta.is_finite() {
                return Err(Error::domain(format!("eta for axis {axis} must be >= 0")));
            }
            check_len(shape.dims()[axis], symbol.len())?;
            check_len(j, diag.len())?;
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for (p, &d) in diag.iter().enumerate() {
                if !(d > 0.0) {
                    return Err(Error::domain(format!(
                        "coefficient {axis} is non-positive ({d}) at grid index {p}"
                    )));
                }
                lo = lo.min(d);
                hi = hi.max(d);
            }
            let plan = ToeplitzPlan::new(&symbol);
            terms.push(DimensionTerm {
                eta,
                symbol,
                diag,
                diag_bounds: (lo, hi),
                plan,
            });
        }
        Ok(SfdeOperator { shape, terms })
    }

    pub fn shape(&self) -> &GridShape {
        &self.shape
    }

    pub fn num_dimensions(&self) -> usize {
        self.terms.len()
    }

    pub fn eta(&self, axis: usize) -> f64 {
        self.terms[axis].eta
    }

    pub fn symbol(&self, axis: usize) -> &ToeplitzSymbol {
        &self.terms[axis].symbol
    }

    pub fn diagonal(&self, axis: usize) -> &[f64] {
        &self.terms[axis].diag
    }

    /// Sampled (min, max) of each coefficient over the grid.
    pub fn coefficient_bounds(&self) -> Vec<(f64, f64)> {
        self.terms.iter().map(|t| t.diag_bounds).collect()
    }

    /// A v = v + sum_i eta_i d_i .* (Toeplitz_i along axis i) v.
    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        check_len(self.shape.len(), v.len())?;
        let mut out = v.to_vec();
        let mut tmp = vec![0.0; v.len()];
        let mut work = Workspace::default();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        for (axis, term) in self.terms.iter().enumerate() {
            if term.eta == 0.0 {
                continue;
            }
            tmp.copy_from_slice(v);
            let mut max_im = 0.0f64;
            apply_along_axis(&self.shape, axis, &mut tmp, |fiber| {
                max_im = max_im.max(term.plan.apply(fiber, &mut work));
            })?;
            if max_im > 1e-10 * norm.max(f64::MIN_POSITIVE) {
                return Err(Error::numerical(format!(
                    "imaginary residue {max_im:.3e} in Toeplitz product along axis {axis}"
                )));
            }
            for ((o, t), d) in out.iter_mut().zip(&tmp).zip(&term.diag) {
                *o += term.eta * d * t;
            }
        }
        Ok(out)
    }
}

/// Borrowed coefficient function of the grid coordinates.
pub type CoeffFn = dyn Fn(&[f64]) -> f64;

/// Builds the operator for one implicit time step of the diffusion problem:
/// samples each coefficient at the interior grid points, forms
/// eta_i = dt/h_i^{alpha_i} and the scheme's Toeplitz symbols.
pub fn build_operator(
    grid: &Grid,
    dt: f64,
    alphas: &[f64],
    scheme: Scheme,
    coefficient_fns: &[&CoeffFn],
) -> Result<SfdeOperator> {
    let m = grid.shape().num_axes();
    if alphas.len() != m || coefficient_fns.len() != m {
        return Err(Error::domain(
            "alphas and coefficient functions must match the grid dimension",
        ));
    }
    if !(dt > 0.0) {
        return Err(Error::domain("time step must be positive"));
    }
    let mut parts = Vec::with_capacity(m);
    for axis in 0..m {
        let eta = dt / grid.spacing()[axis].powf(alphas[axis]);
        let symbol =
            coefficients::coeffs(scheme, alphas[axis], grid.shape().dims()[axis])?.to_symbol();
        let diag = grid.sample(coefficient_fns[axis]);
        if let Some((p, &d)) = diag.iter().enumerate().find(|(_, &d)| !(d > 0.0)) {
            let mut coords = Vec::new();
            grid.coords_into(p, &mut coords);
            return Err(Error::domain(format!(
                "coefficient {axis} is non-positive ({d}) at grid point {coords:?}"
            )));
        }
        parts.push((eta, symbol, diag));
    }
    SfdeOperator::from_parts(grid.shape().clone(), parts)
}

/// Guard for the dense materializer.
const DENSE_GUARD: usize = 20_000;
/// Guard for dense eigenvalue extraction.
const EIG_GUARD: usize = 4_096;

/// Exact dense assembly I + sum_i eta_i diag(d_i) (I (x) S_i (x) I).
/// Testing oracle only; refuses above J = 20000.
pub fn materialize_dense(op: &SfdeOperator) -> Result<DMatrix<f64>> {
    let j = op.shape().len();
    if j > DENSE_GUARD {
        return Err(Error::TooLarge(format!(
            "dense materialization refused for J = {j} > {DENSE_GUARD}"
        )));
    }
    let mut a = DMatrix::identity(j, j);
    for (axis, term) in op.terms.iter().enumerate() {
        let s = dense::toeplitz_dense(&term.symbol);
        let axis_op = dense::axis_operator_dense(op.shape(), axis, &s);
        for row in 0..j {
            let w = term.eta * term.diag[row];
            for col in 0..j {
                a[(row, col)] += w * axis_op[(row, col)];
            }
        }
    }
    Ok(a)
}

/// Extreme eigenvalues of the symmetric part H(A) = (A + A^T)/2 and the
/// spectral radius of the skew part S(A) = (A - A^T)/2. Dense, small J only.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct SymmetricPartSpectrum {
    pub h_min: f64,
    pub h_max: f64,
    pub skew_radius: f64,
}

pub fn symmetric_part_extreme_eigs(op: &SfdeOperator) -> Result<SymmetricPartSpectrum> {
    let j = op.shape().len();
    if j > EIG_GUARD {
        return Err(Error::TooLarge(format!(
            "dense eigenvalue extraction refused for J = {j} > {EIG_GUARD}"
        )));
    }
    let a = materialize_dense(op)?;
    let at = a.transpose();
    let h = (&a + &at) * 0.5;
    let s = (&a - &at) * 0.5;
    let (h_min, h_max) = dense::symmetric_eig_extremes(&h);
    let skew_radius = dense::skew_spectral_radius(&s);
    Ok(SymmetricPartSpectrum {
        h_min,
        h_max,
        skew_radius,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::centered_difference_coeffs;
    use approx::assert_relative_eq;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn random_operator(rng: &mut StdRng, dims: Vec<usize>) -> SfdeOperator {
        let shape = GridShape::new(dims.clone()).unwrap();
        let j = shape.len();
        let parts = dims
            .iter()
            .map(|&m| {
                let gamma = rng.random_range(1.05..1.95);
                let symbol = centered_difference_coeffs(gamma, m).unwrap().to_symbol();
                let eta = rng.random_range(0.01..2.0);
                let diag: Vec<f64> = (0..j).map(|_| rng.random_range(0.5..3.0)).collect();
                (eta, symbol, diag)
            })
            .collect();
        SfdeOperator::from_parts(shape, parts).unwrap()
    }

    #[test]
    fn zero_eta_is_identity() {
        let shape = GridShape::new(vec![5, 4]).unwrap();
        let symbol_x = ToeplitzSymbol::new(vec![2.0, -1.0, 0.0, 0.0, 0.0]).unwrap();
        let symbol_y = ToeplitzSymbol::new(vec![2.0, -1.0, 0.0, 0.0]).unwrap();
        let op = SfdeOperator::from_parts(
            shape,
            vec![
                (0.0, symbol_x, vec![1.0; 20]),
                (0.0, symbol_y, vec![1.0; 20]),
            ],
        )
        .unwrap();
        let v: Vec<f64> = (0..20).map(|i| i as f64 - 3.0).collect();
        assert_eq!(op.apply(&v).unwrap(), v);
    }

    #[test]
    fn eta_formula_example() {
        // dt = 1/8, h = 1/4, alpha = 1.5 gives eta = (1/8) * 4^{1.5} = 1.
        let grid = Grid::new(vec![(0.0, 1.0)], vec![3]).unwrap();
        assert_relative_eq!(grid.spacing()[0], 0.25);
        let one = |_: &[f64]| 1.0;
        let op = build_operator(
            &grid,
            0.125,
            &[1.5],
            Scheme::CenteredDifference,
            &[&one],
        )
        .unwrap();
        assert_relative_eq!(op.eta(0), 1.0, max_relative = 1e-14);
    }

    #[test]
    fn constant_coefficients_give_unit_diagonals_and_symmetry() {
        let grid = Grid::new(vec![(0.0, 2.0), (0.0, 2.0)], vec![6, 6]).unwrap();
        let one = |_: &[f64]| 1.0;
        let op = build_operator(
            &grid,
            0.1,
            &[1.5, 1.5],
            Scheme::CenteredDifference,
            &[&one, &one],
        )
        .unwrap();
        assert!(op.diagonal(0).iter().all(|&d| d == 1.0));
        let a = materialize_dense(&op).unwrap();
        let asym = (&a - a.transpose()).abs().max();
        assert!(asym < 1e-12);
    }

    #[test]
    fn build_rejects_non_positive_coefficient() {
        let grid = Grid::new(vec![(0.0, 1.0)], vec![7]).unwrap();
        let sign_flip = |x: &[f64]| x[0] - 0.5;
        let err = build_operator(
            &grid,
            0.1,
            &[1.5],
            Scheme::CenteredDifference,
            &[&sign_flip],
        )
        .unwrap_err();
        assert!(matches!(err, Error::Domain(_)), "{err}");
    }

    #[test]
    fn example1_coefficient_bounds() {
        // d(x,y) = 1 + x^a + (2-x)^a + y^b + (2-y)^b on (0,2)^2 stays between
        // 1 and 1 + 2 * 2^a when a = b.
        let alpha = 1.5;
        let grid = Grid::new(vec![(0.0, 2.0), (0.0, 2.0)], vec![15, 15]).unwrap();
        let d = move |p: &[f64]| {
            1.0 + p[0].powf(alpha)
                + (2.0 - p[0]).powf(alpha)
                + p[1].powf(alpha)
                + (2.0 - p[1]).powf(alpha)
        };
        let op = build_operator(
            &grid,
            0.1,
            &[alpha, alpha],
            Scheme::CenteredDifference,
            &[&d, &d],
        )
        .unwrap();
        let (lo, hi) = op.coefficient_bounds()[0];
        assert!(lo >= 1.0);
        assert!(hi <= 1.0 + 2.0 * 2f64.powf(alpha));
    }

    #[test]
    fn matrix_free_apply_matches_dense_oracle() {
        let mut rng = StdRng::seed_from_u64(21);
        let shapes: [Vec<usize>; 5] = [
            vec![9],
            vec![31],
            vec![8, 9],
            vec![25, 25],
            vec![4, 5, 6],
        ];
        for dims in shapes {
            for _ in 0..5 {
                let op = random_operator(&mut rng, dims.clone());
                let dense_a = materialize_dense(&op).unwrap();
                let j = op.shape().len();
                let v: Vec<f64> = (0..j).map(|_| rng.random_range(-1.0..1.0)).collect();
                let fast = op.apply(&v).unwrap();
                let slow = dense::matvec(&dense_a, &v);
                let scale = slow.iter().fold(0.0f64, |a, x| a.max(x.abs()));
                for i in 0..j {
                    assert!(
                        (fast[i] - slow[i]).abs() <= 1e-10 * scale.max(1.0),
                        "dims={dims:?} i={i}"
                    );
                }
            }
        }
    }

    #[test]
    fn apply_is_linear() {
        let mut rng = StdRng::seed_from_u64(22);
        let op = random_operator(&mut rng, vec![7, 6]);
        let j = op.shape().len();
        let v: Vec<f64> = (0..j).map(|_| rng.random_range(-1.0..1.0)).collect();
        let w: Vec<f64> = (0..j).map(|_| rng.random_range(-1.0..1.0)).collect();
        let (a, b) = (0.3, -2.1);
        let combo: Vec<f64> = v.iter().zip(&w).map(|(x, y)| a * x + b * y).collect();
        let lhs = op.apply(&combo).unwrap();
        let av = op.apply(&v).unwrap();
        let aw = op.apply(&w).unwrap();
        for i in 0..j {
            assert_relative_eq!(lhs[i], a * av[i] + b * aw[i], epsilon = 1e-12);
        }
    }

    #[test]
    fn one_point_dense_matrix() {
        let shape = GridShape::new(vec![1]).unwrap();
        let symbol = ToeplitzSymbol::new(vec![1.7]).unwrap();
        let op = SfdeOperator::from_parts(shape, vec![(2.0, symbol, vec![3.0])]).unwrap();
        let a = materialize_dense(&op).unwrap();
        assert_relative_eq!(a[(0, 0)], 1.0 + 2.0 * 3.0 * 1.7, max_relative = 1e-14);
    }

    #[test]
    fn interior_row_sums_exceed_one_for_unit_coefficients() {
        // With d == 1 the row sums are 1 + sum_i eta_i (s_0 + partial sums),
        // which stay above 1 because the weighted partial sums are positive.
        let grid = Grid::new(vec![(0.0, 1.0), (0.0, 1.0)], vec![10, 10]).unwrap();
        let one = |_: &[f64]| 1.0;
        for scheme in Scheme::ALL {
            let op =
                build_operator(&grid, 0.05, &[1.4, 1.8], scheme, &[&one, &one]).unwrap();
            let a = materialize_dense(&op).unwrap();
            for row in 0..a.nrows() {
                let sum: f64 = a.row(row).iter().sum();
                assert!(sum > 1.0, "{scheme} row {row}: sum = {sum}");
            }
        }
    }

    #[test]
    fn toeplitz_blocks_are_positive_definite() {
        // The generated S matrices are positive definite for every scheme.
        for scheme in Scheme::ALL {
            for &gamma in &[1.1, 1.5, 1.9] {
                for m in [16usize, 64, 256] {
                    let s = crate::coefficients::coeffs(scheme, gamma, m)
                        .unwrap()
                        .to_symbol();
                    let (min, _) = dense::symmetric_eig_extremes(&dense::toeplitz_dense(&s));
                    assert!(min > 0.0, "{scheme} gamma={gamma} M={m}: min eig {min}");
                }
            }
        }
    }

    #[test]
    fn symmetric_part_of_constant_coefficient_operator() {
        let grid = Grid::new(vec![(0.0, 1.0), (0.0, 1.0)], vec![5, 5]).unwrap();
        let one = |_: &[f64]| 1.0;
        let op = build_operator(
            &grid,
            0.1,
            &[1.3, 1.7],
            Scheme::CenteredDifference,
            &[&one, &one],
        )
        .unwrap();
        let spec = symmetric_part_extreme_eigs(&op).unwrap();
        assert!(spec.skew_radius < 1e-10);
        assert!(spec.h_min >= 1.0 - 1e-10);

        // Identity operator: eta = 0 everywhere.
        let shape = GridShape::new(vec![4]).unwrap();
        let sym = ToeplitzSymbol::new(vec![1.0, 0.0, 0.0, 0.0]).unwrap();
        let id = SfdeOperator::from_parts(shape, vec![(0.0, sym, vec![1.0; 4])]).unwrap();
        let spec = symmetric_part_extreme_eigs(&id).unwrap();
        assert_relative_eq!(spec.h_min, 1.0, max_relative = 1e-12);
        assert_relative_eq!(spec.h_max, 1.0, max_relative = 1e-12);
        assert!(spec.skew_radius < 1e-12);
    }

    #[test]
    fn dense_guard_refuses_large_grids() {
        let shape = GridShape::new(vec![200, 200]).unwrap();
        let symbol = ToeplitzSymbol::new(vec![1.0; 200]).unwrap();
        let op = SfdeOperator::from_parts(
            shape,
            vec![
                (1.0, symbol.clone(), vec![1.0; 40_000]),
                (1.0, symbol, vec![1.0; 40_000]),
            ],
        )
        .unwrap();
        assert!(matches!(materialize_dense(&op), Err(Error::TooLarge(_))));
        assert!(matches!(
            symmetric_part_extreme_eigs(&op),
            Err(Error::TooLarge(_))
        ));
    }
}
