//! Numerical verification of the spectral structure behind the tau
//! preconditioner, and the constants of the linear convergence-rate bound
//! for the preconditioned GMRES iteration.
//!
//! Everything here checks computable surrogates: coefficient bounds come
//! from grid scans, Lipschitz seminorms from neighbour difference quotients
//! (a lower estimate of the true seminorm), and the sequence decay norm from
//! a long finite prefix. Dense eigenvalue work sits behind size guards.

use serde::Serialize;

use nalgebra::DMatrix;

use crate::coefficients::{self, Scheme};
use crate::dense;
use crate::error::{Error, Result};
use crate::krylov::{gmres, SolverConfig};
use crate::preconditioners::build_tau;
use crate::problems::{build_problem_operator, ProblemSpec};
use crate::transforms::{tau_eigenvalues, GridShape};

/// Prefix length used for the decay-norm proxy sup_k |s_k| (1+k)^{1+gamma}.
pub const DECAY_NORM_PREFIX: usize = 4096;

/// Per-dimension data feeding the convergence-constant formulas.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct DimensionInputs {
    /// Sampled coefficient bounds 0 < lower <= upper.
    pub lower: f64,
    pub upper: f64,
    /// Lipschitz seminorm estimate of the coefficient along its own axis.
    pub lipschitz: f64,
    /// Domain extent r_i - l_i.
    pub extent: f64,
    /// Fractional order of the dimension.
    pub alpha: f64,
    /// Finite-prefix decay norm of the coefficient sequence.
    pub decay_norm: f64,
}

/// The constants of the convergence-rate bound
/// ||r_k|| <= theta^k ||rhat_0|| for the tau-preconditioned iteration.
#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceConstants {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub b1: f64,
    pub b2: f64,
    pub b3: f64,
    /// min{(1 - c1)/b1, (c2 - 1)/b2}.
    pub c0: f64,
    /// Time-step threshold min{c0, c3/b3} under which the bound applies.
    /// Infinite when every coefficient is constant.
    pub c_star: f64,
    /// The max-form variant of the threshold; the safe minimum above is what
    /// the checks use.
    pub c_star_max_form: f64,
    /// Contraction factor sqrt(1 - c1^2/(3 c1 c2 + 9 c3^2)), always in (0,1).
    pub theta: f64,
    pub per_dimension: Vec<DimensionInputs>,
}

/// Evaluates the constants from per-dimension inputs.
pub fn convergence_constants(dims: &[DimensionInputs]) -> Result<ConvergenceConstants> {
    if dims.is_empty() {
        return Err(Error::domain("need at least one dimension"));
    }
    for d in dims {
        if !(d.lower > 0.0 && d.lower <= d.upper) {
            return Err(Error::domain(format!(
                "degenerate coefficient bounds ({}, {})",
                d.lower, d.upper
            )));
        }
        if !(d.alpha > 1.0 && d.alpha < 2.0) {
            return Err(Error::domain(format!("order {} outside (1, 2)", d.alpha)));
        }
    }
    let sqrt2 = std::f64::consts::SQRT_2;
    let c1 = dims
        .iter()
        .map(|d| (d.lower / (2.0 * d.upper)).sqrt())
        .fold(f64::INFINITY, f64::min);
    let c2 = dims
        .iter()
        .map(|d| (2.0 * d.upper / d.lower).sqrt())
        .fold(0.0f64, f64::max);
    let b1: f64 = dims
        .iter()
        .map(|d| {
            d.decay_norm * d.lipschitz.powi(2) * d.extent.powi(2)
                / (4.0 * (1.0 - sqrt2 / 2.0) * d.lower * (2.0 - d.alpha))
        })
        .sum();
    let b2: f64 = dims
        .iter()
        .map(|d| {
            d.decay_norm * d.lipschitz.powi(2) * d.extent.powi(2)
                / (4.0 * (sqrt2 - 1.0) * d.upper * (2.0 - d.alpha))
        })
        .sum();
    let c3 = dims
        .iter()
        .map(|d| {
            let dbar = (d.lower * d.upper).sqrt();
            (d.upper.powi(2) + d.lower.powi(2) + 1.0) / (2.0 * dbar)
        })
        .fold(0.0f64, f64::max);
    let b3: f64 = dims
        .iter()
        .map(|d| {
            d.decay_norm * d.upper.powi(2) * d.lipschitz.powi(2) * d.extent.powf(2.0 + d.alpha)
                / (d.lower.powi(2) * (2.0 - d.alpha))
        })
        .sum();
    let ratio = |num: f64, den: f64| {
        if den == 0.0 {
            f64::INFINITY
        } else {
            num / den
        }
    };
    let r1 = ratio(1.0 - c1, b1);
    let r2 = ratio(c2 - 1.0, b2);
    let r3 = ratio(c3, b3);
    let c0 = r1.min(r2);
    let c_star = c0.min(r3);
    let c_star_max_form = r1.max(r2).max(r3);
    let theta = (1.0 - c1 * c1 / (3.0 * c1 * c2 + 9.0 * c3 * c3)).sqrt();
    debug_assert!(theta > 0.0 && theta < 1.0);
    Ok(ConvergenceConstants {
        c1,
        c2,
        c3,
        b1,
        b2,
        b3,
        c0,
        c_star,
        c_star_max_form,
        theta,
        per_dimension: dims.to_vec(),
    })
}

/// Largest neighbour difference quotient of a sampled function along `axis`:
/// a lower estimate of its Lipschitz seminorm in that direction.
pub fn lipschitz_seminorm_estimate(
    values: &[f64],
    shape: &GridShape,
    axis: usize,
    spacing: f64,
) -> Result<f64> {
    crate::error::check_len(shape.len(), values.len())?;
    if axis >= shape.num_axes() {
        return Err(Error::domain("axis out of range"));
    }
    let m = shape.dims()[axis];
    if m < 2 {
        return Err(Error::domain(
            "Lipschitz estimate needs at least two points along the axis",
        ));
    }
    if !(spacing > 0.0) {
        return Err(Error::domain("grid spacing must be positive"));
    }
    let stride = shape.stride(axis);
    let mut max_quot = 0.0f64;
    for p in 0..shape.len() {
        if shape.axis_index(p, axis) + 1 < m {
            let quot = (values[p + stride] - values[p]).abs() / spacing;
            max_quot = max_quot.max(quot);
        }
    }
    Ok(max_quot)
}

/// Derives all constant inputs for a problem by scanning its own grid.
pub fn constants_for_problem(
    spec: &ProblemSpec,
    scheme: Scheme,
) -> Result<ConvergenceConstants> {
    spec.validate()?;
    let grid = spec.grid()?;
    let mut dims = Vec::with_capacity(spec.dim());
    for axis in 0..spec.dim() {
        let samples = grid.sample(|p| (spec.coefficients[axis])(p));
        let lower = samples.iter().copied().fold(f64::INFINITY, f64::min);
        let upper = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lipschitz =
            lipschitz_seminorm_estimate(&samples, grid.shape(), axis, grid.spacing()[axis])?;
        let alpha = spec.alphas[axis];
        let decay_norm = coefficients::coeffs(scheme, alpha, DECAY_NORM_PREFIX)?.decay_norm();
        dims.push(DimensionInputs {
            lower,
            upper,
            lipschitz,
            extent: spec.bounds[axis].1 - spec.bounds[axis].0,
            alpha,
            decay_norm,
        });
    }
    convergence_constants(&dims)
}

/// Result of the generalized eigenvalue check of (S, tau(S)).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct IntervalReport {
    pub min: f64,
    pub max: f64,
    pub passed: bool,
}

/// Checks that the spectrum of tau(S)^{-1/2} S tau(S)^{-1/2} lies strictly
/// inside (1/2, 3/2). Dense; refuses above M = 1024.
pub fn tau_spectrum_check(scheme: Scheme, gamma: f64, m: usize) -> Result<IntervalReport> {
    if m > 1024 {
        return Err(Error::TooLarge(format!("tau spectrum check limited to M <= 1024, got {m}")));
    }
    if m == 0 {
        return Err(Error::domain("need M >= 1"));
    }
    let sym = coefficients::coeffs(scheme, gamma, m)?.to_symbol();
    let s = dense::toeplitz_dense(&sym);
    let q = dense::sine_matrix(m);
    let lam = tau_eigenvalues(&sym);
    if lam.iter().any(|&l| l <= 0.0) {
        return Err(Error::numerical("tau matrix is not positive definite"));
    }
    // tau^{-1/2} = Q diag(lam^{-1/2}) Q.
    let scaled = {
        let mut qs = q.clone();
        for (j, mut col) in qs.column_iter_mut().enumerate() {
            col *= 1.0 / lam[j].sqrt();
        }
        qs * &q
    };
    let b = &scaled * s * &scaled;
    let sym_b = (&b + b.transpose()) * 0.5;
    let (min, max) = dense::symmetric_eig_extremes(&sym_b);
    Ok(IntervalReport {
        min,
        max,
        passed: min > 0.5 && max < 1.5,
    })
}

/// Result of the commutator-decay check.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CommutatorReport {
    /// ||Z S + S Z - 2 Z^{1/2} S Z^{1/2}||_2, computed densely.
    pub delta_norm: f64,
    /// The proven envelope mu_gamma(decay norm, b_tilde, b_check)/(M+1)^gamma.
    pub bound: f64,
    /// delta_norm * (M+1)^gamma, the quantity that stays bounded in M.
    pub scaled_norm: f64,
    pub passed: bool,
}

/// Verifies ||Delta_S(Z)||_2 <= mu_gamma(...)/(M+1)^gamma for a positive
/// diagonal Z sampled from a coefficient. Dense; refuses above M = 512.
pub fn commutator_bound_check(z: &[f64], scheme: Scheme, gamma: f64) -> Result<CommutatorReport> {
    let m = z.len();
    if m > 512 {
        return Err(Error::TooLarge(format!("commutator check limited to M <= 512, got {m}")));
    }
    if m < 2 {
        return Err(Error::domain("need at least two diagonal entries"));
    }
    let min_z = z.iter().copied().fold(f64::INFINITY, f64::min);
    if !(min_z > 0.0) {
        return Err(Error::domain("diagonal entries must be positive"));
    }
    let s = coefficients::coeffs(scheme, gamma, m.max(DECAY_NORM_PREFIX))?;
    let decay_norm = s.decay_norm();
    let col = s.values();

    // Delta entries: (sqrt(z_i) - sqrt(z_j))^2 s_{|i-j|}.
    let delta = DMatrix::from_fn(m, m, |i, j| {
        let d = z[i].sqrt() - z[j].sqrt();
        d * d * col[i.abs_diff(j)]
    });
    let delta_norm = dense::symmetric_two_norm(&delta);

    // nabla(Z) = max |z_i - z_j| / |i - j|; the envelope takes
    // b_tilde = (M+1) nabla(Z).
    let mut nabla = 0.0f64;
    for i in 0..m {
        for j in (i + 1)..m {
            nabla = nabla.max((z[i] - z[j]).abs() / (j - i) as f64);
        }
    }
    let b_tilde = (m as f64 + 1.0) * nabla;
    let mu = decay_norm * b_tilde * b_tilde / (2.0 * min_z * (2.0 - gamma));
    let weight = (m as f64 + 1.0).powf(gamma);
    let bound = mu / weight;
    Ok(CommutatorReport {
        delta_norm,
        bound,
        scaled_norm: delta_norm * weight,
        passed: delta_norm <= bound * (1.0 + 1e-12),
    })
}

/// Result of the dense spectrum check of the preconditioned operator.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct PreconditionedSpectrumReport {
    pub h_min: f64,
    pub h_max: f64,
    pub skew_radius: f64,
    /// Required envelope: h in [c1/2, 3 c2/2], skew radius <= 3 c3/2.
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    /// Whether dt <= c_star, the hypothesis of the linear-rate bound. When false
    /// the checks still run informationally.
    pub hypothesis_met: bool,
    pub passed: bool,
}

/// Densely forms G = P^{-1/2} A P^{-1/2} for the tau preconditioner with
/// geometric-mean coefficients, splits it into symmetric and skew parts and
/// compares their spectra against the constant envelopes. Refuses above
/// J = 4096.
pub fn preconditioned_spectrum_check(
    spec: &ProblemSpec,
    scheme: Scheme,
) -> Result<PreconditionedSpectrumReport> {
    spec.validate()?;
    let grid = spec.grid()?;
    let j = grid.len();
    if j > 4096 {
        return Err(Error::TooLarge(format!("spectrum check limited to J <= 4096, got {j}")));
    }
    let op = build_problem_operator(spec, scheme, &grid)?;
    let p = build_tau(&op, &op.coefficient_bounds())?;
    let constants = constants_for_problem(spec, scheme)?;
    let hypothesis_met = spec.dt() <= constants.c_star;

    let mut cols = Vec::with_capacity(j);
    let mut e = vec![0.0; j];
    for c in 0..j {
        e[c] = 1.0;
        let half = p.apply_power(&e, -0.5)?;
        let mid = op.apply(&half)?;
        cols.push(p.apply_power(&mid, -0.5)?);
        e[c] = 0.0;
    }
    let g = DMatrix::from_fn(j, j, |r, c| cols[c][r]);
    let gt = g.transpose();
    let h = (&g + &gt) * 0.5;
    let s = (&g - &gt) * 0.5;
    let (h_min, h_max) = dense::symmetric_eig_extremes(&h);
    let skew_radius = dense::skew_spectral_radius(&s);

    let slack = 1.0 + 1e-10;
    let passed = h_min * slack >= constants.c1 / 2.0
        && h_max <= 1.5 * constants.c2 * slack
        && skew_radius <= 1.5 * constants.c3 * slack;
    Ok(PreconditionedSpectrumReport {
        h_min,
        h_max,
        skew_radius,
        c1: constants.c1,
        c2: constants.c2,
        c3: constants.c3,
        hypothesis_met,
        passed,
    })
}

/// Result of checking the linear-rate guarantee on actual GMRES residuals.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ThetaRateReport {
    pub theta: f64,
    pub c_star: f64,
    pub dt: f64,
    pub hypothesis_met: bool,
    /// Largest observed (||r_k||/||rhat_0||)^{1/k} over all steps.
    pub max_contraction: f64,
    pub steps_checked: usize,
    pub passed: bool,
}

/// Runs the warm-started time stepping with the geometric-mean tau
/// preconditioner (the configuration the rate analysis is stated for) and
/// verifies ||r_k|| <= theta^k ||rhat_0|| at every step, where
/// rhat_0 = P^{1/2} r_0 is the auxiliary initial residual.
pub fn theta_rate_check(
    spec: &ProblemSpec,
    scheme: Scheme,
    cfg: &SolverConfig,
) -> Result<ThetaRateReport> {
    spec.validate()?;
    let constants = constants_for_problem(spec, scheme)?;
    let dt = spec.dt();
    let hypothesis_met = dt <= constants.c_star;
    let grid = spec.grid()?;
    let op = build_problem_operator(spec, scheme, &grid)?;
    let p = build_tau(&op, &op.coefficient_bounds())?;

    let mut u = grid.sample(|pt| (spec.initial)(pt));
    let mut max_contraction = 0.0f64;
    let mut steps_checked = 0usize;
    for n in 1..=spec.time_steps {
        let t = n as f64 * dt;
        let f_n = grid.sample(|pt| (spec.source)(pt, t));
        let b: Vec<f64> = u.iter().zip(&f_n).map(|(ui, fi)| ui + dt * fi).collect();

        // rhat_0 = P^{1/2} r_0 with r_0 the preconditioned residual at the
        // warm start.
        let au = op.apply(&u)?;
        let resid: Vec<f64> = b.iter().zip(&au).map(|(bi, ai)| bi - ai).collect();
        let r0 = p.apply_inverse(&resid)?;
        let rhat0 = p.apply_power(&r0, 0.5)?;
        let rhat0_norm = rhat0.iter().map(|x| x * x).sum::<f64>().sqrt();

        let result = gmres(|v| op.apply(v), |v| p.apply_inverse(v), &b, &u, cfg)?;
        for (k, rk) in result.residual_norms.iter().enumerate().skip(1) {
            if rhat0_norm > 0.0 {
                let contraction = (rk / rhat0_norm).powf(1.0 / k as f64);
                max_contraction = max_contraction.max(contraction);
            }
        }
        steps_checked += 1;
        u = result.solution;
    }
    let passed = max_contraction <= constants.theta + 1e-10;
    Ok(ThetaRateReport {
        theta: constants.theta,
        c_star: constants.c_star,
        dt,
        hypothesis_met,
        max_contraction,
        steps_checked,
        passed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn unit_dim(alpha: f64) -> DimensionInputs {
        DimensionInputs {
            lower: 1.0,
            upper: 1.0,
            lipschitz: 0.0,
            extent: 1.0,
            alpha,
            decay_norm: 1.0,
        }
    }

    #[test]
    fn constant_coefficient_constants() {
        let c = convergence_constants(&[unit_dim(1.5), unit_dim(1.9)]).unwrap();
        assert_relative_eq!(c.c1, (0.5f64).sqrt(), max_relative = 1e-14);
        assert_relative_eq!(c.c2, 2f64.sqrt(), max_relative = 1e-14);
        assert_relative_eq!(c.c3, 1.5, max_relative = 1e-14);
        assert_eq!(c.b1, 0.0);
        assert_eq!(c.b2, 0.0);
        assert_eq!(c.b3, 0.0);
        assert!(c.c_star.is_infinite());
        assert!(c.theta > 0.0 && c.theta < 1.0);
    }

    #[test]
    fn constants_reject_degenerate_bounds() {
        let mut d = unit_dim(1.5);
        d.lower = 0.0;
        assert!(convergence_constants(&[d]).is_err());
    }

    #[test]
    fn lipschitz_estimates() {
        let shape = GridShape::new(vec![9, 9]).unwrap();
        let constant = vec![3.0; 81];
        assert_eq!(
            lipschitz_seminorm_estimate(&constant, &shape, 0, 0.1).unwrap(),
            0.0
        );
        // w(x, y) = x on a grid with spacing h: quotient is exactly 1.
        let h = 0.1;
        let mut linear = vec![0.0; 81];
        for (p, v) in linear.iter_mut().enumerate() {
            let i = shape.axis_index(p, 0);
            *v = (i as f64 + 1.0) * h;
        }
        assert_relative_eq!(
            lipschitz_seminorm_estimate(&linear, &shape, 0, h).unwrap(),
            1.0,
            max_relative = 1e-13
        );
        assert!(lipschitz_seminorm_estimate(&linear, &shape, 2, h).is_err());
    }

    #[test]
    fn lipschitz_estimate_converges_for_example1_e() {
        // e(x,y) = 2 + cos(pi x/5) + cos(pi y/5) on (0,2)^2: along y the
        // seminorm estimate stays below pi/5 and approaches
        // (pi/5) sin(2 pi/5) under refinement.
        let pi = std::f64::consts::PI;
        let sup = pi / 5.0 * (2.0 * pi / 5.0).sin();
        let mut last = 0.0;
        for m in [16usize, 64, 256] {
            let shape = GridShape::new(vec![m, m]).unwrap();
            let h = 2.0 / (m as f64 + 1.0);
            let mut vals = vec![0.0; m * m];
            for (p, v) in vals.iter_mut().enumerate() {
                let x = (shape.axis_index(p, 0) as f64 + 1.0) * h;
                let y = (shape.axis_index(p, 1) as f64 + 1.0) * h;
                *v = 2.0 + (pi * x / 5.0).cos() + (pi * y / 5.0).cos();
            }
            let est = lipschitz_seminorm_estimate(&vals, &shape, 1, h).unwrap();
            assert!(est <= pi / 5.0 + 1e-12);
            assert!(est >= last);
            last = est;
        }
        assert!(last >= 0.98 * sup, "estimate {last} vs sup {sup}");
    }

    #[test]
    fn tau_spectrum_tiny_cases() {
        // M = 2: the Hankel correction vanishes, so every eigenvalue is 1.
        let report = tau_spectrum_check(Scheme::CenteredDifference, 1.5, 2).unwrap();
        assert_relative_eq!(report.min, 1.0, max_relative = 1e-12);
        assert_relative_eq!(report.max, 1.0, max_relative = 1e-12);
        assert!(report.passed);

        let report = tau_spectrum_check(Scheme::CenteredDifference, 1.1, 64).unwrap();
        assert!(report.passed, "{report:?}");
        let report = tau_spectrum_check(Scheme::CubicSpline, 1.9, 128).unwrap();
        assert!(report.passed, "{report:?}");
        assert!(tau_spectrum_check(Scheme::CubicSpline, 1.9, 2000).is_err());
    }

    #[test]
    fn commutator_constant_diagonal_is_exact_zero() {
        let z = vec![2.5; 32];
        let report = commutator_bound_check(&z, Scheme::CenteredDifference, 1.5).unwrap();
        assert_eq!(report.delta_norm, 0.0);
        assert!(report.passed);
    }

    #[test]
    fn commutator_bound_for_linear_coefficient() {
        // Z sampled from d(x) = 2 + x on (0,1).
        let m = 128;
        let h = 1.0 / (m as f64 + 1.0);
        let z: Vec<f64> = (1..=m).map(|i| 2.0 + i as f64 * h).collect();
        let report = commutator_bound_check(&z, Scheme::CenteredDifference, 1.5).unwrap();
        assert!(report.passed, "{report:?}");
        assert!(report.delta_norm > 0.0);
    }

    #[test]
    fn commutator_rejects_bad_input() {
        assert!(commutator_bound_check(&[1.0, -1.0], Scheme::CenteredDifference, 1.5).is_err());
        assert!(commutator_bound_check(&vec![1.0; 600], Scheme::CenteredDifference, 1.5).is_err());
    }

    #[test]
    fn theta_for_example1_is_a_contraction() {
        let spec = crate::problems::example1(1.5, 1.9, 15, 4).unwrap();
        let c = constants_for_problem(&spec, Scheme::CenteredDifference).unwrap();
        assert!(c.theta > 0.0 && c.theta < 1.0);
        assert!(c.c_star > 0.0 && c.c_star.is_finite());
        assert!(c.c_star <= c.c_star_max_form);
    }

    #[test]
    fn preconditioned_spectrum_constant_coefficients() {
        // Constant coefficients: skew part vanishes and H sits within the
        // envelope with room to spare.
        let spec = ProblemSpec {
            name: "const".into(),
            bounds: vec![(0.0, 1.0), (0.0, 1.0)],
            final_time: 1.0,
            alphas: vec![1.4, 1.6],
            coefficients: vec![Box::new(|_: &[f64]| 2.0), Box::new(|_: &[f64]| 3.0)],
            source: Box::new(|_: &[f64], _| 0.0),
            initial: Box::new(|_: &[f64]| 0.0),
            exact: None,
            interior: vec![7, 7],
            time_steps: 8,
        };
        let report = preconditioned_spectrum_check(&spec, Scheme::CenteredDifference).unwrap();
        assert!(report.hypothesis_met);
        assert!(report.skew_radius < 1e-9, "{report:?}");
        assert!(report.passed, "{report:?}");
    }
}
