//! Aggregated verification suite: structural coefficient properties,
//! spectral checks, preconditioner exactness and operator oracle agreement,
//! collected into one machine-readable report.
//!
//! The suite is deterministic for a given seed. A fault-injection hook
//! exists so integration tests can confirm that a corrupted configuration is
//! actually caught and named.

use serde::Serialize;

use crate::analysis::{
    commutator_bound_check, constants_for_problem, tau_spectrum_check, DECAY_NORM_PREFIX,
};
use crate::coefficients::{self, validate_properties, Scheme};
use crate::dense;
use crate::error::Result;
use crate::operator::{materialize_dense, SfdeOperator};
use crate::preconditioners::build_tau;
use crate::problems::example1;
use crate::rng::SplitMix64;
use crate::transforms::GridShape;

/// One named check outcome.
#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// The whole suite's outcome.
#[derive(Debug, Clone, Serialize)]
pub struct VerificationReport {
    pub seed: u64,
    pub checks: Vec<CheckResult>,
    pub passed: bool,
}

impl VerificationReport {
    pub fn failed_names(&self) -> Vec<&str> {
        self.checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| c.name.as_str())
            .collect()
    }
}

/// Deliberate corruption applied before validation; testing hook only.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FaultInjection {
    /// Flips the sign of one tail coefficient, violating the sign property.
    CoefficientSign,
}

/// Suite configuration.
#[derive(Debug, Clone)]
pub struct VerificationConfig {
    pub seed: u64,
    /// Matrix sizes for the tau spectrum checks.
    pub spectrum_sizes: Vec<usize>,
    /// Include the fractional orders close to the boundary of (1,2).
    pub boundary_stress: bool,
    pub fault: Option<FaultInjection>,
}

impl Default for VerificationConfig {
    fn default() -> Self {
        VerificationConfig {
            seed: 20240501,
            spectrum_sizes: vec![8, 64, 256],
            boundary_stress: true,
            fault: None,
        }
    }
}

fn push(checks: &mut Vec<CheckResult>, name: impl Into<String>, passed: bool, detail: String) {
    checks.push(CheckResult {
        name: name.into(),
        passed,
        detail,
    });
}

fn random_operator(rng: &mut SplitMix64, dims: Vec<usize>) -> Result<SfdeOperator> {
    let shape = GridShape::new(dims.clone())?;
    let j = shape.len();
    let mut parts = Vec::with_capacity(dims.len());
    for &m in &dims {
        let gamma = rng.range(1.05, 1.95);
        let symbol = coefficients::centered_difference_coeffs(gamma, m)?.to_symbol();
        let eta = rng.range(0.05, 2.0);
        let diag: Vec<f64> = (0..j).map(|_| rng.range(0.5, 3.0)).collect();
        parts.push((eta, symbol, diag));
    }
    SfdeOperator::from_parts(shape, parts)
}

/// Runs the full verification suite.
pub fn run_verification(cfg: &VerificationConfig) -> VerificationReport {
    let mut checks = Vec::new();
    let mut rng = SplitMix64::new(cfg.seed);

    // Structural properties for every scheme and a spread of orders.
    let orders = [1.1, 1.3, 1.5, 1.7, 1.9];
    for scheme in Scheme::ALL {
        for &gamma in &orders {
            let name = format!("coefficients/{scheme}/gamma={gamma}");
            match coefficients::coeffs(scheme, gamma, DECAY_NORM_PREFIX) {
                Ok(mut seq) => {
                    if cfg.fault == Some(FaultInjection::CoefficientSign)
                        && scheme == Scheme::CenteredDifference
                        && gamma == 1.5
                    {
                        let mut values = seq.values().to_vec();
                        let mid = values.len() / 2;
                        values[mid] = values[mid].abs() + 0.125;
                        seq = coefficients::CoefficientSequence::from_values(
                            scheme, gamma, values,
                        )
                        .expect("fault-injected sequence is well-formed");
                    }
                    let report = validate_properties(&seq);
                    let detail = if report.all_passed() {
                        format!(
                            "decay bound {:.4e}, min weighted partial sum {:.4e}",
                            report.decay_bound, report.min_weighted_partial_sum
                        )
                    } else {
                        format!("{report:?}")
                    };
                    push(&mut checks, name, report.all_passed(), detail);
                }
                Err(e) => push(&mut checks, name, false, e.to_string()),
            }
        }
    }

    // Boundary stress: orders close to the ends of (1,2) still satisfy the
    // structural properties; the decay bound grows, which is expected.
    if cfg.boundary_stress {
        for &gamma in &[1.001, 1.999] {
            let name = format!("coefficients/boundary/gamma={gamma}");
            match coefficients::centered_difference_coeffs(gamma, DECAY_NORM_PREFIX) {
                Ok(seq) => {
                    let report = validate_properties(&seq);
                    push(
                        &mut checks,
                        name,
                        report.all_passed(),
                        format!(
                            "decay bound {:.4e} (wide tolerance band near the boundary)",
                            report.decay_bound
                        ),
                    );
                }
                Err(e) => push(&mut checks, name, false, e.to_string()),
            }
        }
    }

    // Recurrence versus per-term gamma-ratio evaluation.
    {
        let name = "coefficients/recurrence-vs-gamma-ratio";
        let gamma = 1.5f64;
        let seq = coefficients::centered_difference_coeffs(gamma, 51).expect("valid order");
        let gamma_any = |x: f64| -> f64 {
            if x > 0.0 {
                coefficients::gamma_function(x).expect("positive argument")
            } else {
                std::f64::consts::PI
                    / ((std::f64::consts::PI * x).sin()
                        * coefficients::gamma_function(1.0 - x).expect("positive argument"))
            }
        };
        let mut worst = 0.0f64;
        for (k, &s) in seq.values().iter().enumerate() {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            let direct = sign * gamma_any(gamma + 1.0)
                / (gamma_any(gamma / 2.0 - k as f64 + 1.0)
                    * gamma_any(gamma / 2.0 + k as f64 + 1.0));
            worst = worst.max((s - direct).abs() / direct.abs());
        }
        push(
            &mut checks,
            name,
            worst <= 1e-10,
            format!("worst relative deviation {worst:.3e}"),
        );
    }

    // Generalized spectrum of (S, tau(S)) inside (1/2, 3/2).
    for scheme in Scheme::ALL {
        for &gamma in &[1.1, 1.5, 1.9] {
            for &m in &cfg.spectrum_sizes {
                let name = format!("tau-spectrum/{scheme}/gamma={gamma}/M={m}");
                match tau_spectrum_check(scheme, gamma, m) {
                    Ok(r) => push(
                        &mut checks,
                        name,
                        r.passed,
                        format!("spectrum in [{:.6}, {:.6}]", r.min, r.max),
                    ),
                    Err(e) => push(&mut checks, name, false, e.to_string()),
                }
            }
        }
    }

    // Commutator decay for a linear coefficient sample.
    for &m in &[32usize, 64, 128, 256] {
        let name = format!("commutator/M={m}");
        let h = 1.0 / (m as f64 + 1.0);
        let z: Vec<f64> = (1..=m).map(|i| 2.0 + i as f64 * h).collect();
        match commutator_bound_check(&z, Scheme::CenteredDifference, 1.5) {
            Ok(r) => push(
                &mut checks,
                name,
                r.passed,
                format!(
                    "||Delta|| = {:.4e}, bound {:.4e}, scaled {:.4e}",
                    r.delta_norm, r.bound, r.scaled_norm
                ),
            ),
            Err(e) => push(&mut checks, name, false, e.to_string()),
        }
    }

    // Preconditioner exactness against the dense oracle, random operators.
    {
        let name = "preconditioner/exact-inverse";
        let mut worst = 0.0f64;
        let mut ok = true;
        'outer: for trial in 0..25 {
            let dims = match trial % 3 {
                0 => vec![rng.range_usize(8, 30)],
                1 => vec![rng.range_usize(4, 9), rng.range_usize(4, 9)],
                _ => vec![
                    rng.range_usize(3, 6),
                    rng.range_usize(3, 6),
                    rng.range_usize(3, 6),
                ],
            };
            let op = match random_operator(&mut rng, dims) {
                Ok(op) => op,
                Err(e) => {
                    push(&mut checks, name, false, e.to_string());
                    ok = false;
                    break 'outer;
                }
            };
            let p = match build_tau(&op, &op.coefficient_bounds()) {
                Ok(p) => p,
                Err(e) => {
                    push(&mut checks, name, false, e.to_string());
                    ok = false;
                    break 'outer;
                }
            };
            let dense_p = p.materialize_dense().expect("small grid");
            let j = op.shape().len();
            let v: Vec<f64> = (0..j).map(|_| rng.range(-1.0, 1.0)).collect();
            let inv = p.apply_inverse(&v).expect("sizes agree");
            let back = dense::matvec(&dense_p, &inv);
            let scale = v.iter().fold(0.0f64, |a, x| a.max(x.abs())).max(1e-30);
            let err = back
                .iter()
                .zip(&v)
                .fold(0.0f64, |a, (b, x)| a.max((b - x).abs()))
                / scale;
            worst = worst.max(err);
        }
        if ok {
            push(
                &mut checks,
                name,
                worst <= 1e-10,
                format!("worst round-trip error {worst:.3e} over 25 trials"),
            );
        }
    }

    // Matrix-free operator against the dense assembly.
    {
        let name = "operator/dense-oracle";
        let mut worst = 0.0f64;
        for trial in 0..25 {
            let dims = match trial % 3 {
                0 => vec![rng.range_usize(8, 31)],
                1 => vec![rng.range_usize(4, 9), rng.range_usize(4, 9)],
                _ => vec![
                    rng.range_usize(3, 6),
                    rng.range_usize(3, 6),
                    rng.range_usize(3, 6),
                ],
            };
            let op = random_operator(&mut rng, dims).expect("valid random operator");
            let a = materialize_dense(&op).expect("small grid");
            let j = op.shape().len();
            let v: Vec<f64> = (0..j).map(|_| rng.range(-1.0, 1.0)).collect();
            let fast = op.apply(&v).expect("sizes agree");
            let slow = dense::matvec(&a, &v);
            let scale = slow.iter().fold(0.0f64, |a, x| a.max(x.abs())).max(1e-30);
            let err = fast
                .iter()
                .zip(&slow)
                .fold(0.0f64, |a, (f, s)| a.max((f - s).abs()))
                / scale;
            worst = worst.max(err);
        }
        push(
            &mut checks,
            name,
            worst <= 1e-10,
            format!("worst relative deviation {worst:.3e} over 25 trials"),
        );
    }

    // Convergence constants of the 2-D benchmark problem.
    {
        let name = "analysis/convergence-constants";
        match example1(1.5, 1.9, 15, 4)
            .and_then(|spec| constants_for_problem(&spec, Scheme::CenteredDifference))
        {
            Ok(c) => push(
                &mut checks,
                name,
                c.theta > 0.0 && c.theta < 1.0 && c.c_star > 0.0,
                format!("theta = {:.6}, c_star = {:.4e}", c.theta, c.c_star),
            ),
            Err(e) => push(&mut checks, name, false, e.to_string()),
        }
    }

    let passed = checks.iter().all(|c| c.passed);
    VerificationReport {
        seed: cfg.seed,
        checks,
        passed,
    }
}
