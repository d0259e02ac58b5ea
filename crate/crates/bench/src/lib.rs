//! Shared builders for the benchmark targets.

use sfde_core::coefficients::{centered_difference_coeffs, Scheme};
use sfde_core::operator::SfdeOperator;
use sfde_core::preconditioners::{build_tau, TauPreconditioner};
use sfde_core::problems::{example1, ProblemSpec};
use sfde_core::transforms::GridShape;

/// Deterministic quasi-random fill for benchmark vectors.
pub fn test_vector(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| ((i as f64 * 0.618_033_988_749).fract() - 0.5) * 2.0)
        .collect()
}

/// Square 2-D operator with unit coefficients at the given side length.
pub fn square_operator(m: usize) -> SfdeOperator {
    let shape = GridShape::new(vec![m, m]).expect("positive dims");
    let j = shape.len();
    let symbol = centered_difference_coeffs(1.5, m)
        .expect("valid order")
        .to_symbol();
    SfdeOperator::from_parts(
        shape,
        vec![
            (0.5, symbol.clone(), vec![1.0; j]),
            (0.5, symbol, vec![1.0; j]),
        ],
    )
    .expect("well-formed operator")
}

pub fn tau_for(op: &SfdeOperator) -> TauPreconditioner {
    build_tau(op, &op.coefficient_bounds()).expect("positive bounds")
}

/// The 2-D benchmark problem at M+1 = 2^p partitions and N = 2^q steps.
pub fn benchmark_problem(p: u32, q: u32) -> ProblemSpec {
    example1(1.5, 1.9, (1 << p) - 1, 1 << q).expect("valid orders")
}

pub use sfde_core::coefficients;
pub use sfde_core::krylov::SolverConfig;
pub use sfde_core::problems::{time_step_solve, PrecondChoice};
pub use sfde_core::transforms;

pub const SCHEME: Scheme = Scheme::CenteredDifference;
