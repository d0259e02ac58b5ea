//! Run configuration: a flat JSON file whose fields individual command-line
//! flags can override.

// Guards are written as !(x > 0.0) on purpose: NaN must fail them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use serde::{Deserialize, Serialize};
use std::path::PathBuf;

use sfde_core::coefficients::Scheme;
use sfde_core::problems::PrecondChoice;

/// Which benchmark problem a run solves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProblemKind {
    Example1,
    Example2,
    CustomFromFile,
}

impl ProblemKind {
    pub fn name(&self) -> &'static str {
        match self {
            ProblemKind::Example1 => "example1",
            ProblemKind::Example2 => "example2",
            ProblemKind::CustomFromFile => "custom",
        }
    }

    pub fn parse(s: &str) -> Result<Self, String> {
        match s {
            "example1" => Ok(ProblemKind::Example1),
            "example2" => Ok(ProblemKind::Example2),
            "custom" | "custom-from-file" => Ok(ProblemKind::CustomFromFile),
            other => Err(format!("unknown problem `{other}`")),
        }
    }
}

/// Constant-coefficient problem read from the config file: zero source,
/// product-of-sines initial condition, no exact solution.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CustomProblem {
    pub bounds: Vec<(f64, f64)>,
    pub final_time: f64,
    /// One constant diffusion coefficient per dimension.
    pub coefficients: Vec<f64>,
}

/// One benchmark run: the cross product of grid exponents, time exponents
/// and preconditioners at fixed fractional orders.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub problem: ProblemKind,
    /// Fractional orders; length fixes the dimension (2 for example1,
    /// 3 for example2).
    pub orders: Vec<f64>,
    /// Grid exponents p: each spatial direction uses M+1 = 2^p partitions.
    pub grid_exps: Vec<u32>,
    /// Time exponents q: N = 2^q uniform steps.
    pub time_exps: Vec<u32>,
    pub scheme: Scheme,
    pub preconditioners: Vec<PrecondChoice>,
    pub tol: f64,
    pub restart: Option<usize>,
    pub max_iters: usize,
    pub seed: u64,
    pub out: PathBuf,
    /// Write per-step residual histories next to the reports.
    pub residual_history: bool,
    pub custom: Option<CustomProblem>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            problem: ProblemKind::Example1,
            orders: vec![1.5, 1.9],
            grid_exps: vec![8],
            time_exps: vec![4],
            scheme: Scheme::CenteredDifference,
            preconditioners: vec![PrecondChoice::Tau],
            tol: 1e-7,
            restart: None,
            max_iters: 500,
            seed: 20240501,
            out: PathBuf::from("."),
            residual_history: false,
            custom: None,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), String> {
        let dim = self.orders.len();
        let expected = match self.problem {
            ProblemKind::Example1 => Some(2),
            ProblemKind::Example2 => Some(3),
            ProblemKind::CustomFromFile => None,
        };
        if let Some(d) = expected {
            if dim != d {
                return Err(format!(
                    "{} needs exactly {d} fractional orders, got {dim}",
                    self.problem.name()
                ));
            }
        }
        if self.orders.iter().any(|&a| !(a > 1.0 && a < 2.0)) {
            return Err("fractional orders must lie strictly inside (1, 2)".into());
        }
        if self.grid_exps.is_empty() || self.time_exps.is_empty() {
            return Err("need at least one grid exponent and one time exponent".into());
        }
        if self.grid_exps.iter().any(|&p| p == 0 || p > 24) {
            return Err("grid exponents must lie in 1..=24".into());
        }
        if self.time_exps.iter().any(|&q| q > 24) {
            return Err("time exponents must lie in 0..=24".into());
        }
        if self.preconditioners.is_empty() {
            return Err("need at least one preconditioner choice".into());
        }
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return Err("tolerance must lie in (0, 1)".into());
        }
        if self.max_iters == 0 {
            return Err("max-iters must be positive".into());
        }
        if self.problem == ProblemKind::CustomFromFile {
            let c = self
                .custom
                .as_ref()
                .ok_or("custom problem requires a `custom` section in the config file")?;
            if c.bounds.len() != dim || c.coefficients.len() != dim {
                return Err("custom problem fields must match the number of orders".into());
            }
            if c.coefficients.iter().any(|&d| !(d > 0.0)) {
                return Err("custom coefficients must be positive".into());
            }
            if dim == 0 || dim > 3 {
                return Err("custom problems support 1 to 3 dimensions".into());
            }
        }
        Ok(())
    }
}
