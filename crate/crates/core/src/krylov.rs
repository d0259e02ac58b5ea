//! Left-preconditioned GMRES with residual history.
//!
//! The solver runs Arnoldi with modified Gram-Schmidt on P^{-1}A and tracks
//! the preconditioned residual norm ||P^{-1}b - P^{-1}A x_k||_2 through the
//! Givens least-squares recurrence, so no extra products are spent on
//! convergence monitoring. Restart is available but off by default.

use crate::error::{check_len, Error, Result};

/// What the relative tolerance is measured against.
///
/// The benchmark protocol used throughout the problem drivers measures the
/// residual against the preconditioned right-hand side, which is what makes
/// warm-started time stepping terminate at a grid-independent quality level.
/// `InitialResidual` instead measures against ||r_0||, which is stricter
/// whenever a warm start begins close to the solution. The two coincide for
/// a zero initial guess.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ResidualReference {
    #[default]
    PreconditionedRhs,
    InitialResidual,
}

/// GMRES configuration.
#[derive(Debug, Clone)]
pub struct SolverConfig {
    /// Relative tolerance on the preconditioned residual.
    pub tol_rel: f64,
    /// Hard cap on the total number of Arnoldi steps.
    pub max_iters: usize,
    /// Restart length; `None` runs full (non-restarted) GMRES.
    pub restart: Option<usize>,
    /// Norm the relative tolerance refers to.
    pub reference: ResidualReference,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tol_rel: 1e-7,
            max_iters: 500,
            restart: None,
            reference: ResidualReference::default(),
        }
    }
}

impl SolverConfig {
    fn validate(&self) -> Result<()> {
        if !(self.tol_rel > 0.0 && self.tol_rel < 1.0) {
            return Err(Error::domain(format!(
                "relative tolerance must lie in (0, 1), got {}",
                self.tol_rel
            )));
        }
        if self.max_iters == 0 || self.restart == Some(0) {
            return Err(Error::domain("iteration limits must be positive"));
        }
        Ok(())
    }
}

/// Outcome of one GMRES solve.
#[derive(Debug, Clone)]
pub struct KrylovResult {
    pub solution: Vec<f64>,
    /// Total number of Arnoldi steps performed.
    pub iterations: usize,
    /// Preconditioned residual 2-norms; entry 0 is the initial residual.
    pub residual_norms: Vec<f64>,
    pub converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn check_finite(value: f64, what: &str) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::numerical(format!("{what} became non-finite")))
    }
}

/// Solves P^{-1} A x = P^{-1} b by GMRES, starting from `x0`.
///
/// `apply_a` and `apply_pinv` must be linear. Iteration stops at the first
/// step whose preconditioned residual satisfies the relative tolerance; if
/// `max_iters` is exhausted the best iterate found is returned with
/// `converged = false`.
pub fn gmres<A, P>(
    apply_a: A,
    apply_pinv: P,
    b: &[f64],
    x0: &[f64],
    cfg: &SolverConfig,
) -> Result<KrylovResult>
where
    A: Fn(&[f64]) -> Result<Vec<f64>>,
    P: Fn(&[f64]) -> Result<Vec<f64>>,
{
    cfg.validate()?;
    check_len(b.len(), x0.len())?;
    let n = b.len();
    let mut x = x0.to_vec();
    let mut residual_norms = Vec::new();
    let mut total_iters = 0usize;

    // Initial preconditioned residual.
    let mut r = {
        let ax = apply_a(&x)?;
        check_len(n, ax.len())?;
        let diff: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        apply_pinv(&diff)?
    };
    check_len(n, r.len())?;
    let beta0 = check_finite(norm2(&r), "initial residual norm")?;
    residual_norms.push(beta0);

    let reference_norm = match cfg.reference {
        ResidualReference::InitialResidual => beta0,
        ResidualReference::PreconditionedRhs => {
            if x0.iter().all(|&v| v == 0.0) {
                beta0
            } else {
                check_finite(norm2(&apply_pinv(b)?), "preconditioned rhs norm")?
            }
        }
    };
    let threshold = cfg.tol_rel * reference_norm;

    if beta0 <= threshold {
        return Ok(KrylovResult {
            solution: x,
            iterations: 0,
            residual_norms,
            converged: true,
        });
    }

    loop {
        let cycle = cfg
            .restart
            .unwrap_or(cfg.max_iters)
            .min(cfg.max_iters - total_iters)
            .min(n);
        let beta = norm2(&r);

        // Arnoldi basis and the Givens-rotated Hessenberg columns.
        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(cycle + 1);
        basis.push(r.iter().map(|v| v / beta).collect());
        let mut h_cols: Vec<Vec<f64>> = Vec::with_capacity(cycle);
        let mut cs: Vec<f64> = Vec::with_capacity(cycle);
        let mut sn: Vec<f64> = Vec::with_capacity(cycle);
        let mut g = vec![beta];
        let mut steps = 0usize;
        let mut converged = false;

        for j in 0..cycle {
            let mut w = apply_pinv(&apply_a(&basis[j])?)?;
            check_len(n, w.len())?;
            let mut h = vec![0.0; j + 2];
            for (i, v) in basis.iter().enumerate() {
                let hij = check_finite(dot(v, &w), "Arnoldi inner product")?;
                h[i] = hij;
                for (wk, vk) in w.iter_mut().zip(v) {
                    *wk -= hij * vk;
                }
            }
            let wnorm = check_finite(norm2(&w), "Arnoldi vector norm")?;
            h[j + 1] = wnorm;
            let column_scale = norm2(&h);
            let breakdown = wnorm <= 1e-14 * column_scale;
            if !breakdown {
                basis.push(w.iter().map(|v| v / wnorm).collect());
            }

            // Apply the accumulated rotations, then a new one to zero h[j+1].
            for i in 0..j {
                let t = cs[i] * h[i] + sn[i] * h[i + 1];
                h[i + 1] = -sn[i] * h[i] + cs[i] * h[i + 1];
                h[i] = t;
            }
            let rho = (h[j] * h[j] + h[j + 1] * h[j + 1]).sqrt();
            let (c, s) = if rho == 0.0 {
                (1.0, 0.0)
            } else {
                (h[j] / rho, h[j + 1] / rho)
            };
            cs.push(c);
            sn.push(s);
            h[j] = rho;
            h[j + 1] = 0.0;
            h_cols.push(h[..=j].to_vec());
            g.push(-s * g[j]);
            g[j] *= c;

            steps = j + 1;
            total_iters += 1;
            let res = check_finite(g[j + 1].abs(), "residual estimate")?;
            residual_norms.push(res);

            if res <= threshold {
                converged = true;
                break;
            }
            if breakdown {
                // The Krylov space became invariant but the residual is still
                // above the target: nothing further can be gained.
                return Err(Error::numerical(format!(
                    "Arnoldi breakdown at step {} with residual {res:.3e} above \
                     the threshold {threshold:.3e}",
                    j + 1
                )));
            }
            if total_iters >= cfg.max_iters {
                break;
            }
        }

        // Back-substitute y and update x += V y.
        let mut y = vec![0.0; steps];
        for i in (0..steps).rev() {
            let mut acc = g[i];
            for (k, yk) in y.iter().enumerate().skip(i + 1) {
                acc -= h_cols[k][i] * yk;
            }
            y[i] = acc / h_cols[i][i];
        }
        for (yi, v) in y.iter().zip(&basis) {
            for (xk, vk) in x.iter_mut().zip(v) {
                *xk += yi * vk;
            }
        }

        if converged {
            return Ok(KrylovResult {
                solution: x,
                iterations: total_iters,
                residual_norms,
                converged: true,
            });
        }
        if total_iters >= cfg.max_iters {
            return Ok(KrylovResult {
                solution: x,
                iterations: total_iters,
                residual_norms,
                converged: false,
            });
        }
        // Restart: recompute the true residual and continue.
        let ax = apply_a(&x)?;
        let diff: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        r = apply_pinv(&diff)?;
        let res = check_finite(norm2(&r), "restart residual")?;
        if res <= threshold {
            return Ok(KrylovResult {
                solution: x,
                iterations: total_iters,
                residual_norms,
                converged: true,
            });
        }
    }
}

/// Convenience identity "preconditioner".
pub fn identity(v: &[f64]) -> Result<Vec<f64>> {
    Ok(v.to_vec())
}
