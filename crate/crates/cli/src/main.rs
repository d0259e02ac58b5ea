//! Benchmark and verification harness for the fractional diffusion solvers.
//!
//! `sfde solve` runs preconditioned time-stepped solves over a grid of
//! configurations and emits CSV/JSON reports; `sfde verify` runs the
//! numerical property suite and emits a JSON verification report.

mod config;
mod report;

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use sfde_core::coefficients::Scheme;
use sfde_core::krylov::SolverConfig;
use sfde_core::problems::{
    self, time_step_solve, PrecondChoice, ProblemSpec, SolveReport,
};
use sfde_core::verification::{run_verification, FaultInjection, VerificationConfig};

use config::{ProblemKind, RunConfig};
use report::Row;

#[derive(Parser)]
#[command(name = "sfde", version, about = "Space-fractional diffusion benchmark harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run time-stepped benchmark solves and write CSV/JSON reports.
    Solve(SolveArgs),
    /// Run the numerical verification suite and write a JSON report.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct SolveArgs {
    /// JSON configuration file; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Problem: example1, example2 or custom.
    #[arg(long)]
    problem: Option<String>,
    /// Comma-separated fractional orders, e.g. 1.5,1.9.
    #[arg(long, value_delimiter = ',')]
    orders: Option<Vec<f64>>,
    /// Grid exponents p (M+1 = 2^p per direction); repeatable via commas.
    #[arg(long = "grid-exp", value_delimiter = ',')]
    grid_exp: Option<Vec<u32>>,
    /// Time exponents q (N = 2^q); repeatable via commas.
    #[arg(long = "time-exp", value_delimiter = ',')]
    time_exp: Option<Vec<u32>>,
    /// Discretization scheme: centered-difference, shifted-grunwald,
    /// cubic-spline.
    #[arg(long)]
    scheme: Option<String>,
    /// Preconditioners to run: any of tau, circulant, none.
    #[arg(long = "precond", value_delimiter = ',')]
    precond: Option<Vec<String>>,
    /// Relative GMRES tolerance.
    #[arg(long)]
    tol: Option<f64>,
    /// GMRES restart length (full GMRES when absent).
    #[arg(long)]
    restart: Option<usize>,
    /// Cap on GMRES iterations per solve.
    #[arg(long)]
    max_iters: Option<usize>,
    /// Seed echoed into reports and used by randomized checks.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for report.csv / report.json.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write residuals.csv with per-step residual histories.
    #[arg(long)]
    residual_history: bool,
}

#[derive(Args)]
struct VerifyArgs {
    /// Seed for the randomized trials.
    #[arg(long, default_value_t = 20240501)]
    seed: u64,
    /// Matrix sizes for the spectral checks.
    #[arg(long, value_delimiter = ',', default_values_t = [8usize, 64, 256])]
    sizes: Vec<usize>,
    /// Output path of the JSON verification report.
    #[arg(long, default_value = "verification.json")]
    out: PathBuf,
    /// Testing hook: corrupt a coefficient sequence before validation.
    #[arg(long, hide = true)]
    inject_fault: Option<String>,
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Solve(args) => match run_solve(args) {
            Ok(all_converged) => {
                if all_converged {
                    ExitCode::SUCCESS
                } else {
                    eprintln!("error: at least one solve did not converge");
                    ExitCode::from(2)
                }
            }
            Err(msg) => {
                eprintln!("error: {msg}");
                ExitCode::from(1)
            }
        },
        Command::Verify(args) => match run_verify(args) {
            Ok(true) => ExitCode::SUCCESS,
            Ok(false) => ExitCode::from(2),
            Err(msg) => {
                eprintln!("error: {msg}");
                ExitCode::from(1)
            }
        },
    }
}

fn load_config(args: &SolveArgs) -> Result<RunConfig, String> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
            serde_json::from_str(&text).map_err(|e| format!("bad config file: {e}"))?
        }
        None => RunConfig::default(),
    };
    if let Some(p) = &args.problem {
        cfg.problem = ProblemKind::parse(p)?;
    }
    if let Some(orders) = &args.orders {
        cfg.orders = orders.clone();
    }
    if let Some(g) = &args.grid_exp {
        cfg.grid_exps = g.clone();
    }
    if let Some(t) = &args.time_exp {
        cfg.time_exps = t.clone();
    }
    if let Some(s) = &args.scheme {
        cfg.scheme = s.parse::<Scheme>().map_err(|e| e.to_string())?;
    }
    if let Some(ps) = &args.precond {
        cfg.preconditioners = ps
            .iter()
            .map(|p| p.parse::<PrecondChoice>().map_err(|e| e.to_string()))
            .collect::<Result<_, String>>()?;
    }
    if let Some(tol) = args.tol {
        cfg.tol = tol;
    }
    if args.restart.is_some() {
        cfg.restart = args.restart;
    }
    if let Some(mi) = args.max_iters {
        cfg.max_iters = mi;
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &args.out {
        cfg.out = out.clone();
    }
    if args.residual_history {
        cfg.residual_history = true;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn build_problem(cfg: &RunConfig, interior: usize, n_steps: usize) -> Result<ProblemSpec, String> {
    match cfg.problem {
        ProblemKind::Example1 => {
            problems::example1(cfg.orders[0], cfg.orders[1], interior, n_steps)
                .map_err(|e| e.to_string())
        }
        ProblemKind::Example2 => problems::example2(
            [cfg.orders[0], cfg.orders[1], cfg.orders[2]],
            interior,
            n_steps,
        )
        .map_err(|e| e.to_string()),
        ProblemKind::CustomFromFile => {
            let custom = cfg.custom.as_ref().expect("validated");
            let dim = cfg.orders.len();
            let coeffs = custom.coefficients.clone();
            let bounds = custom.bounds.clone();
            let coefficients: Vec<problems::PointFn> = coeffs
                .iter()
                .map(|&c| Box::new(move |_: &[f64]| c) as problems::PointFn)
                .collect();
            let init_bounds = bounds.clone();
            Ok(ProblemSpec {
                name: "custom".into(),
                bounds,
                final_time: custom.final_time,
                alphas: cfg.orders.clone(),
                coefficients,
                source: Box::new(|_: &[f64], _| 0.0),
                initial: Box::new(move |p: &[f64]| {
                    p.iter()
                        .zip(&init_bounds)
                        .map(|(&x, &(l, r))| {
                            (std::f64::consts::PI * (x - l) / (r - l)).sin()
                        })
                        .product()
                }),
                exact: None,
                interior: vec![interior; dim],
                time_steps: n_steps,
            })
        }
    }
}

fn run_solve(args: SolveArgs) -> Result<bool, String> {
    let cfg = load_config(&args)?;
    std::fs::create_dir_all(&cfg.out)
        .map_err(|e| format!("cannot create {}: {e}", cfg.out.display()))?;

    let solver_cfg = SolverConfig {
        tol_rel: cfg.tol,
        restart: cfg.restart,
        max_iters: cfg.max_iters,
        ..SolverConfig::default()
    };

    let mut rows = Vec::new();
    let mut histories: Vec<(Row, SolveReport)> = Vec::new();
    for &p in &cfg.grid_exps {
        for &q in &cfg.time_exps {
            let interior = (1usize << p) - 1;
            let n_steps = 1usize << q;
            for &precond in &cfg.preconditioners {
                let spec = build_problem(&cfg, interior, n_steps)?;
                let started = Instant::now();
                let report = time_step_solve(&spec, cfg.scheme, precond, &solver_cfg)
                    .map_err(|e| e.to_string())?;
                let cpu_seconds = started.elapsed().as_secs_f64();
                let row = Row {
                    problem: cfg.problem.name().to_string(),
                    scheme: cfg.scheme.name().to_string(),
                    preconditioner: precond.name().to_string(),
                    orders: cfg.orders.clone(),
                    n_steps,
                    m_plus_1: interior + 1,
                    iter_mean: (report.mean_iterations * 10.0).round() / 10.0,
                    cpu_seconds,
                    e_mn: report.error_max_rel,
                    converged: report.all_converged,
                };
                if cfg.residual_history {
                    histories.push((row.clone(), report));
                }
                rows.push(row);
            }
        }
    }

    report::print_table(&rows);
    report::write_csv(&cfg.out.join("report.csv"), &rows).map_err(|e| e.to_string())?;
    report::write_json(&cfg.out.join("report.json"), &cfg, &rows).map_err(|e| e.to_string())?;
    if cfg.residual_history {
        write_residuals(&cfg.out.join("residuals.csv"), &histories)
            .map_err(|e| e.to_string())?;
    }
    println!(
        "wrote {} and {}",
        cfg.out.join("report.csv").display(),
        cfg.out.join("report.json").display()
    );
    Ok(rows.iter().all(|r| r.converged))
}

fn write_residuals(path: &std::path::Path, runs: &[(Row, SolveReport)]) -> std::io::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["preconditioner", "N", "M_plus_1", "step", "iteration", "residual"])?;
    for (row, report) in runs {
        for (step, history) in report.residual_histories.iter().enumerate() {
            for (k, res) in history.iter().enumerate() {
                w.write_record([
                    row.preconditioner.clone(),
                    row.n_steps.to_string(),
                    row.m_plus_1.to_string(),
                    (step + 1).to_string(),
                    k.to_string(),
                    format!("{res:.12e}"),
                ])?;
            }
        }
    }
    w.flush()
}

fn run_verify(args: VerifyArgs) -> Result<bool, String> {
    let fault = match args.inject_fault.as_deref() {
        None => None,
        Some("coefficient-sign") => Some(FaultInjection::CoefficientSign),
        Some(other) => return Err(format!("unknown fault `{other}`")),
    };
    let cfg = VerificationConfig {
        seed: args.seed,
        spectrum_sizes: args.sizes,
        boundary_stress: true,
        fault,
    };
    let report = run_verification(&cfg);
    let json = serde_json::to_string_pretty(&report).map_err(|e| e.to_string())?;
    std::fs::write(&args.out, json + "\n").map_err(|e| e.to_string())?;
    for check in &report.checks {
        println!(
            "{} {} — {}",
            if check.passed { "PASS" } else { "FAIL" },
            check.name,
            check.detail
        );
    }
    if report.passed {
        println!("verification passed ({} checks)", report.checks.len());
    } else {
        eprintln!(
            "verification FAILED: {}",
            report.failed_names().join(", ")
        );
    }
    Ok(report.passed)
}
