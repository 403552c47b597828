//! Subcommands behind the `dantzig` binary.
//!
//! Every command produces a JSON document. Exit codes: 0 on success, 1 on input or
//! validation errors, 2 when a solver hit its iteration cap (the report is still written).

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use dantzig::assumptions::{re_constant, ConeSpec};
use dantzig::estimators::{solve_gds, solve_gl, solve_penalized, SolutionReport, SolverConfig, Stage};
use dantzig::io::{parse_support, read_matrix_csv, read_vector_csv};
use dantzig::linalg::{build_pair, normalize_design, DesignProblem, GeneralizedPair, LinalgTolerances};
use dantzig::region::{calibrate_s, coverage_bound};
use dantzig::simulation::{run_monte_carlo, write_trials_csv, ScenarioConfig, SummaryReport};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_NOT_CONVERGED: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "dantzig", version, about = "Dantzig-region estimators, calibration and simulation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit an estimator to CSV data.
    Fit(FitArgs),
    /// Print the calibrated level and its coverage guarantees.
    Calibrate(CalibrateArgs),
    /// Estimate the restricted eigenvalue constant of a matrix on a support.
    ReCheck(ReCheckArgs),
    /// Run a Monte Carlo scenario.
    Simulate(SimulateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    Gds,
    Gl,
    Penalized,
}

#[derive(Debug, Clone, Default, Args)]
pub struct SolverArgs {
    #[arg(long)]
    pub max_iterations: Option<usize>,
    #[arg(long)]
    pub tol_primal: Option<f64>,
    #[arg(long)]
    pub tol_dual: Option<f64>,
    #[arg(long)]
    pub penalty_parameter: Option<f64>,
    #[arg(long)]
    pub tie_break_tolerance: Option<f64>,
}

impl SolverArgs {
    pub fn apply(&self, config: &mut SolverConfig) {
        if let Some(v) = self.max_iterations {
            config.max_iterations = v;
        }
        if let Some(v) = self.tol_primal {
            config.tol_primal = v;
        }
        if let Some(v) = self.tol_dual {
            config.tol_dual = v;
        }
        if let Some(v) = self.penalty_parameter {
            config.penalty_parameter = v;
        }
        if let Some(v) = self.tie_break_tolerance {
            config.tie_break_tolerance = v;
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    /// Design matrix, headerless CSV, one row per observation.
    #[arg(long)]
    pub x: PathBuf,
    /// Response, one value per line.
    #[arg(long)]
    pub y: PathBuf,
    #[arg(long, value_enum, default_value_t = Estimator::Gds)]
    pub estimator: Estimator,
    /// Constraint level; takes precedence over calibration from sigma and epsilon.
    #[arg(long)]
    pub s: Option<f64>,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// `P` in normalized coordinates (identity when omitted).
    #[arg(long)]
    pub p_matrix: Option<PathBuf>,
    /// `A` in normalized coordinates (`X'X P` when omitted).
    #[arg(long)]
    pub a_matrix: Option<PathBuf>,
    /// Report destination; stdout when omitted.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Debug, Clone, Args)]
pub struct CalibrateArgs {
    #[arg(long)]
    pub sigma: f64,
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub p: usize,
    #[arg(long)]
    pub epsilon: f64,
}

#[derive(Debug, Clone, Args)]
pub struct ReCheckArgs {
    /// Symmetric positive semidefinite matrix, headerless CSV.
    #[arg(long)]
    pub omega: PathBuf,
    /// One-based indices, e.g. "1,3" or "2-5".
    #[arg(long)]
    pub support: String,
    #[arg(long, default_value_t = 10_000)]
    pub budget: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Default, Args)]
pub struct SimulateOverrides {
    /// Worker threads; all cores when omitted.
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long)]
    pub replications: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Record coverage events only.
    #[arg(long)]
    pub coverage_only: bool,
    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    /// Scenario in TOML.
    #[arg(long)]
    pub config: PathBuf,
    /// Receives trials.csv and summary.json.
    #[arg(long)]
    pub out_dir: PathBuf,
    #[command(flatten)]
    pub overrides: SimulateOverrides,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Core(#[from] dantzig::Error),
    #[error("{context}: {source}")]
    Io {
        context: String,
        source: std::io::Error,
    },
    #[error("{0}")]
    Usage(String),
}

fn io_context(context: impl Into<String>) -> impl FnOnce(std::io::Error) -> CliError {
    let context = context.into();
    move |source| CliError::Io { context, source }
}

fn read_input<T>(path: &Path, read: fn(&Path) -> dantzig::Result<T>) -> Result<T, CliError> {
    read(path).map_err(|e| match e {
        dantzig::Error::Io(source) => CliError::Io {
            context: format!("reading {}", path.display()),
            source,
        },
        other => CliError::Usage(format!("{}: {other}", path.display())),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct FitReport {
    pub estimator: Estimator,
    pub s: f64,
    /// `"given"` or `"calibrated"`.
    pub s_source: &'static str,
    pub sigma: Option<f64>,
    pub epsilon: Option<f64>,
    pub n: usize,
    pub p: usize,
    /// Coefficients on the scale of the input columns.
    pub beta_hat: Vec<f64>,
    pub beta_hat_normalized: Vec<f64>,
    pub column_scales: Vec<f64>,
    pub objective_value: f64,
    pub feasibility_gap: f64,
    pub iterations: usize,
    pub converged: bool,
    pub stage: Stage,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub solver: SolverConfig,
}

pub fn cmd_fit(args: &FitArgs) -> Result<FitReport, CliError> {
    let raw_x = read_input(&args.x, read_matrix_csv)?;
    let y = read_input(&args.y, read_vector_csv)?;
    let design = Arc::new(normalize_design(&raw_x)?);
    let (n, p) = (design.n(), design.p());
    let problem = DesignProblem::new(Arc::clone(&design), y, args.sigma.unwrap_or(0.0))?;

    let (s, s_source) = match (args.s, args.sigma, args.epsilon) {
        (Some(s), _, _) => (s, "given"),
        (None, Some(sigma), Some(epsilon)) => (calibrate_s(sigma, n, p, epsilon)?, "calibrated"),
        _ => return Err(CliError::Usage("give --s, or both --sigma and --epsilon".into())),
    };

    let mut solver = SolverConfig::default();
    args.solver.apply(&mut solver);
    solver.validate()?;

    let p_matrix = match &args.p_matrix {
        Some(path) => read_input(path, read_matrix_csv)?,
        None => dantzig::Matrix::identity(p, p),
    };
    let report: SolutionReport = match args.estimator {
        Estimator::Gds => {
            if args.a_matrix.is_some() {
                return Err(CliError::Usage("--a-matrix only applies to gl and penalized".into()));
            }
            solve_gds(&problem, &p_matrix, s, &solver)?
        }
        Estimator::Gl | Estimator::Penalized => {
            let a = match &args.a_matrix {
                Some(path) => read_input(path, read_matrix_csv)?,
                None if args.p_matrix.is_none() => design.gram().clone(),
                None => design.gram() * &p_matrix,
            };
            let pair: GeneralizedPair = build_pair(&design, &a, &p_matrix, &LinalgTolerances::default())?;
            if args.estimator == Estimator::Gl {
                solve_gl(&problem, &pair, s, &solver)?
            } else {
                solve_penalized(&problem, &pair, s, &solver)?
            }
        }
    };

    Ok(FitReport {
        estimator: args.estimator,
        s,
        s_source,
        sigma: args.sigma,
        epsilon: args.epsilon,
        n,
        p,
        beta_hat: design.to_raw_coefficients(&report.beta_hat).iter().copied().collect(),
        beta_hat_normalized: report.beta_hat.iter().copied().collect(),
        column_scales: design.column_scales().iter().copied().collect(),
        objective_value: report.objective_value,
        feasibility_gap: report.feasibility_gap,
        iterations: report.iterations,
        converged: report.converged,
        stage: report.stage,
        primal_residual: report.primal_residual,
        dual_residual: report.dual_residual,
        solver,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct CalibrationReport {
    pub sigma: f64,
    pub n: usize,
    pub p: usize,
    pub epsilon: f64,
    pub s: f64,
    pub coverage_bound_s: f64,
    pub coverage_bound_s_half: f64,
}

pub fn cmd_calibrate(args: &CalibrateArgs) -> Result<CalibrationReport, CliError> {
    let s = calibrate_s(args.sigma, args.n, args.p, args.epsilon)?;
    let bound = |level: f64| -> Result<f64, CliError> {
        if args.sigma == 0.0 {
            Ok(1.0)
        } else {
            Ok(coverage_bound(level, args.sigma, args.n, args.p)?)
        }
    };
    Ok(CalibrationReport {
        sigma: args.sigma,
        n: args.n,
        p: args.p,
        epsilon: args.epsilon,
        s,
        coverage_bound_s: bound(s)?,
        coverage_bound_s_half: bound(s / 2.0)?,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ReCheckReport {
    /// One-based, as given.
    pub support: Vec<usize>,
    pub budget: usize,
    pub seed: u64,
    pub c_lower: f64,
    pub exact: bool,
    pub c_exact: Option<f64>,
    pub witness: Vec<f64>,
    pub samples_used: usize,
}

pub fn cmd_re_check(args: &ReCheckArgs) -> Result<ReCheckReport, CliError> {
    let omega = read_input(&args.omega, read_matrix_csv)?;
    if omega.nrows() != omega.ncols() {
        return Err(CliError::Usage(format!(
            "omega must be square, got {}x{}",
            omega.nrows(),
            omega.ncols()
        )));
    }
    let support = parse_support(&args.support)?;
    let cone = ConeSpec::new(support, omega.nrows())?;
    let est = re_constant(&omega, &cone, args.budget, args.seed)?;
    Ok(ReCheckReport {
        support: cone.support().iter().map(|j| j + 1).collect(),
        budget: args.budget,
        seed: args.seed,
        c_lower: est.c_lower,
        exact: est.c_exact_or_upper.is_some(),
        c_exact: est.c_exact_or_upper,
        witness: est.witness.iter().copied().collect(),
        samples_used: est.samples_used,
    })
}

/// Loads the scenario, applies command-line overrides, runs it and writes `trials.csv` and
/// `summary.json` into `out_dir`.
pub fn cmd_simulate(config_path: &Path, out_dir: &Path, overrides: &SimulateOverrides) -> Result<SummaryReport, CliError> {
    let text = fs::read_to_string(config_path).map_err(io_context(format!("reading {}", config_path.display())))?;
    let mut config = ScenarioConfig::from_toml_str(&text)?;
    if let Some(v) = overrides.replications {
        config.replications = v;
    }
    if let Some(v) = overrides.seed {
        config.master_seed = v;
    }
    if let Some(v) = overrides.sigma {
        config.sigma = v;
    }
    if let Some(v) = overrides.epsilon {
        config.epsilon = v;
    }
    if overrides.coverage_only {
        config.solve_estimators = false;
    }
    overrides.solver.apply(&mut config.solver);
    config.validate()?;
    if overrides.threads == Some(0) {
        return Err(CliError::Usage("--threads must be >= 1".into()));
    }

    let output = run_monte_carlo(&config, overrides.threads)?;
    fs::create_dir_all(out_dir).map_err(io_context(format!("creating {}", out_dir.display())))?;
    let trials_path = out_dir.join("trials.csv");
    let file = fs::File::create(&trials_path).map_err(io_context(format!("writing {}", trials_path.display())))?;
    write_trials_csv(&output.trials, std::io::BufWriter::new(file))?;
    let summary_path = out_dir.join("summary.json");
    let json = serde_json::to_string_pretty(&output.summary).expect("summary serializes");
    fs::write(&summary_path, json + "\n").map_err(io_context(format!("writing {}", summary_path.display())))?;
    Ok(output.summary)
}

fn fmt_rate(r: Option<f64>) -> String {
    r.map_or("n/a".to_string(), |v| format!("{v:.6}"))
}

fn print_json<T: Serialize>(value: &T, out: &mut dyn Write) -> std::io::Result<()> {
    writeln!(out, "{}", serde_json::to_string_pretty(value).expect("report serializes"))
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let informational = matches!(
                e.kind(),
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion
            );
            if informational {
                let _ = write!(out, "{e}");
                return EXIT_OK;
            }
            let _ = write!(err, "{e}");
            return EXIT_INPUT;
        }
    };
    let result = dispatch(&cli.command, out);
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_INPUT
        }
    }
}

fn dispatch(command: &Command, out: &mut dyn Write) -> Result<i32, CliError> {
    let stdout = io_context("writing to stdout");
    match command {
        Command::Fit(args) => {
            let report = cmd_fit(args)?;
            match &args.output {
                Some(path) => {
                    let json = serde_json::to_string_pretty(&report).expect("report serializes");
                    fs::write(path, json + "\n").map_err(io_context(format!("writing {}", path.display())))?;
                }
                None => print_json(&report, out).map_err(stdout)?,
            }
            Ok(if report.converged { EXIT_OK } else { EXIT_NOT_CONVERGED })
        }
        Command::Calibrate(args) => {
            print_json(&cmd_calibrate(args)?, out).map_err(stdout)?;
            Ok(EXIT_OK)
        }
        Command::ReCheck(args) => {
            print_json(&cmd_re_check(args)?, out).map_err(stdout)?;
            Ok(EXIT_OK)
        }
        Command::Simulate(args) => {
            let summary = cmd_simulate(&args.config, &args.out_dir, &args.overrides)?;
            let lines = [
                format!("trials: {} ({} failed)", summary.trials_total, summary.trials_failed),
                format!("coverage at s: {:.6}", summary.coverage_rate_s),
                format!("coverage at s/2: {:.6}", summary.coverage_rate_s_half),
                format!("all four bounds, unconditional: {}", fmt_rate(summary.simultaneous_bound_rate)),
                format!(
                    "all four bounds, given beta* in DC(s/2): {} over {} trials",
                    fmt_rate(summary.conditional_simultaneous_rate),
                    summary.conditional_trials
                ),
                format!("c = {} ({})", summary.c_used, summary.c_note),
            ];
            for line in lines {
                writeln!(out, "{line}").map_err(io_context("writing to stdout"))?;
            }
            Ok(EXIT_OK)
        }
    }
}
