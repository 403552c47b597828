//! Seeded Monte Carlo harness: scenario generation, per-trial estimation and the
//! aggregation of coverage and oracle-inequality checks.
//!
//! Randomness comes from ChaCha20 with one independent stream per `(purpose, index)` pair
//! under the master seed, so every trial is reproducible on its own and results do not
//! depend on the thread schedule.

use std::io::Write;
use std::sync::Arc;
use std::time::Instant;

use rand::seq::index::sample as sample_indices;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assumptions::{re_constant, ConeSpec};
use crate::estimators::{solve_gds, solve_gl, SolutionReport, SolverConfig};
use crate::io::format_number;
use crate::linalg::{
    build_pair, condition_number, l1_norm, normalize_design, DesignMatrix, DesignProblem,
    GeneralizedPair, LinalgTolerances,
};
use crate::region::{calibrate_s, coverage_bound, DantzigRegion};
use crate::{Error, Matrix, Result, Vector};

pub const RNG_DESCRIPTION: &str =
    "ChaCha20 (rand_chacha 0.9), seed_from_u64(master_seed), stream = (purpose << 48) | index; purposes: design=1, truth=2, noise=3, re_sampler=4";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    Design = 1,
    Truth = 2,
    Noise = 3,
    ReSampler = 4,
}

/// Independent generator for `(master_seed, purpose, index)`.
pub fn substream(master_seed: u64, purpose: Purpose, index: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(master_seed);
    rng.set_stream(((purpose as u64) << 48) | (index & ((1 << 48) - 1)));
    rng
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DesignKind {
    GaussianIid,
    OrthonormalScaled,
    Ar1 { rho: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PairKind {
    /// `A = X'X`, `P = I`.
    Identity,
    /// Row-major `P`; `A` defaults to `(X'X) P` when omitted.
    User {
        p: Vec<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        a: Option<Vec<Vec<f64>>>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReConfig {
    /// Sampling budget of the restricted eigenvalue search.
    pub budget: usize,
    /// Use this constant instead of estimating it.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
}

impl Default for ReConfig {
    fn default() -> Self {
        Self {
            budget: 10_000,
            c: None,
        }
    }
}

fn default_magnitude() -> f64 {
    5.0
}

fn default_true() -> bool {
    true
}

fn default_bound_tolerance() -> f64 {
    1e-8
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub n: usize,
    pub p: usize,
    /// `||P beta*||_0`.
    pub k: usize,
    pub sigma: f64,
    pub epsilon: f64,
    pub design: DesignKind,
    #[serde(default = "default_identity")]
    pub pair: PairKind,
    #[serde(default = "default_magnitude")]
    pub signal_magnitude: f64,
    pub replications: usize,
    pub master_seed: u64,
    /// Skip the estimators and only record coverage events.
    #[serde(default = "default_true")]
    pub solve_estimators: bool,
    /// Relative slack when comparing errors to bounds: `err <= bound + tol * (1 + bound)`.
    #[serde(default = "default_bound_tolerance")]
    pub bound_tolerance: f64,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub re: ReConfig,
}

fn default_identity() -> PairKind {
    PairKind::Identity
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("scenario config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::InvalidConfig(m));
        if self.n == 0 || self.p == 0 {
            return fail(format!("n and p must be >= 1, got n={}, p={}", self.n, self.p));
        }
        if self.k > self.p {
            return fail(format!("k = {} exceeds p = {}", self.k, self.p));
        }
        if self.replications == 0 {
            return fail("replications must be >= 1".into());
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return fail(format!("epsilon must lie in (0, 1), got {}", self.epsilon));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return fail(format!("sigma must be finite and >= 0, got {}", self.sigma));
        }
        if !self.signal_magnitude.is_finite() {
            return fail("signal_magnitude must be finite".into());
        }
        if !(self.bound_tolerance >= 0.0) {
            return fail("bound_tolerance must be >= 0".into());
        }
        match self.design {
            DesignKind::OrthonormalScaled if self.n < self.p => {
                return fail(format!("orthonormal_scaled needs n >= p, got n={}, p={}", self.n, self.p));
            }
            DesignKind::Ar1 { rho } if !(rho.abs() < 1.0) => {
                return fail(format!("ar1 needs |rho| < 1, got {rho}"));
            }
            _ => {}
        }
        if let PairKind::User { p, a } = &self.pair {
            check_rows(p, self.p, "pair.p")?;
            if let Some(a) = a {
                check_rows(a, self.p, "pair.a")?;
            }
        }
        if let Some(c) = self.re.c {
            if !(c > 0.0 && c.is_finite()) {
                return fail(format!("re.c must be positive, got {c}"));
            }
        }
        if self.re.budget == 0 {
            return fail("re.budget must be >= 1".into());
        }
        self.solver.validate()
    }
}

fn check_rows(rows: &[Vec<f64>], p: usize, what: &str) -> Result<()> {
    if rows.len() != p || rows.iter().any(|r| r.len() != p) {
        return Err(Error::InvalidConfig(format!("{what} must be {p}x{p}")));
    }
    Ok(())
}

fn rows_to_matrix(rows: &[Vec<f64>]) -> Matrix {
    let p = rows.len();
    Matrix::from_fn(p, p, |i, j| rows[i][j])
}

/// Fixed design of the given kind. Draws come from the `design` substream of `seed`.
pub fn generate_design(kind: &DesignKind, n: usize, p: usize, seed: u64) -> Result<DesignMatrix> {
    if n == 0 || p == 0 {
        return Err(Error::InvalidShape(format!("need n, p >= 1, got {n}x{p}")));
    }
    let mut rng = substream(seed, Purpose::Design, 0);
    let mut draw = || -> f64 { StandardNormal.sample(&mut rng) };
    // Rows are drawn in order, one AR(1) chain per row; rho = 0 is the i.i.d. case.
    let mut chained_rows = |rho: f64| {
        let innovation = (1.0 - rho * rho).sqrt();
        let mut m = Matrix::zeros(n, p);
        for i in 0..n {
            let mut prev = 0.0;
            for j in 0..p {
                let z = draw();
                let v = if j == 0 { z } else { rho * prev + innovation * z };
                m[(i, j)] = v;
                prev = v;
            }
        }
        m
    };
    let raw = match kind {
        DesignKind::GaussianIid => chained_rows(0.0),
        DesignKind::Ar1 { rho } => {
            if !(rho.abs() < 1.0) {
                return Err(Error::InvalidShape(format!("ar1 needs |rho| < 1, got {rho}")));
            }
            chained_rows(*rho)
        }
        DesignKind::OrthonormalScaled => {
            if n < p {
                return Err(Error::InvalidShape(format!(
                    "orthonormal_scaled needs n >= p, got n={n}, p={p}"
                )));
            }
            let g = chained_rows(0.0);
            let q = g.qr().q();
            q.columns(0, p).into_owned() * (n as f64).sqrt()
        }
    };
    normalize_design(&raw)
}

/// Sparse `gamma* = P beta*` with `k` coordinates at `+-magnitude`, and `beta* = P^{-1} gamma*`.
pub fn generate_truth(
    p_matrix: &Matrix,
    p: usize,
    k: usize,
    magnitude: f64,
    seed: u64,
) -> Result<(Vector, Vector)> {
    if k > p {
        return Err(Error::InvalidShape(format!("k = {k} exceeds p = {p}")));
    }
    if p_matrix.shape() != (p, p) {
        return Err(Error::DimensionMismatch {
            what: "P dimension",
            expected: p,
            found: p_matrix.nrows(),
        });
    }
    let condition = condition_number(p_matrix);
    if !(condition <= LinalgTolerances::default().max_condition) {
        return Err(Error::SingularP { condition });
    }
    let mut rng = substream(seed, Purpose::Truth, 0);
    let mut gamma = Vector::zeros(p);
    let mut chosen = sample_indices(&mut rng, p, k).into_vec();
    chosen.sort_unstable();
    for j in chosen {
        gamma[j] = if rng.random_bool(0.5) { magnitude } else { -magnitude };
    }
    let beta = p_matrix
        .clone()
        .lu()
        .solve(&gamma)
        .ok_or(Error::SingularP { condition })?;
    Ok((beta, gamma))
}

/// Right-hand sides of the four oracle inequalities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleBounds {
    pub gds_a: f64,
    pub gds_l1: f64,
    pub gl_a: f64,
    pub gl_l1: f64,
}

impl OracleBounds {
    pub fn new(sigma: f64, c: f64, k: usize, n: usize, p: usize, epsilon: f64) -> Self {
        let log_term = (p as f64 / epsilon).ln();
        let k = k as f64;
        let root = (c * log_term / n as f64).sqrt();
        let sqrt2 = std::f64::consts::SQRT_2;
        Self {
            gds_a: 72.0 * sigma * sigma * c * k * log_term,
            gds_l1: 18.0 * sqrt2 * sigma * k * root,
            gl_a: 128.0 * sigma * sigma * c * k * log_term,
            gl_l1: 32.0 * sqrt2 * sigma * k * root,
        }
    }
}

/// Everything fixed across replications.
#[derive(Debug, Clone)]
pub struct PreparedScenario {
    pub config: ScenarioConfig,
    pub design: Arc<DesignMatrix>,
    pub pair: GeneralizedPair,
    pub beta_star: Vector,
    pub gamma_star: Vector,
    pub s: f64,
    pub c_used: f64,
    pub c_exact: bool,
    pub c_note: String,
    pub bounds: OracleBounds,
}

impl PreparedScenario {
    pub fn new(config: &ScenarioConfig) -> Result<Self> {
        config.validate()?;
        let (n, p) = (config.n, config.p);
        let design = Arc::new(generate_design(&config.design, n, p, config.master_seed)?);
        let pair = match &config.pair {
            PairKind::Identity => GeneralizedPair::identity(&design)?,
            PairKind::User { p: p_rows, a } => {
                let p_matrix = rows_to_matrix(p_rows);
                let a_matrix = match a {
                    Some(rows) => rows_to_matrix(rows),
                    None => design.gram() * &p_matrix,
                };
                build_pair(&design, &a_matrix, &p_matrix, &LinalgTolerances::default())?
            }
        };
        let (beta_star, gamma_star) =
            generate_truth(pair.p(), p, config.k, config.signal_magnitude, config.master_seed)?;
        let s = calibrate_s(config.sigma, n, p, config.epsilon)?;

        let orthonormal_identity = matches!(config.design, DesignKind::OrthonormalScaled)
            && matches!(config.pair, PairKind::Identity);
        let (c_used, c_exact, c_note) = if let Some(c) = config.re.c {
            (c, false, "supplied in configuration".to_string())
        } else if config.k == 0 {
            (1.0, true, "empty support: every bound is zero, c is immaterial".to_string())
        } else if orthonormal_identity {
            (1.0, true, "Omega = I for an orthonormal design with the identity pair".to_string())
        } else {
            let cone = ConeSpec::from_nonzeros(&gamma_star)?;
            let seed = substream(config.master_seed, Purpose::ReSampler, 0).next_u64();
            let est = re_constant(pair.omega(), &cone, config.re.budget, seed)?;
            match est.c_exact_or_upper {
                Some(exact) => (exact, true, "closed-form restricted eigenvalue constant".to_string()),
                None => (
                    est.c_lower,
                    false,
                    "sampled lower bound on c; bound checks may be optimistic".to_string(),
                ),
            }
        };
        let bounds = OracleBounds::new(config.sigma, c_used, config.k, n, p, config.epsilon);
        Ok(Self {
            config: config.clone(),
            design,
            pair,
            beta_star,
            gamma_star,
            s,
            c_used,
            c_exact,
            c_note,
            bounds,
        })
    }

    fn errors(&self, estimate: &SolutionReport) -> (f64, f64) {
        let d = &estimate.beta_hat - &self.beta_star;
        (self.pair.quadratic(&d).max(0.0), l1_norm(&(self.pair.p() * d)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InequalityFlags {
    pub gds_a: bool,
    pub gds_l1: bool,
    pub gl_a: bool,
    pub gl_l1: bool,
}

impl InequalityFlags {
    pub fn all(&self) -> bool {
        self.gds_a && self.gds_l1 && self.gl_a && self.gl_l1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub trial_index: usize,
    pub covered_s: bool,
    pub covered_s_half: bool,
    pub err_a_gds: f64,
    pub err_l1p_gds: f64,
    pub err_a_gl: f64,
    pub err_l1p_gl: f64,
    pub bounds: OracleBounds,
    /// `None` when the estimators were skipped or failed.
    pub holds: Option<InequalityFlags>,
    pub failure: Option<String>,
}

/// One replication: fresh noise, both estimators, the four errors and bound checks.
pub fn run_trial(scenario: &PreparedScenario, trial_index: usize) -> TrialResult {
    let config = &scenario.config;
    let mut rng = substream(config.master_seed, Purpose::Noise, trial_index as u64);
    let noise = Vector::from_fn(config.n, |_, _| {
        let z: f64 = StandardNormal.sample(&mut rng);
        config.sigma * z
    });
    let y = scenario.design.entries() * &scenario.beta_star + noise;
    let mut result = TrialResult {
        trial_index,
        covered_s: false,
        covered_s_half: false,
        err_a_gds: f64::NAN,
        err_l1p_gds: f64::NAN,
        err_a_gl: f64::NAN,
        err_l1p_gl: f64::NAN,
        bounds: scenario.bounds,
        holds: None,
        failure: None,
    };
    let outcome = (|| -> Result<()> {
        let problem = DesignProblem::new(Arc::clone(&scenario.design), y, config.sigma)?;
        let region = DantzigRegion::new(&problem, scenario.s)?;
        result.covered_s = region.contains_default(&scenario.beta_star)?;
        result.covered_s_half = region.at_level(scenario.s / 2.0)?.contains_default(&scenario.beta_star)?;
        if !config.solve_estimators {
            return Ok(());
        }
        let gds = solve_gds(&problem, scenario.pair.p(), scenario.s, &config.solver)?.ensure_converged()?;
        let gl = solve_gl(&problem, &scenario.pair, scenario.s, &config.solver)?.ensure_converged()?;
        (result.err_a_gds, result.err_l1p_gds) = scenario.errors(&gds);
        (result.err_a_gl, result.err_l1p_gl) = scenario.errors(&gl);
        let tol = config.bound_tolerance;
        let ok = |err: f64, bound: f64| err <= bound + tol * (1.0 + bound);
        let b = &scenario.bounds;
        result.holds = Some(InequalityFlags {
            gds_a: ok(result.err_a_gds, b.gds_a),
            gds_l1: ok(result.err_l1p_gds, b.gds_l1),
            gl_a: ok(result.err_a_gl, b.gl_a),
            gl_l1: ok(result.err_l1p_gl, b.gl_l1),
        });
        Ok(())
    })();
    if let Err(e) = outcome {
        result.failure = Some(e.to_string());
        result.holds = None;
    }
    result
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InequalityRates {
    pub gds_a: f64,
    pub gds_l1: f64,
    pub gl_a: f64,
    pub gl_l1: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorStats {
    pub mean: f64,
    pub median: f64,
    pub max: f64,
}

impl ErrorStats {
    fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let m = sorted.len();
        let median = if m % 2 == 1 {
            sorted[m / 2]
        } else {
            0.5 * (sorted[m / 2 - 1] + sorted[m / 2])
        };
        Some(Self {
            mean: values.iter().sum::<f64>() / m as f64,
            median,
            max: sorted[m - 1],
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorErrors {
    pub gds_a: ErrorStats,
    pub gds_l1: ErrorStats,
    pub gl_a: ErrorStats,
    pub gl_l1: ErrorStats,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SummaryReport {
    pub scenario: ScenarioConfig,
    pub s: f64,
    /// Guaranteed coverage at `s` and at `s / 2`.
    pub coverage_bound_s: f64,
    pub coverage_bound_s_half: f64,
    pub trials_total: usize,
    pub trials_failed: usize,
    /// Over all trials; the membership events do not depend on the solvers.
    pub coverage_rate_s: f64,
    pub coverage_rate_s_half: f64,
    /// Over trials whose estimators succeeded.
    pub simultaneous_bound_rate: Option<f64>,
    pub inequality_rates: Option<InequalityRates>,
    /// Over successful trials with `beta*` in `DC(s/2)`.
    pub conditional_trials: usize,
    pub conditional_simultaneous_rate: Option<f64>,
    pub conditional_inequality_rates: Option<InequalityRates>,
    pub errors: Option<EstimatorErrors>,
    pub bounds: OracleBounds,
    pub c_used: f64,
    pub c_exact: bool,
    pub c_note: String,
    pub rng: String,
    pub threads: usize,
    pub runtime_seconds: f64,
}

#[derive(Debug, Clone)]
pub struct MonteCarloOutput {
    pub summary: SummaryReport,
    pub trials: Vec<TrialResult>,
}

fn rates<'a>(flags: impl Iterator<Item = &'a InequalityFlags> + Clone) -> Option<(f64, InequalityRates)> {
    let total = flags.clone().count();
    if total == 0 {
        return None;
    }
    let frac = |f: &dyn Fn(&InequalityFlags) -> bool| {
        flags.clone().filter(|x| f(x)).count() as f64 / total as f64
    };
    Some((
        frac(&|x| x.all()),
        InequalityRates {
            gds_a: frac(&|x| x.gds_a),
            gds_l1: frac(&|x| x.gds_l1),
            gl_a: frac(&|x| x.gl_a),
            gl_l1: frac(&|x| x.gl_l1),
        },
    ))
}

/// Aggregates per-trial results. Failed trials are excluded from the bound-rate denominators.
pub fn summarize(scenario: &PreparedScenario, trials: &[TrialResult], threads: usize, runtime_seconds: f64) -> SummaryReport {
    let config = &scenario.config;
    let total = trials.len();
    let failed = trials.iter().filter(|t| t.failure.is_some()).count();
    let frac = |pred: &dyn Fn(&TrialResult) -> bool| {
        trials.iter().filter(|t| pred(t)).count() as f64 / total.max(1) as f64
    };
    let unconditional = rates(trials.iter().filter_map(|t| t.holds.as_ref()));
    let conditional_flags = trials
        .iter()
        .filter(|t| t.covered_s_half)
        .filter_map(|t| t.holds.as_ref());
    let conditional_trials = conditional_flags.clone().count();
    let conditional = rates(conditional_flags);

    let solved: Vec<&TrialResult> = trials.iter().filter(|t| t.holds.is_some()).collect();
    let stat = |f: &dyn Fn(&TrialResult) -> f64| {
        ErrorStats::of(&solved.iter().map(|t| f(t)).collect::<Vec<_>>())
    };
    let errors = match (
        stat(&|t| t.err_a_gds),
        stat(&|t| t.err_l1p_gds),
        stat(&|t| t.err_a_gl),
        stat(&|t| t.err_l1p_gl),
    ) {
        (Some(gds_a), Some(gds_l1), Some(gl_a), Some(gl_l1)) => Some(EstimatorErrors {
            gds_a,
            gds_l1,
            gl_a,
            gl_l1,
        }),
        _ => None,
    };

    let bound_at = |level: f64| {
        if config.sigma > 0.0 {
            coverage_bound(level, config.sigma, config.n, config.p).unwrap_or(0.0)
        } else {
            1.0
        }
    };
    SummaryReport {
        scenario: config.clone(),
        s: scenario.s,
        coverage_bound_s: bound_at(scenario.s),
        coverage_bound_s_half: bound_at(scenario.s / 2.0),
        trials_total: total,
        trials_failed: failed,
        coverage_rate_s: frac(&|t| t.covered_s),
        coverage_rate_s_half: frac(&|t| t.covered_s_half),
        simultaneous_bound_rate: unconditional.map(|r| r.0),
        inequality_rates: unconditional.map(|r| r.1),
        conditional_trials,
        conditional_simultaneous_rate: conditional.map(|r| r.0),
        conditional_inequality_rates: conditional.map(|r| r.1),
        errors,
        bounds: scenario.bounds,
        c_used: scenario.c_used,
        c_exact: scenario.c_exact,
        c_note: scenario.c_note.clone(),
        rng: RNG_DESCRIPTION.to_string(),
        threads,
        runtime_seconds,
    }
}

/// Runs every replication of the scenario on `threads` workers (all cores when `None`).
pub fn run_monte_carlo(config: &ScenarioConfig, threads: Option<usize>) -> Result<MonteCarloOutput> {
    let started = Instant::now();
    let scenario = PreparedScenario::new(config)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    let workers = pool.current_num_threads();
    let trials: Vec<TrialResult> = pool.install(|| {
        (0..config.replications)
            .into_par_iter()
            .map(|i| run_trial(&scenario, i))
            .collect()
    });
    let summary = summarize(&scenario, &trials, workers, started.elapsed().as_secs_f64());
    Ok(MonteCarloOutput { summary, trials })
}

/// Column order of the per-trial table.
pub const TRIAL_COLUMNS: [&str; 16] = [
    "trial_index",
    "covered_s",
    "covered_s_half",
    "err_A_gds",
    "err_l1P_gds",
    "err_A_gl",
    "err_l1P_gl",
    "bound_gds_A",
    "bound_gds_l1",
    "bound_gl_A",
    "bound_gl_l1",
    "holds_gds_A",
    "holds_gds_l1",
    "holds_gl_A",
    "holds_gl_l1",
    "status",
];

pub fn write_trials_csv<W: Write>(trials: &[TrialResult], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| Error::Io(std::io::Error::other(e));
    w.write_record(TRIAL_COLUMNS).map_err(csv_err)?;
    for t in trials {
        let flag = |f: fn(&InequalityFlags) -> bool| match &t.holds {
            Some(h) => f(h).to_string(),
            None => "NA".to_string(),
        };
        let status = match &t.failure {
            Some(msg) => format!("failed: {msg}"),
            None => "ok".to_string(),
        };
        let record = [
            t.trial_index.to_string(),
            t.covered_s.to_string(),
            t.covered_s_half.to_string(),
            format_number(t.err_a_gds),
            format_number(t.err_l1p_gds),
            format_number(t.err_a_gl),
            format_number(t.err_l1p_gl),
            format_number(t.bounds.gds_a),
            format_number(t.bounds.gds_l1),
            format_number(t.bounds.gl_a),
            format_number(t.bounds.gl_l1),
            flag(|h| h.gds_a),
            flag(|h| h.gds_l1),
            flag(|h| h.gl_a),
            flag(|h| h.gl_l1),
            status,
        ];
        w.write_record(&record).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests;
