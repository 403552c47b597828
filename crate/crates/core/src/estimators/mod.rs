//! Estimators defined as seminorm projections onto `DC(s)`.
//!
//! * [`solve_gds`]: generalized Dantzig selector, `min ||P beta||_1` over `DC(s)`.
//! * [`solve_gl`]: generalized LASSO, `min beta'A beta` over `DC(s)`; when `A` is singular the
//!   minimizers are tie-broken by smallest `||P beta||_1` in a second stage.
//! * [`solve_penalized`]: the penalized program
//!   `||Y - XPb||^2 + 2s ||Pb||_1 + (Pb)'(n Omega - X'X)(Pb)` solved by coordinate descent.
//! * [`project`]: the projection of an arbitrary point under either seminorm.
//!
//! `DC(s)` is never empty for `s >= 0` because `X'Y` lies in the range of `X'X`; the
//! [`Error::Infeasible`] variant only guards against that identity failing numerically.

mod engine;
mod tiebreak;

use serde::{Deserialize, Serialize};

use crate::linalg::{inf_norm, l1_norm, max_abs, soft_threshold, DesignProblem, GeneralizedPair, Spectrum};
use crate::region::DantzigRegion;
use crate::{Error, Matrix, Result, Vector};
use engine::{Program, WarmStart};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub max_iterations: usize,
    pub tol_primal: f64,
    pub tol_dual: f64,
    /// Initial ADMM penalty; rescaled when the residuals drift apart by more than `adaptive_ratio`.
    pub penalty_parameter: f64,
    /// Slack `t` of the level set `beta'A beta <= q* + t (1 + q*)` that a tie-broken
    /// solution must stay in.
    pub tie_break_tolerance: f64,
    /// A converged report has `feasibility_gap <= feasibility_tolerance * (1 + s)`.
    pub feasibility_tolerance: f64,
    pub relaxation: f64,
    pub adaptive_ratio: f64,
    pub polish: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iterations: 50_000,
            tol_primal: 1e-8,
            tol_dual: 1e-8,
            penalty_parameter: 1.0,
            tie_break_tolerance: 1e-7,
            feasibility_tolerance: 1e-6,
            relaxation: 1.6,
            adaptive_ratio: 10.0,
            polish: true,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("tol_primal", self.tol_primal),
            ("tol_dual", self.tol_dual),
            ("penalty_parameter", self.penalty_parameter),
            ("tie_break_tolerance", self.tie_break_tolerance),
            ("feasibility_tolerance", self.feasibility_tolerance),
        ];
        for (name, value) in positive {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::InvalidConfig(format!("{name} must be positive, got {value}")));
            }
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidConfig("max_iterations must be >= 1".into()));
        }
        if !(self.relaxation > 0.0 && self.relaxation < 2.0) {
            return Err(Error::InvalidConfig(format!(
                "relaxation must lie in (0, 2), got {}",
                self.relaxation
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Single,
    TieBreak,
}

#[derive(Debug, Clone)]
pub struct SolutionReport {
    pub beta_hat: Vector,
    pub objective_value: f64,
    /// `max(0, ||X'(Y - X beta_hat)||_inf - s)`.
    pub feasibility_gap: f64,
    pub iterations: usize,
    pub converged: bool,
    pub stage: Stage,
    /// Final splitting residuals (for coordinate descent: last coordinate change, and zero).
    pub primal_residual: f64,
    pub dual_residual: f64,
}

impl SolutionReport {
    /// Turns a non-converged report into [`Error::NotConverged`].
    pub fn ensure_converged(self) -> Result<Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::NotConverged {
                iterations: self.iterations,
                primal: self.primal_residual,
                dual: self.dual_residual,
            })
        }
    }
}

/// Which seminorm a projection uses.
#[derive(Debug, Clone, Copy)]
pub enum Seminorm<'a> {
    /// `||P v||_1`
    L1OfP(&'a Matrix),
    /// `(v'A v)^{1/2}`
    QuadraticA(&'a GeneralizedPair),
}

impl Seminorm<'_> {
    pub fn distance(&self, u: &Vector, v: &Vector) -> f64 {
        let d = u - v;
        match self {
            Seminorm::L1OfP(p) => l1_norm(&(*p * d)),
            Seminorm::QuadraticA(pair) => pair.quadratic(&d).max(0.0).sqrt(),
        }
    }
}

fn check_level(s: f64) -> Result<()> {
    if !(s >= 0.0 && s.is_finite()) {
        return Err(Error::InvalidLevel(format!("s must be finite and >= 0, got {s}")));
    }
    Ok(())
}

fn check_square(m: &Matrix, p: usize, what: &'static str) -> Result<()> {
    if m.nrows() != p || m.ncols() != p {
        return Err(Error::DimensionMismatch {
            what,
            expected: p,
            found: if m.nrows() != p { m.nrows() } else { m.ncols() },
        });
    }
    Ok(())
}

/// The right-hand side `c` and the shared Gram data of one program.
struct Instance<'a> {
    gram: &'a Matrix,
    spectrum: &'a Spectrum,
    target: Vector,
    s: f64,
}

impl<'a> Instance<'a> {
    fn new(problem: &'a DesignProblem, target: Vector, s: f64) -> Self {
        Self {
            gram: problem.design().gram(),
            spectrum: problem.design().gram_spectrum(),
            target,
            s,
        }
    }

    fn cutoff(&self) -> f64 {
        crate::linalg::default_cutoff(self.gram.nrows())
    }

    fn gap(&self, beta: &Vector) -> f64 {
        (inf_norm(&(&self.target - self.gram * beta)) - self.s).max(0.0)
    }

    /// Least-squares point `G^+ c`.
    fn least_squares(&self) -> Vector {
        self.spectrum.pseudo_inverse(self.cutoff()) * &self.target
    }

    fn check_nonempty(&self, config: &SolverConfig) -> Result<()> {
        let min_level = inf_norm(&(&self.target - self.gram * self.least_squares()));
        if min_level > self.s + config.feasibility_tolerance * (1.0 + self.s) {
            return Err(Error::Infeasible {
                s: self.s,
                min_level,
            });
        }
        Ok(())
    }

    fn zero_is_feasible(&self) -> bool {
        inf_norm(&self.target) <= self.s
    }

    fn gram_is_definite(&self) -> bool {
        self.spectrum.rank(self.cutoff()) == self.gram.nrows()
    }

    fn direct(&self, beta: Vector, objective: f64) -> SolutionReport {
        let gap = self.gap(&beta);
        SolutionReport {
            beta_hat: beta,
            objective_value: objective,
            feasibility_gap: gap,
            iterations: 0,
            converged: true,
            stage: Stage::Single,
            primal_residual: 0.0,
            dual_residual: 0.0,
        }
    }

    fn converged(&self, gap: f64, config: &SolverConfig) -> bool {
        gap <= config.feasibility_tolerance * (1.0 + self.s)
    }
}

fn gds_core(
    inst: &Instance<'_>,
    p_matrix: &Matrix,
    config: &SolverConfig,
    warm: Option<&WarmStart>,
) -> Result<(SolutionReport, Option<WarmStart>)> {
    let objective = |b: &Vector| l1_norm(&(p_matrix * b));
    if inst.zero_is_feasible() {
        let zero = Vector::zeros(inst.gram.nrows());
        return Ok((inst.direct(zero, 0.0), None));
    }
    if inst.s == 0.0 && inst.gram_is_definite() {
        let beta = inst.least_squares();
        let obj = objective(&beta);
        return Ok((inst.direct(beta, obj), None));
    }
    inst.check_nonempty(config)?;
    let program = Program {
        gram: inst.gram,
        target: inst.target.clone(),
        level: inst.s,
        p_matrix,
        l1: true,
        quadratic: None,
    };
    let out = program.solve(config, warm);
    let gap = inst.gap(&out.beta);
    let report = SolutionReport {
        objective_value: objective(&out.beta),
        feasibility_gap: gap,
        iterations: out.iterations,
        converged: out.converged && inst.converged(gap, config),
        stage: Stage::Single,
        primal_residual: out.primal,
        dual_residual: out.dual,
        beta_hat: out.beta,
    };
    Ok((report, Some(out.warm)))
}

fn gl_core(inst: &Instance<'_>, pair: &GeneralizedPair, config: &SolverConfig) -> Result<SolutionReport> {
    let objective = |b: &Vector| pair.quadratic(b);
    if inst.zero_is_feasible() {
        let zero = Vector::zeros(inst.gram.nrows());
        return Ok(inst.direct(zero, 0.0));
    }
    if inst.s == 0.0 && inst.gram_is_definite() {
        let beta = inst.least_squares();
        let obj = objective(&beta);
        return Ok(inst.direct(beta, obj));
    }
    inst.check_nonempty(config)?;

    let first = Program {
        gram: inst.gram,
        target: inst.target.clone(),
        level: inst.s,
        p_matrix: pair.p(),
        l1: false,
        quadratic: Some(pair.a()),
    };
    let out = first.solve(config, None);
    let gap = inst.gap(&out.beta);
    if pair.is_a_definite() {
        return Ok(SolutionReport {
            objective_value: objective(&out.beta),
            feasibility_gap: gap,
            iterations: out.iterations,
            converged: out.converged && inst.converged(gap, config),
            stage: Stage::Single,
            primal_residual: out.primal,
            dual_residual: out.dual,
            beta_hat: out.beta,
        });
    }

    // Singular A: the stage-one minimizers form beta_0 + Ker A, because neither the
    // objective nor the constraint sees Ker A = Ker X'X. The tie-break runs over that set,
    // which lies inside the tolerance-relaxed level set.
    let q_star = objective(&out.beta).max(0.0);
    let kernel = pair.kernel_basis();
    let beta0 = &out.beta - kernel * (kernel.transpose() * &out.beta);
    let d = pair.p() * &beta0;
    let b = pair.p() * kernel;
    let lad = tiebreak::solve_lad(&d, &b, config);
    let beta = beta0 + kernel * &lad.w;
    let tie_gap = inst.gap(&beta);
    let value = objective(&beta);
    let in_level_set = value <= q_star + config.tie_break_tolerance * (1.0 + q_star);
    Ok(SolutionReport {
        objective_value: value,
        feasibility_gap: tie_gap,
        iterations: out.iterations + lad.iterations,
        converged: out.converged && lad.converged && in_level_set && inst.converged(tie_gap, config),
        stage: Stage::TieBreak,
        primal_residual: out.primal.max(lad.primal),
        dual_residual: out.dual.max(lad.dual),
        beta_hat: beta,
    })
}

/// Generalized Dantzig selector: a minimizer of `||P beta||_1` over `DC(s)`.
///
/// When the minimizer is not unique an arbitrary one is returned.
pub fn solve_gds(
    problem: &DesignProblem,
    p_matrix: &Matrix,
    s: f64,
    config: &SolverConfig,
) -> Result<SolutionReport> {
    check_level(s)?;
    config.validate()?;
    check_square(p_matrix, problem.p(), "P dimension")?;
    let inst = Instance::new(problem, problem.xty().clone(), s);
    Ok(gds_core(&inst, p_matrix, config, None)?.0)
}

/// Solves the selector along a sequence of levels, warm-starting each solve from the
/// previous one.
pub fn solve_gds_path(
    problem: &DesignProblem,
    p_matrix: &Matrix,
    levels: &[f64],
    config: &SolverConfig,
) -> Result<Vec<SolutionReport>> {
    config.validate()?;
    check_square(p_matrix, problem.p(), "P dimension")?;
    let mut warm: Option<WarmStart> = None;
    let mut reports = Vec::with_capacity(levels.len());
    for &s in levels {
        check_level(s)?;
        let inst = Instance::new(problem, problem.xty().clone(), s);
        let (report, next) = gds_core(&inst, p_matrix, config, warm.as_ref())?;
        if next.is_some() {
            warm = next;
        }
        reports.push(report);
    }
    Ok(reports)
}

/// Generalized LASSO: a minimizer of `beta'A beta` over `DC(s)`, tie-broken by `||P beta||_1`.
pub fn solve_gl(
    problem: &DesignProblem,
    pair: &GeneralizedPair,
    s: f64,
    config: &SolverConfig,
) -> Result<SolutionReport> {
    check_level(s)?;
    config.validate()?;
    check_square(pair.a(), problem.p(), "A dimension")?;
    let inst = Instance::new(problem, problem.xty().clone(), s);
    gl_core(&inst, pair, config)
}

/// `||Y - XPb||^2 + 2s ||Pb||_1 + (Pb)'(n Omega - X'X)(Pb)`.
pub fn penalized_objective(problem: &DesignProblem, pair: &GeneralizedPair, s: f64, b: &Vector) -> f64 {
    let gamma = pair.p() * b;
    let x = problem.design().entries();
    let resid = problem.y() - x * &gamma;
    let n = problem.n() as f64;
    let curvature = pair.omega() * n - problem.design().gram();
    resid.norm_squared() + 2.0 * s * l1_norm(&gamma) + gamma.dot(&(curvature * &gamma))
}

/// Minimizes the penalized program by cyclic coordinate descent in `gamma = P b`.
///
/// In `gamma` the objective is `Y'Y - 2 gamma'X'Y + gamma'(n Omega) gamma + 2s ||gamma||_1`, so
/// each coordinate update is a soft-threshold at level `s` divided by `(n Omega)_jj`.
pub fn solve_penalized(
    problem: &DesignProblem,
    pair: &GeneralizedPair,
    s: f64,
    config: &SolverConfig,
) -> Result<SolutionReport> {
    check_level(s)?;
    config.validate()?;
    let p = problem.p();
    check_square(pair.a(), p, "A dimension")?;
    let gram = problem.design().gram();
    let n = problem.n() as f64;
    let q = pair.omega() * n;

    let excess = Spectrum::of(&(&q - gram), 1e-8)?;
    let min_eig = excess.min_eigenvalue();
    if min_eig < -1e-8 * max_abs(gram) {
        return Err(Error::NonConvexPenalizedForm {
            min_eigenvalue: min_eig,
        });
    }

    let c = problem.xty();
    let diag_floor = 1e-12 * max_abs(&q).max(1e-300);
    let mut gamma = Vector::zeros(p);
    let mut q_gamma = Vector::zeros(p);
    let mut sweeps = 0;
    let mut converged = false;
    let mut last_change = f64::INFINITY;
    while sweeps < config.max_iterations {
        sweeps += 1;
        let mut max_change = 0.0_f64;
        for j in 0..p {
            let qjj = q[(j, j)];
            let partial = c[j] - (q_gamma[j] - qjj * gamma[j]);
            let updated = if qjj > diag_floor {
                soft_threshold(partial, s) / qjj
            } else {
                0.0
            };
            let delta = updated - gamma[j];
            if delta != 0.0 {
                q_gamma.axpy(delta, &q.column(j), 1.0);
                gamma[j] = updated;
                max_change = max_change.max(delta.abs());
            }
        }
        last_change = max_change;
        if max_change <= config.tol_primal * (1.0 + inf_norm(&gamma)) {
            converged = true;
            break;
        }
    }

    let lu = pair.p().clone().lu();
    let b = lu.solve(&gamma).ok_or(Error::SingularP {
        condition: f64::INFINITY,
    })?;
    let gap = (inf_norm(&(c - gram * &b)) - s).max(0.0);
    let objective = penalized_objective(problem, pair, s, &b);
    Ok(SolutionReport {
        beta_hat: b,
        objective_value: objective,
        feasibility_gap: gap,
        iterations: sweeps,
        converged,
        stage: Stage::Single,
        primal_residual: last_change,
        dual_residual: 0.0,
    })
}

/// Projection of `b` onto the region under the given seminorm.
///
/// Solved as the estimator program for `delta = beta - b`, whose constraint is
/// `||(X'Y - X'X b) - X'X delta||_inf <= s`. Projecting `0` reproduces [`solve_gds`] or
/// [`solve_gl`].
pub fn project(
    b: &Vector,
    region: &DantzigRegion<'_>,
    norm: Seminorm<'_>,
    config: &SolverConfig,
) -> Result<SolutionReport> {
    config.validate()?;
    let problem = region.problem();
    let p = problem.p();
    if b.len() != p {
        return Err(Error::DimensionMismatch {
            what: "coefficient length",
            expected: p,
            found: b.len(),
        });
    }
    let s = region.level();
    let gram = problem.design().gram();
    let target = problem.xty() - gram * b;
    let inst = Instance::new(problem, target, s);
    let delta_report = match norm {
        Seminorm::L1OfP(p_matrix) => {
            check_square(p_matrix, p, "P dimension")?;
            gds_core(&inst, p_matrix, config, None)?.0
        }
        Seminorm::QuadraticA(pair) => {
            check_square(pair.a(), p, "A dimension")?;
            gl_core(&inst, pair, config)?
        }
    };
    let beta = b + &delta_report.beta_hat;
    let gap = region.feasibility_gap(&beta)?;
    Ok(SolutionReport {
        objective_value: delta_report.objective_value,
        feasibility_gap: gap,
        converged: delta_report.converged && gap <= config.feasibility_tolerance * (1.0 + s),
        beta_hat: beta,
        ..delta_report
    })
}
