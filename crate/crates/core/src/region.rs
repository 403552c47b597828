//! The constraint region `DC(s)` and the calibration of its level.

use crate::linalg::{inf_norm, DesignProblem};
use crate::{Error, Result, Vector};

/// Default numerical slack added to `s` in membership tests: `1e-9 * (1 + s)`.
pub fn default_slack(s: f64) -> f64 {
    1e-9 * (1.0 + s)
}

/// `{ beta : ||X'(Y - X beta)||_inf <= s }` for a fixed problem.
#[derive(Debug, Clone, Copy)]
pub struct DantzigRegion<'a> {
    problem: &'a DesignProblem,
    s: f64,
}

impl<'a> DantzigRegion<'a> {
    pub fn new(problem: &'a DesignProblem, s: f64) -> Result<Self> {
        if !(s >= 0.0 && s.is_finite()) {
            return Err(Error::InvalidLevel(format!("s must be finite and >= 0, got {s}")));
        }
        Ok(Self { problem, s })
    }

    pub fn problem(&self) -> &'a DesignProblem {
        self.problem
    }

    pub fn level(&self) -> f64 {
        self.s
    }

    /// The same region at another level.
    pub fn at_level(&self, s: f64) -> Result<Self> {
        Self::new(self.problem, s)
    }

    /// `X'(Y - X beta)`.
    pub fn residual_correlation(&self, beta: &Vector) -> Result<Vector> {
        let p = self.problem.p();
        if beta.len() != p {
            return Err(Error::DimensionMismatch {
                what: "coefficient length",
                expected: p,
                found: beta.len(),
            });
        }
        let x = self.problem.design().entries();
        let residual = self.problem.y() - x * beta;
        Ok(x.tr_mul(&residual))
    }

    /// `||X'(Y - X beta)||_inf <= s + slack`.
    pub fn contains(&self, beta: &Vector, slack: f64) -> Result<bool> {
        Ok(inf_norm(&self.residual_correlation(beta)?) <= self.s + slack)
    }

    pub fn contains_default(&self, beta: &Vector) -> Result<bool> {
        self.contains(beta, default_slack(self.s))
    }

    /// `max(0, ||X'(Y - X beta)||_inf - s)`.
    pub fn feasibility_gap(&self, beta: &Vector) -> Result<f64> {
        Ok((inf_norm(&self.residual_correlation(beta)?) - self.s).max(0.0))
    }
}

/// The level `2 sigma sqrt(2 n log(p / epsilon))` at which the oracle inequalities hold
/// with probability at least `1 - epsilon`.
pub fn calibrate_s(sigma: f64, n: usize, p: usize, epsilon: f64) -> Result<f64> {
    if n == 0 || p == 0 {
        return Err(Error::InvalidLevel(format!("n and p must be >= 1, got n={n}, p={p}")));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidLevel(format!("epsilon must lie in (0, 1), got {epsilon}")));
    }
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidLevel(format!("sigma must be finite and >= 0, got {sigma}")));
    }
    let log_term = (p as f64 / epsilon).ln();
    if log_term <= 0.0 {
        return Err(Error::InvalidLevel(format!(
            "log(p / epsilon) must be positive, got {log_term}"
        )));
    }
    Ok(2.0 * sigma * (2.0 * n as f64 * log_term).sqrt())
}

/// Guaranteed probability that the true coefficient lies in `DC(s)`:
/// `max(0, 1 - p exp(-s^2 / (2 n sigma^2)))`.
pub fn coverage_bound(s: f64, sigma: f64, n: usize, p: usize) -> Result<f64> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidLevel(format!("sigma must be positive, got {sigma}")));
    }
    if !(s >= 0.0) || n == 0 {
        return Err(Error::InvalidLevel(format!("need s >= 0 and n >= 1, got s={s}, n={n}")));
    }
    let tail = p as f64 * (-(s * s) / (2.0 * n as f64 * sigma * sigma)).exp();
    Ok((1.0 - tail).clamp(0.0, 1.0))
}
