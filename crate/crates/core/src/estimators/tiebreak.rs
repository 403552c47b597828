//! Least-absolute-deviation solve behind the GL tie-break.
//!
//! Both `beta'A beta` and the Dantzig constraint only see `beta` modulo `Ker A`, so the
//! set of stage-one minimizers is `beta_0 + Ker A`. Minimizing `||P beta||_1` over it is
//!
//! ```text
//! minimize ||d + B w||_1,   d = P beta_0,  B = P N,  N an orthonormal basis of Ker A
//! ```
//!
//! solved by ADMM on `z = d + B w`, stopped by a duality-gap certificate: any `mu` with
//! `B'mu = 0` and `||mu||_inf <= 1` gives the lower bound `mu'd`.

use nalgebra::Cholesky;

use super::SolverConfig;
use crate::linalg::{inf_norm, l1_norm, soft_threshold};
use crate::{Matrix, Vector};

const CERTIFY_INTERVAL: usize = 25;
const ADAPT_INTERVAL: usize = 25;

pub(crate) struct LadOutcome {
    pub w: Vector,
    pub iterations: usize,
    pub converged: bool,
    pub primal: f64,
    pub dual: f64,
}

struct Lad<'a> {
    d: &'a Vector,
    b: &'a Matrix,
    /// `B (B'B)^{-1} B'`, the projector onto the range of `B`.
    range_projector: Matrix,
    normal: Cholesky<f64, nalgebra::Dyn>,
}

impl Lad<'_> {
    fn objective(&self, w: &Vector) -> f64 {
        l1_norm(&(self.d + self.b * w))
    }

    /// Pushes `mu` onto `Ker B'`, rescales it into the unit box and evaluates `mu'd`.
    fn bound(&self, mu: &Vector) -> f64 {
        let mu = mu - &self.range_projector * mu;
        let mu = &mu / inf_norm(&mu).max(1.0);
        mu.dot(self.d)
    }

    fn least_squares(&self, rows: &[usize], rhs: &Vector, transpose: bool) -> Option<Vector> {
        let sub = if transpose {
            Matrix::from_fn(self.b.ncols(), rows.len(), |r, c| self.b[(rows[c], r)])
        } else {
            Matrix::from_fn(rows.len(), self.b.ncols(), |r, c| self.b[(rows[r], c)])
        };
        let svd = sub.svd(true, true);
        let smax = svd.singular_values.iter().copied().fold(0.0_f64, f64::max);
        svd.solve(rhs, 1e-12 * smax.max(1e-300)).ok()
    }

    /// Fits `w` exactly on the rows where `z` vanishes.
    fn polish(&self, z: &Vector) -> Option<Vector> {
        let zeros: Vec<usize> = (0..z.len()).filter(|&i| z[i] == 0.0).collect();
        if zeros.is_empty() {
            return None;
        }
        let rhs = Vector::from_fn(zeros.len(), |r, _| -self.d[zeros[r]]);
        self.least_squares(&zeros, &rhs, false)
    }

    /// Multiplier equal to the residual signs off the zero set, completed on the zero set
    /// so that `B'mu = 0` in the least-squares sense.
    fn active_multiplier(&self, w: &Vector) -> Option<Vector> {
        let resid = self.d + self.b * w;
        let scale = 1e-9 * (1.0 + inf_norm(&resid));
        let zeros: Vec<usize> = (0..resid.len()).filter(|&i| resid[i].abs() <= scale).collect();
        let mut mu = resid.map(|r| if r.abs() <= scale { 0.0 } else { r.signum() });
        if zeros.is_empty() {
            return Some(mu);
        }
        let rhs = -(self.b.transpose() * &mu);
        let fill = self.least_squares(&zeros, &rhs, true)?;
        for (c, &i) in zeros.iter().enumerate() {
            mu[i] = fill[c];
        }
        Some(mu)
    }
}

pub(crate) fn solve_lad(d: &Vector, b: &Matrix, config: &SolverConfig) -> LadOutcome {
    let m = b.ncols();
    let btb = b.tr_mul(b);
    let Some(normal) = Cholesky::new(btb.clone()) else {
        return LadOutcome {
            w: Vector::zeros(m),
            iterations: 0,
            converged: false,
            primal: f64::INFINITY,
            dual: f64::INFINITY,
        };
    };
    let range_projector = b * normal.solve(&b.transpose());
    let lad = Lad {
        d,
        b,
        range_projector,
        normal,
    };

    let rows = d.len();
    let mut rho = config.penalty_parameter;
    let alpha = config.relaxation;
    let mut w = Vector::zeros(m);
    let mut z = d.clone();
    let mut u = Vector::zeros(rows);
    let mut primal = f64::INFINITY;
    let mut dual = f64::INFINITY;
    let mut iterations = 0;

    for k in 1..=config.max_iterations {
        iterations = k;
        w = lad.normal.solve(&(b.transpose() * (&z - &u - d)));
        let fit = d + b * &w;
        let relaxed = &fit * alpha + &z * (1.0 - alpha);
        let z_new = (&relaxed + &u).map(|v| soft_threshold(v, 1.0 / rho));
        u += &relaxed - &z_new;
        primal = inf_norm(&(&fit - &z_new));
        dual = rho * inf_norm(&(b.transpose() * (&z_new - &z)));
        z = z_new;

        let eps_primal = config.tol_primal * (1.0 + inf_norm(&fit).max(inf_norm(&z)));
        let eps_dual = config.tol_dual * (1.0 + rho * inf_norm(&(b.transpose() * &u)));
        if primal <= eps_primal && dual <= eps_dual {
            return LadOutcome {
                w,
                iterations,
                converged: true,
                primal,
                dual,
            };
        }

        if k % CERTIFY_INTERVAL == 0 {
            let mut bound = lad.bound(&(&u * rho));
            let candidate = lad.polish(&z).filter(|c| lad.objective(c) <= lad.objective(&w));
            let best = candidate.unwrap_or_else(|| w.clone());
            if let Some(mu) = lad.active_multiplier(&best) {
                bound = bound.max(lad.bound(&mu));
            }
            let obj = lad.objective(&best);
            if obj - bound <= config.tol_dual * (1.0 + obj.abs()) {
                return LadOutcome {
                    w: best,
                    iterations,
                    converged: true,
                    primal,
                    dual,
                };
            }
        }

        if k % ADAPT_INTERVAL == 0 && (k / ADAPT_INTERVAL).is_power_of_two() && config.adaptive_ratio > 1.0 {
            let ratio = (primal / eps_primal) / (dual / eps_dual).max(1e-300);
            if ratio > config.adaptive_ratio || ratio < 1.0 / config.adaptive_ratio {
                let new_rho = (rho * ratio.sqrt()).clamp(1e-6, 1e6);
                u *= rho / new_rho;
                rho = new_rho;
            }
        }
    }

    let best = lad.polish(&z).filter(|c| lad.objective(c) <= lad.objective(&w)).unwrap_or(w);
    LadOutcome {
        w: best,
        iterations,
        converged: false,
        primal,
        dual,
    }
}
