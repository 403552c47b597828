//! ADMM engine shared by every estimator.
//!
//! All programs have the form
//!
//! ```text
//! minimize   w * ||P beta||_1 + beta' A beta
//! subject to ||c - G beta||_inf <= s
//! ```
//!
//! with `G = X'X` and `c = X'Y` (or a shifted `c` for projections). The splitting
//! stacks `M = [P; G / kappa]` and alternates between an exact
//! `beta` step (one Cholesky factor per penalty value) and blockwise proximal
//! steps on `z = M beta`: soft-thresholding and box clipping.

use nalgebra::Cholesky;

use super::SolverConfig;
use crate::linalg::{inf_norm, l1_norm};
use crate::{Matrix, Vector};

const ADAPT_INTERVAL: usize = 25;
const CHECK_INTERVAL: usize = 5;
const RHO_MIN: f64 = 1e-6;
const RHO_MAX: f64 = 1e6;
const CERTIFY_INTERVAL: usize = 100;

pub(crate) struct Program<'a> {
    pub gram: &'a Matrix,
    pub target: Vector,
    pub level: f64,
    pub p_matrix: &'a Matrix,
    /// Include `||P beta||_1` in the objective; otherwise the `P` block only conditions the `beta` step.
    pub l1: bool,
    pub quadratic: Option<&'a Matrix>,
}

/// Iterates that can seed a later solve of a program with the same block layout.
#[derive(Debug, Clone)]
pub(crate) struct WarmStart {
    pub z: Vector,
    pub u: Vector,
    pub rho: f64,
}

pub(crate) struct Outcome {
    pub beta: Vector,
    pub iterations: usize,
    pub converged: bool,
    pub primal: f64,
    pub dual: f64,
    pub warm: WarmStart,
}

struct Layout {
    p: usize,
    kappa: f64,
    stacked: Matrix,
}

impl<'a> Program<'a> {
    pub fn dim(&self) -> usize {
        self.gram.nrows()
    }

    pub fn objective(&self, beta: &Vector) -> f64 {
        let mut value = 0.0;
        if self.l1 {
            value += l1_norm(&(self.p_matrix * beta));
        }
        if let Some(a) = self.quadratic {
            value += beta.dot(&(a * beta));
        }
        value
    }

    pub fn gap(&self, beta: &Vector) -> f64 {
        (inf_norm(&(&self.target - self.gram * beta)) - self.level).max(0.0)
    }

    fn layout(&self) -> Layout {
        let p = self.dim();
        let kappa = (0..p)
            .map(|i| self.gram[(i, i)])
            .fold(0.0_f64, f64::max)
            .max(1e-300);
        let mut stacked = Matrix::zeros(2 * p, p);
        stacked.rows_mut(0, p).copy_from(self.p_matrix);
        stacked.rows_mut(p, p).copy_from(&(self.gram / kappa));
        Layout {
            p,
            kappa,
            stacked,
        }
    }

    fn factor(&self, gram_stack: &Matrix, rho: f64) -> Cholesky<f64, nalgebra::Dyn> {
        let mut h = gram_stack * rho;
        if let Some(a) = self.quadratic {
            h += a * 2.0;
        }
        // M'M contains P'P with P invertible, so H is positive definite up to rounding.
        let p = h.nrows();
        let mut jitter = 0.0;
        loop {
            let mut trial = h.clone();
            for i in 0..p {
                trial[(i, i)] += jitter;
            }
            if let Some(ch) = Cholesky::new(trial) {
                return ch;
            }
            jitter = if jitter == 0.0 {
                1e-12 * (1.0 + crate::linalg::max_abs(&h))
            } else {
                jitter * 10.0
            };
        }
    }

    fn prox(&self, layout: &Layout, v: &mut Vector, rho: f64) {
        let p = layout.p;
        if self.l1 {
            let t = 1.0 / rho;
            for i in 0..p {
                v[i] = crate::linalg::soft_threshold(v[i], t);
            }
        }
        for i in 0..p {
            let lo = (self.target[i] - self.level) / layout.kappa;
            let hi = (self.target[i] + self.level) / layout.kappa;
            v[p + i] = v[p + i].clamp(lo, hi);
        }
    }

    pub fn solve(&self, config: &SolverConfig, warm: Option<&WarmStart>) -> Outcome {
        let layout = self.layout();
        let m = &layout.stacked;
        let rows = m.nrows();
        let gram_stack = m.tr_mul(m);

        let (mut z, mut u, mut rho) = match warm {
            Some(w) if w.z.len() == rows => (w.z.clone(), w.u.clone(), w.rho),
            _ => (Vector::zeros(rows), Vector::zeros(rows), config.penalty_parameter),
        };
        let mut chol = self.factor(&gram_stack, rho);
        let alpha = config.relaxation;
        // K = P^{-T} G maps box multipliers to the l1 subgradient they must match
        let certify_map = (self.l1 && self.quadratic.is_none() && config.polish)
            .then(|| self.p_matrix.transpose().lu().solve(self.gram))
            .flatten();
        let mut certified: Option<Vector> = None;

        let mut beta = Vector::zeros(layout.p);
        let mut primal = f64::INFINITY;
        let mut dual = f64::INFINITY;
        let mut converged = false;
        let mut iterations = 0;

        for k in 1..=config.max_iterations {
            iterations = k;
            let rhs = m.tr_mul(&(&z - &u)) * rho;
            beta = chol.solve(&rhs);
            let mb = m * &beta;
            let relaxed = &mb * alpha + &z * (1.0 - alpha);
            let mut z_new = &relaxed + &u;
            self.prox(&layout, &mut z_new, rho);
            u += &relaxed - &z_new;

            let check = k % CHECK_INTERVAL == 0 || k == config.max_iterations;
            // geometric schedule: 25, 50, 100, ... so the penalty eventually stays fixed
            let adapt = k % ADAPT_INTERVAL == 0 && (k / ADAPT_INTERVAL).is_power_of_two();
            if check || adapt {
                primal = inf_norm(&(&mb - &z_new));
                dual = rho * inf_norm(&m.tr_mul(&(&z_new - &z)));
                let eps_primal = config.tol_primal * (1.0 + inf_norm(&mb).max(inf_norm(&z_new)));
                let mut dual_scale = rho * inf_norm(&m.tr_mul(&u));
                if let Some(a) = self.quadratic {
                    dual_scale = dual_scale.max(2.0 * inf_norm(&(a * &beta)));
                }
                let eps_dual = config.tol_dual * (1.0 + dual_scale);
                z = z_new;
                if primal <= eps_primal && dual <= eps_dual {
                    converged = true;
                    break;
                }
                if let (Some(a), false) = (self.quadratic, self.l1) {
                    if config.polish && k % CERTIFY_INTERVAL == 0 && primal <= 1e-4 * (1.0 + inf_norm(&mb)) {
                        if let Some(exact) = self.kkt_polish(a, &layout, &z) {
                            certified = Some(exact);
                            converged = true;
                            break;
                        }
                    }
                }
                if let Some(kmap) = &certify_map {
                    if k % CERTIFY_INTERVAL == 0 && primal <= 1e-4 * (1.0 + inf_norm(&mb)) {
                        let box_dual = u.rows(layout.p, layout.p) * rho;
                        let mut bound = self.dual_bound(kmap, &box_dual.clone_owned());
                        let best = self
                            .polish_candidates(&layout, &beta, &z, &box_dual.clone_owned(), primal * layout.kappa)
                            .into_iter()
                            .map(|b| (self.objective(&b), b))
                            .min_by(|a, b| a.0.total_cmp(&b.0));
                        if let Some((obj, candidate)) = best {
                            if let Some(lambda) = self.active_set_multiplier(kmap, &candidate) {
                                bound = bound.max(self.dual_bound(kmap, &lambda));
                            }
                            if obj - bound <= config.tol_dual * (1.0 + obj.abs()) {
                                certified = Some(candidate);
                                converged = true;
                                break;
                            }
                        }
                    }
                }
                if adapt && config.adaptive_ratio > 1.0 {
                    let ratio = (primal / eps_primal) / (dual / eps_dual).max(1e-300);
                    if ratio > config.adaptive_ratio || ratio < 1.0 / config.adaptive_ratio {
                        let new_rho = (rho * ratio.sqrt()).clamp(RHO_MIN, RHO_MAX);
                        if new_rho != rho {
                            u *= rho / new_rho;
                            rho = new_rho;
                            chol = self.factor(&gram_stack, rho);
                        }
                    }
                }
            } else {
                z = z_new;
            }
        }

        let box_dual = u.rows(layout.p, layout.p) * rho;
        let beta = if let Some(b) = certified {
            b
        } else if config.polish {
            self.polish(&layout, &beta, &z, &box_dual.into_owned(), primal * layout.kappa)
                .unwrap_or(beta)
        } else {
            beta
        };

        Outcome {
            beta,
            iterations,
            converged,
            primal,
            dual,
            warm: WarmStart { z, u, rho },
        }
    }

    /// Exact solution of the quadratic program on the active set read off `z`.
    ///
    /// Solves `2 A beta + G_B lambda_B = 0`, `G_B' beta = c_B +- s` and returns `beta` only if
    /// the system is consistent, every constraint holds and each multiplier has the sign
    /// of its bound, i.e. the KKT conditions are met.
    fn kkt_polish(&self, a: &Matrix, layout: &Layout, z: &Vector) -> Option<Vector> {
        let p = self.dim();
        let s = self.level;
        let mut active: Vec<(usize, f64)> = Vec::new();
        for i in 0..p {
            let lo = (self.target[i] - s) / layout.kappa;
            let hi = (self.target[i] + s) / layout.kappa;
            let v = z[p + i];
            if v == hi {
                active.push((i, 1.0));
            } else if v == lo {
                active.push((i, -1.0));
            }
        }
        let m = active.len();
        let mut kkt = Matrix::zeros(p + m, p + m);
        let mut rhs = Vector::zeros(p + m);
        kkt.view_mut((0, 0), (p, p)).copy_from(&(a * 2.0));
        for (col, &(i, side)) in active.iter().enumerate() {
            for r in 0..p {
                kkt[(r, p + col)] = self.gram[(r, i)];
                kkt[(p + col, r)] = self.gram[(i, r)];
            }
            rhs[p + col] = self.target[i] + side * s;
        }
        let svd = kkt.clone().svd(true, true);
        let smax = svd.singular_values.iter().copied().fold(0.0_f64, f64::max);
        let sol = svd.solve(&rhs, 1e-12 * smax.max(1e-300)).ok()?;
        let scale = 1.0 + crate::linalg::max_abs(&kkt) * inf_norm(&sol) + inf_norm(&rhs);
        if inf_norm(&(&kkt * &sol - &rhs)) > 1e-10 * scale {
            return None;
        }
        let beta = sol.rows(0, p).into_owned();
        if self.gap(&beta) > 1e-12 * (1.0 + s) {
            return None;
        }
        let multipliers = sol.rows(p, m);
        let dual_tol = 1e-9 * (1.0 + inf_norm(&multipliers.clone_owned()));
        let signs_ok = active
            .iter()
            .zip(multipliers.iter())
            .all(|(&(_, side), &l)| side * l >= -dual_tol);
        signs_ok.then_some(beta)
    }

    /// Lagrangian lower bound for the pure l1 program. Any multiplier `lambda` on
    /// `G beta - c` with `||P^{-T} G lambda||_inf <= 1` gives `-lambda'c - s ||lambda||_1`;
    /// `lambda` is rescaled into that set, trying both signs.
    fn dual_bound(&self, kmap: &Matrix, lambda: &Vector) -> f64 {
        let mu = kmap * lambda;
        let lambda = lambda / inf_norm(&mu).max(1.0);
        [1.0, -1.0]
            .into_iter()
            .map(|sign| -sign * lambda.dot(&self.target) - self.level * l1_norm(&lambda))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Multiplier supported on the active box rows of `beta` whose image under `K`
    /// matches the signs of `P beta` on its support, in the least-squares sense.
    fn active_set_multiplier(&self, kmap: &Matrix, beta: &Vector) -> Option<Vector> {
        let s = self.level;
        let corr = &self.target - self.gram * beta;
        let pb = self.p_matrix * beta;
        let pb_scale = 1.0 + inf_norm(&pb);
        let active: Vec<usize> = (0..corr.len())
            .filter(|&i| s - corr[i].abs() <= 1e-9 * (1.0 + s))
            .collect();
        let support: Vec<usize> = (0..pb.len())
            .filter(|&j| pb[j].abs() > 1e-9 * pb_scale)
            .collect();
        if active.is_empty() || support.is_empty() {
            return None;
        }
        let sub = Matrix::from_fn(support.len(), active.len(), |r, c| kmap[(support[r], active[c])]);
        let rhs = Vector::from_fn(support.len(), |r, _| pb[support[r]].signum());
        let svd = sub.svd(true, true);
        let smax = svd.singular_values.iter().copied().fold(0.0_f64, f64::max);
        let reduced = svd.solve(&rhs, 1e-12 * smax).ok()?;
        let mut lambda = Vector::zeros(corr.len());
        for (c, &i) in active.iter().enumerate() {
            lambda[i] = reduced[c];
        }
        Some(lambda)
    }

    /// Snaps an approximate solution onto an identified active set: box constraints at
    /// their bound and vanishing coordinates of `P beta` are imposed as equalities through a
    /// minimum-norm correction. The first pattern is read off the splitting variable `z`,
    /// where soft-thresholding and clipping make it exact; the rest come from thresholds
    /// on `beta`. Only feasible candidates are returned.
    fn polish_candidates(
        &self,
        layout: &Layout,
        beta: &Vector,
        z: &Vector,
        box_dual: &Vector,
        residual_scale: f64,
    ) -> Vec<Vector> {
        let p = self.dim();
        let s = self.level;
        let corr = &self.target - self.gram * beta;
        let pb = self.p_matrix * beta;
        let pb_scale = 1.0 + inf_norm(&pb);
        let dual_scale = inf_norm(box_dual);

        let mut patterns: Vec<Vec<(usize, bool, f64)>> = Vec::new();
        let mut from_z = Vec::new();
        for i in 0..p {
            let lo = (self.target[i] - s) / layout.kappa;
            let hi = (self.target[i] + s) / layout.kappa;
            let v = z[p + i];
            if s > 0.0 && v == hi {
                from_z.push((i, true, self.target[i] + s));
            } else if v == lo {
                from_z.push((i, true, self.target[i] - s));
            }
        }
        if self.l1 {
            for j in 0..p {
                if z[j] == 0.0 {
                    from_z.push((j, false, 0.0));
                }
            }
        }
        patterns.push(from_z);
        for rel in [1e-10, 1e-8, 1e-6, 1e-4] {
            let box_tol = rel * (1.0 + s) + residual_scale;
            let mut rows = Vec::new();
            for i in 0..p {
                let active_dual = dual_scale > 0.0 && box_dual[i].abs() > 1e-6 * dual_scale;
                if s - corr[i].abs() <= box_tol || active_dual {
                    let sign = if corr[i] >= 0.0 { 1.0 } else { -1.0 };
                    rows.push((i, true, self.target[i] - sign * s));
                }
            }
            if self.l1 {
                for j in 0..p {
                    if pb[j].abs() <= rel * pb_scale {
                        rows.push((j, false, 0.0));
                    }
                }
            }
            patterns.push(rows);
        }

        let mut out = Vec::new();
        for rows in patterns {
            if rows.is_empty() {
                continue;
            }
            let mut e = Matrix::zeros(rows.len(), p);
            let mut rhs = Vector::zeros(rows.len());
            for (r, &(idx, is_box, value)) in rows.iter().enumerate() {
                let source = if is_box { self.gram } else { self.p_matrix };
                e.row_mut(r).copy_from(&source.row(idx));
                rhs[r] = value;
            }
            let defect = &rhs - &e * beta;
            let svd = e.svd(true, true);
            let smax = svd.singular_values.iter().copied().fold(0.0_f64, f64::max);
            let Ok(delta) = svd.solve(&defect, 1e-12 * smax) else {
                continue;
            };
            let candidate = beta + delta;
            if self.gap(&candidate) > 1e-12 * (1.0 + s) {
                continue;
            }
            out.push(candidate);
        }
        out
    }

    /// Best polished point whose objective does not exceed that of `beta`.
    fn polish(
        &self,
        layout: &Layout,
        beta: &Vector,
        z: &Vector,
        box_dual: &Vector,
        residual_scale: f64,
    ) -> Option<Vector> {
        let base_obj = self.objective(beta);
        self.polish_candidates(layout, beta, z, box_dual, residual_scale)
            .into_iter()
            .map(|b| (self.objective(&b), b))
            .filter(|(obj, _)| *obj <= base_obj + 1e-7 * (1.0 + base_obj.abs()))
            .min_by(|a, b| a.0.total_cmp(&b.0))
            .map(|(_, b)| b)
    }
}
