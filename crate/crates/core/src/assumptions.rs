//! Sampling estimates of the restricted eigenvalue constant `c` in the cone condition
//!
//! ```text
//! sum_{j not in S} |alpha_j| <= 3 sum_{j in S} |alpha_j|
//!     =>  sum_{j in S} alpha_j^2 <= c * alpha' Omega alpha
//! ```
//!
//! Exact maximization of the ratio over the cone is nonconvex, so [`re_constant`] reports a
//! lower bound certified by an explicit witness, plus the exact value when it is known in
//! closed form (`Omega = kappa I`, or a full support where the cone is all of `R^p`).

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::linalg::{max_abs, symmetrized, Spectrum};
use crate::{Error, Matrix, Result, Vector};

pub const CONE_FACTOR: f64 = 3.0;
const SAMPLE_BATCH: usize = 256;
const DEGENERATE: f64 = 1e-12;

/// Support set `S` of `P beta*` and the cone it induces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConeSpec {
    support: Vec<usize>,
    dim: usize,
    cone_factor: f64,
}

impl ConeSpec {
    /// `support` holds zero-based indices below `dim`; duplicates are merged.
    pub fn new(mut support: Vec<usize>, dim: usize) -> Result<Self> {
        support.sort_unstable();
        support.dedup();
        if support.is_empty() {
            return Err(Error::InvalidSupport("support must be nonempty".into()));
        }
        if let Some(&bad) = support.iter().find(|&&j| j >= dim) {
            return Err(Error::InvalidSupport(format!("index {bad} out of range for dimension {dim}")));
        }
        Ok(Self {
            support,
            dim,
            cone_factor: CONE_FACTOR,
        })
    }

    /// Support of the nonzero coordinates of `v`.
    pub fn from_nonzeros(v: &Vector) -> Result<Self> {
        let support = (0..v.len()).filter(|&j| v[j] != 0.0).collect();
        Self::new(support, v.len())
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn cone_factor(&self) -> f64 {
        self.cone_factor
    }

    pub fn is_full(&self) -> bool {
        self.support.len() == self.dim
    }

    fn mask(&self) -> Vec<bool> {
        let mut m = vec![false; self.dim];
        for &j in &self.support {
            m[j] = true;
        }
        m
    }

    fn masses(&self, alpha: &Vector) -> (f64, f64) {
        let mask = self.mask();
        let mut on = 0.0;
        let mut off = 0.0;
        for (j, &inside) in mask.iter().enumerate() {
            if inside {
                on += alpha[j].abs();
            } else {
                off += alpha[j].abs();
            }
        }
        (on, off)
    }

    /// `sum_{j not in S} |alpha_j| <= 3 sum_{j in S} |alpha_j|` up to rounding.
    pub fn contains(&self, alpha: &Vector) -> bool {
        let (on, off) = self.masses(alpha);
        off <= self.cone_factor * on * (1.0 + 1e-12) + 1e-300
    }

    /// Uniformly shrinks the off-support coordinates until the cone inequality holds.
    pub fn shrink_into(&self, alpha: &mut Vector) {
        let (on, off) = self.masses(alpha);
        let cap = self.cone_factor * on;
        if off > cap {
            let factor = if off > 0.0 { cap / off } else { 0.0 };
            let mask = self.mask();
            for (j, &inside) in mask.iter().enumerate() {
                if !inside {
                    alpha[j] *= factor;
                }
            }
        }
    }

    /// `sum_{j in S} alpha_j^2`.
    pub fn support_mass(&self, alpha: &Vector) -> f64 {
        self.support.iter().map(|&j| alpha[j] * alpha[j]).sum()
    }
}

#[derive(Debug, Clone)]
pub struct REEstimate {
    /// Best ratio found; a valid lower bound on the smallest admissible `c`.
    pub c_lower: f64,
    /// Closed-form value when available.
    pub c_exact_or_upper: Option<f64>,
    pub witness: Vector,
    pub samples_used: usize,
}

/// Sampler and local-ascent parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReSettings {
    pub ascent_starts: usize,
    pub ascent_steps: usize,
    pub ascent_step: f64,
}

impl Default for ReSettings {
    fn default() -> Self {
        Self {
            ascent_starts: 10,
            ascent_steps: 200,
            ascent_step: 1e-2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Verification {
    Pass,
    Counterexample(Vector),
}

struct RatioProblem<'a> {
    omega: Matrix,
    cone: &'a ConeSpec,
}

impl<'a> RatioProblem<'a> {
    fn new(omega: &Matrix, cone: &'a ConeSpec) -> Result<Self> {
        if omega.nrows() != cone.dim() || omega.ncols() != cone.dim() {
            return Err(Error::DimensionMismatch {
                what: "Omega dimension",
                expected: cone.dim(),
                found: omega.nrows(),
            });
        }
        Ok(Self {
            omega: symmetrized(omega, 1e-10)?,
            cone,
        })
    }

    /// `(sum_S alpha^2, alpha' Omega alpha)`.
    fn parts(&self, alpha: &Vector) -> (f64, f64) {
        (self.cone.support_mass(alpha), alpha.dot(&(&self.omega * alpha)))
    }

    fn ratio(&self, alpha: &Vector) -> Result<f64> {
        let (num, den) = self.parts(alpha);
        if den <= DEGENERATE * alpha.norm_squared() && num > 0.0 {
            return Err(Error::DegenerateRatio { quadratic: den });
        }
        Ok(if num == 0.0 { 0.0 } else { num / den })
    }

    /// Minimum eigenvector of `Omega_SS`, padded with zeros. It lies in the cone (no
    /// off-support mass) and attains `1 / lambda_min(Omega_SS)`.
    fn support_witness(&self) -> Result<Vector> {
        let s = self.cone.support();
        let sub = Matrix::from_fn(s.len(), s.len(), |i, j| self.omega[(s[i], s[j])]);
        let spec = Spectrum::of(&sub, 1e-10)?;
        let last = spec.dim() - 1;
        let mut alpha = Vector::zeros(self.cone.dim());
        for (i, &j) in s.iter().enumerate() {
            alpha[j] = spec.eigenvectors[(i, last)];
        }
        Ok(alpha)
    }

    fn sample(&self, rng: &mut ChaCha20Rng) -> Vector {
        let mut alpha = Vector::from_fn(self.cone.dim(), |_, _| StandardNormal.sample(rng));
        self.cone.shrink_into(&mut alpha);
        alpha
    }

    fn gradient(&self, alpha: &Vector) -> Vector {
        let (num, den) = self.parts(alpha);
        let mut on = Vector::zeros(alpha.len());
        for &j in self.cone.support() {
            on[j] = alpha[j];
        }
        (on * den - (&self.omega * alpha) * num) * (2.0 / (den * den))
    }

    fn ascend(&self, start: &Vector, settings: &ReSettings) -> Result<(f64, Vector)> {
        let mut alpha = start.normalize();
        let mut best = self.ratio(&alpha)?;
        let mut step = settings.ascent_step;
        for _ in 0..settings.ascent_steps {
            let g = self.gradient(&alpha);
            let gn = g.norm();
            if !(gn > 0.0) || !gn.is_finite() {
                break;
            }
            let mut cand = &alpha + g * (step / gn);
            self.cone.shrink_into(&mut cand);
            let norm = cand.norm();
            if norm == 0.0 {
                break;
            }
            cand /= norm;
            let r = self.ratio(&cand)?;
            if r > best {
                best = r;
                alpha = cand;
                step *= 1.5;
            } else {
                step *= 0.5;
                if step < 1e-14 {
                    break;
                }
            }
        }
        Ok((best, alpha))
    }

    fn exact_value(&self) -> Option<f64> {
        let p = self.cone.dim();
        let kappa = (0..p).map(|i| self.omega[(i, i)]).sum::<f64>() / p as f64;
        if kappa > 0.0 {
            let dev = max_abs(&(&self.omega - Matrix::identity(p, p) * kappa));
            if dev <= 1e-10 * kappa {
                return Some(1.0 / kappa);
            }
        }
        if self.cone.is_full() {
            let spec = Spectrum::of(&self.omega, 1e-10).ok()?;
            let lmin = spec.min_eigenvalue();
            if lmin > DEGENERATE * spec.max_eigenvalue() {
                return Some(1.0 / lmin);
            }
        }
        None
    }
}

/// Substream for sample batch `batch` of a given seed.
fn batch_rng(seed: u64, batch: usize) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(batch as u64);
    rng
}

/// Draws samples `0..count` in parallel batches; sample `i` depends only on `(seed, i)`.
fn draw_samples(problem: &RatioProblem<'_>, count: usize, seed: u64) -> Vec<Vector> {
    let batches = count.div_ceil(SAMPLE_BATCH);
    (0..batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = batch_rng(seed, b);
            let len = SAMPLE_BATCH.min(count - b * SAMPLE_BATCH);
            (0..len).map(|_| problem.sample(&mut rng)).collect::<Vec<_>>()
        })
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect()
}

/// Lower-bounds the restricted eigenvalue constant with default sampler settings.
pub fn re_constant(omega: &Matrix, cone: &ConeSpec, budget: usize, seed: u64) -> Result<REEstimate> {
    re_constant_with(omega, cone, budget, seed, &ReSettings::default())
}

/// Maximizes `sum_S alpha^2 / alpha'Omega alpha` over the cone by random sampling followed by
/// local ascent.
///
/// Ascent starts are the samples that entered the running top-`ascent_starts` when they were
/// drawn, so for a fixed seed the start set only grows with `budget` and `c_lower` is
/// nondecreasing in `budget`.
pub fn re_constant_with(
    omega: &Matrix,
    cone: &ConeSpec,
    budget: usize,
    seed: u64,
    settings: &ReSettings,
) -> Result<REEstimate> {
    if budget == 0 {
        return Err(Error::InvalidConfig("budget must be >= 1".into()));
    }
    let problem = RatioProblem::new(omega, cone)?;
    let samples = draw_samples(&problem, budget, seed);
    let ratios = samples
        .par_iter()
        .map(|a| problem.ratio(a))
        .collect::<Result<Vec<_>>>()?;

    let mut starts = vec![problem.support_witness()?];
    let keep = settings.ascent_starts.max(1);
    let mut top: Vec<f64> = Vec::with_capacity(keep + 1);
    for (alpha, &r) in samples.iter().zip(&ratios) {
        let enters = top.len() < keep || r > top[top.len() - 1];
        if enters {
            starts.push(alpha.clone());
            let pos = top.partition_point(|&t| t >= r);
            top.insert(pos, r);
            top.truncate(keep);
        }
    }

    let ascended = starts
        .par_iter()
        .map(|a| problem.ascend(a, settings))
        .collect::<Result<Vec<_>>>()?;

    let mut best_ratio = f64::NEG_INFINITY;
    let mut witness = Vector::zeros(cone.dim());
    let candidates = samples
        .iter()
        .zip(ratios.iter().copied())
        .map(|(a, r)| (r, a))
        .chain(ascended.iter().map(|(r, a)| (*r, a)));
    for (r, alpha) in candidates {
        if r > best_ratio {
            best_ratio = r;
            witness = alpha.clone();
        }
    }

    Ok(REEstimate {
        c_lower: best_ratio,
        c_exact_or_upper: problem.exact_value(),
        witness,
        samples_used: budget,
    })
}

/// Searches the sampler's cone vectors for a violation of the condition at constant `c`.
pub fn verify_assumption(
    omega: &Matrix,
    cone: &ConeSpec,
    c: f64,
    samples: usize,
    seed: u64,
) -> Result<Verification> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::InvalidConfig(format!("c must be positive, got {c}")));
    }
    let problem = RatioProblem::new(omega, cone)?;
    let violates = |alpha: &Vector| {
        let (num, den) = problem.parts(alpha);
        num > c * den * (1.0 + 1e-8)
    };
    let structured = problem.support_witness()?;
    if violates(&structured) {
        return Ok(Verification::Counterexample(structured));
    }
    let drawn = draw_samples(&problem, samples, seed);
    Ok(drawn
        .into_iter()
        .find(|a| violates(a))
        .map_or(Verification::Pass, Verification::Counterexample))
}
