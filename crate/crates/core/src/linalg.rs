//! Dense linear algebra for the regression instance: design normalization,
//! symmetric spectra, spectral pseudo-inverses and the `(A, P, Omega)` triple.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::{Error, Matrix, Result, Vector};

/// Numerical tolerances used when validating matrices.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LinalgTolerances {
    /// Allowed asymmetry, relative to `1 + max|A|`.
    pub symmetry: f64,
    /// Relative eigenvalue cut-off; eigenvalues `<= cutoff * lambda_max` count as zero.
    /// `None` means `1e-10 * p`.
    pub eigen_cutoff: Option<f64>,
    /// Allowed `||(X'X)P - A||_max`, relative to `1 + ||A||_max`.
    pub pair: f64,
    /// Largest accepted condition number of `P`.
    pub max_condition: f64,
    /// Allowed residual of `A G A = A` for a generalized inverse `G`, relative to `1 + ||A||_max`.
    pub pseudo_inverse: f64,
}

impl Default for LinalgTolerances {
    fn default() -> Self {
        Self {
            symmetry: 1e-10,
            eigen_cutoff: None,
            pair: 1e-8,
            max_condition: 1e12,
            pseudo_inverse: 1e-8,
        }
    }
}

impl LinalgTolerances {
    pub fn cutoff(&self, p: usize) -> f64 {
        self.eigen_cutoff.unwrap_or(default_cutoff(p))
    }
}

/// Default relative eigenvalue cut-off for a `p x p` matrix.
pub fn default_cutoff(p: usize) -> f64 {
    1e-10 * p.max(1) as f64
}

/// Largest absolute entry.
pub fn max_abs(m: &Matrix) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

pub fn inf_norm(v: &Vector) -> f64 {
    v.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
}

pub fn l1_norm(v: &Vector) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

/// `sign(t) * max(|t| - threshold, 0)`.
pub fn soft_threshold(t: f64, threshold: f64) -> f64 {
    if t > threshold {
        t - threshold
    } else if t < -threshold {
        t + threshold
    } else {
        0.0
    }
}

pub fn asymmetry(m: &Matrix) -> f64 {
    let mut worst = 0.0_f64;
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

fn check_square(m: &Matrix, what: &'static str) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch {
            what,
            expected: m.nrows(),
            found: m.ncols(),
        });
    }
    Ok(())
}

/// Rejects asymmetric input and returns `(M + M') / 2`.
pub fn symmetrized(m: &Matrix, relative_tol: f64) -> Result<Matrix> {
    check_square(m, "symmetric matrix columns")?;
    let asym = asymmetry(m);
    if asym > relative_tol * (1.0 + max_abs(m)) {
        return Err(Error::NotSymmetric { asymmetry: asym });
    }
    Ok((m + m.transpose()) * 0.5)
}

/// Eigen-decomposition of a symmetric matrix, eigenvalues in descending order.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub eigenvalues: Vector,
    pub eigenvectors: Matrix,
}

impl Spectrum {
    /// Decomposes `m` after checking and removing its asymmetry.
    pub fn of(m: &Matrix, symmetry_tol: f64) -> Result<Self> {
        let sym = symmetrized(m, symmetry_tol)?;
        Ok(Self::of_symmetric(sym))
    }

    fn of_symmetric(sym: Matrix) -> Self {
        let p = sym.nrows();
        let eig = sym.symmetric_eigen();
        let mut order: Vec<usize> = (0..p).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
        let eigenvalues = Vector::from_iterator(p, order.iter().map(|&i| eig.eigenvalues[i]));
        let mut eigenvectors = Matrix::zeros(p, p);
        for (dst, &src) in order.iter().enumerate() {
            eigenvectors.set_column(dst, &eig.eigenvectors.column(src));
        }
        Self {
            eigenvalues,
            eigenvectors,
        }
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.eigenvalues.iter().copied().fold(0.0_f64, f64::max)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Absolute threshold below which eigenvalues are treated as zero.
    pub fn threshold(&self, relative_cutoff: f64) -> f64 {
        relative_cutoff * self.max_eigenvalue()
    }

    pub fn rank(&self, relative_cutoff: f64) -> usize {
        let thr = self.threshold(relative_cutoff);
        self.eigenvalues.iter().filter(|&&l| l > thr).count()
    }

    /// `V diag(f(lambda)) V'`.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Matrix {
        let p = self.dim();
        let mut scaled = self.eigenvectors.clone();
        for j in 0..p {
            let w = f(self.eigenvalues[j]);
            scaled.column_mut(j).scale_mut(w);
        }
        scaled * self.eigenvectors.transpose()
    }

    pub fn reconstruct(&self) -> Matrix {
        self.map(|l| l)
    }

    /// Moore-Penrose inverse with the given relative cut-off.
    pub fn pseudo_inverse(&self, relative_cutoff: f64) -> Matrix {
        let thr = self.threshold(relative_cutoff);
        self.map(|l| if l > thr { 1.0 / l } else { 0.0 })
    }

    /// Eigenvectors whose eigenvalue is at or below the cut-off.
    pub fn null_vectors(&self, relative_cutoff: f64) -> Vec<Vector> {
        let thr = self.threshold(relative_cutoff);
        (0..self.dim())
            .filter(|&j| self.eigenvalues[j] <= thr)
            .map(|j| self.eigenvectors.column(j).into_owned())
            .collect()
    }

    /// Rows `sqrt(lambda_i) v_i'` for the retained eigenpairs, so that `L'L` equals the matrix.
    pub fn square_root_factor(&self, relative_cutoff: f64) -> Matrix {
        let thr = self.threshold(relative_cutoff);
        let kept: Vec<usize> = (0..self.dim())
            .filter(|&j| self.eigenvalues[j] > thr)
            .collect();
        let mut l = Matrix::zeros(kept.len(), self.dim());
        for (row, &j) in kept.iter().enumerate() {
            let w = self.eigenvalues[j].sqrt();
            for c in 0..self.dim() {
                l[(row, c)] = w * self.eigenvectors[(c, j)];
            }
        }
        l
    }
}

/// Moore-Penrose pseudo-inverse of a symmetric positive semi-definite matrix.
///
/// Eigenvalues at or below `tol * lambda_max` are zeroed, the others inverted.
pub fn pseudo_inverse(a: &Matrix, tol: f64) -> Result<Matrix> {
    let spectrum = Spectrum::of(a, LinalgTolerances::default().symmetry)?;
    Ok(spectrum.pseudo_inverse(tol))
}

/// An `n x p` design whose columns satisfy `||x_j||^2 = n`, together with the scaling
/// applied to the raw columns and the Gram matrix `X'X`.
#[derive(Debug, Clone)]
pub struct DesignMatrix {
    entries: Matrix,
    column_scales: Vector,
    gram: Matrix,
    gram_spectrum: Spectrum,
}

/// Rescales each column of `raw` by `sqrt(n) / ||col||_2` so that `X'X/n` has a unit diagonal.
pub fn normalize_design(raw: &Matrix) -> Result<DesignMatrix> {
    let (n, p) = raw.shape();
    if n == 0 || p == 0 {
        return Err(Error::InvalidShape(format!("design must be non-empty, got {n}x{p}")));
    }
    if raw.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidShape("design contains non-finite entries".into()));
    }
    let root_n = (n as f64).sqrt();
    let mut entries = raw.clone();
    let mut scales = Vector::zeros(p);
    for j in 0..p {
        let norm = raw.column(j).norm();
        if norm == 0.0 {
            return Err(Error::ZeroColumn(j));
        }
        scales[j] = root_n / norm;
        entries.column_mut(j).scale_mut(scales[j]);
    }
    Ok(DesignMatrix::assemble(entries, scales))
}

impl DesignMatrix {
    fn assemble(entries: Matrix, column_scales: Vector) -> Self {
        let gram = entries.tr_mul(&entries);
        let gram = (&gram + gram.transpose()) * 0.5;
        let gram_spectrum = Spectrum::of_symmetric(gram.clone());
        Self {
            entries,
            column_scales,
            gram,
            gram_spectrum,
        }
    }

    pub fn n(&self) -> usize {
        self.entries.nrows()
    }

    pub fn p(&self) -> usize {
        self.entries.ncols()
    }

    pub fn entries(&self) -> &Matrix {
        &self.entries
    }

    pub fn column_scales(&self) -> &Vector {
        &self.column_scales
    }

    /// `X'X`.
    pub fn gram(&self) -> &Matrix {
        &self.gram
    }

    pub fn gram_spectrum(&self) -> &Spectrum {
        &self.gram_spectrum
    }

    /// Largest deviation of `diag(X'X/n)` from one.
    pub fn normalization_error(&self) -> f64 {
        let n = self.n() as f64;
        (0..self.p())
            .map(|j| (self.gram[(j, j)] / n - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Maps coefficients of the normalized design back to the raw columns.
    pub fn to_raw_coefficients(&self, beta: &Vector) -> Vector {
        beta.component_mul(&self.column_scales)
    }

    /// Maps raw-coordinate coefficients into the normalized parametrization.
    pub fn from_raw_coefficients(&self, beta_raw: &Vector) -> Vector {
        beta_raw.component_div(&self.column_scales)
    }
}

/// The regression instance `Y = X beta* + noise` with known noise level.
#[derive(Debug, Clone)]
pub struct DesignProblem {
    design: Arc<DesignMatrix>,
    y: Vector,
    sigma: f64,
    xty: Vector,
}

impl DesignProblem {
    pub fn new(design: Arc<DesignMatrix>, y: Vector, sigma: f64) -> Result<Self> {
        if y.len() != design.n() {
            return Err(Error::DimensionMismatch {
                what: "response length",
                expected: design.n(),
                found: y.len(),
            });
        }
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidLevel(format!("sigma must be finite and >= 0, got {sigma}")));
        }
        let xty = design.entries().tr_mul(&y);
        Ok(Self {
            design,
            y,
            sigma,
            xty,
        })
    }

    pub fn design(&self) -> &DesignMatrix {
        &self.design
    }

    pub fn shared_design(&self) -> Arc<DesignMatrix> {
        Arc::clone(&self.design)
    }

    pub fn y(&self) -> &Vector {
        &self.y
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// `X'Y`.
    pub fn xty(&self) -> &Vector {
        &self.xty
    }

    pub fn n(&self) -> usize {
        self.design.n()
    }

    pub fn p(&self) -> usize {
        self.design.p()
    }
}

/// The matrices `A` and `P` tied to the design by `(X'X)P = A` and `Ker A = Ker X`,
/// with `Omega = (X'X) A^+ (X'X) / n`.
#[derive(Debug, Clone)]
pub struct GeneralizedPair {
    a: Matrix,
    p: Matrix,
    omega: Matrix,
    rank_a: usize,
    kernel: Matrix,
}

impl GeneralizedPair {
    pub fn a(&self) -> &Matrix {
        &self.a
    }

    pub fn p(&self) -> &Matrix {
        &self.p
    }

    pub fn omega(&self) -> &Matrix {
        &self.omega
    }

    pub fn rank_a(&self) -> usize {
        self.rank_a
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn is_a_definite(&self) -> bool {
        self.rank_a == self.dim()
    }

    /// Orthonormal basis of `Ker A` as columns (zero columns when `A` is definite).
    pub fn kernel_basis(&self) -> &Matrix {
        &self.kernel
    }

    /// `b'Ab`.
    pub fn quadratic(&self, b: &Vector) -> f64 {
        b.dot(&(&self.a * b))
    }

    /// `A = X'X`, `P = I`: the classical LASSO / Dantzig setting.
    pub fn identity(x: &DesignMatrix) -> Result<Self> {
        let p = x.p();
        build_pair(x, x.gram(), &Matrix::identity(p, p), &LinalgTolerances::default())
    }
}

/// Condition number of a square matrix from its singular values.
pub fn condition_number(m: &Matrix) -> f64 {
    let sv = m.clone().svd(false, false).singular_values;
    let max = sv.iter().copied().fold(0.0_f64, f64::max);
    let min = sv.iter().copied().fold(f64::INFINITY, f64::min);
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Validates `(A, P)` against the design and derives `Omega`.
pub fn build_pair(
    x: &DesignMatrix,
    a: &Matrix,
    p: &Matrix,
    tol: &LinalgTolerances,
) -> Result<GeneralizedPair> {
    let dim = x.p();
    for (m, what) in [(a, "A"), (p, "P")] {
        if m.nrows() != dim || m.ncols() != dim {
            return Err(Error::DimensionMismatch {
                what: if what == "A" { "A dimension" } else { "P dimension" },
                expected: dim,
                found: if m.nrows() != dim { m.nrows() } else { m.ncols() },
            });
        }
    }
    let a_sym = symmetrized(a, tol.symmetry)?;

    let condition = condition_number(p);
    if !(condition <= tol.max_condition) {
        return Err(Error::SingularP { condition });
    }

    let gram = x.gram();
    let deviation = max_abs(&(gram * p - &a_sym));
    let allowed = tol.pair * (1.0 + max_abs(&a_sym));
    if deviation > allowed {
        return Err(Error::IncompatiblePair { deviation, allowed });
    }

    let cutoff = tol.cutoff(dim);
    let a_spec = Spectrum::of_symmetric(a_sym.clone());
    let lambda_max = a_spec.max_eigenvalue();
    let lambda_min = a_spec.min_eigenvalue();
    if lambda_min < -cutoff.max(1e-12) * lambda_max.max(1.0) {
        return Err(Error::NotPositiveSemidefinite {
            min_eigenvalue: lambda_min,
        });
    }

    let rank_a = a_spec.rank(cutoff);
    let g_spec = x.gram_spectrum();
    let rank_gram = g_spec.rank(cutoff);
    if rank_a != rank_gram {
        return Err(Error::KernelMismatch { rank_a, rank_gram });
    }
    let g_threshold = g_spec.threshold(cutoff);
    for v in a_spec.null_vectors(cutoff) {
        // ||Xv||^2 = v'(X'X)v
        if v.dot(&(gram * &v)) > g_threshold {
            return Err(Error::KernelMismatch { rank_a, rank_gram });
        }
    }

    let a_pinv = a_spec.pseudo_inverse(cutoff);
    let omega = omega_from(gram, &a_pinv, x.n());
    let null = a_spec.null_vectors(cutoff);
    let kernel = Matrix::from_fn(dim, null.len(), |r, c| null[c][r]);
    Ok(GeneralizedPair {
        a: a_sym,
        p: p.clone(),
        omega,
        rank_a,
        kernel,
    })
}

fn omega_from(gram: &Matrix, generalized_inverse: &Matrix, n: usize) -> Matrix {
    let om = gram * generalized_inverse * gram / n as f64;
    (&om + om.transpose()) * 0.5
}

/// Compares `Omega` built from the canonical pseudo-inverse of `A` with the one built from
/// `alt_pseudo`; returns `||(X'X) A^+ (X'X) - (X'X) alt (X'X)||_max / n`.
pub fn omega_invariance_check(x: &DesignMatrix, a: &Matrix, alt_pseudo: &Matrix) -> Result<f64> {
    let tol = LinalgTolerances::default();
    let dim = x.p();
    if alt_pseudo.shape() != (dim, dim) {
        return Err(Error::DimensionMismatch {
            what: "generalized inverse dimension",
            expected: dim,
            found: alt_pseudo.nrows(),
        });
    }
    let residual = max_abs(&(a * alt_pseudo * a - a));
    if residual > tol.pseudo_inverse * (1.0 + max_abs(a)) {
        return Err(Error::InvalidPseudoInverse { residual });
    }
    let canonical = pseudo_inverse(a, tol.cutoff(dim))?;
    let gram = x.gram();
    let diff = gram * canonical * gram - gram * alt_pseudo * gram;
    Ok(max_abs(&diff) / x.n() as f64)
}
