//! Objective families with certified constants.
//!
//! Two families are supported: strongly convex quadratics and regularized
//! log-sum-exp functions. Each instance knows its strong convexity `mu`, its
//! gradient Lipschitz constant `L` (both relative to a reference operator
//! `B`) and its strong self-concordance constant `M`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operator::{
    check_dim, loewner_slack_matrices, norm_dual, norm_primal, rel_eigen_range, rel_eigenvalues, DualVector,
    EigenRange, PrimalVector, Role, SpdOperator,
};
use crate::quadrature::GaussLegendre;
use crate::sampling::{gaussian_vector, matrix_with_spectrum, seeded};

/// Default number of Gauss-Legendre nodes for the integral Hessian.
pub const DEFAULT_QUAD_ORDER: usize = 16;
/// Relative Loewner tolerance for certifying `mu B <= A <= L B`.
pub const CERTIFY_TOL: f64 = 1e-10;

#[derive(Clone, Debug)]
pub struct QuadraticProblem {
    a_op: SpdOperator,
    b: DualVector,
    b_ref: SpdOperator,
    mu: f64,
    ell: f64,
}

impl QuadraticProblem {
    /// `f(x) = <Ax, x>/2 - <b, x>`, certified against `mu B <= A <= L B`.
    pub fn new(a_op: SpdOperator, b: DualVector, b_ref: SpdOperator, mu: f64, ell: f64) -> Result<Self> {
        if !(mu > 0.0 && ell >= mu && ell.is_finite()) {
            return Err(Error::InvalidParameter(format!("need 0 < mu <= L, got mu = {mu}, L = {ell}")));
        }
        check_dim(a_op.dim(), b.dim())?;
        check_dim(a_op.dim(), b_ref.dim())?;
        let range = rel_eigen_range(&a_op, &b_ref)?;
        if range.sandwich_slack(mu, ell) < -CERTIFY_TOL {
            return Err(Error::InvalidParameter(format!(
                "mu B <= A <= L B fails: relative spectrum [{}, {}] vs [{mu}, {ell}]",
                range.min_rel, range.max_rel
            )));
        }
        Ok(Self {
            a_op,
            b,
            b_ref,
            mu,
            ell,
        })
    }

    pub fn hessian(&self) -> &SpdOperator {
        &self.a_op
    }

    pub fn linear_term(&self) -> &DualVector {
        &self.b
    }

    pub fn reference(&self) -> &SpdOperator {
        &self.b_ref
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn ell(&self) -> f64 {
        self.ell
    }

    pub fn dim(&self) -> usize {
        self.a_op.dim()
    }

    pub fn value(&self, x: &PrimalVector) -> f64 {
        let xv = x.as_vector();
        0.5 * self.a_op.quad_form(xv) - self.b.as_vector().dot(xv)
    }

    /// `Ax - b`.
    pub fn gradient(&self, x: &PrimalVector) -> DualVector {
        DualVector::from_vector_unchecked(self.a_op.apply_raw(x.as_vector()) - self.b.as_vector())
    }

    pub fn minimizer(&self) -> PrimalVector {
        PrimalVector::from_vector_unchecked(self.a_op.solve_raw(self.b.as_vector()))
    }

    /// Eigenvalues of `A` relative to `B`, ascending.
    pub fn relative_spectrum(&self) -> Result<Vec<f64>> {
        rel_eigenvalues(&self.a_op, &self.b_ref)
    }
}

/// Quadratic with `B = I` and `A = Q diag(spectrum) Q^T` for a random
/// orthogonal `Q` drawn from `seed`; `mu` and `L` are the spectrum's extremes.
pub fn quad_make(spectrum: &[f64], b: DualVector, seed: u64) -> Result<QuadraticProblem> {
    let b_ref = SpdOperator::identity(spectrum.len().max(1), Role::PrimalToDual)?;
    quad_make_relative(spectrum, b, b_ref, seed)
}

/// Like [`quad_make`] with an arbitrary reference operator: `A = L Q D Q^T L^T`
/// where `B = L L^T`, so the spectrum is relative to `B`.
pub fn quad_make_relative(spectrum: &[f64], b: DualVector, b_ref: SpdOperator, seed: u64) -> Result<QuadraticProblem> {
    if spectrum.is_empty() {
        return Err(Error::EmptyDimension);
    }
    if spectrum.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
        return Err(Error::InvalidParameter("spectrum entries must be positive".into()));
    }
    check_dim(spectrum.len(), b_ref.dim())?;
    let mut rng = seeded(seed);
    let inner = matrix_with_spectrum(spectrum, &mut rng);
    let l = b_ref.cholesky().l();
    let a_op = SpdOperator::symmetrized(&l * inner * l.transpose(), Role::PrimalToDual)?;
    let mu = spectrum.iter().cloned().fold(f64::INFINITY, f64::min);
    let ell = spectrum.iter().cloned().fold(0.0, f64::max);
    QuadraticProblem::new(a_op, b, b_ref, mu, ell)
}

/// `f(x) = ln(sum_i exp(<a_i, x> + b_i)) + mu/2 ||x||_B^2`.
#[derive(Clone, Debug)]
pub struct LogSumExpProblem {
    a_rows: Vec<DualVector>,
    b_shift: Vec<f64>,
    mu: f64,
    b_ref: SpdOperator,
    gamma: f64,
}

impl LogSumExpProblem {
    /// Takes `gamma = max_i ||a_i||*_B`.
    pub fn new(a_rows: Vec<DualVector>, b_shift: Vec<f64>, mu: f64, b_ref: SpdOperator) -> Result<Self> {
        let gamma = Self::tight_gamma(&a_rows, &b_ref)?;
        Self::with_gamma(a_rows, b_shift, mu, b_ref, gamma)
    }

    /// Uses a caller-supplied `gamma`, which must dominate every `||a_i||*_B`.
    pub fn with_gamma(a_rows: Vec<DualVector>, b_shift: Vec<f64>, mu: f64, b_ref: SpdOperator, gamma: f64) -> Result<Self> {
        if a_rows.is_empty() {
            return Err(Error::InvalidParameter("log-sum-exp needs m >= 1 terms".into()));
        }
        if a_rows.len() != b_shift.len() {
            return Err(Error::DimMismatch {
                expected: a_rows.len(),
                got: b_shift.len(),
            });
        }
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(Error::InvalidParameter(format!("mu must be positive, got {mu}")));
        }
        if b_shift.iter().any(|b| !b.is_finite()) {
            return Err(Error::NonFinite("b_shift"));
        }
        let tight = Self::tight_gamma(&a_rows, &b_ref)?;
        if !(gamma >= tight - 1e-12 && gamma.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "gamma = {gamma} is below max ||a_i||* = {tight}"
            )));
        }
        Ok(Self {
            a_rows,
            b_shift,
            mu,
            b_ref,
            gamma,
        })
    }

    fn tight_gamma(a_rows: &[DualVector], b_ref: &SpdOperator) -> Result<f64> {
        let mut gamma = 0.0_f64;
        for a in a_rows {
            gamma = gamma.max(norm_dual(b_ref, a)?);
        }
        Ok(gamma)
    }

    /// Random instance with `B = I`: directions uniform on the sphere, norms
    /// in `[0.3 gamma, gamma]` with the largest equal to `gamma`, shifts
    /// standard normal.
    pub fn random(n: usize, m: usize, gamma: f64, mu: f64, seed: u64) -> Result<Self> {
        if n == 0 || m == 0 {
            return Err(Error::EmptyDimension);
        }
        if !(gamma > 0.0) {
            return Err(Error::InvalidParameter(format!("gamma must be positive, got {gamma}")));
        }
        let mut rng = seeded(seed);
        let mut rows: Vec<DVector<f64>> = (0..m)
            .map(|_| {
                let g = gaussian_vector(n, &mut rng);
                let scale = 0.3 + 0.7 * rng.random::<f64>();
                g.normalize() * scale
            })
            .collect();
        let max = rows.iter().map(|r| r.norm()).fold(0.0, f64::max);
        for r in &mut rows {
            *r *= gamma / max;
        }
        let shifts = gaussian_vector(m, &mut rng).iter().cloned().collect();
        let rows = rows.into_iter().map(DualVector::from_vector).collect::<Result<Vec<_>>>()?;
        Self::new(rows, shifts, mu, SpdOperator::identity(n, Role::PrimalToDual)?)
    }

    pub fn dim(&self) -> usize {
        self.b_ref.dim()
    }

    pub fn terms(&self) -> usize {
        self.a_rows.len()
    }

    pub fn rows(&self) -> &[DualVector] {
        &self.a_rows
    }

    pub fn shifts(&self) -> &[f64] {
        &self.b_shift
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn reference(&self) -> &SpdOperator {
        &self.b_ref
    }

    /// `L = gamma^2 + mu`.
    pub fn ell(&self) -> f64 {
        self.gamma * self.gamma + self.mu
    }

    /// `M = 2 gamma^3 / mu^{3/2}`.
    pub fn self_concordance(&self) -> f64 {
        2.0 * self.gamma.powi(3) / self.mu.powf(1.5)
    }

    /// Logits `<a_i, x> + b_i`, their maximum and the softmax weights.
    fn softmax(&self, x: &DVector<f64>) -> (Vec<f64>, f64, Vec<f64>) {
        let logits: Vec<f64> = self
            .a_rows
            .iter()
            .zip(&self.b_shift)
            .map(|(a, b)| a.as_vector().dot(x) + b)
            .collect();
        let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
        let total: f64 = exps.iter().sum();
        let pi = exps.iter().map(|e| e / total).collect();
        (pi, max + total.ln(), logits)
    }

    /// Softmax weights `pi_i(x)`.
    pub fn weights(&self, x: &PrimalVector) -> Vec<f64> {
        self.softmax(x.as_vector()).0
    }

    pub fn value(&self, x: &PrimalVector) -> f64 {
        let xv = x.as_vector();
        let (_, lse, _) = self.softmax(xv);
        lse + 0.5 * self.mu * self.b_ref.quad_form(xv)
    }

    pub fn gradient(&self, x: &PrimalVector) -> DualVector {
        let xv = x.as_vector();
        let (pi, _, _) = self.softmax(xv);
        DualVector::from_vector_unchecked(self.smooth_gradient(&pi) + self.b_ref.apply_raw(xv) * self.mu)
    }

    fn smooth_gradient(&self, pi: &[f64]) -> DVector<f64> {
        let mut g0 = DVector::zeros(self.dim());
        for (p, a) in pi.iter().zip(&self.a_rows) {
            g0.axpy(*p, a.as_vector(), 1.0);
        }
        g0
    }

    fn hessian_matrix(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let (pi, _, _) = self.softmax(x);
        let g0 = self.smooth_gradient(&pi);
        let n = self.dim();
        let mut h = DMatrix::zeros(n, n);
        for (p, a) in pi.iter().zip(&self.a_rows) {
            let av = a.as_vector();
            h.ger(*p, av, av, 1.0);
        }
        h.ger(-1.0, &g0, &g0, 1.0);
        h += self.b_ref.matrix() * self.mu;
        h
    }

    pub fn hessian(&self, x: &PrimalVector) -> Result<SpdOperator> {
        SpdOperator::symmetrized(self.hessian_matrix(x.as_vector()), Role::PrimalToDual)
    }
}

/// `(f(x), grad f(x), hess f(x))` for a log-sum-exp instance.
pub fn lse_value_grad_hess(p: &LogSumExpProblem, x: &PrimalVector) -> Result<(f64, DualVector, SpdOperator)> {
    check_dim(p.dim(), x.dim())?;
    Ok((p.value(x), p.gradient(x), p.hessian(x)?))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    Quadratic,
    LogSumExp,
}

#[derive(Clone, Debug)]
pub enum ProblemInstance {
    Quadratic(QuadraticProblem),
    LogSumExp(LogSumExpProblem),
}

impl From<QuadraticProblem> for ProblemInstance {
    fn from(p: QuadraticProblem) -> Self {
        ProblemInstance::Quadratic(p)
    }
}

impl From<LogSumExpProblem> for ProblemInstance {
    fn from(p: LogSumExpProblem) -> Self {
        ProblemInstance::LogSumExp(p)
    }
}

impl ProblemInstance {
    pub fn kind(&self) -> ProblemKind {
        match self {
            ProblemInstance::Quadratic(_) => ProblemKind::Quadratic,
            ProblemInstance::LogSumExp(_) => ProblemKind::LogSumExp,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            ProblemInstance::Quadratic(q) => q.dim(),
            ProblemInstance::LogSumExp(l) => l.dim(),
        }
    }

    pub fn mu(&self) -> f64 {
        match self {
            ProblemInstance::Quadratic(q) => q.mu(),
            ProblemInstance::LogSumExp(l) => l.mu(),
        }
    }

    pub fn ell(&self) -> f64 {
        match self {
            ProblemInstance::Quadratic(q) => q.ell(),
            ProblemInstance::LogSumExp(l) => l.ell(),
        }
    }

    /// Strong self-concordance constant `M`; zero for quadratics.
    pub fn self_concordance(&self) -> f64 {
        match self {
            ProblemInstance::Quadratic(_) => 0.0,
            ProblemInstance::LogSumExp(l) => l.self_concordance(),
        }
    }

    pub fn reference(&self) -> &SpdOperator {
        match self {
            ProblemInstance::Quadratic(q) => q.reference(),
            ProblemInstance::LogSumExp(l) => l.reference(),
        }
    }

    pub fn value(&self, x: &PrimalVector) -> f64 {
        match self {
            ProblemInstance::Quadratic(q) => q.value(x),
            ProblemInstance::LogSumExp(l) => l.value(x),
        }
    }

    pub fn gradient(&self, x: &PrimalVector) -> DualVector {
        match self {
            ProblemInstance::Quadratic(q) => q.gradient(x),
            ProblemInstance::LogSumExp(l) => l.gradient(x),
        }
    }

    pub fn hessian(&self, x: &PrimalVector) -> Result<SpdOperator> {
        match self {
            ProblemInstance::Quadratic(q) => Ok(q.hessian().clone()),
            ProblemInstance::LogSumExp(l) => l.hessian(x),
        }
    }

    /// Magnitude of the terms summed in `grad f(x)`, which sets the size of
    /// its rounding error.
    pub(crate) fn gradient_term_scale(&self, x: &PrimalVector) -> f64 {
        match self {
            ProblemInstance::Quadratic(q) => {
                q.a_op.apply_raw(x.as_vector()).norm() + q.b.coord_norm()
            }
            ProblemInstance::LogSumExp(l) => {
                let widest = l.a_rows.iter().map(|a| a.coord_norm()).fold(0.0, f64::max);
                widest + l.mu * l.b_ref.apply_raw(x.as_vector()).norm()
            }
        }
    }

    /// `lambda(x) = ||grad f(x)||*_x`.
    pub fn local_gradient_norm(&self, x: &PrimalVector) -> Result<f64> {
        norm_dual(&self.hessian(x)?, &self.gradient(x))
    }

    /// The unique minimizer. Closed form for quadratics, damped Newton with
    /// backtracking for log-sum-exp.
    pub fn minimizer(&self) -> Result<PrimalVector> {
        match self {
            ProblemInstance::Quadratic(q) => Ok(q.minimizer()),
            ProblemInstance::LogSumExp(l) => {
                let mut x = PrimalVector::zeros(l.dim());
                for _ in 0..200 {
                    let g = l.gradient(&x);
                    let h = l.hessian(&x)?;
                    let step = h.solve_raw(g.as_vector());
                    let decrement = g.as_vector().dot(&step);
                    if decrement <= 1e-32 {
                        break;
                    }
                    let f0 = l.value(&x);
                    let mut t = 1.0;
                    loop {
                        let trial = PrimalVector::from_vector_unchecked(x.as_vector() - &step * t);
                        if l.value(&trial) <= f0 - 0.25 * t * decrement || t < 1e-12 {
                            x = trial;
                            break;
                        }
                        t *= 0.5;
                    }
                }
                Ok(x)
            }
        }
    }

    /// A point `x* + t d` whose local gradient norm equals `target`, found by
    /// bisection on `t`.
    pub fn point_with_lambda(&self, direction: &PrimalVector, target: f64) -> Result<PrimalVector> {
        check_dim(self.dim(), direction.dim())?;
        if !(target > 0.0) || direction.coord_norm() == 0.0 {
            return Err(Error::InvalidParameter("need target > 0 and a nonzero direction".into()));
        }
        let x_star = self.minimizer()?;
        let at = |t: f64| PrimalVector::from_vector_unchecked(x_star.as_vector() + direction.as_vector() * t);
        let mut hi = target / norm_primal(&self.hessian(&x_star)?, direction)?;
        let mut guard = 0;
        while self.local_gradient_norm(&at(hi))? < target {
            hi *= 2.0;
            guard += 1;
            if guard > 200 {
                return Err(Error::Numerical("target local norm is unreachable along direction".into()));
            }
        }
        let mut lo = 0.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.local_gradient_norm(&at(mid))? < target {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-15 * hi {
                break;
            }
        }
        Ok(at(hi))
    }
}

#[derive(Clone, Debug)]
pub struct IntegralHessian {
    pub j_op: SpdOperator,
    pub quad_order: usize,
    /// Spectral norm of the difference between the `order` and `2 order`
    /// rules.
    pub est_error: f64,
}

/// `J = int_0^1 hess f(x + t u) dt`. Exact for quadratics, Gauss-Legendre
/// of the given order otherwise.
pub fn integral_hessian(p: &ProblemInstance, x: &PrimalVector, u: &PrimalVector, order: usize) -> Result<IntegralHessian> {
    if order < 2 {
        return Err(Error::InvalidParameter(format!("quadrature order must be >= 2, got {order}")));
    }
    check_dim(p.dim(), x.dim())?;
    check_dim(p.dim(), u.dim())?;
    let lse = match p {
        ProblemInstance::Quadratic(q) => {
            return Ok(IntegralHessian {
                j_op: q.hessian().clone(),
                quad_order: order,
                est_error: 0.0,
            })
        }
        ProblemInstance::LogSumExp(l) => l,
    };
    if u.coord_norm() == 0.0 {
        return Ok(IntegralHessian {
            j_op: lse.hessian(x)?,
            quad_order: order,
            est_error: 0.0,
        });
    }
    let rule = |ord: usize| {
        let gl = GaussLegendre::new(ord);
        let n = lse.dim();
        let mut j = DMatrix::zeros(n, n);
        for (t, w) in gl.nodes.iter().zip(&gl.weights) {
            j += lse.hessian_matrix(&(x.as_vector() + u.as_vector() * *t)) * *w;
        }
        j
    };
    let coarse = rule(order);
    let fine = rule(2 * order);
    let diff = &coarse - &fine;
    let est_error = diff
        .symmetric_eigenvalues()
        .iter()
        .fold(0.0_f64, |m, v| m.max(v.abs()));
    Ok(IntegralHessian {
        j_op: SpdOperator::symmetrized(coarse, Role::PrimalToDual)?,
        quad_order: order,
        est_error,
    })
}

/// Result of checking the self-concordance sandwiches on one segment.
#[derive(Clone, Debug, Serialize)]
pub struct SandwichReport {
    /// `||y - x||_x`
    pub r: f64,
    /// `1 + M r / 2`
    pub factor: f64,
    pub j_vs_x: EigenRange,
    pub j_vs_y: EigenRange,
    /// Relative slack of `hess f(x)/c <= J <= c hess f(x)`.
    pub slack_x: f64,
    /// Relative slack of `hess f(y)/c <= J <= c hess f(y)`.
    pub slack_y: f64,
    /// Worst relative Loewner slack of
    /// `hess f(y) - hess f(x) <= M ||y - x||_z hess f(w)` over the sampled
    /// `(z, w)`.
    pub sscf_slack: f64,
    pub est_error: f64,
    pub j_norm: f64,
}

impl SandwichReport {
    pub fn min_slack(&self) -> f64 {
        self.slack_x.min(self.slack_y).min(self.sscf_slack)
    }

    pub fn holds(&self, tol: f64) -> bool {
        self.min_slack() >= -tol
    }
}

/// Checks the integral-Hessian sandwiches on `[x, y]`, and the strong
/// self-concordance inequality with `z, w` ranging over `{x, y, (x + y)/2}`.
pub fn sandwich_check(p: &ProblemInstance, x: &PrimalVector, y: &PrimalVector) -> Result<SandwichReport> {
    let mid = PrimalVector::from_vector_unchecked((x.as_vector() + y.as_vector()) * 0.5);
    let points = [x.clone(), y.clone(), mid];
    sandwich_check_with(p, x, y, &points)
}

/// [`sandwich_check`] with the self-concordance inequality tested for every
/// `(z, w)` pair drawn from `probes`.
pub fn sandwich_check_with(
    p: &ProblemInstance,
    x: &PrimalVector,
    y: &PrimalVector,
    probes: &[PrimalVector],
) -> Result<SandwichReport> {
    let u = y - x;
    let hx = p.hessian(x)?;
    let hy = p.hessian(y)?;
    let r = norm_primal(&hx, &u)?;
    let m = p.self_concordance();
    let factor = 1.0 + m * r / 2.0;
    let ih = integral_hessian(p, x, &u, DEFAULT_QUAD_ORDER)?;
    let j_vs_x = rel_eigen_range(&ih.j_op, &hx)?;
    let j_vs_y = rel_eigen_range(&ih.j_op, &hy)?;

    let diff = hy.matrix() - hx.matrix();
    let zero = DMatrix::zeros(p.dim(), p.dim());
    let mut sscf_slack = f64::INFINITY;
    let hessians = probes.iter().map(|z| p.hessian(z)).collect::<Result<Vec<_>>>()?;
    for hz in &hessians {
        let dist = norm_primal(hz, &u)?;
        for hw in &hessians {
            let upper = hw.matrix() * (m * dist);
            let slack = if m == 0.0 {
                loewner_slack_matrices(&diff, &zero)
            } else {
                loewner_slack_matrices(&diff, &upper)
            };
            sscf_slack = sscf_slack.min(slack);
        }
    }
    Ok(SandwichReport {
        r,
        factor,
        j_vs_x,
        j_vs_y,
        slack_x: j_vs_x.sandwich_slack(1.0 / factor, factor),
        slack_y: j_vs_y.sandwich_slack(1.0 / factor, factor),
        sscf_slack,
        est_error: ih.est_error,
        j_norm: ih.j_op.spectral_norm(),
    })
}

/// Quadratic spectrum, either listed or log-spaced between two endpoints.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SpectrumSpec {
    List(Vec<f64>),
    LogSpaced { log_spaced: [f64; 2] },
}

/// Reproducible JSON description of an instance. `B` is always the identity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InstanceSpec {
    Quadratic {
        n: usize,
        spectrum: SpectrumSpec,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        b: Option<Vec<f64>>,
        /// Certified lower bound; defaults to the smallest eigenvalue.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        mu: Option<f64>,
        #[serde(default)]
        seed: u64,
    },
    LogSumExp {
        n: usize,
        m: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        a_rows: Option<Vec<Vec<f64>>>,
        /// The shifts `b_i`.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        b: Option<Vec<f64>>,
        mu: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        gamma: Option<f64>,
        #[serde(default)]
        seed: u64,
    },
}

impl InstanceSpec {
    pub fn seed(&self) -> u64 {
        match self {
            InstanceSpec::Quadratic { seed, .. } | InstanceSpec::LogSumExp { seed, .. } => *seed,
        }
    }

    pub fn set_seed(&mut self, new_seed: u64) {
        match self {
            InstanceSpec::Quadratic { seed, .. } | InstanceSpec::LogSumExp { seed, .. } => *seed = new_seed,
        }
    }

    pub fn build(&self) -> Result<ProblemInstance> {
        match self {
            InstanceSpec::Quadratic {
                n,
                spectrum,
                b,
                mu,
                seed,
            } => {
                let spectrum = match spectrum {
                    SpectrumSpec::List(v) => v.clone(),
                    SpectrumSpec::LogSpaced { log_spaced: [lo, hi] } => {
                        if !(*lo > 0.0 && hi >= lo) {
                            return Err(Error::InvalidParameter(format!("bad log-spaced range [{lo}, {hi}]")));
                        }
                        crate::sampling::log_spaced(*lo, *hi, *n)
                    }
                };
                if spectrum.len() != *n {
                    return Err(Error::DimMismatch {
                        expected: *n,
                        got: spectrum.len(),
                    });
                }
                let b = match b {
                    Some(v) => DualVector::new(v.clone())?,
                    None => DualVector::from_vector(gaussian_vector(*n, &mut seeded(seed.wrapping_add(1))))?,
                };
                let q = quad_make(&spectrum, b, *seed)?;
                match mu {
                    None => Ok(q.into()),
                    Some(mu) => {
                        let (a_op, b, b_ref, ell) = (q.a_op, q.b, q.b_ref, q.ell);
                        Ok(QuadraticProblem::new(a_op, b, b_ref, *mu, ell)?.into())
                    }
                }
            }
            InstanceSpec::LogSumExp {
                n,
                m,
                a_rows,
                b,
                mu,
                gamma,
                seed,
            } => {
                if !(*mu > 0.0) {
                    return Err(Error::InvalidParameter(format!("mu must be positive, got {mu}")));
                }
                let b_ref = SpdOperator::identity((*n).max(1), Role::PrimalToDual)?;
                let random = || LogSumExpProblem::random(*n, *m, gamma.unwrap_or(1.0), *mu, *seed);
                let problem = match (a_rows, b) {
                    (None, None) => random()?,
                    (None, Some(shifts)) => {
                        let r = random()?;
                        LogSumExpProblem::with_gamma(r.a_rows, shifts.clone(), *mu, b_ref, r.gamma)?
                    }
                    (Some(rows), shifts) => {
                        if rows.len() != *m {
                            return Err(Error::DimMismatch {
                                expected: *m,
                                got: rows.len(),
                            });
                        }
                        let rows = rows
                            .iter()
                            .map(|r| {
                                check_dim(*n, r.len())?;
                                DualVector::new(r.clone())
                            })
                            .collect::<Result<Vec<_>>>()?;
                        let shifts = match shifts {
                            Some(s) => s.clone(),
                            None => gaussian_vector(*m, &mut seeded(*seed)).iter().cloned().collect(),
                        };
                        match gamma {
                            Some(g) => LogSumExpProblem::with_gamma(rows, shifts, *mu, b_ref, *g)?,
                            None => LogSumExpProblem::new(rows, shifts, *mu, b_ref)?,
                        }
                    }
                };
                Ok(problem.into())
            }
        }
    }
}
