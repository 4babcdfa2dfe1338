//! The quasi-Newton schemes with per-iteration instrumentation.
//!
//! Both schemes start from `G_0 = L B` and take unit steps
//! `x_{k+1} = x_k - G_k^{-1} grad f(x_k)`. The approximation is then updated
//! towards a target operator: `A` for quadratics and the integral Hessian
//! `J_k` over the step segment in general. The inverse `G_k^{-1}` is carried
//! along by its own rank-two formula and never refactorized.

use serde::{Deserialize, Serialize};

use crate::broyden::{broyd_with_inverse, nu, TauParam, ZERO_DIRECTION};
use crate::error::{Error, Result};
use crate::operator::{check_dim, norm_dual, norm_primal, rel_eigen_range, DualVector, EigenRange, PrimalVector, SpdOperator};
use crate::potentials::{augmented_barrier, logdet_barrier};
use crate::problems::{integral_hessian, IntegralHessian, ProblemInstance, ProblemKind, QuadraticProblem, DEFAULT_QUAD_ORDER};

/// Choice of `tau_k` per iteration. A sequence is applied cyclically.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TauSchedule {
    #[serde(rename = "dfp")]
    ConstantDfp,
    #[serde(rename = "bfgs")]
    ConstantBfgs,
    Constant(TauParam),
    Sequence(Vec<TauParam>),
}

impl TauSchedule {
    pub fn validate(&self) -> Result<()> {
        match self {
            TauSchedule::Sequence(s) if s.is_empty() => {
                Err(Error::InvalidParameter("tau sequence must be nonempty".into()))
            }
            _ => Ok(()),
        }
    }

    pub fn tau_at(&self, k: usize) -> TauParam {
        match self {
            TauSchedule::ConstantDfp => TauParam::DFP,
            TauSchedule::ConstantBfgs => TauParam::BFGS,
            TauSchedule::Constant(t) => *t,
            TauSchedule::Sequence(s) => s[k % s.len()],
        }
    }

    /// `sup_k tau_k`.
    pub fn sup_tau(&self) -> f64 {
        match self {
            TauSchedule::ConstantDfp => 1.0,
            TauSchedule::ConstantBfgs => 0.0,
            TauSchedule::Constant(t) => t.value(),
            TauSchedule::Sequence(s) => s.iter().map(|t| t.value()).fold(0.0, f64::max),
        }
    }

    pub fn label(&self) -> String {
        match self {
            TauSchedule::ConstantDfp => "dfp".into(),
            TauSchedule::ConstantBfgs => "bfgs".into(),
            TauSchedule::Constant(t) => format!("tau={}", t.value()),
            TauSchedule::Sequence(s) => format!("sequence[{}]", s.len()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub max_iter: usize,
    /// Stop once `lambda_k <= grad_tol`.
    pub grad_tol: f64,
    pub quad_order: usize,
    /// Keep every `G_k` in the trace.
    pub record_operators: bool,
    /// Largest accepted quadrature error estimate, relative to `||J_k||`.
    pub quad_rel_threshold: f64,
    /// Measure eigenvalue ranges, potentials and `nu` at every step. Turning
    /// this off leaves only the quantities the scheme itself needs plus
    /// `lambda_k`.
    pub instrument: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iter: 500,
            grad_tol: 1e-12,
            quad_order: DEFAULT_QUAD_ORDER,
            record_operators: false,
            quad_rel_threshold: 1e-9,
            instrument: true,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iter < 1 {
            return Err(Error::InvalidParameter("max_iter must be >= 1".into()));
        }
        if !(self.grad_tol >= 0.0) {
            return Err(Error::InvalidParameter(format!("grad_tol must be >= 0, got {}", self.grad_tol)));
        }
        if self.quad_order < 2 {
            return Err(Error::InvalidParameter(format!("quad_order must be >= 2, got {}", self.quad_order)));
        }
        if !(self.quad_rel_threshold > 0.0) {
            return Err(Error::InvalidParameter("quad_rel_threshold must be positive".into()));
        }
        Ok(())
    }
}

/// Measurements tied to the step `u_k` and the update `G_k -> G_{k+1}`
/// against the target `T_k` (`A` or `J_k`).
#[derive(Clone, Debug, Serialize)]
pub struct StepRecord {
    pub u: PrimalVector,
    /// `||u_k||_{x_k}`.
    pub r: f64,
    pub tau: f64,
    /// No update was made because `u_k` vanished.
    pub skipped: bool,
    pub phi: f64,
    /// `Det(G_{k+1}^{-1}, G_k)`.
    pub det_ratio: f64,
    /// Quadrature error estimate for `J_k` (zero for quadratics).
    pub quad_error: f64,
    pub target_norm: f64,
    pub potentials: Option<StepPotentials>,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct StepPotentials {
    /// `nu(T_k, G_k, u_k)`.
    pub nu: f64,
    /// `V(T_k, G_k)`.
    pub v: f64,
    /// `psi(G_k, T_k)`.
    pub psi: f64,
    /// `V(T_k, G_{k+1})`.
    pub v_next: f64,
    /// `psi(G_{k+1}, T_k)`.
    pub psi_next: f64,
    /// Spectrum of `G_k` relative to `T_k`.
    pub target_range: EigenRange,
    /// Spectrum of `G_{k+1}` relative to `T_k`.
    pub next_target_range: EigenRange,
}

#[derive(Clone, Debug, Serialize)]
pub struct IterationRecord {
    pub k: usize,
    pub x: PrimalVector,
    pub grad: DualVector,
    /// `||grad f(x_k)||*_{x_k}`.
    pub lambda: f64,
    /// `||grad f(x_k)||*_{G_k}`.
    pub g_norm: f64,
    pub xi: f64,
    /// Spectrum of `G_k` relative to `hess f(x_k)`.
    pub eig_range: Option<EigenRange>,
    pub step: Option<StepRecord>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Tolerance,
    ZeroGradient,
    MaxIter,
}

#[derive(Clone, Debug, Serialize)]
pub struct IterationTrace {
    pub kind: ProblemKind,
    pub n: usize,
    pub mu: f64,
    pub ell: f64,
    pub m_sc: f64,
    pub sup_tau: f64,
    pub records: Vec<IterationRecord>,
    /// `xi` after the last recorded step, i.e. `xi_{K+1}` for the final
    /// record `K` if it took a step, otherwise equal to `xi_K`.
    pub xi_after: f64,
    #[serde(skip)]
    pub snapshots: Option<Vec<SpdOperator>>,
    pub stop: StopReason,
    /// Iterations `k >= 1` with `lambda_{k+1} >= lambda_k`.
    pub nonmonotone: Vec<usize>,
}

impl IterationTrace {
    pub fn lambda0(&self) -> f64 {
        self.records[0].lambda
    }

    pub fn lambdas(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.lambda).collect()
    }

    pub fn xis(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.xi).collect()
    }

    /// `tau_i` for every step taken.
    pub fn taus(&self) -> Vec<f64> {
        self.records.iter().filter_map(|r| r.step.as_ref().map(|s| s.tau)).collect()
    }

    /// Number of steps taken.
    pub fn iterations(&self) -> usize {
        self.records.len() - 1
    }

    pub fn converged(&self) -> bool {
        self.stop != StopReason::MaxIter
    }
}

/// The quadratic scheme: target operator `A` in every update.
pub fn run_quadratic(
    p: &QuadraticProblem,
    x0: &PrimalVector,
    sched: &TauSchedule,
    cfg: &SolverConfig,
) -> Result<IterationTrace> {
    run_scheme(&ProblemInstance::Quadratic(p.clone()), x0, sched, cfg, Target::Hessian)
}

/// The general scheme: target operator `J_k`, the mean Hessian over
/// `[x_k, x_{k+1}]`. For a quadratic `J_k = A` and `M = 0`, so this
/// reproduces [`run_quadratic`].
pub fn run_general(
    p: &ProblemInstance,
    x0: &PrimalVector,
    sched: &TauSchedule,
    cfg: &SolverConfig,
) -> Result<IterationTrace> {
    run_scheme(p, x0, sched, cfg, Target::Integral)
}

#[derive(Clone, Copy, PartialEq)]
enum Target {
    /// `hess f(x_k)`, which is the constant `A` on a quadratic.
    Hessian,
    Integral,
}

fn run_scheme(
    p: &ProblemInstance,
    x0: &PrimalVector,
    sched: &TauSchedule,
    cfg: &SolverConfig,
    target_kind: Target,
) -> Result<IterationTrace> {
    cfg.validate()?;
    sched.validate()?;
    check_dim(p.dim(), x0.dim())?;
    let m_sc = p.self_concordance();
    let mut g = p.reference().scaled(p.ell())?;
    let mut h = g.inverse()?;
    let mut x = x0.clone();
    let mut xi = 1.0_f64;
    let mut records = Vec::new();
    let mut snapshots = cfg.record_operators.then(Vec::new);
    let stop;

    let mut k = 0;
    loop {
        let grad = p.gradient(&x);
        if !grad.is_finite() || !x.is_finite() {
            return Err(Error::Divergence { k });
        }
        let hess = p.hessian(&x)?;
        let lambda = norm_dual(&hess, &grad)?;
        let g_norm = norm_dual(&g, &grad)?;
        if !lambda.is_finite() {
            return Err(Error::Divergence { k });
        }
        let eig_range = if cfg.instrument {
            Some(rel_eigen_range(&g, &hess)?)
        } else {
            None
        };
        if let Some(s) = snapshots.as_mut() {
            s.push(g.clone());
        }
        let mut record = IterationRecord {
            k,
            x: x.clone(),
            grad: grad.clone(),
            lambda,
            g_norm,
            xi,
            eig_range,
            step: None,
        };
        if grad.coords().iter().all(|&c| c == 0.0) {
            records.push(record);
            stop = StopReason::ZeroGradient;
            break;
        }
        if lambda <= cfg.grad_tol {
            records.push(record);
            stop = StopReason::Tolerance;
            break;
        }
        if k == cfg.max_iter {
            records.push(record);
            stop = StopReason::MaxIter;
            break;
        }

        let u = h.apply_dual(&grad)?.scaled(-1.0);
        let x_next = &x + &u;
        if !x_next.is_finite() {
            return Err(Error::Divergence { k: k + 1 });
        }
        let r = norm_primal(&hess, &u)?;
        let target = match target_kind {
            Target::Hessian => IntegralHessian {
                j_op: hess.clone(),
                quad_order: 0,
                est_error: 0.0,
            },
            Target::Integral => integral_hessian(p, &x, &u, cfg.quad_order)?,
        };
        let target_norm = target.j_op.spectral_norm();
        if target.est_error > cfg.quad_rel_threshold * target_norm {
            return Err(Error::Quadrature {
                k,
                est_error: target.est_error,
                threshold: cfg.quad_rel_threshold * target_norm,
            });
        }
        let t = &target.j_op;
        let tau = sched.tau_at(k);
        let skipped = u.coord_norm() <= ZERO_DIRECTION;
        let update = broyd_with_inverse(t, &g, &h, &u, tau)?;
        let potentials = if cfg.instrument && !skipped {
            Some(StepPotentials {
                nu: nu(t, &g, &u)?,
                v: logdet_barrier(t, &g)?,
                psi: augmented_barrier(&g, t)?,
                v_next: logdet_barrier(t, &update.g_plus)?,
                psi_next: augmented_barrier(&update.g_plus, t)?,
                target_range: rel_eigen_range(&g, t)?,
                next_target_range: rel_eigen_range(&update.g_plus, t)?,
            })
        } else {
            None
        };
        record.step = Some(StepRecord {
            u,
            r,
            tau: tau.value(),
            skipped,
            phi: update.phi,
            det_ratio: update.det_ratio,
            quad_error: target.est_error,
            target_norm,
            potentials,
        });
        records.push(record);

        if m_sc != 0.0 {
            xi *= (m_sc * r).exp();
        }
        g = update.g_plus;
        h = update.g_plus_inv;
        x = x_next;
        k += 1;
    }

    let nonmonotone = records
        .windows(2)
        .skip(1)
        .filter(|w| w[1].lambda >= w[0].lambda)
        .map(|w| w[0].k)
        .collect();
    Ok(IterationTrace {
        kind: p.kind(),
        n: p.dim(),
        mu: p.mu(),
        ell: p.ell(),
        m_sc,
        sup_tau: sched.sup_tau(),
        records,
        xi_after: xi,
        snapshots,
        stop,
        nonmonotone,
    })
}

/// Gradient differences must exceed their rounding error by this factor to
/// enter [`secant_residual`].
pub const SECANT_NOISE_MARGIN: f64 = 1e12;

/// Relative secant residuals
/// `||G_{k+1} u_k - (grad f(x_{k+1}) - grad f(x_k))|| / ||grad f(x_{k+1}) - grad f(x_k)||`
/// as `(k, residual)`. Tail steps, where the gradient difference is lost in
/// the rounding error of the gradients themselves, are skipped.
pub fn secant_residual(trace: &IterationTrace, p: &ProblemInstance) -> Result<Vec<(usize, f64)>> {
    let snaps = trace.snapshots.as_ref().ok_or(Error::MissingSnapshots)?;
    check_dim(trace.n, p.dim())?;
    let mut out = Vec::new();
    for w in trace.records.windows(2) {
        let (cur, next) = (&w[0], &w[1]);
        let Some(step) = cur.step.as_ref() else { continue };
        if step.skipped {
            continue;
        }
        let dg = next.grad.as_vector() - cur.grad.as_vector();
        let denom = dg.norm();
        let noise = f64::EPSILON * (p.gradient_term_scale(&cur.x) + p.gradient_term_scale(&next.x));
        if denom <= SECANT_NOISE_MARGIN * noise || step.u.coord_norm() <= ZERO_DIRECTION {
            continue;
        }
        let gu = snaps[next.k].apply_raw(step.u.as_vector());
        out.push((cur.k, (gu - dg).norm() / denom));
    }
    Ok(out)
}
