//! Theoretical envelopes and thresholds, and their comparison with measured
//! traces.
//!
//! Superlinear envelopes are assembled in log-space; the `*_ln` variants
//! return the logarithm of the bound and stay finite where the bound itself
//! overflows `f64`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operator::EigenRange;
use crate::problems::{ProblemInstance, QuadraticProblem};
use crate::solver::IterationTrace;

/// Relative tolerance of an envelope comparison.
pub const ENVELOPE_REL_TOL: f64 = 1e-8;
/// Absolute tolerance of an envelope comparison.
pub const ENVELOPE_ABS_TOL: f64 = 1e-14;

const THIRTEEN_SIXTHS: f64 = 13.0 / 6.0;

fn check_constants(mu: f64, ell: f64) -> Result<()> {
    if !(mu > 0.0 && ell >= mu && ell.is_finite()) {
        return Err(Error::InvalidParameter(format!("need 0 < mu <= L, got mu = {mu}, L = {ell}")));
    }
    Ok(())
}

/// `ln(e^x - 1)` for `x >= 0`, without overflow.
fn ln_expm1(x: f64) -> f64 {
    if x > 30.0 {
        x + (-(-x).exp()).ln_1p()
    } else {
        x.exp_m1().ln()
    }
}

/// `ln([c / prod p_i^{1/k} (e^{s/k} - 1)]^{k/2} sqrt(w) lambda0)`, the common
/// shape of every superlinear envelope.
fn superlinear_ln(c: f64, ln_p: &[f64], s: f64, w: f64, k: usize, lambda0: f64) -> f64 {
    let mean_ln_p = ln_p.iter().sum::<f64>() / k as f64;
    superlinear_ln_mean(c, mean_ln_p, s, w, k, lambda0)
}

fn superlinear_ln_mean(c: f64, mean_ln_p: f64, s: f64, w: f64, k: usize, lambda0: f64) -> f64 {
    let kf = k as f64;
    0.5 * kf * (c.ln() - mean_ln_p + ln_expm1(s / kf)) + 0.5 * w.ln() + lambda0.ln()
}

fn taus_prefix(taus: &[f64], k: usize) -> Result<&[f64]> {
    if k == 0 {
        return Err(Error::InvalidParameter("superlinear envelopes start at k = 1".into()));
    }
    if taus.len() < k {
        return Err(Error::InvalidParameter(format!("need {k} tau values, got {}", taus.len())));
    }
    let head = &taus[..k];
    if head.iter().any(|t| !(0.0..=1.0).contains(t)) {
        return Err(Error::InvalidParameter("tau values must lie in [0, 1]".into()));
    }
    Ok(head)
}

/// `(1 - mu/L)^k lambda0`.
pub fn env_quad_linear(mu: f64, ell: f64, k: usize, lambda0: f64) -> Result<f64> {
    check_constants(mu, ell)?;
    if k == 0 {
        return Ok(lambda0);
    }
    Ok((k as f64 * (-mu / ell).ln_1p()).exp() * lambda0)
}

/// Logarithm of the quadratic superlinear envelope with `factor` in place of
/// `n ln(L/mu)` and `scale` multiplying it in the exponent.
fn env_quad_superlinear_general_ln(
    factor: f64,
    scale: f64,
    mu: f64,
    ell: f64,
    taus: &[f64],
    k: usize,
    lambda0: f64,
) -> Result<f64> {
    check_constants(mu, ell)?;
    let taus = taus_prefix(taus, k)?;
    let ratio = mu / ell;
    let ln_p: Vec<f64> = taus.iter().map(|t| (t * ratio + 1.0 - t).ln()).collect();
    Ok(superlinear_ln(2.0, &ln_p, scale * factor, ell / mu, k, lambda0))
}

/// `ln` of [`env_quad_superlinear`].
pub fn env_quad_superlinear_ln(n: usize, mu: f64, ell: f64, taus: &[f64], k: usize, lambda0: f64) -> Result<f64> {
    env_quad_superlinear_general_ln(n as f64 * (ell / mu).ln(), 1.0, mu, ell, taus, k, lambda0)
}

/// `[2 / prod p_i^{1/k} (e^{(n/k) ln(L/mu)} - 1)]^{k/2} sqrt(L/mu) lambda0`
/// with `p_i = tau_i mu/L + 1 - tau_i`, for `k >= 1`.
pub fn env_quad_superlinear(n: usize, mu: f64, ell: f64, taus: &[f64], k: usize, lambda0: f64) -> Result<f64> {
    Ok(env_quad_superlinear_ln(n, mu, ell, taus, k, lambda0)?.exp())
}

/// `ln` of [`env_quad_superlinear_psi`].
pub fn env_quad_superlinear_psi_ln(n: usize, mu: f64, ell: f64, taus: &[f64], k: usize, lambda0: f64) -> Result<f64> {
    env_quad_superlinear_general_ln(n as f64 * (ell / mu).ln(), THIRTEEN_SIXTHS, mu, ell, taus, k, lambda0)
}

/// [`env_quad_superlinear_ln`] for a constant `tau`, in constant time.
pub fn env_quad_superlinear_const_ln(n: usize, mu: f64, ell: f64, tau: f64, k: usize, lambda0: f64) -> Result<f64> {
    check_constants(mu, ell)?;
    if k == 0 {
        return Err(Error::InvalidParameter("superlinear envelopes start at k = 1".into()));
    }
    if !(0.0..=1.0).contains(&tau) {
        return Err(Error::InvalidParameter(format!("tau must lie in [0, 1], got {tau}")));
    }
    let ln_p = (tau * mu / ell + 1.0 - tau).ln();
    Ok(superlinear_ln_mean(2.0, ln_p, n as f64 * (ell / mu).ln(), ell / mu, k, lambda0))
}

/// [`env_quad_superlinear`] with the exponent scaled by `13/6`.
pub fn env_quad_superlinear_psi(n: usize, mu: f64, ell: f64, taus: &[f64], k: usize, lambda0: f64) -> Result<f64> {
    Ok(env_quad_superlinear_psi_ln(n, mu, ell, taus, k, lambda0)?.exp())
}

/// [`env_quad_superlinear`] with `n ln(L/mu)` replaced by `factor`, e.g. the
/// value of [`env_quad_sharpened_factor`].
pub fn env_quad_superlinear_with_factor(
    factor: f64,
    mu: f64,
    ell: f64,
    taus: &[f64],
    k: usize,
    lambda0: f64,
) -> Result<f64> {
    if !(factor >= 0.0) {
        return Err(Error::InvalidParameter(format!("factor must be >= 0, got {factor}")));
    }
    Ok(env_quad_superlinear_general_ln(factor, 1.0, mu, ell, taus, k, lambda0)?.exp())
}

/// `ln Det(A^{-1}, L B) = sum_i ln(L / lambda_i)` over the eigenvalues of `A`
/// relative to `B`.
pub fn env_quad_sharpened_factor(p: &QuadraticProblem) -> Result<f64> {
    let ell = p.ell();
    Ok(p.relative_spectrum()?.iter().map(|l| (ell / l).ln().max(0.0)).sum())
}

/// `ceil(8 n ln(2L/mu) / (tau 4mu/(9L) + 1 - tau))`, at least one.
pub fn k0(n: usize, mu: f64, ell: f64, sup_tau: f64) -> Result<u64> {
    check_constants(mu, ell)?;
    if !(0.0..=1.0).contains(&sup_tau) {
        return Err(Error::InvalidParameter(format!("tau must lie in [0, 1], got {sup_tau}")));
    }
    let nf = n as f64;
    let log = (2.0 * ell / mu).ln();
    let t = if sup_tau == 0.0 {
        8.0 * nf * log
    } else if sup_tau == 1.0 {
        18.0 * nf * ell / mu * log
    } else {
        8.0 * nf * log / (sup_tau * 4.0 * mu / (9.0 * ell) + 1.0 - sup_tau)
    };
    Ok((t.ceil() as u64).max(1))
}

/// Largest admissible `lambda0` for the local theorem:
/// `ln(3/2) / (3/2)^{3/2} max(mu/(2L), 1/(K0 + 9)) / M`, infinite for `M = 0`.
pub fn region_radius(mu: f64, ell: f64, n: usize, sup_tau: f64, m_sc: f64) -> Result<f64> {
    if !(m_sc >= 0.0) {
        return Err(Error::InvalidParameter(format!("M must be >= 0, got {m_sc}")));
    }
    let k = k0(n, mu, ell, sup_tau)?;
    if m_sc == 0.0 {
        return Ok(f64::INFINITY);
    }
    let c = 1.5f64.ln() / 1.5f64.powf(1.5);
    Ok(c * (mu / (2.0 * ell)).max(1.0 / (k as f64 + 9.0)) / m_sc)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EnvelopeRow {
    pub k: usize,
    pub measured: f64,
    pub bound: f64,
    pub satisfied: bool,
    /// `(bound - measured) / bound`, or `-measured` when the bound is zero.
    pub slack: f64,
    /// The bound used a one-step-ahead quantity that the trace does not
    /// contain yet, substituted by its last available value.
    pub provisional: bool,
}

impl EnvelopeRow {
    pub fn new(k: usize, measured: f64, bound: f64, provisional: bool) -> Self {
        let satisfied = measured <= bound * (1.0 + ENVELOPE_REL_TOL) + ENVELOPE_ABS_TOL;
        let slack = if bound > 0.0 {
            (bound - measured) / bound
        } else {
            -measured
        };
        Self {
            k,
            measured,
            bound,
            satisfied,
            slack,
            provisional,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct EnvelopeReport {
    pub name: String,
    pub rows: Vec<EnvelopeRow>,
    #[serde(rename = "K0")]
    pub k0: u64,
    pub region_radius: f64,
    /// The hypotheses of the underlying statement hold for this trace, so a
    /// violation is a genuine failure.
    pub asserted: bool,
}

impl EnvelopeReport {
    fn new(name: &str, trace: &IterationTrace, mu: f64, rows: Vec<EnvelopeRow>, asserted: bool) -> Result<Self> {
        Ok(Self {
            name: name.to_string(),
            rows,
            k0: k0(trace.n, mu, trace.ell, trace.sup_tau)?,
            region_radius: region_radius(mu, trace.ell, trace.n, trace.sup_tau, trace.m_sc)?,
            asserted,
        })
    }

    pub fn first_violation(&self) -> Option<usize> {
        self.rows.iter().find(|r| !r.satisfied).map(|r| r.k)
    }

    pub fn min_slack(&self) -> f64 {
        self.rows.iter().map(|r| r.slack).fold(f64::INFINITY, f64::min)
    }

    pub fn all_satisfied(&self) -> bool {
        self.rows.iter().all(|r| r.satisfied)
    }

    /// Satisfied, or not asserted for this trace.
    pub fn passed(&self) -> bool {
        !self.asserted || self.all_satisfied()
    }
}

/// Whether `lambda0` lies in the region of the local theorem.
pub fn lam_ini_holds(trace: &IterationTrace) -> Result<bool> {
    lam_ini_holds_with(trace, trace.mu)
}

fn lam_ini_holds_with(trace: &IterationTrace, mu: f64) -> Result<bool> {
    let radius = region_radius(mu, trace.ell, trace.n, trace.sup_tau, trace.m_sc)?;
    Ok(trace.lambda0() <= radius)
}

/// Envelopes of the general scheme: the bound driven by the measured `xi_k`
/// and the fixed-rate bound valid inside the local region.
#[derive(Clone, Debug, Serialize)]
pub struct GeneralEnvelopes {
    /// `sqrt(xi_k) lambda0 prod q_i`, valid for every trace.
    pub lemma: EnvelopeReport,
    /// `(1 - mu/(2L))^k sqrt(3/2) lambda0` for linear, or the `5/2` envelope
    /// for superlinear; asserted only inside the region.
    pub theorem: EnvelopeReport,
}

/// Linear envelopes of the general scheme:
/// `lambda_k <= sqrt(xi_k) lambda0 prod_{i<k} q_i` with
/// `q_i = max(1 - mu/(xi_{i+1} L), xi_{i+1} - 1)`, and
/// `lambda_k <= (1 - mu/(2L))^k sqrt(3/2) lambda0` inside the region.
pub fn env_general_linear(trace: &IterationTrace) -> Result<GeneralEnvelopes> {
    env_general_linear_with(trace, trace.mu)
}

pub fn env_general_linear_with(trace: &IterationTrace, mu: f64) -> Result<GeneralEnvelopes> {
    check_constants(mu, trace.ell)?;
    let lambda0 = trace.lambda0();
    let xis = trace.xis();
    let mut lemma_rows = Vec::new();
    let mut theorem_rows = Vec::new();
    let mut ln_prod_q = 0.0;
    for (k, rec) in trace.records.iter().enumerate() {
        if k > 0 {
            let xi_next = xis[k];
            let q = (1.0 - mu / (xi_next * trace.ell)).max(xi_next - 1.0);
            ln_prod_q += q.ln();
        }
        let lemma = (0.5 * xis[k].ln() + lambda0.ln() + ln_prod_q).exp();
        lemma_rows.push(EnvelopeRow::new(k, rec.lambda, lemma, false));
        let theorem = (k as f64 * (-mu / (2.0 * trace.ell)).ln_1p()).exp() * 1.5f64.sqrt() * lambda0;
        theorem_rows.push(EnvelopeRow::new(k, rec.lambda, theorem, false));
    }
    let inside = lam_ini_holds_with(trace, mu)?;
    Ok(GeneralEnvelopes {
        lemma: EnvelopeReport::new("general_linear_lemma", trace, mu, lemma_rows, true)?,
        theorem: EnvelopeReport::new("general_linear", trace, mu, theorem_rows, inside)?,
    })
}

/// Superlinear envelopes of the general scheme (rows for `k >= 1`): the
/// xi-driven bound with constant `1 + xi_k`, factors
/// `p_i = tau_i mu/(xi_{i+1}^2 L) + 1 - tau_i` and exponent
/// `(13/6)(n/k)(xi_{k+1} ln xi_{k+1} + ln(L/mu))`; and the fixed-rate bound
/// with constant `5/2`, `p_i = tau_i 4mu/(9L) + 1 - tau_i` and exponent
/// `(13/6)(n/k) ln(2L/mu)`.
pub fn env_general_superlinear(trace: &IterationTrace) -> Result<GeneralEnvelopes> {
    env_general_superlinear_with(trace, trace.mu)
}

pub fn env_general_superlinear_with(trace: &IterationTrace, mu: f64) -> Result<GeneralEnvelopes> {
    check_constants(mu, trace.ell)?;
    let ell = trace.ell;
    let n = trace.n as f64;
    let lambda0 = trace.lambda0();
    let xis = trace.xis();
    let taus = trace.taus();
    let last = trace.records.len() - 1;
    let mut lemma_rows = Vec::new();
    let mut theorem_rows = Vec::new();
    let mut ln_p_lemma = Vec::new();
    let mut ln_p_theorem = Vec::new();
    for k in 1..=last {
        let tau = taus[k - 1];
        ln_p_lemma.push((tau * mu / (xis[k] * xis[k] * ell) + 1.0 - tau).ln());
        ln_p_theorem.push((tau * 4.0 * mu / (9.0 * ell) + 1.0 - tau).ln());
        let (xi_next, provisional) = if k < last {
            (xis[k + 1], false)
        } else {
            (trace.xi_after, trace.records[k].step.is_none() && trace.m_sc != 0.0)
        };
        let xi_k = xis[k];
        let s = THIRTEEN_SIXTHS * n * (xi_next * xi_next.ln() + (ell / mu).ln());
        let lemma = superlinear_ln(1.0 + xi_k, &ln_p_lemma, s, xi_k * ell / mu, k, lambda0).exp();
        let measured = trace.records[k].lambda;
        lemma_rows.push(EnvelopeRow::new(k, measured, lemma, provisional));
        let s = THIRTEEN_SIXTHS * n * (2.0 * ell / mu).ln();
        let theorem = superlinear_ln(2.5, &ln_p_theorem, s, 1.5 * ell / mu, k, lambda0).exp();
        theorem_rows.push(EnvelopeRow::new(k, measured, theorem, false));
    }
    let inside = lam_ini_holds_with(trace, mu)?;
    Ok(GeneralEnvelopes {
        lemma: EnvelopeReport::new("general_superlinear_lemma", trace, mu, lemma_rows, true)?,
        theorem: EnvelopeReport::new("general_superlinear", trace, mu, theorem_rows, inside)?,
    })
}

/// Row for `lower T <= G <= upper T` given the spectrum of `G` relative to
/// `T`: measured is `max(max_rel/upper, lower/min_rel)` against a bound of one.
pub fn sandwich_row(k: usize, range: &EigenRange, lower: f64, upper: f64) -> EnvelopeRow {
    let measured = (range.max_rel / upper).max(lower / range.min_rel);
    EnvelopeRow::new(k, measured, 1.0, false)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Bfgs,
    Dfp,
}

/// Old and new rates for DFP and BFGS on quadratics, with their starting
/// moments of superlinear convergence.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct StartComparison {
    /// BFGS `(nL/(mu k))^{k/2} lambda0`, DFP `(nL^2/(mu^2 k))^{k/2} lambda0`.
    pub prev: f64,
    /// The superlinear quadratic envelope with constant `tau`.
    pub new: f64,
    /// BFGS `(4n/k ln(L/mu))^{k/2} lambda0`, DFP
    /// `(4nL/(mu k) ln(L/mu))^{k/2} lambda0`; only for `k >= start_new`.
    pub simplified: Option<f64>,
    /// BFGS `nL/mu`, DFP `nL^2/mu^2`.
    pub start_prev: f64,
    /// BFGS `4n ln(L/mu)`, DFP `4nL/mu ln(L/mu)`.
    pub start_new: f64,
}

pub fn env_start_comparison(n: usize, mu: f64, ell: f64, k: usize, lambda0: f64, method: Method) -> Result<StartComparison> {
    check_constants(mu, ell)?;
    if k == 0 {
        return Err(Error::InvalidParameter("k must be >= 1".into()));
    }
    let nf = n as f64;
    let kf = k as f64;
    let cond = ell / mu;
    let log = cond.ln();
    let (prev_ln, tau, start_prev, start_new) = match method {
        Method::Bfgs => ((nf * cond / kf).ln(), 0.0, nf * cond, 4.0 * nf * log),
        Method::Dfp => ((nf * cond * cond / kf).ln(), 1.0, nf * cond * cond, 4.0 * nf * cond * log),
    };
    let prev = (0.5 * kf * prev_ln + lambda0.ln()).exp();
    let new = env_quad_superlinear(n, mu, ell, &vec![tau; k], k, lambda0)?;
    let simplified = (kf >= start_new).then(|| {
        let base = match method {
            Method::Bfgs => 4.0 * nf / kf * log,
            Method::Dfp => 4.0 * nf * cond / kf * log,
        };
        (0.5 * kf * base.ln() + lambda0.ln()).exp()
    });
    Ok(StartComparison {
        prev,
        new,
        simplified,
        start_prev,
        start_new,
    })
}

/// Both sides of `e^{(n/k) ln r} - 1 <= (4n/(3k)) ln r`, which holds for
/// `k >= 4n ln r`.
pub fn aux_exp_bound(n: usize, ratio: f64, k: usize) -> (f64, f64) {
    let a = n as f64 / k as f64 * ratio.ln();
    (a.exp_m1(), 4.0 / 3.0 * a)
}

/// Logarithms of both sides of `sqrt(r) <= (3/2)^{k/2}`, which holds for
/// `k >= 4n ln r`.
pub fn aux_ratio_bound_ln(ratio: f64, k: usize) -> (f64, f64) {
    (0.5 * ratio.ln(), 0.5 * k as f64 * 1.5f64.ln())
}

/// Names accepted wherever envelopes are selected by configuration.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvelopeKind {
    /// `lambda_k <= (1 - mu/L)^k lambda0`.
    QuadLinear,
    QuadSuperlinear,
    QuadSuperlinearPsi,
    QuadSuperlinearSharpened,
    /// `A <= G_k <= (L/mu) A`.
    QuadSandwich,
    GeneralLinearLemma,
    GeneralLinear,
    GeneralSuperlinearLemma,
    GeneralSuperlinear,
    /// `(2/3) hess f(x_k) <= G_k <= (3L/(2mu)) hess f(x_k)`.
    OpHess,
    /// `hess f(x_k)/xi_k <= G_k <= xi_k (L/mu) hess f(x_k)`.
    OpHessXi,
    /// `J_k/xi_{k+1} <= G_k <= xi_{k+1} (L/mu) J_k`.
    OpIntXi,
    /// `r_k <= xi_k lambda_k`.
    StepBound,
}

impl EnvelopeKind {
    pub const ALL: [EnvelopeKind; 13] = [
        EnvelopeKind::QuadLinear,
        EnvelopeKind::QuadSuperlinear,
        EnvelopeKind::QuadSuperlinearPsi,
        EnvelopeKind::QuadSuperlinearSharpened,
        EnvelopeKind::QuadSandwich,
        EnvelopeKind::GeneralLinearLemma,
        EnvelopeKind::GeneralLinear,
        EnvelopeKind::GeneralSuperlinearLemma,
        EnvelopeKind::GeneralSuperlinear,
        EnvelopeKind::OpHess,
        EnvelopeKind::OpHessXi,
        EnvelopeKind::OpIntXi,
        EnvelopeKind::StepBound,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EnvelopeKind::QuadLinear => "quad_linear",
            EnvelopeKind::QuadSuperlinear => "quad_superlinear",
            EnvelopeKind::QuadSuperlinearPsi => "quad_superlinear_psi",
            EnvelopeKind::QuadSuperlinearSharpened => "quad_superlinear_sharpened",
            EnvelopeKind::QuadSandwich => "quad_sandwich",
            EnvelopeKind::GeneralLinearLemma => "general_linear_lemma",
            EnvelopeKind::GeneralLinear => "general_linear",
            EnvelopeKind::GeneralSuperlinearLemma => "general_superlinear_lemma",
            EnvelopeKind::GeneralSuperlinear => "general_superlinear",
            EnvelopeKind::OpHess => "op_hess",
            EnvelopeKind::OpHessXi => "op_hess_xi",
            EnvelopeKind::OpIntXi => "op_int_xi",
            EnvelopeKind::StepBound => "step_bound",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == name)
    }
}

/// Evaluates one named envelope on a trace, with `mu` replaced by
/// `mu * mu_scale` in the formula.
pub fn evaluate(kind: EnvelopeKind, trace: &IterationTrace, p: &ProblemInstance, mu_scale: f64) -> Result<EnvelopeReport> {
    if !(mu_scale > 0.0 && mu_scale.is_finite()) {
        return Err(Error::InvalidParameter(format!("mu_scale must be positive, got {mu_scale}")));
    }
    let mu = trace.mu * mu_scale;
    let ell = trace.ell;
    check_constants(mu, ell)?;
    let lambda0 = trace.lambda0();
    let taus = trace.taus();
    let quadratic = trace.m_sc == 0.0;
    let name = kind.name();
    let lambda_rows = |from: usize, f: &dyn Fn(usize) -> Result<f64>| -> Result<Vec<EnvelopeRow>> {
        trace.records[from..]
            .iter()
            .map(|r| Ok(EnvelopeRow::new(r.k, r.lambda, f(r.k)?, false)))
            .collect()
    };
    let range_rows = |f: &dyn Fn(usize) -> Option<(EigenRange, f64, f64)>| -> Vec<EnvelopeRow> {
        trace
            .records
            .iter()
            .filter_map(|r| f(r.k).map(|(range, lo, hi)| sandwich_row(r.k, &range, lo, hi)))
            .collect()
    };
    let missing = || Error::InvalidParameter(format!("envelope {name} needs an instrumented trace"));
    let report = match kind {
        EnvelopeKind::QuadLinear => {
            let rows = lambda_rows(0, &|k| env_quad_linear(mu, ell, k, lambda0))?;
            EnvelopeReport::new(name, trace, mu, rows, quadratic)?
        }
        EnvelopeKind::QuadSuperlinear => {
            let rows = lambda_rows(1, &|k| env_quad_superlinear(trace.n, mu, ell, &taus, k, lambda0))?;
            EnvelopeReport::new(name, trace, mu, rows, quadratic)?
        }
        EnvelopeKind::QuadSuperlinearPsi => {
            let rows = lambda_rows(1, &|k| env_quad_superlinear_psi(trace.n, mu, ell, &taus, k, lambda0))?;
            EnvelopeReport::new(name, trace, mu, rows, quadratic)?
        }
        EnvelopeKind::QuadSuperlinearSharpened => {
            let ProblemInstance::Quadratic(q) = p else {
                return Err(Error::InvalidParameter(format!("envelope {name} needs a quadratic instance")));
            };
            let factor = env_quad_sharpened_factor(q)?;
            let rows = lambda_rows(1, &|k| env_quad_superlinear_with_factor(factor, mu, ell, &taus, k, lambda0))?;
            EnvelopeReport::new(name, trace, mu, rows, quadratic)?
        }
        EnvelopeKind::QuadSandwich => {
            if trace.records.iter().any(|r| r.eig_range.is_none()) {
                return Err(missing());
            }
            let rows = range_rows(&|k| trace.records[k].eig_range.map(|r| (r, 1.0, ell / mu)));
            EnvelopeReport::new(name, trace, mu, rows, quadratic)?
        }
        EnvelopeKind::GeneralLinearLemma => env_general_linear_with(trace, mu)?.lemma,
        EnvelopeKind::GeneralLinear => env_general_linear_with(trace, mu)?.theorem,
        EnvelopeKind::GeneralSuperlinearLemma => env_general_superlinear_with(trace, mu)?.lemma,
        EnvelopeKind::GeneralSuperlinear => env_general_superlinear_with(trace, mu)?.theorem,
        EnvelopeKind::OpHess => {
            if trace.records.iter().any(|r| r.eig_range.is_none()) {
                return Err(missing());
            }
            let rows = range_rows(&|k| trace.records[k].eig_range.map(|r| (r, 2.0 / 3.0, 1.5 * ell / mu)));
            let inside = lam_ini_holds_with(trace, mu)?;
            EnvelopeReport::new(name, trace, mu, rows, inside)?
        }
        EnvelopeKind::OpHessXi => {
            if trace.records.iter().any(|r| r.eig_range.is_none()) {
                return Err(missing());
            }
            let rows = range_rows(&|k| {
                let rec = &trace.records[k];
                rec.eig_range.map(|r| (r, 1.0 / rec.xi, rec.xi * ell / mu))
            });
            EnvelopeReport::new(name, trace, mu, rows, true)?
        }
        EnvelopeKind::OpIntXi => {
            let rows = range_rows(&|k| {
                let step = trace.records[k].step.as_ref()?;
                let pot = step.potentials.as_ref()?;
                let xi_next = trace.records.get(k + 1).map_or(trace.xi_after, |r| r.xi);
                Some((pot.target_range, 1.0 / xi_next, xi_next * ell / mu))
            });
            EnvelopeReport::new(name, trace, mu, rows, true)?
        }
        EnvelopeKind::StepBound => {
            let rows = trace
                .records
                .iter()
                .filter_map(|r| {
                    let step = r.step.as_ref()?;
                    Some(EnvelopeRow::new(r.k, step.r, r.xi * r.lambda, false))
                })
                .collect();
            EnvelopeReport::new(name, trace, mu, rows, true)?
        }
    };
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1e-300)
    }

    #[test]
    fn quad_linear_examples() {
        assert_eq!(env_quad_linear(1.0, 100.0, 0, 3.0).unwrap(), 3.0);
        assert_eq!(env_quad_linear(2.0, 2.0, 1, 3.0).unwrap(), 0.0);
        assert_eq!(env_quad_linear(2.0, 2.0, 0, 3.0).unwrap(), 3.0);
        let want = 0.99f64.powi(100);
        assert!(close(env_quad_linear(1.0, 100.0, 100, 1.0).unwrap(), want, 1e-12));
        assert!((want - 0.3660).abs() < 1e-4);
        assert!(env_quad_linear(-1.0, 1.0, 1, 1.0).is_err());
    }

    #[test]
    fn quad_superlinear_shapes() {
        let (n, mu, ell, lam0) = (4, 1.0_f64, 50.0_f64, 2.0);
        for k in [1, 3, 10, 40] {
            let a = (n as f64 / k as f64 * (ell / mu).ln()).exp_m1();
            let bfgs = (2.0 * a).powf(k as f64 / 2.0) * (ell / mu).sqrt() * lam0;
            let got = env_quad_superlinear(n, mu, ell, &vec![0.0; k], k, lam0).unwrap();
            assert!(close(got, bfgs, 1e-12), "{got} vs {bfgs}");
            let dfp = (2.0 * ell / mu * a).powf(k as f64 / 2.0) * (ell / mu).sqrt() * lam0;
            let got = env_quad_superlinear(n, mu, ell, &vec![1.0; k], k, lam0).unwrap();
            assert!(close(got, dfp, 1e-12));
            let a = (13.0 / 6.0 * n as f64 / k as f64 * (ell / mu).ln()).exp_m1();
            let psi = (2.0 * a).powf(k as f64 / 2.0) * (ell / mu).sqrt() * lam0;
            let got = env_quad_superlinear_psi(n, mu, ell, &vec![0.0; k], k, lam0).unwrap();
            assert!(close(got, psi, 1e-12));
        }
        assert_eq!(env_quad_superlinear(3, 2.0, 2.0, &[0.5; 4], 4, 1.0).unwrap(), 0.0);
        assert_eq!(env_quad_superlinear_psi(3, 2.0, 2.0, &[0.5; 4], 4, 1.0).unwrap(), 0.0);
        assert!(env_quad_superlinear(3, 1.0, 2.0, &[], 0, 1.0).is_err());
        assert!(env_quad_superlinear(3, 1.0, 2.0, &[0.0], 2, 1.0).is_err());
    }

    #[test]
    fn log_space_stays_finite() {
        let taus = vec![1.0; 1_000_000];
        for k in [1, 10, 1000, 1_000_000] {
            let v = env_quad_superlinear_psi_ln(50, 1.0, 1e12, &taus, k, 1.0).unwrap();
            assert!(v.is_finite());
        }
    }

    #[test]
    fn k0_examples() {
        assert_eq!(k0(10, 1.0, 100.0, 0.0).unwrap(), (80.0 * 200f64.ln()).ceil() as u64);
        assert_eq!(k0(10, 1.0, 100.0, 0.0).unwrap(), 424);
        assert_eq!(k0(1, 1.0, 1.0, 1.0).unwrap(), 13);
        assert!(k0(1, 1.0, 1.0, 0.5).unwrap() > k0(1, 1.0, 1.0, 0.0).unwrap());
    }

    #[test]
    fn region_radius_examples() {
        assert_eq!(region_radius(1.0, 2.0, 3, 0.0, 0.0).unwrap(), f64::INFINITY);
        let c = 1.5f64.ln() / 1.5f64.powf(1.5);
        let k = k0(5, 1.0, 10.0, 0.0).unwrap() as f64;
        let want = c * (1.0 / 20.0f64).max(1.0 / (k + 9.0));
        assert!(close(region_radius(1.0, 10.0, 5, 0.0, 1.0).unwrap(), want, 1e-15));
        let k = k0(2, 1.0, 1e4, 0.0).unwrap() as f64;
        let got = region_radius(1.0, 1e4, 2, 0.0, 1.0).unwrap();
        assert!(close(got, c / (k + 9.0), 1e-15));
    }

    #[test]
    fn start_comparison_examples() {
        let s = env_start_comparison(10, 1.0, 100.0, 200, 1.0, Method::Bfgs).unwrap();
        assert_eq!(s.start_prev, 1000.0);
        assert!((s.start_new - 184.2).abs() < 0.1);
        assert!(s.simplified.is_some());
        let s = env_start_comparison(10, 1.0, 100.0, 5, 1.0, Method::Dfp).unwrap();
        assert!(close(s.start_prev, 1e5, 1e-15));
        assert!((s.start_new - 18420.7).abs() < 0.1);
        assert!(s.simplified.is_none());
    }

    #[test]
    fn row_tolerance() {
        assert!(EnvelopeRow::new(0, 1.0 + 0.5e-8, 1.0, false).satisfied);
        assert!(!EnvelopeRow::new(0, 1.0 + 2e-8, 1.0, false).satisfied);
        assert!(EnvelopeRow::new(0, 1e-15, 0.0, false).satisfied);
        assert!(!EnvelopeRow::new(0, 1e-13, 0.0, false).satisfied);
    }

    #[test]
    fn kind_names_roundtrip() {
        for k in EnvelopeKind::ALL {
            assert_eq!(EnvelopeKind::from_name(k.name()), Some(k));
            let json = serde_json::to_string(&k).unwrap();
            assert_eq!(json, format!("\"{}\"", k.name()));
        }
        assert_eq!(EnvelopeKind::from_name("nope"), None);
    }

    #[test]
    fn constant_tau_matches_sequence() {
        for tau in [0.0, 0.3, 1.0] {
            for k in [1, 7, 60] {
                let a = env_quad_superlinear_ln(5, 0.5, 40.0, &vec![tau; k], k, 1.5).unwrap();
                let b = env_quad_superlinear_const_ln(5, 0.5, 40.0, tau, k, 1.5).unwrap();
                assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
            }
        }
        assert!(env_quad_superlinear_const_ln(5, 0.5, 40.0, 1.2, 3, 1.0).is_err());
    }
}
