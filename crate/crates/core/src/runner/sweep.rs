//! Grid sweeps over quadratic instances comparing measured convergence with
//! the starting moments of superlinear convergence.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{self, EnvelopeKind, Method};
use crate::error::{Error, Result};
use crate::problems::{InstanceSpec, ProblemInstance, SpectrumSpec};
use crate::solver::{run_general, SolverConfig, TauSchedule};
use crate::PrimalVector;

use super::export::num;
use super::{pool, EXIT_MALFORMED, EXIT_PASS, EXIT_VIOLATION};

/// Relative tolerance defining `iters_to_1e-10`.
pub const SWEEP_REL_TOL: f64 = 1e-10;
/// Last `k` examined when looking for the crossing of the two envelopes.
pub const CROSSING_SCAN_LIMIT: usize = 10_000_000;

pub const SWEEP_HEADER: &str = "n,L_over_mu,method,iters_to_1e-10,K0_new,K0_prev,\
first_k_superlinear_env_below_linear_env,K0_new_below_K0_prev,pass";

fn default_methods() -> Vec<Method> {
    vec![Method::Bfgs, Method::Dfp]
}

fn default_max_iter() -> usize {
    5000
}

/// Cartesian grid of quadratic cells. Each cell uses the spectrum
/// log-spaced over `[1, L/mu]`, a Gaussian linear term and `x0 = 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepGrid {
    pub n: Vec<usize>,
    pub l_over_mu: Vec<f64>,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

impl SweepGrid {
    pub fn validate(&self) -> Result<()> {
        if self.n.is_empty() || self.l_over_mu.is_empty() || self.methods.is_empty() {
            return Err(Error::Config("sweep grid must have at least one n, L/mu and method".into()));
        }
        if self.n.contains(&0) {
            return Err(Error::Config("grid dimensions must be >= 1".into()));
        }
        if let Some(r) = self.l_over_mu.iter().find(|r| !(**r >= 1.0 && r.is_finite())) {
            return Err(Error::Config(format!("L/mu must be finite and >= 1, got {r}")));
        }
        if self.max_iter == 0 {
            return Err(Error::Config("max_iter must be >= 1".into()));
        }
        Ok(())
    }

    pub fn cells(&self) -> Vec<(usize, f64, Method)> {
        let mut out = Vec::new();
        for &n in &self.n {
            for &r in &self.l_over_mu {
                for &m in &self.methods {
                    out.push((n, r, m));
                }
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub n: usize,
    pub l_over_mu: f64,
    pub method: Method,
    pub iters_to_tol: Option<usize>,
    pub k0_new: f64,
    pub k0_prev: f64,
    pub first_crossing: Option<usize>,
    pub envelopes_hold: bool,
}

impl SweepRow {
    pub fn k0_new_below_prev(&self) -> bool {
        self.k0_new < self.k0_prev
    }

    /// Envelopes hold, the tolerance was reached, and for `L/mu >= 10` the
    /// new starting moment precedes the previous one.
    pub fn passed(&self) -> bool {
        self.envelopes_hold && self.iters_to_tol.is_some() && (self.l_over_mu < 10.0 || self.k0_new_below_prev())
    }

    fn csv_line(&self) -> String {
        let method = match self.method {
            Method::Bfgs => "bfgs",
            Method::Dfp => "dfp",
        };
        let opt = |v: Option<usize>| v.map(|k| k.to_string()).unwrap_or_default();
        format!(
            "{},{},{method},{},{},{},{},{},{}",
            self.n,
            num(self.l_over_mu),
            opt(self.iters_to_tol),
            num(self.k0_new),
            num(self.k0_prev),
            opt(self.first_crossing),
            self.k0_new_below_prev(),
            self.passed()
        )
    }
}

fn method_tau(m: Method) -> f64 {
    match m {
        Method::Bfgs => 0.0,
        Method::Dfp => 1.0,
    }
}

/// First `k >= 1` at which the constant-`tau` superlinear envelope drops
/// strictly below the linear one, both started from the same `lambda0`.
pub fn first_crossing(n: usize, mu: f64, ell: f64, tau: f64, limit: usize) -> Result<Option<usize>> {
    let rate = (-mu / ell).ln_1p();
    for k in 1..=limit {
        let sup = bounds::env_quad_superlinear_const_ln(n, mu, ell, tau, k, 1.0)?;
        if sup < k as f64 * rate {
            return Ok(Some(k));
        }
    }
    Ok(None)
}

pub fn run_cell(n: usize, l_over_mu: f64, method: Method, seed: u64, max_iter: usize) -> Result<SweepRow> {
    let spec = InstanceSpec::Quadratic {
        n,
        spectrum: SpectrumSpec::LogSpaced {
            log_spaced: [1.0, l_over_mu],
        },
        b: None,
        mu: None,
        seed,
    };
    let p: ProblemInstance = spec.build()?;
    let (mu, ell) = (p.mu(), p.ell());
    let x0 = PrimalVector::zeros(n);
    let lambda0 = p.local_gradient_norm(&x0)?;
    let sched = match method {
        Method::Bfgs => TauSchedule::ConstantBfgs,
        Method::Dfp => TauSchedule::ConstantDfp,
    };
    let cfg = SolverConfig {
        max_iter,
        grad_tol: SWEEP_REL_TOL * lambda0,
        ..SolverConfig::default()
    };
    let trace = run_general(&p, &x0, &sched, &cfg)?;
    let iters_to_tol = trace
        .records
        .iter()
        .find(|r| r.lambda <= SWEEP_REL_TOL * lambda0)
        .map(|r| r.k);
    let mut envelopes_hold = true;
    for kind in [
        EnvelopeKind::QuadSandwich,
        EnvelopeKind::QuadLinear,
        EnvelopeKind::QuadSuperlinear,
    ] {
        envelopes_hold &= bounds::evaluate(kind, &trace, &p, 1.0)?.passed();
    }
    let starts = bounds::env_start_comparison(n, mu, ell, 1, lambda0, method)?;
    Ok(SweepRow {
        n,
        l_over_mu,
        method,
        iters_to_tol,
        k0_new: starts.start_new,
        k0_prev: starts.start_prev,
        first_crossing: first_crossing(n, mu, ell, method_tau(method), CROSSING_SCAN_LIMIT)?,
        envelopes_hold,
    })
}

/// Runs every cell, in parallel across cells, and returns rows in grid order.
pub fn run_sweep(grid: &SweepGrid, jobs: Option<usize>) -> Result<Vec<SweepRow>> {
    grid.validate()?;
    let cells = grid.cells();
    let pool = pool(jobs)?;
    pool.install(|| {
        cells
            .par_iter()
            .map(|&(n, r, m)| run_cell(n, r, m, grid.seed, grid.max_iter))
            .collect()
    })
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(SWEEP_HEADER);
    out.push('\n');
    for row in rows {
        out.push_str(&row.csv_line());
        out.push('\n');
    }
    out
}

pub fn load_grid(path: &Path) -> Result<SweepGrid> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let grid: SweepGrid = serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    grid.validate()?;
    Ok(grid)
}

/// `sweep <grid.json> [--out DIR] [--jobs N]`. Writes `sweep.csv` into the
/// output directory and echoes it to stdout.
pub fn cmd_sweep(grid_path: &Path, out: Option<&Path>, jobs: Option<usize>) -> u8 {
    let grid = match load_grid(grid_path) {
        Ok(g) => g,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_MALFORMED;
        }
    };
    let rows = match run_sweep(&grid, jobs) {
        Ok(r) => r,
        Err(e @ Error::Config(_)) => {
            eprintln!("error: {e}");
            return EXIT_MALFORMED;
        }
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_VIOLATION;
        }
    };
    let dir = out
        .map(Path::to_path_buf)
        .or_else(|| grid.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from(super::config::DEFAULT_OUT_ROOT));
    let csv = sweep_csv(&rows);
    if let Err(e) = std::fs::create_dir_all(&dir).and_then(|_| std::fs::write(dir.join("sweep.csv"), &csv)) {
        eprintln!("error: cannot write {}: {e}", dir.display());
        return EXIT_MALFORMED;
    }
    print!("{csv}");
    if rows.iter().all(SweepRow::passed) {
        EXIT_PASS
    } else {
        EXIT_VIOLATION
    }
}
