//! Experiment runner behind the command-line interface.
//!
//! Experiments are validated in full before anything is written, then run
//! concurrently (each one single-threaded) and exported as `trace.csv`,
//! `envelopes.csv` and `summary.json` in a directory named after the
//! experiment.

pub mod config;
pub mod export;
pub mod sweep;
pub mod verify;

use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::bounds::{self, EnvelopeKind, EnvelopeReport};
use crate::error::{Error, Result};
use crate::solver::{run_general, IterationTrace, StopReason};

pub use config::{ExperimentConfig, PreparedExperiment};

pub const EXIT_PASS: u8 = 0;
pub const EXIT_VIOLATION: u8 = 1;
pub const EXIT_MALFORMED: u8 = 2;

#[derive(Clone, Debug, Serialize)]
pub struct EnvelopeSummary {
    pub name: String,
    pub asserted: bool,
    pub satisfied: bool,
    pub first_violation: Option<usize>,
    pub min_slack: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ExperimentResult {
    pub name: String,
    pub passed: bool,
    #[serde(rename = "K0")]
    pub k0: u64,
    /// `null` when unbounded.
    pub region_radius: f64,
    /// Earliest `k` at which an asserted envelope fails.
    pub first_violation: Option<usize>,
    pub first_violation_envelope: Option<String>,
    /// Smallest slack over the asserted envelopes.
    pub min_slack: f64,
    pub iterations: Option<usize>,
    pub stop: Option<StopReason>,
    pub lambda0: Option<f64>,
    pub lambda_final: Option<f64>,
    pub nonmonotone: Vec<usize>,
    pub wall_time_s: f64,
    pub instance_hash: String,
    pub envelopes: Vec<EnvelopeSummary>,
    pub error: Option<String>,
    pub config: ExperimentConfig,
}

/// Output of one experiment: its summary and, when the run completed, the
/// two CSV files.
pub struct ExperimentOutput {
    pub result: ExperimentResult,
    pub trace_csv: Option<String>,
    pub envelopes_csv: Option<String>,
    pub trace: Option<IterationTrace>,
}

fn evaluate_all(exp: &PreparedExperiment, trace: &IterationTrace) -> Result<Vec<(EnvelopeKind, f64, EnvelopeReport)>> {
    exp.envelopes
        .iter()
        .map(|&(kind, scale)| Ok((kind, scale, bounds::evaluate(kind, trace, &exp.problem, scale)?)))
        .collect()
}

pub fn run_experiment(exp: &PreparedExperiment) -> Result<ExperimentOutput> {
    let p = &exp.problem;
    let sup_tau = exp.config.method.sup_tau();
    let start = Instant::now();
    let outcome = run_general(p, &exp.x0, &exp.config.method, &exp.config.solver)
        .and_then(|trace| evaluate_all(exp, &trace).map(|reports| (trace, reports)));
    let wall_time_s = start.elapsed().as_secs_f64();
    let mut result = ExperimentResult {
        name: exp.name.clone(),
        passed: false,
        k0: bounds::k0(p.dim(), p.mu(), p.ell(), sup_tau)?,
        region_radius: bounds::region_radius(p.mu(), p.ell(), p.dim(), sup_tau, p.self_concordance())?,
        first_violation: None,
        first_violation_envelope: None,
        min_slack: f64::INFINITY,
        iterations: None,
        stop: None,
        lambda0: None,
        lambda_final: None,
        nonmonotone: Vec::new(),
        wall_time_s,
        instance_hash: export::instance_hash(&exp.config.instance)?,
        envelopes: Vec::new(),
        error: None,
        config: exp.config.clone(),
    };
    let (trace, reports) = match outcome {
        Ok(v) => v,
        Err(e) => {
            result.error = Some(e.to_string());
            return Ok(ExperimentOutput {
                result,
                trace_csv: None,
                envelopes_csv: None,
                trace: None,
            });
        }
    };
    result.iterations = Some(trace.iterations());
    result.stop = Some(trace.stop);
    result.lambda0 = Some(trace.lambda0());
    result.lambda_final = trace.records.last().map(|r| r.lambda);
    result.nonmonotone = trace.nonmonotone.clone();
    for (kind, scale, report) in &reports {
        let summary = EnvelopeSummary {
            name: export::envelope_label(*kind, *scale),
            asserted: report.asserted,
            satisfied: report.all_satisfied(),
            first_violation: report.first_violation(),
            min_slack: report.min_slack(),
        };
        if report.asserted {
            result.min_slack = result.min_slack.min(summary.min_slack);
            if let Some(k) = summary.first_violation {
                if result.first_violation.is_none_or(|f| k < f) {
                    result.first_violation = Some(k);
                    result.first_violation_envelope = Some(summary.name.clone());
                }
            }
        }
        result.envelopes.push(summary);
    }
    result.passed = result.first_violation.is_none();
    Ok(ExperimentOutput {
        trace_csv: Some(export::trace_csv(&trace)),
        envelopes_csv: Some(export::envelopes_csv(&trace, &reports)),
        result,
        trace: Some(trace),
    })
}

pub fn write_outputs(dir: &Path, out: &ExperimentOutput) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    if let Some(csv) = &out.trace_csv {
        std::fs::write(dir.join("trace.csv"), csv)?;
    }
    if let Some(csv) = &out.envelopes_csv {
        std::fs::write(dir.join("envelopes.csv"), csv)?;
    }
    let mut json = serde_json::to_string_pretty(&out.result)?;
    json.push('\n');
    std::fs::write(dir.join("summary.json"), json)?;
    Ok(())
}

pub(crate) fn pool(jobs: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs {
        if j == 0 {
            return Err(Error::Config("--jobs must be at least 1".into()));
        }
        builder = builder.num_threads(j);
    }
    builder.build().map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))
}

/// Runs prepared experiments on at most `jobs` workers and writes their
/// outputs. Results come back in input order.
pub fn run_suite(prepared: &[PreparedExperiment], jobs: Option<usize>) -> Result<Vec<ExperimentResult>> {
    let pool = pool(jobs)?;
    let outputs: Vec<Result<ExperimentOutput>> =
        pool.install(|| prepared.par_iter().map(run_experiment).collect());
    let mut results = Vec::with_capacity(outputs.len());
    for (exp, out) in prepared.iter().zip(outputs) {
        let out = out?;
        write_outputs(&exp.out_dir, &out)?;
        results.push(out.result);
    }
    Ok(results)
}

fn print_result(r: &ExperimentResult) {
    let status = if r.passed { "PASS" } else { "FAIL" };
    let detail = match (&r.error, &r.first_violation_envelope) {
        (Some(e), _) => format!("error: {e}"),
        (None, Some(env)) => format!("first violation: {env} at k = {}", r.first_violation.unwrap_or(0)),
        (None, None) => format!(
            "{} iterations, lambda {:.3e} -> {:.3e}, min slack {:.3e}",
            r.iterations.unwrap_or(0),
            r.lambda0.unwrap_or(f64::NAN),
            r.lambda_final.unwrap_or(f64::NAN),
            r.min_slack
        ),
    };
    println!("{status} {} ({detail})", r.name);
}

/// `run <config.json> [--jobs N] [--out DIR]`.
pub fn cmd_run(config_path: &Path, jobs: Option<usize>, out: Option<&Path>) -> u8 {
    let prepared = config::seed_override()
        .and_then(|seed| config::load_configs(config_path).map(|c| (c, seed)))
        .and_then(|(configs, seed)| config::prepare(&configs, out, seed));
    let prepared = match prepared {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_MALFORMED;
        }
    };
    let results = match run_suite(&prepared, jobs) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_MALFORMED;
        }
    };
    results.iter().for_each(print_result);
    let failed = results.iter().filter(|r| !r.passed).count();
    println!("{} experiments, {} passed, {failed} failed", results.len(), results.len() - failed);
    if failed == 0 {
        EXIT_PASS
    } else {
        EXIT_VIOLATION
    }
}
