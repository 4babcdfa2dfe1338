//! CSV and JSON writers. Numbers use the shortest representation that
//! round-trips to the same `f64`.

use std::fmt::Write as _;

use sha2::{Digest, Sha256};

use crate::bounds::{EnvelopeKind, EnvelopeReport};
use crate::error::Result;
use crate::problems::InstanceSpec;
use crate::solver::IterationTrace;

/// Shortest round-trip form of `x`.
pub fn num(x: f64) -> String {
    format!("{x:?}")
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

pub const TRACE_HEADER: &str = "k,lambda,g,r,xi,nu,v,psi,eig_min,eig_max,tau";

/// One row per iterate. Step quantities (`r`, `nu`, `v`, `psi`, `tau`) refer
/// to the step taken from `x_k` and are empty on the final row.
pub fn trace_csv(trace: &IterationTrace) -> String {
    let mut out = String::from(TRACE_HEADER);
    out.push('\n');
    for rec in &trace.records {
        let step = rec.step.as_ref();
        let pot = step.and_then(|s| s.potentials.as_ref());
        let cells = [
            rec.k.to_string(),
            num(rec.lambda),
            num(rec.g_norm),
            opt(step.map(|s| s.r)),
            num(rec.xi),
            opt(pot.map(|p| p.nu)),
            opt(pot.map(|p| p.v)),
            opt(pot.map(|p| p.psi)),
            opt(rec.eig_range.map(|r| r.min_rel)),
            opt(rec.eig_range.map(|r| r.max_rel)),
            opt(step.map(|s| s.tau)),
        ];
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

/// Whether an envelope bounds `lambda_k` directly (as opposed to a
/// normalized ratio with bound one).
pub fn bounds_lambda(kind: EnvelopeKind) -> bool {
    !matches!(
        kind,
        EnvelopeKind::QuadSandwich
            | EnvelopeKind::OpHess
            | EnvelopeKind::OpHessXi
            | EnvelopeKind::OpIntXi
            | EnvelopeKind::StepBound
    )
}

/// Column label of an envelope; a non-unit `mu_scale` is part of the label.
pub fn envelope_label(kind: EnvelopeKind, mu_scale: f64) -> String {
    if mu_scale == 1.0 {
        kind.name().to_string()
    } else {
        format!("{}_mu_x{}", kind.name(), num(mu_scale))
    }
}

/// Columns `k, measured` (that is, `lambda_k`), then per envelope either
/// `bound_<label>` (envelopes on `lambda_k`) or `ratio_<label>` (sandwich and
/// step checks, normalized so that the bound is one), followed by
/// `ok_<label>`. Cells are empty where an envelope has no row.
pub fn envelopes_csv(trace: &IterationTrace, reports: &[(EnvelopeKind, f64, EnvelopeReport)]) -> String {
    let mut out = String::from("k,measured");
    for (kind, scale, _) in reports {
        let label = envelope_label(*kind, *scale);
        let prefix = if bounds_lambda(*kind) { "bound" } else { "ratio" };
        let _ = write!(out, ",{prefix}_{label},ok_{label}");
    }
    out.push('\n');
    for rec in &trace.records {
        out.push_str(&rec.k.to_string());
        out.push(',');
        out.push_str(&num(rec.lambda));
        for (kind, _, report) in reports {
            match report.rows.iter().find(|r| r.k == rec.k) {
                Some(row) => {
                    let value = if bounds_lambda(*kind) {
                        row.bound
                    } else {
                        row.measured / row.bound
                    };
                    let _ = write!(out, ",{},{}", num(value), row.satisfied);
                }
                None => out.push_str(",,"),
            }
        }
        out.push('\n');
    }
    out
}

/// SHA-256 of the canonical JSON form of an instance description.
pub fn instance_hash(spec: &InstanceSpec) -> Result<String> {
    let bytes = serde_json::to_vec(spec)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shortest_round_trip() {
        for x in [0.1, 1.0 / 3.0, 1e-300, 123456789.0, 2.5e17, -0.0] {
            let s = num(x);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), x.to_bits(), "{s}");
        }
        assert_eq!(num(0.1), "0.1");
    }

    #[test]
    fn hash_is_stable() {
        let spec: InstanceSpec =
            serde_json::from_str(r#"{"kind":"quadratic","n":2,"spectrum":[1,2],"seed":3}"#).unwrap();
        let a = instance_hash(&spec).unwrap();
        assert_eq!(a.len(), 64);
        assert_eq!(a, instance_hash(&spec.clone()).unwrap());
        let mut other = spec.clone();
        other.set_seed(4);
        assert_ne!(a, instance_hash(&other).unwrap());
    }
}
