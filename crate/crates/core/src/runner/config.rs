//! Experiment configuration files.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bounds::{self, EnvelopeKind};
use crate::error::{Error, Result};
use crate::operator::PrimalVector;
use crate::problems::{InstanceSpec, ProblemInstance, ProblemKind};
use crate::sampling::{gaussian_vector, seeded};
use crate::solver::{SolverConfig, TauSchedule};

/// Output root when neither `--out` nor the config names one.
pub const DEFAULT_OUT_ROOT: &str = "broyden-lab-out";

/// Environment variable that overrides every configured seed.
pub const SEED_ENV: &str = "BROYDEN_LAB_SEED";

/// Where the first iterate comes from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum X0Spec {
    Coords(Vec<f64>),
    /// Uniform in the Euclidean ball of this radius around the minimizer.
    RandomBall { radius: f64 },
    /// On a random ray from the minimizer, with `lambda0` equal to this
    /// fraction of the region radius of the local theorem.
    RegionFraction(f64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EnvelopeSpec {
    Name(String),
    Scaled {
        name: String,
        /// Multiplies `mu` inside the formula; values above one tighten the
        /// envelope and are meant for negative controls.
        #[serde(default = "one")]
        mu_scale: f64,
    },
}

fn one() -> f64 {
    1.0
}

impl EnvelopeSpec {
    pub fn name(&self) -> &str {
        match self {
            EnvelopeSpec::Name(n) | EnvelopeSpec::Scaled { name: n, .. } => n,
        }
    }

    pub fn mu_scale(&self) -> f64 {
        match self {
            EnvelopeSpec::Name(_) => 1.0,
            EnvelopeSpec::Scaled { mu_scale, .. } => *mu_scale,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub instance: InstanceSpec,
    pub method: TauSchedule,
    pub x0: X0Spec,
    #[serde(default)]
    pub solver: SolverConfig,
    /// Envelope names; empty selects the defaults for the instance kind.
    #[serde(default)]
    pub envelopes: Vec<EnvelopeSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    /// Overrides the instance seed and drives the random first iterate.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

/// Everything needed to run one experiment, checked up front.
#[derive(Clone, Debug)]
pub struct PreparedExperiment {
    pub name: String,
    /// The configuration with the effective seed written in.
    pub config: ExperimentConfig,
    pub problem: ProblemInstance,
    pub x0: PrimalVector,
    pub envelopes: Vec<(EnvelopeKind, f64)>,
    pub out_dir: PathBuf,
}

pub fn default_envelopes(kind: ProblemKind) -> Vec<EnvelopeKind> {
    match kind {
        ProblemKind::Quadratic => vec![
            EnvelopeKind::QuadSandwich,
            EnvelopeKind::QuadLinear,
            EnvelopeKind::QuadSuperlinear,
            EnvelopeKind::QuadSuperlinearPsi,
        ],
        ProblemKind::LogSumExp => vec![
            EnvelopeKind::OpHessXi,
            EnvelopeKind::OpIntXi,
            EnvelopeKind::StepBound,
            EnvelopeKind::GeneralLinearLemma,
            EnvelopeKind::GeneralSuperlinearLemma,
            EnvelopeKind::OpHess,
            EnvelopeKind::GeneralLinear,
            EnvelopeKind::GeneralSuperlinear,
        ],
    }
}

/// Reads the seed override from the environment, if set.
pub fn seed_override() -> Result<Option<u64>> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| Error::Config(format!("{SEED_ENV} must be an unsigned integer, got {v:?}"))),
        Err(std::env::VarError::NotPresent) => Ok(None),
        Err(e) => Err(Error::Config(format!("{SEED_ENV}: {e}"))),
    }
}

/// Parses a config file holding one experiment or an array of them.
pub fn parse_configs(text: &str) -> Result<Vec<ExperimentConfig>> {
    let malformed = |e: serde_json::Error| Error::Config(format!("malformed config: {e}"));
    let value: serde_json::Value = serde_json::from_str(text).map_err(malformed)?;
    let configs = match value {
        serde_json::Value::Array(items) => items
            .into_iter()
            .enumerate()
            .map(|(i, v)| {
                serde_json::from_value(v).map_err(|e| Error::Config(format!("malformed config: experiment {i}: {e}")))
            })
            .collect::<Result<Vec<ExperimentConfig>>>()?,
        v @ serde_json::Value::Object(_) => vec![serde_json::from_value(v).map_err(malformed)?],
        _ => return Err(Error::Config("config must be an object or an array of objects".into())),
    };
    if configs.is_empty() {
        return Err(Error::Config("config holds no experiments".into()));
    }
    Ok(configs)
}

pub fn load_configs(path: &Path) -> Result<Vec<ExperimentConfig>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_configs(&text)
}

fn bad(name: &str, msg: impl std::fmt::Display) -> Error {
    Error::Config(format!("experiment {name}: {msg}"))
}

/// Validates every experiment and resolves seeds, instances, first iterates
/// and envelope names. Fails on the first malformed experiment.
pub fn prepare(
    configs: &[ExperimentConfig],
    out_root: Option<&Path>,
    seed_env: Option<u64>,
) -> Result<Vec<PreparedExperiment>> {
    let mut seen = HashSet::new();
    let mut prepared = Vec::with_capacity(configs.len());
    for (i, cfg) in configs.iter().enumerate() {
        let name = cfg.name.clone().unwrap_or_else(|| format!("experiment_{i:03}"));
        if name.is_empty() || name.contains(['/', '\\']) || name == "." || name == ".." {
            return Err(bad(&name, "name must be a plain directory name"));
        }
        if !seen.insert(name.clone()) {
            return Err(bad(&name, "duplicate experiment name"));
        }
        let mut config = cfg.clone();
        config.name = Some(name.clone());
        let seed = seed_env.or(cfg.seed).unwrap_or_else(|| cfg.instance.seed());
        config.seed = Some(seed);
        config.instance.set_seed(seed);

        config.solver.validate().map_err(|e| bad(&name, e))?;
        config.method.validate().map_err(|e| bad(&name, e))?;
        let problem = config.instance.build().map_err(|e| bad(&name, e))?;

        let mut envelopes = Vec::new();
        if config.envelopes.is_empty() {
            envelopes.extend(default_envelopes(problem.kind()).into_iter().map(|k| (k, 1.0)));
        }
        for spec in &config.envelopes {
            let kind = EnvelopeKind::from_name(spec.name())
                .ok_or_else(|| bad(&name, format!("unknown envelope {:?}", spec.name())))?;
            let scale = spec.mu_scale();
            if !(scale > 0.0 && scale.is_finite()) {
                return Err(bad(&name, format!("mu_scale must be positive, got {scale}")));
            }
            if kind == EnvelopeKind::QuadSuperlinearSharpened && problem.kind() != ProblemKind::Quadratic {
                return Err(bad(&name, "quad_superlinear_sharpened needs a quadratic instance"));
            }
            if scale * problem.mu() > problem.ell() {
                return Err(bad(&name, format!("mu_scale {scale} pushes mu above L")));
            }
            envelopes.push((kind, scale));
        }

        let x0 = first_iterate(&config, &problem, seed).map_err(|e| bad(&name, e))?;
        let out_dir = out_root
            .map(Path::to_path_buf)
            .or_else(|| config.output_dir.clone())
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_ROOT))
            .join(&name);
        prepared.push(PreparedExperiment {
            name,
            config,
            problem,
            x0,
            envelopes,
            out_dir,
        });
    }
    Ok(prepared)
}

fn first_iterate(cfg: &ExperimentConfig, p: &ProblemInstance, seed: u64) -> Result<PrimalVector> {
    let n = p.dim();
    let mut rng = seeded(seed.wrapping_add(1));
    let direction = || {
        let mut rng = seeded(seed.wrapping_add(2));
        let d = gaussian_vector(n, &mut rng);
        PrimalVector::from_vector(d.normalize())
    };
    match &cfg.x0 {
        X0Spec::Coords(c) => {
            if c.len() != n {
                return Err(Error::DimMismatch { expected: n, got: c.len() });
            }
            PrimalVector::new(c.clone())
        }
        X0Spec::RandomBall { radius } => {
            if !(*radius > 0.0 && radius.is_finite()) {
                return Err(Error::InvalidParameter(format!("radius must be positive, got {radius}")));
            }
            let x_star = p.minimizer()?;
            let d = gaussian_vector(n, &mut rng).normalize();
            let r = radius * rng.random::<f64>().powf(1.0 / n as f64);
            PrimalVector::from_vector(x_star.as_vector() + d * r)
        }
        X0Spec::RegionFraction(fraction) => {
            if !(*fraction > 0.0 && fraction.is_finite()) {
                return Err(Error::InvalidParameter(format!("region fraction must be positive, got {fraction}")));
            }
            let radius = bounds::region_radius(p.mu(), p.ell(), n, cfg.method.sup_tau(), p.self_concordance())?;
            if radius.is_infinite() {
                return Err(Error::InvalidParameter(
                    "region_fraction needs M > 0; the region is unbounded for quadratics".into(),
                ));
            }
            p.point_with_lambda(&direction()?, fraction * radius)
        }
    }
}
