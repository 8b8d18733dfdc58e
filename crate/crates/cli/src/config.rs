//! Experiment configuration: the JSON schema users write, and its
//! materialization into fully resolved settings with every default made
//! explicit.
//!
//! Two commands read config files. `estimate` needs the Monte-Carlo block
//! (algorithm, objective, runs, horizon, seed); `analyze` needs the chain
//! block (which model to build or load, and how to initialize it). One
//! schema serves both, with unused sections simply absent.
//!
//! The environment variable `ACR_SEED` overrides `master_seed` when set,
//! so sweeps can rerun a config under fresh seeds without editing it; the
//! manifest records the seed that was actually used.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use acr_core::ea_engine::{Algorithm, EpParams};
use acr_core::objectives::{ObjectiveKind, ObjectiveSpec};
use acr_core::onemax_chain::OneMaxVariant;
use acr_core::rate_estimators::RateKind;

use crate::CliError;

/// Env var that, when set, replaces `master_seed` from the config.
pub const SEED_ENV_VAR: &str = "ACR_SEED";

pub const DEFAULT_DELTA_T: usize = 10;
pub const DEFAULT_ANALYZE_T_MAX: usize = 100;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Free-form experiment name, echoed into the manifest.
    pub experiment: Option<String>,
    pub algorithm: Option<String>,
    pub objective: Option<ObjectiveConfig>,
    pub population_size: Option<usize>,
    pub t_max: Option<usize>,
    pub runs: Option<usize>,
    pub master_seed: Option<u64>,
    #[serde(default)]
    pub rate: RateConfig,
    pub chain: Option<ChainConfig>,
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub algorithm_params: AlgorithmParamsConfig,
    #[serde(default)]
    pub write_traces: bool,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectiveConfig {
    pub name: String,
    pub dimension: usize,
    pub scale: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateConfig {
    pub delta_t: Option<usize>,
    /// Which estimators to run; defaults to all three.
    pub estimators: Option<Vec<String>>,
    pub bootstrap_replicates: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainConfig {
    pub n: Option<usize>,
    pub variant: Option<String>,
    pub init: Option<String>,
    /// Load a serialized transition model instead of building one.
    pub model_file: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgorithmParamsConfig {
    pub tournament_size: Option<usize>,
    pub eta0: Option<f64>,
    pub tau: Option<f64>,
    pub tau_prime: Option<f64>,
    pub eta_min: Option<f64>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("cannot parse {}: {e}", path.display())))
    }
}

/// Where the transition model for an analysis comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum ChainSource {
    OneMax { n: usize, variant: OneMaxVariant },
    File(PathBuf),
}

/// Initial transient distribution for an analysis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitKind {
    /// Uniform random start: binomial level weights for built chains,
    /// equal mass per state for loaded models.
    Uniform,
    /// Left Perron vector of `Q`.
    Perron,
    /// All mass on one level (built chains) or one state index (loaded
    /// models).
    Point(usize),
}

impl InitKind {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        match text {
            "uniform" => Ok(InitKind::Uniform),
            "perron" => Ok(InitKind::Perron),
            other => {
                if let Some(k) = other.strip_prefix("point:") {
                    let k = k.parse().map_err(|_| {
                        CliError::Validation(format!("bad point init \"{other}\": the part after \"point:\" must be an integer"))
                    })?;
                    Ok(InitKind::Point(k))
                } else {
                    Err(CliError::Validation(format!(
                        "unknown init \"{other}\": expected uniform, perron, or point:K"
                    )))
                }
            }
        }
    }
}

impl fmt::Display for InitKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InitKind::Uniform => write!(f, "uniform"),
            InitKind::Perron => write!(f, "perron"),
            InitKind::Point(k) => write!(f, "point:{k}"),
        }
    }
}

/// Fully resolved Monte-Carlo experiment: every optional filled in, every
/// string mapped to its enum.
#[derive(Debug, Clone)]
pub struct EstimateSettings {
    pub experiment: String,
    pub algorithm: Algorithm,
    pub objective: ObjectiveSpec,
    pub population_size: usize,
    pub t_max: usize,
    pub runs: usize,
    pub master_seed: u64,
    pub seed_overridden: bool,
    pub estimators: Vec<RateKind>,
    pub delta_t: usize,
    pub output_dir: PathBuf,
    pub params: EpParams,
    pub write_traces: bool,
}

/// Fully resolved analysis request.
#[derive(Debug, Clone)]
pub struct AnalyzeSettings {
    pub source: ChainSource,
    pub init: InitKind,
    pub delta_t: usize,
    pub t_max: usize,
    pub output_dir: Option<PathBuf>,
}

pub fn parse_algorithm(name: &str) -> Result<Algorithm, CliError> {
    match name {
        "onebit-ea" => Ok(Algorithm::OnebitEa),
        "fep" => Ok(Algorithm::Fep),
        "cep" => Ok(Algorithm::Cep),
        other => Err(CliError::Validation(format!(
            "unknown algorithm \"{other}\": expected onebit-ea, fep, or cep"
        ))),
    }
}

pub fn parse_estimator(name: &str) -> Result<RateKind, CliError> {
    match name {
        "geometric" => Ok(RateKind::Geometric),
        "logarithmic" => Ok(RateKind::Logarithmic),
        "alternative" => Ok(RateKind::Alternative),
        other => Err(CliError::Validation(format!(
            "unknown estimator \"{other}\": expected geometric, logarithmic, or alternative"
        ))),
    }
}

pub fn parse_variant(name: &str) -> Result<OneMaxVariant, CliError> {
    match name {
        "lumped" => Ok(OneMaxVariant::Lumped),
        "full" => Ok(OneMaxVariant::Full),
        other => Err(CliError::Validation(format!(
            "unknown chain variant \"{other}\": expected lumped or full"
        ))),
    }
}

fn require<T>(field: Option<T>, name: &str) -> Result<T, CliError> {
    field
        .ok_or_else(|| CliError::Validation(format!("config is missing required field \"{name}\"")))
}

/// Reads `ACR_SEED` if set; malformed values are config errors rather than
/// silently ignored.
fn seed_override() -> Result<Option<u64>, CliError> {
    match std::env::var(SEED_ENV_VAR) {
        Ok(text) => text.trim().parse().map(Some).map_err(|_| {
            CliError::Config(format!("{SEED_ENV_VAR}=\"{text}\" is not a valid u64 seed"))
        }),
        Err(std::env::VarError::NotPresent) => Ok(None),
        Err(e) => Err(CliError::Config(format!("cannot read {SEED_ENV_VAR}: {e}"))),
    }
}

fn resolve_objective(config: &ObjectiveConfig) -> Result<ObjectiveSpec, CliError> {
    let kind = match config.name.as_str() {
        "onemax" => ObjectiveKind::OneMax,
        "ackley" => ObjectiveKind::Ackley,
        other => {
            return Err(CliError::Validation(format!(
                "unknown objective \"{other}\": expected onemax or ackley"
            )))
        }
    };
    if config.dimension == 0 {
        return Err(CliError::Validation(
            "objective dimension must be at least 1".into(),
        ));
    }
    let mut spec = ObjectiveSpec::new(kind, config.dimension);
    if let Some(scale) = config.scale {
        spec = acr_core::objectives::scale_wrap(&spec, scale)
            .map_err(|e| CliError::Validation(e.to_string()))?;
    }
    Ok(spec)
}

fn resolve_params(config: &AlgorithmParamsConfig) -> EpParams {
    let defaults = EpParams::default();
    EpParams {
        tournament_size: config.tournament_size.unwrap_or(defaults.tournament_size),
        eta0: config.eta0.unwrap_or(defaults.eta0),
        tau: config.tau.or(defaults.tau),
        tau_prime: config.tau_prime.or(defaults.tau_prime),
        eta_min: config.eta_min.unwrap_or(defaults.eta_min),
    }
}

/// Materializes the Monte-Carlo view of a config.
pub fn resolve_estimate(config: &ExperimentConfig) -> Result<EstimateSettings, CliError> {
    let algorithm = parse_algorithm(&require(config.algorithm.clone(), "algorithm")?)?;
    let objective = resolve_objective(&require(config.objective.clone(), "objective")?)?;
    let population_size = config.population_size.unwrap_or(match algorithm {
        Algorithm::OnebitEa => 1,
        Algorithm::Fep | Algorithm::Cep => 100,
    });
    let t_max = require(config.t_max, "t_max")?;
    if t_max == 0 {
        return Err(CliError::Validation("t_max must be at least 1".into()));
    }
    let runs = require(config.runs, "runs")?;
    if runs == 0 {
        return Err(CliError::Validation("runs must be at least 1".into()));
    }
    let config_seed = require(config.master_seed, "master_seed")?;
    let env_seed = seed_override()?;
    let estimators = match &config.rate.estimators {
        None => vec![
            RateKind::Geometric,
            RateKind::Logarithmic,
            RateKind::Alternative,
        ],
        Some(names) => {
            if names.is_empty() {
                return Err(CliError::Validation(
                    "rate.estimators must not be empty".into(),
                ));
            }
            names
                .iter()
                .map(|n| parse_estimator(n))
                .collect::<Result<_, _>>()?
        }
    };
    let delta_t = config.rate.delta_t.unwrap_or(DEFAULT_DELTA_T);
    if delta_t == 0 {
        return Err(CliError::Validation(
            "rate.delta_t must be at least 1".into(),
        ));
    }
    Ok(EstimateSettings {
        experiment: config
            .experiment
            .clone()
            .unwrap_or_else(|| "unnamed".into()),
        algorithm,
        objective,
        population_size,
        t_max,
        runs,
        master_seed: env_seed.unwrap_or(config_seed),
        seed_overridden: env_seed.is_some(),
        estimators,
        delta_t,
        output_dir: require(config.output_dir.clone(), "output_dir")?,
        params: resolve_params(&config.algorithm_params),
        write_traces: config.write_traces,
    })
}

/// Materializes the analysis view of a config.
pub fn resolve_analyze(config: &ExperimentConfig) -> Result<AnalyzeSettings, CliError> {
    let chain = require(config.chain.clone(), "chain")?;
    let source = match (&chain.model_file, chain.n) {
        (Some(path), None) => ChainSource::File(path.clone()),
        (None, Some(n)) => {
            let variant = parse_variant(chain.variant.as_deref().unwrap_or("lumped"))?;
            ChainSource::OneMax { n, variant }
        }
        (Some(_), Some(_)) => {
            return Err(CliError::Validation(
                "chain.n and chain.model_file are mutually exclusive".into(),
            ))
        }
        (None, None) => {
            return Err(CliError::Validation(
                "chain needs either n (build a bit-counting chain) or model_file".into(),
            ))
        }
    };
    if chain.model_file.is_none() && chain.variant.is_some() && chain.n.is_none() {
        return Err(CliError::Validation(
            "chain.variant requires chain.n".into(),
        ));
    }
    let init = InitKind::parse(chain.init.as_deref().unwrap_or("uniform"))?;
    let delta_t = config.rate.delta_t.unwrap_or(DEFAULT_DELTA_T);
    if delta_t == 0 {
        return Err(CliError::Validation(
            "rate.delta_t must be at least 1".into(),
        ));
    }
    Ok(AnalyzeSettings {
        source,
        init,
        delta_t,
        t_max: config.t_max.unwrap_or(DEFAULT_ANALYZE_T_MAX),
        output_dir: config.output_dir.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal_estimate_json() -> &'static str {
        r#"{
            "experiment": "bit-count",
            "algorithm": "onebit-ea",
            "objective": {"name": "onemax", "dimension": 10},
            "t_max": 100,
            "runs": 50,
            "master_seed": 7,
            "output_dir": "out"
        }"#
    }

    #[test]
    fn estimate_defaults_are_materialized() {
        let config: ExperimentConfig = serde_json::from_str(minimal_estimate_json()).unwrap();
        let settings = resolve_estimate(&config).unwrap();
        assert_eq!(
            settings.population_size, 1,
            "one-bit search defaults to one individual"
        );
        assert_eq!(settings.delta_t, 10);
        assert_eq!(settings.estimators.len(), 3);
        assert_eq!(settings.params.tournament_size, 10);
        assert_eq!(settings.params.eta0, 3.0);
        assert_eq!(settings.params.eta_min, 1e-4);
        assert!(!settings.write_traces);
        assert_eq!(settings.master_seed, 7);
    }

    #[test]
    fn missing_required_fields_are_named() {
        let config: ExperimentConfig =
            serde_json::from_str(r#"{"algorithm": "onebit-ea"}"#).unwrap();
        let err = resolve_estimate(&config).unwrap_err();
        assert!(
            matches!(&err, CliError::Validation(msg) if msg.contains("objective")),
            "{err}"
        );
    }

    #[test]
    fn unknown_names_are_rejected() {
        assert!(parse_algorithm("simulated-annealing").is_err());
        assert!(parse_estimator("quadratic").is_err());
        assert!(parse_variant("compressed").is_err());
        let bad: Result<ExperimentConfig, _> =
            serde_json::from_str(r#"{"algorithm": "fep", "unknown_field": 1}"#);
        assert!(bad.is_err(), "unknown top-level fields must fail parsing");
    }

    #[test]
    fn init_strings_parse() {
        assert_eq!(InitKind::parse("uniform").unwrap(), InitKind::Uniform);
        assert_eq!(InitKind::parse("perron").unwrap(), InitKind::Perron);
        assert_eq!(InitKind::parse("point:3").unwrap(), InitKind::Point(3));
        assert!(InitKind::parse("point:x").is_err());
        assert!(InitKind::parse("gaussian").is_err());
    }

    #[test]
    fn analyze_resolves_chain_and_rejects_ambiguity() {
        let config: ExperimentConfig = serde_json::from_str(
            r#"{"chain": {"n": 10, "variant": "full", "init": "point:2"}, "t_max": 50}"#,
        )
        .unwrap();
        let settings = resolve_analyze(&config).unwrap();
        assert_eq!(
            settings.source,
            ChainSource::OneMax {
                n: 10,
                variant: OneMaxVariant::Full
            }
        );
        assert_eq!(settings.init, InitKind::Point(2));
        assert_eq!(settings.t_max, 50);
        assert_eq!(settings.delta_t, 10);

        let ambiguous: ExperimentConfig =
            serde_json::from_str(r#"{"chain": {"n": 10, "model_file": "m.json"}}"#).unwrap();
        assert!(resolve_analyze(&ambiguous).is_err());

        let empty: ExperimentConfig = serde_json::from_str(r#"{"chain": {}}"#).unwrap();
        assert!(resolve_analyze(&empty).is_err());
    }

    #[test]
    fn objective_scale_must_be_positive() {
        let config: ExperimentConfig = serde_json::from_str(
            r#"{
                "algorithm": "onebit-ea",
                "objective": {"name": "onemax", "dimension": 5, "scale": -2.0},
                "t_max": 10, "runs": 1, "master_seed": 1, "output_dir": "out"
            }"#,
        )
        .unwrap();
        assert!(matches!(
            resolve_estimate(&config),
            Err(CliError::Validation(_))
        ));
    }
}
