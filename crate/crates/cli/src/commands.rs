//! The four subcommands: Monte-Carlo estimation, exact chain analysis,
//! two-experiment comparison, and transition-model export.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde_json::json;

use acr_core::chain_model::{DistributionVector, TransitionModel, DEFAULT_MAX_ITER, DEFAULT_TOL};
use acr_core::ea_engine::{run, FitnessTrace, RunSpec};
use acr_core::onemax_chain::{binomial_init, build_full, build_lumped, OneMaxVariant};
use acr_core::rate_estimators::{
    aggregate_mean_fitness, alternative_rate, alternative_rate_from_gaps, geometric_rate,
    logarithmic_rate, RateKind, RateSeries,
};
use acr_core::rng::stream_seed;

use crate::config::{
    resolve_analyze, resolve_estimate, AnalyzeSettings, ChainSource, EstimateSettings,
    ExperimentConfig, InitKind, DEFAULT_ANALYZE_T_MAX, DEFAULT_DELTA_T,
};
use crate::io;
use crate::CliError;

/// Runs a config's Monte-Carlo experiment and writes its artifact set
/// (rates.csv, per-estimator .dat series, optional traces, manifest) into
/// the configured output directory.
pub fn cmd_estimate(config_path: &Path, jobs: Option<usize>) -> Result<(), CliError> {
    let config = ExperimentConfig::load(config_path)?;
    let settings = resolve_estimate(&config)?;
    let started = Instant::now();

    let traces = run_experiment(&settings, jobs)?;
    let (f_bar, rates) = pooled_rates(&settings, &traces)?;
    let f_opt = settings.objective.f_opt();

    let dir = &settings.output_dir;
    io::create_dir(dir)?;
    let pick = |kind: RateKind| rates.iter().find(|r| r.kind == kind);
    io::write_file(
        &dir.join("rates.csv"),
        &io::rates_csv(
            &f_bar,
            f_opt,
            pick(RateKind::Geometric),
            pick(RateKind::Logarithmic),
            pick(RateKind::Alternative),
        ),
    )?;
    for series in &rates {
        io::write_file(
            &dir.join(format!("{}.dat", io::rate_stem(series.kind))),
            &io::dat_series(&series.values),
        )?;
    }
    if settings.write_traces {
        let trace_dir = dir.join("traces");
        io::create_dir(&trace_dir)?;
        for (i, trace) in traces.iter().enumerate() {
            io::write_file(
                &trace_dir.join(format!("run_{i:05}.csv")),
                &io::trace_csv(&trace.values),
            )?;
        }
    }

    let manifest = estimate_manifest(&settings, jobs, started.elapsed().as_secs_f64());
    io::write_file(&dir.join("manifest.json"), &pretty(&manifest))?;

    println!(
        "wrote {} ({} runs of {} on {}-dimensional {}, t_max {})",
        dir.join("rates.csv").display(),
        settings.runs,
        settings.algorithm.as_str(),
        settings.objective.dimension,
        settings.objective.kind.as_str(),
        settings.t_max,
    );
    Ok(())
}

/// Executes every seeded run of an experiment, optionally on a bounded
/// thread pool. Run `i` always draws from the stream seeded by
/// `(master_seed, i)` and results are collected in run order, so the
/// output is independent of scheduling.
pub fn run_experiment(
    settings: &EstimateSettings,
    jobs: Option<usize>,
) -> Result<Vec<FitnessTrace>, CliError> {
    let spec_for = |i: u64| RunSpec {
        algorithm: settings.algorithm,
        objective: settings.objective.clone(),
        population_size: settings.population_size,
        t_max: settings.t_max,
        seed: stream_seed(settings.master_seed, i),
        params: settings.params.clone(),
    };
    let indices: Vec<u64> = (0..settings.runs as u64).collect();
    let work = || {
        indices
            .par_iter()
            .map(|&i| run(&spec_for(i)))
            .collect::<Result<Vec<_>, _>>()
    };
    let traces = match jobs {
        Some(threads) => {
            if threads == 0 {
                return Err(CliError::Validation("--jobs must be at least 1".into()));
            }
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .map_err(|e| CliError::Config(format!("cannot build thread pool: {e}")))?
                .install(work)
        }
        None => work(),
    };
    traces.map_err(CliError::from)
}

/// Aggregates traces into the pooled mean trajectory and computes every
/// requested estimator on it.
pub fn pooled_rates(
    settings: &EstimateSettings,
    traces: &[FitnessTrace],
) -> Result<(Vec<f64>, Vec<RateSeries>), CliError> {
    let views: Vec<&[f64]> = traces.iter().map(|t| t.values.as_slice()).collect();
    let mean = aggregate_mean_fitness(&views)?;
    let f_opt = settings.objective.f_opt();
    let mut rates = Vec::new();
    for &kind in &settings.estimators {
        rates.push(match kind {
            RateKind::Geometric => geometric_rate(&mean.f_bar, f_opt)?,
            RateKind::Logarithmic => logarithmic_rate(&mean.f_bar, f_opt)?,
            RateKind::Alternative => alternative_rate(&mean.f_bar, settings.delta_t)?,
        });
    }
    Ok((mean.f_bar, rates))
}

fn estimate_manifest(
    settings: &EstimateSettings,
    jobs: Option<usize>,
    wall_time_seconds: f64,
) -> serde_json::Value {
    json!({
        "version": env!("CARGO_PKG_VERSION"),
        "command": "estimate",
        "experiment": settings.experiment,
        "algorithm": settings.algorithm.as_str(),
        "objective": {
            "name": settings.objective.kind.as_str(),
            "dimension": settings.objective.dimension,
            "scale": settings.objective.scale,
        },
        "population_size": settings.population_size,
        "t_max": settings.t_max,
        "runs": settings.runs,
        "master_seed": settings.master_seed,
        "seed_overridden": settings.seed_overridden,
        "rate": {
            "delta_t": settings.delta_t,
            "estimators": settings.estimators.iter().map(|k| k.as_str()).collect::<Vec<_>>(),
        },
        "algorithm_params": {
            "tournament_size": settings.params.tournament_size,
            "eta0": settings.params.eta0,
            "tau": settings.params.tau,
            "tau_prime": settings.params.tau_prime,
            "eta_min": settings.params.eta_min,
        },
        "write_traces": settings.write_traces,
        "jobs": jobs,
        "output_dir": settings.output_dir.display().to_string(),
        "wall_time_seconds": wall_time_seconds,
    })
}

/// Flag-level arguments of `acr analyze`; flags override the config file
/// where both are given.
#[derive(Debug, Default)]
pub struct AnalyzeArgs {
    pub config: Option<PathBuf>,
    pub onemax: Option<usize>,
    pub variant: Option<String>,
    pub init: Option<String>,
    pub delta_t: Option<usize>,
    pub t_max: Option<usize>,
    pub out_dir: Option<PathBuf>,
}

fn resolve_analyze_args(args: &AnalyzeArgs) -> Result<AnalyzeSettings, CliError> {
    let mut settings = match (&args.config, args.onemax) {
        (Some(path), None) => resolve_analyze(&ExperimentConfig::load(path)?)?,
        (None, Some(n)) => AnalyzeSettings {
            source: ChainSource::OneMax {
                n,
                variant: OneMaxVariant::Lumped,
            },
            init: InitKind::Uniform,
            delta_t: DEFAULT_DELTA_T,
            t_max: DEFAULT_ANALYZE_T_MAX,
            output_dir: None,
        },
        (Some(_), Some(_)) => {
            return Err(CliError::Validation(
                "--config and --onemax are mutually exclusive".into(),
            ))
        }
        (None, None) => {
            return Err(CliError::Validation(
                "analyze needs either --config or --onemax".into(),
            ))
        }
    };
    if let Some(variant) = &args.variant {
        match &mut settings.source {
            ChainSource::OneMax { variant: slot, .. } => {
                *slot = crate::config::parse_variant(variant)?;
            }
            ChainSource::File(_) => {
                return Err(CliError::Validation(
                    "--variant applies only to built bit-counting chains".into(),
                ))
            }
        }
    }
    if let Some(init) = &args.init {
        settings.init = InitKind::parse(init)?;
    }
    if let Some(delta_t) = args.delta_t {
        if delta_t == 0 {
            return Err(CliError::Validation("--delta-t must be at least 1".into()));
        }
        settings.delta_t = delta_t;
    }
    if let Some(t_max) = args.t_max {
        if t_max == 0 {
            return Err(CliError::Validation("--t-max must be at least 1".into()));
        }
        settings.t_max = t_max;
    }
    if args.out_dir.is_some() {
        settings.output_dir = args.out_dir.clone();
    }
    Ok(settings)
}

fn build_model(source: &ChainSource) -> Result<TransitionModel, CliError> {
    let model = match source {
        ChainSource::OneMax { n, variant } => match variant {
            OneMaxVariant::Lumped => build_lumped(*n)?,
            OneMaxVariant::Full => build_full(*n)?,
        },
        ChainSource::File(path) => io::load_model(path)?,
    };
    let violations = model.validate();
    if !violations.is_empty() {
        let listed: Vec<String> = violations.iter().take(5).map(|v| v.to_string()).collect();
        return Err(CliError::Validation(format!(
            "model has {} invariant violation(s): {}",
            violations.len(),
            listed.join("; ")
        )));
    }
    Ok(model)
}

fn source_description(source: &ChainSource) -> String {
    match source {
        ChainSource::OneMax { n, variant } => format!("onemax:{}:n={n}", variant.as_str()),
        ChainSource::File(path) => path.display().to_string(),
    }
}

fn initial_distribution(
    model: &TransitionModel,
    source: &ChainSource,
    init: InitKind,
) -> Result<DistributionVector, CliError> {
    match (init, source) {
        (InitKind::Uniform, ChainSource::OneMax { n, variant }) => Ok(binomial_init(*n, *variant)?),
        (InitKind::Uniform, ChainSource::File(_)) => {
            let n = model.n_states();
            Ok(DistributionVector::new(vec![1.0 / n as f64; n], 0))
        }
        (InitKind::Perron, _) => Ok(model.perron_init()?),
        (InitKind::Point(k), ChainSource::OneMax { n, .. }) => {
            // k counts wrong bits, so it names the level S_k; on the full
            // chain the mass spreads uniformly over that level, which is
            // the exact counterpart of the lumped point start.
            if k == 0 || k > *n {
                return Err(CliError::Validation(format!(
                    "point level {k} out of range: levels run from 1 to {n}"
                )));
            }
            let level_fitness = (*n - k) as f64;
            let members: Vec<usize> = (0..model.n_states())
                .filter(|&i| model.fitness()[i] == level_fitness)
                .collect();
            let mut mass = vec![0.0; model.n_states()];
            for &i in &members {
                mass[i] = 1.0 / members.len() as f64;
            }
            Ok(DistributionVector::new(mass, 0))
        }
        (InitKind::Point(k), ChainSource::File(_)) => {
            if k >= model.n_states() {
                return Err(CliError::Validation(format!(
                    "point state index {k} out of range: the model has {} states",
                    model.n_states()
                )));
            }
            let mut mass = vec![0.0; model.n_states()];
            mass[k] = 1.0;
            Ok(DistributionVector::new(mass, 0))
        }
    }
}

/// Exact analysis of an absorbing chain: spectral radius with its Collatz
/// certificate, asymptotic rate, hitting times, the alternative-rate
/// positivity condition, and the exact gap/rate curves from the chosen
/// initialization. The report JSON goes to stdout; curve files are written
/// only when an output directory is configured.
pub fn cmd_analyze(args: &AnalyzeArgs) -> Result<(), CliError> {
    let settings = resolve_analyze_args(args)?;
    let model = build_model(&settings.source)?;
    let q0 = initial_distribution(&model, &settings.source, settings.init)?;

    let spectral = model.spectral_radius(DEFAULT_TOL, DEFAULT_MAX_ITER)?;
    let hitting = model.hitting_times()?;
    let (mut slowest_state, mut hitting_max) = (0usize, f64::NEG_INFINITY);
    for (i, &m) in hitting.iter().enumerate() {
        if m > hitting_max {
            (slowest_state, hitting_max) = (i, m);
        }
    }
    let g_condition = model.check_g_condition(settings.delta_t)?;

    let gaps = model.exact_gap_series(&q0, settings.t_max)?;
    let rate_curve = model.exact_rate_curve(&q0, settings.t_max)?;
    let prediction = model.decay_prediction(gaps[0], settings.t_max)?;
    let f_opt = model.f_opt();
    // The optimum-free estimator needs a two-sided window; when the horizon
    // cannot fit one, its column is simply absent rather than an error.
    let alt_curve = if settings.t_max >= 2 * settings.delta_t {
        Some(alternative_rate_from_gaps(&gaps, settings.delta_t)?)
    } else {
        None
    };

    let report = json!({
        "version": env!("CARGO_PKG_VERSION"),
        "command": "analyze",
        "model": {
            "source": source_description(&settings.source),
            "states": model.n_states(),
            "direction": model.direction().as_str(),
            "f_opt": f_opt,
        },
        "init": settings.init.to_string(),
        "t_max": settings.t_max,
        "delta_t": settings.delta_t,
        "rho": spectral.rho,
        "collatz_lower": spectral.collatz_lower,
        "collatz_upper": spectral.collatz_upper,
        "power_iterations": spectral.iterations,
        "r_infinity": 1.0 - spectral.rho,
        "gap_0": gaps[0],
        "gap_t_max": gaps[settings.t_max],
        "rate_at_t_max": rate_curve.values[settings.t_max],
        "hitting_time_max": hitting_max,
        "hitting_time_max_state": model.state_labels()[slowest_state],
        "g_condition_delta_t": settings.delta_t,
        "g_condition_holds": g_condition.holds,
    });
    let report_text = pretty(&report);
    print!("{report_text}");

    if let Some(dir) = &settings.output_dir {
        io::create_dir(dir)?;
        io::write_file(
            &dir.join("curves.csv"),
            &io::analyze_curves_csv(&gaps, &prediction, &rate_curve, alt_curve.as_ref()),
        )?;
        let as_points = |xs: &[f64]| xs.iter().map(|&x| Some(x)).collect::<Vec<_>>();
        io::write_file(&dir.join("gap.dat"), &io::dat_series(&as_points(&gaps)))?;
        io::write_file(
            &dir.join("prediction.dat"),
            &io::dat_series(&as_points(&prediction)),
        )?;
        io::write_file(
            &dir.join("rate_geom.dat"),
            &io::dat_series(&rate_curve.values),
        )?;
        if let Some(alt) = &alt_curve {
            io::write_file(&dir.join("rate_alt.dat"), &io::dat_series(&alt.values))?;
        }
        io::write_file(&dir.join("report.json"), &report_text)?;
    }
    Ok(())
}

/// Runs two experiments and emits their pooled geometric rates side by
/// side, for judging whether one search converges faster than another on
/// a common horizon.
pub fn cmd_compare(
    config_a: &Path,
    config_b: &Path,
    jobs: Option<usize>,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let a = resolve_estimate(&ExperimentConfig::load(config_a)?)?;
    let b = resolve_estimate(&ExperimentConfig::load(config_b)?)?;
    if a.t_max != b.t_max {
        return Err(CliError::Validation(format!(
            "comparison needs a common horizon: {} has t_max {}, {} has t_max {}",
            config_a.display(),
            a.t_max,
            config_b.display(),
            b.t_max
        )));
    }
    for (path, settings) in [(config_a, &a), (config_b, &b)] {
        if !settings.estimators.contains(&RateKind::Geometric) {
            return Err(CliError::Validation(format!(
                "comparison uses the geometric estimator, which {} does not request",
                path.display()
            )));
        }
    }

    let rate_of = |settings: &EstimateSettings| -> Result<RateSeries, CliError> {
        let traces = run_experiment(settings, jobs)?;
        let (_, rates) = pooled_rates(settings, &traces)?;
        Ok(rates
            .into_iter()
            .find(|r| r.kind == RateKind::Geometric)
            .expect("checked above"))
    };
    let rate_a = rate_of(&a)?;
    let rate_b = rate_of(&b)?;
    let csv = io::compare_csv(&rate_a, &rate_b);
    match out {
        Some(path) => {
            io::write_file(path, &csv)?;
            println!(
                "wrote {} (A = {}, B = {})",
                path.display(),
                a.experiment,
                b.experiment
            );
        }
        None => print!("{csv}"),
    }
    Ok(())
}

/// Builds a bit-counting transition model and writes it as interchange
/// JSON, ready for `analyze` to load back via `chain.model_file`.
pub fn cmd_chain_export(n: usize, variant: &str, out: &Path) -> Result<(), CliError> {
    let variant = crate::config::parse_variant(variant)?;
    let model = match variant {
        OneMaxVariant::Lumped => build_lumped(n)?,
        OneMaxVariant::Full => build_full(n)?,
    };
    io::write_model(out, &model)?;
    println!(
        "wrote {} ({} {} states)",
        out.display(),
        model.n_states(),
        variant.as_str()
    );
    Ok(())
}

fn pretty(value: &serde_json::Value) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("JSON value is always serializable");
    text.push('\n');
    text
}
