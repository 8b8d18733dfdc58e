//! On-disk formats: rate CSVs, plot-ready `.dat` files, run manifests, and
//! transition-model JSON files.
//!
//! Every float is rendered with 17 significant digits so that re-parsing
//! reproduces the exact double. Cells whose value is undefined are left
//! empty; infinities print as `inf`/`-inf`. Output is assembled in memory
//! and written in one call per file, so identical data always produces
//! byte-identical files regardless of thread count or timing.

use std::path::Path;

use acr_core::chain_model::TransitionModel;
use acr_core::fmt_f64;
use acr_core::rate_estimators::{RateKind, RateSeries};

use crate::CliError;

/// CSV/dat cell for a possibly-undefined value.
pub fn cell(value: Option<f64>) -> String {
    match value {
        None => String::new(),
        Some(v) if v == f64::INFINITY => "inf".into(),
        Some(v) if v == f64::NEG_INFINITY => "-inf".into(),
        Some(v) => fmt_f64(v),
    }
}

pub fn create_dir(path: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(path)
        .map_err(|e| CliError::Config(format!("cannot create {}: {e}", path.display())))
}

pub fn write_file(path: &Path, content: &str) -> Result<(), CliError> {
    std::fs::write(path, content)
        .map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))
}

pub fn read_file(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))
}

/// Pooled-rate table: one row per generation, empty cells where an
/// estimator is undefined or was not requested.
///
/// Header: `t,f_bar,gap,R_geom,R_log,R_alt`.
pub fn rates_csv(
    f_bar: &[f64],
    f_opt: f64,
    geometric: Option<&RateSeries>,
    logarithmic: Option<&RateSeries>,
    alternative: Option<&RateSeries>,
) -> String {
    let mut out = String::from("t,f_bar,gap,R_geom,R_log,R_alt\n");
    for (t, &f) in f_bar.iter().enumerate() {
        let pick = |series: Option<&RateSeries>| series.and_then(|s| s.values[t]);
        out.push_str(&format!(
            "{t},{},{},{},{},{}\n",
            fmt_f64(f),
            fmt_f64(f_opt - f),
            cell(pick(geometric)),
            cell(pick(logarithmic)),
            cell(pick(alternative)),
        ));
    }
    out
}

/// Single-run trajectory table. Header: `t,best_fitness`.
pub fn trace_csv(values: &[f64]) -> String {
    let mut out = String::from("t,best_fitness\n");
    for (t, &f) in values.iter().enumerate() {
        out.push_str(&format!("{t},{}\n", fmt_f64(f)));
    }
    out
}

/// Side-by-side pooled geometric rates of two experiments.
/// Header: `t,R_a,R_b`.
pub fn compare_csv(rate_a: &RateSeries, rate_b: &RateSeries) -> String {
    let mut out = String::from("t,R_a,R_b\n");
    for t in 0..rate_a.values.len() {
        out.push_str(&format!(
            "{t},{},{}\n",
            cell(rate_a.values[t]),
            cell(rate_b.values[t])
        ));
    }
    out
}

/// Exact-analysis curve table.
/// Header: `t,gap,prediction,R_geom,R_alt`.
pub fn analyze_curves_csv(
    gaps: &[f64],
    prediction: &[f64],
    geometric: &RateSeries,
    alternative: Option<&RateSeries>,
) -> String {
    let mut out = String::from("t,gap,prediction,R_geom,R_alt\n");
    for t in 0..gaps.len() {
        out.push_str(&format!(
            "{t},{},{},{},{}\n",
            fmt_f64(gaps[t]),
            fmt_f64(prediction[t]),
            cell(geometric.values[t]),
            cell(alternative.and_then(|s| s.values[t])),
        ));
    }
    out
}

/// Two-column whitespace-separated series for plotting tools; undefined
/// and non-finite values are skipped rather than written as markers.
pub fn dat_series(values: &[Option<f64>]) -> String {
    let mut out = String::new();
    for (t, value) in values.iter().enumerate() {
        if let Some(v) = value {
            if v.is_finite() {
                out.push_str(&format!("{t} {}\n", fmt_f64(*v)));
            }
        }
    }
    out
}

/// File stem used for a rate estimator's artifacts.
pub fn rate_stem(kind: RateKind) -> &'static str {
    match kind {
        RateKind::Geometric => "rate_geom",
        RateKind::Logarithmic => "rate_log",
        RateKind::Alternative => "rate_alt",
    }
}

pub fn load_model(path: &Path) -> Result<TransitionModel, CliError> {
    let text = read_file(path)?;
    TransitionModel::from_json_str(&text).map_err(CliError::from)
}

pub fn write_model(path: &Path, model: &TransitionModel) -> Result<(), CliError> {
    write_file(path, &model.to_json_string())
}
