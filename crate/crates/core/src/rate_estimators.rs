//! Convergence-rate estimators over mean best-fitness trajectories.
//!
//! All three rates reduce a trajectory of population means `f_0, f_1, ...`
//! to a per-generation measure of progress toward the optimum:
//!
//! * **geometric** — `R(t) = 1 - |gap_t / gap_0|^(1/t)`, the average
//!   per-generation shrink factor of the fitness gap `gap_t = f_opt - f_t`.
//!   Bounded in `(-inf, 1]`, and the quantity the absorbing-chain analysis
//!   predicts.
//! * **logarithmic** — `R'(t) = -(1/t) ln|gap_t / gap_0|`, the same
//!   information on a log scale. Unbounded above; agrees with the geometric
//!   rate to first order when rates are small, and is infinite once the
//!   optimum is hit.
//! * **alternative** — a windowed ratio of successive mean-fitness
//!   *differences*, `R''(t) = 1 - |(f_(t+dt) - f_t) / (f_t - f_(t-dt))|^(1/dt)`.
//!   Needs no knowledge of `f_opt`, at the price of being undefined near
//!   the ends of the horizon and wherever the window saw no movement.
//!
//! Measured gaps within [`GAP_EPS`] of zero are treated as exact hits: the
//! run has converged, the geometric rate pins to 1 and the logarithmic rate
//! to infinity from that generation on.

use thiserror::Error;

use crate::rng::{stream_seed, SplitMix64};

/// Absolute gap magnitude at or below which the optimum counts as reached.
pub const GAP_EPS: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum RateError {
    #[error("no runs to aggregate")]
    EmptyInput,
    #[error("run length mismatch: expected {expected} generations, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("window width must be positive")]
    ZeroDeltaT,
    #[error("horizon t_max = {t_max} leaves no room for a width-{delta_t} window on both sides")]
    WindowTooWide { delta_t: usize, t_max: usize },
    #[error("evaluation point t = {t} beyond the horizon t_max = {t_max}")]
    PointOutOfRange { t: usize, t_max: usize },
    #[error("the alternative rate requires a window width")]
    MissingDeltaT,
}

/// Which estimator produced a series.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RateKind {
    Geometric,
    Logarithmic,
    Alternative,
}

impl RateKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            RateKind::Geometric => "geometric",
            RateKind::Logarithmic => "logarithmic",
            RateKind::Alternative => "alternative",
        }
    }
}

/// A rate value for each generation `0..=t_max`; `None` marks generations
/// where the estimator is undefined (always `t = 0` for the gap-based
/// rates, the window margins and stalled windows for the alternative one).
#[derive(Debug, Clone)]
pub struct RateSeries {
    pub kind: RateKind,
    pub values: Vec<Option<f64>>,
    /// Window width; set for the alternative rate only.
    pub delta_t: Option<usize>,
}

impl RateSeries {
    pub fn t_max(&self) -> usize {
        self.values.len() - 1
    }
}

/// Generation-wise mean of the best-so-far fitness across runs.
#[derive(Debug, Clone)]
pub struct MeanFitnessSeries {
    pub f_bar: Vec<f64>,
    pub run_count: usize,
}

/// Averages per-run best-fitness trajectories pointwise. All runs must
/// cover the same horizon.
pub fn aggregate_mean_fitness(runs: &[&[f64]]) -> Result<MeanFitnessSeries, RateError> {
    let first = runs.first().ok_or(RateError::EmptyInput)?;
    let len = first.len();
    if len == 0 {
        return Err(RateError::EmptyInput);
    }
    for run in runs {
        if run.len() != len {
            return Err(RateError::LengthMismatch {
                expected: len,
                got: run.len(),
            });
        }
    }
    let scale = 1.0 / runs.len() as f64;
    let f_bar = (0..len)
        .map(|t| runs.iter().map(|run| run[t]).sum::<f64>() * scale)
        .collect();
    Ok(MeanFitnessSeries {
        f_bar,
        run_count: runs.len(),
    })
}

/// Geometric average convergence rate of the gap sequence
/// `gap_t = f_opt - f_bar[t]`.
///
/// Once some `|gap_t| <= GAP_EPS`, every later value is exactly 1; an
/// initial gap already within `GAP_EPS` makes the whole series 1, because
/// the search starts converged.
pub fn geometric_rate(f_bar: &[f64], f_opt: f64) -> Result<RateSeries, RateError> {
    if f_bar.is_empty() {
        return Err(RateError::EmptyInput);
    }
    let gap0 = (f_opt - f_bar[0]).abs();
    let mut values = vec![None; f_bar.len()];
    let mut hit = gap0 <= GAP_EPS;
    for (t, &f) in f_bar.iter().enumerate().skip(1) {
        let gap = (f_opt - f).abs();
        if gap <= GAP_EPS {
            hit = true;
        }
        values[t] = Some(if hit {
            1.0
        } else {
            1.0 - (gap / gap0).powf(1.0 / t as f64)
        });
    }
    Ok(RateSeries {
        kind: RateKind::Geometric,
        values,
        delta_t: None,
    })
}

/// Logarithmic average convergence rate `-(1/t) ln|gap_t / gap_0|`; hits
/// are reported as `+inf` rather than a pinned finite value.
pub fn logarithmic_rate(f_bar: &[f64], f_opt: f64) -> Result<RateSeries, RateError> {
    if f_bar.is_empty() {
        return Err(RateError::EmptyInput);
    }
    let gap0 = (f_opt - f_bar[0]).abs();
    let mut values = vec![None; f_bar.len()];
    let mut hit = gap0 <= GAP_EPS;
    for (t, &f) in f_bar.iter().enumerate().skip(1) {
        let gap = (f_opt - f).abs();
        if gap <= GAP_EPS {
            hit = true;
        }
        values[t] = Some(if hit {
            f64::INFINITY
        } else {
            -(gap / gap0).ln() / t as f64
        });
    }
    Ok(RateSeries {
        kind: RateKind::Logarithmic,
        values,
        delta_t: None,
    })
}

/// Optimum-free windowed rate from successive mean-fitness differences.
///
/// Defined only for `delta_t <= t <= t_max - delta_t`; outside that band,
/// and wherever the trailing window moved by at most [`GAP_EPS`] (no signal
/// to divide by), the value is `None`.
pub fn alternative_rate(f_bar: &[f64], delta_t: usize) -> Result<RateSeries, RateError> {
    if f_bar.is_empty() {
        return Err(RateError::EmptyInput);
    }
    if delta_t == 0 {
        return Err(RateError::ZeroDeltaT);
    }
    let t_max = f_bar.len() - 1;
    if t_max < 2 * delta_t {
        return Err(RateError::WindowTooWide { delta_t, t_max });
    }
    let mut values = vec![None; f_bar.len()];
    for t in delta_t..=t_max - delta_t {
        let behind = f_bar[t] - f_bar[t - delta_t];
        if behind.abs() <= GAP_EPS {
            continue;
        }
        let ahead = f_bar[t + delta_t] - f_bar[t];
        values[t] = Some(1.0 - (ahead / behind).abs().powf(1.0 / delta_t as f64));
    }
    Ok(RateSeries {
        kind: RateKind::Alternative,
        values,
        delta_t: Some(delta_t),
    })
}

/// Windowed rate computed from a gap series instead of mean fitness.
///
/// Algebraically this equals [`alternative_rate`] on `f_opt - gap`, but it
/// is the right entry point for exact analysis, differing in two ways that
/// both come from knowing the gap directly:
///
/// - no cancellation: once the gap shrinks toward roundoff, forming
///   `f_opt - gap` and then differencing destroys the signal, while gap
///   differences keep full relative precision;
/// - a scale-free stall test: the window counts as stalled when it moved by
///   at most [`GAP_EPS`] *relative to the trailing gap*, so a fast-mixing
///   chain whose gap is tiny-but-still-decaying stays defined. The absolute
///   cutoff of [`alternative_rate`] is about measurement resolution, which
///   exact series do not have.
pub fn alternative_rate_from_gaps(gaps: &[f64], delta_t: usize) -> Result<RateSeries, RateError> {
    if gaps.is_empty() {
        return Err(RateError::EmptyInput);
    }
    if delta_t == 0 {
        return Err(RateError::ZeroDeltaT);
    }
    let t_max = gaps.len() - 1;
    if t_max < 2 * delta_t {
        return Err(RateError::WindowTooWide { delta_t, t_max });
    }
    let mut values = vec![None; gaps.len()];
    for t in delta_t..=t_max - delta_t {
        let behind = gaps[t - delta_t] - gaps[t];
        if behind.abs() <= GAP_EPS * gaps[t - delta_t].abs() {
            continue;
        }
        let ahead = gaps[t] - gaps[t + delta_t];
        values[t] = Some(1.0 - (ahead / behind).abs().powf(1.0 / delta_t as f64));
    }
    Ok(RateSeries {
        kind: RateKind::Alternative,
        values,
        delta_t: Some(delta_t),
    })
}

/// Dispatches on `kind`; `delta_t` is consulted only by the alternative
/// estimator.
pub fn rate_of_kind(
    f_bar: &[f64],
    f_opt: f64,
    kind: RateKind,
    delta_t: Option<usize>,
) -> Result<RateSeries, RateError> {
    match kind {
        RateKind::Geometric => geometric_rate(f_bar, f_opt),
        RateKind::Logarithmic => logarithmic_rate(f_bar, f_opt),
        RateKind::Alternative => alternative_rate(f_bar, delta_t.ok_or(RateError::MissingDeltaT)?),
    }
}

/// Bootstrap standard error of a pooled rate estimate at chosen
/// generations.
///
/// Each replicate resamples the run set with replacement, re-aggregates,
/// and re-estimates; the reported standard error is the sample standard
/// deviation across replicates. Undefined or infinite replicate values are
/// dropped; a point with fewer than two usable replicates reports NaN.
/// Fully deterministic in `seed`.
#[allow(clippy::too_many_arguments)]
pub fn bootstrap_se(
    runs: &[&[f64]],
    f_opt: f64,
    kind: RateKind,
    delta_t: Option<usize>,
    t_points: &[usize],
    replicates: usize,
    seed: u64,
) -> Result<Vec<f64>, RateError> {
    if runs.is_empty() {
        return Err(RateError::EmptyInput);
    }
    let t_max = runs[0].len().saturating_sub(1);
    for &t in t_points {
        if t > t_max {
            return Err(RateError::PointOutOfRange { t, t_max });
        }
    }
    let mut samples: Vec<Vec<f64>> = vec![Vec::with_capacity(replicates); t_points.len()];
    for replicate in 0..replicates {
        let mut rng = SplitMix64::new(stream_seed(seed, replicate as u64));
        let resampled: Vec<&[f64]> = (0..runs.len())
            .map(|_| runs[rng.next_index(runs.len())])
            .collect();
        let mean = aggregate_mean_fitness(&resampled)?;
        let series = rate_of_kind(&mean.f_bar, f_opt, kind, delta_t)?;
        for (slot, &t) in samples.iter_mut().zip(t_points) {
            if let Some(value) = series.values[t] {
                if value.is_finite() {
                    slot.push(value);
                }
            }
        }
    }
    Ok(samples.iter().map(|s| sample_std(s)).collect())
}

fn sample_std(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return f64::NAN;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    var.sqrt()
}
