//! Exact convergence analysis of elitist searches as absorbing Markov
//! chains.
//!
//! A search whose best-so-far fitness never worsens induces a Markov chain
//! on fitness levels with the optimum as the absorbing class. Writing the
//! transition matrix in canonical block form, only two pieces matter for
//! convergence: the transient-to-transient block `Q` and the one-step
//! absorption vector `B` (the absorbing-to-anything rows are fixed and the
//! transient-to-absorbing columns are determined by row sums, so neither is
//! stored). Everything this module computes flows from three identities:
//!
//! * the transient distribution propagates by row-vector products,
//!   `q_t^T = q_0^T Q^t`;
//! * the expected fitness gap is a linear functional of it,
//!   `f_opt - f_t = q_t^T (f_opt 1 - f)`;
//! * asymptotically the gap decays geometrically at the spectral radius of
//!   `Q`, so the average convergence rate tends to `1 - rho(Q)` — and equals
//!   it for every `t` when the chain starts in the Perron distribution.
//!
//! The spectral radius is bracketed by Collatz's inequality: for a positive
//! vector `v`, `min_i (v^T Q)_i / v_i <= rho(Q) <= max_i (v^T Q)_i / v_i`,
//! and power iteration tightens both ends simultaneously. Expected
//! absorption times come from the fundamental-matrix system
//! `(I - Q) m = 1`.

use std::fmt;

use serde::Deserialize;
use thiserror::Error;

use crate::linalg::{self, LinalgError, Matrix};
use crate::objectives::Direction;
use crate::rate_estimators::{RateKind, RateSeries};

/// Collatz-bound width at which power iteration declares convergence.
pub const DEFAULT_TOL: f64 = 1e-12;

/// Power-iteration step budget before the stall protocol kicks in.
pub const DEFAULT_MAX_ITER: usize = 100_000;

/// Iterate entries at or below this magnitude are excluded from Collatz
/// ratios; for reducible `Q` the trailing modes decay out of the iterate
/// entirely, and this floor is where they stop being counted.
const RATIO_FLOOR: f64 = 1e-300;

/// Entries above the diagonal below this magnitude count as zero when
/// detecting triangular structure.
const TRIANGULAR_TOL: f64 = 1e-15;

/// Largest dimension for which the determinant-bisection fallback is
/// attempted after power iteration stalls twice.
const BISECTION_MAX_DIM: usize = 64;

#[derive(Debug, Error)]
pub enum ChainError {
    #[error("model failed validation ({} violation{}): {}",
            .violations.len(),
            if .violations.len() == 1 { "" } else { "s" },
            .violations.first().map(Violation::to_string).unwrap_or_default())]
    InvalidModel { violations: Vec<Violation> },
    #[error("dimension mismatch: model has {expected} transient states, vector has {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("distribution rejected: {0}")]
    InvalidDistribution(String),
    #[error("initial distribution has zero fitness gap; rate curve is undefined")]
    ZeroInitialGap,
    #[error("I - Q is singular: the chain does not reach the optimum from every state")]
    NonConvergent,
    #[error(
        "power iteration stalled after {iterations} steps \
         (Collatz bounds [{lower}, {upper}] never closed below tolerance)"
    )]
    SpectralStall {
        lower: f64,
        upper: f64,
        iterations: usize,
    },
    #[error("model JSON malformed: {0}")]
    MalformedJson(String),
    #[error("model must have at least one transient state")]
    Empty,
    #[error("a full chain for n = {n} would have 2^{n} - 1 states; the cap is n = {max}")]
    FullChainTooLarge { n: usize, max: usize },
}

/// One failed model invariant, locating the offending row or entry.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    QEntryOutOfRange {
        row: usize,
        col: usize,
        value: f64,
    },
    EscapeOutOfRange {
        row: usize,
        value: f64,
    },
    RowSumMismatch {
        row: usize,
        sum: f64,
    },
    FitnessNotWorse {
        index: usize,
        fitness: f64,
        f_opt: f64,
        direction: Direction,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::QEntryOutOfRange { row, col, value } => {
                write!(f, "Q[{row},{col}] = {value} outside [0, 1]")
            }
            Violation::EscapeOutOfRange { row, value } => {
                write!(f, "B[{row}] = {value} outside [0, 1]")
            }
            Violation::RowSumMismatch { row, sum } => {
                write!(
                    f,
                    "row {row}: Q row sum plus B is {sum}, not 1 within 1e-12"
                )
            }
            Violation::FitnessNotWorse {
                index,
                fitness,
                f_opt,
                direction,
            } => {
                write!(
                    f,
                    "state {index}: fitness {fitness} is not strictly {} f_opt = {f_opt}",
                    match direction {
                        Direction::Maximize => "below",
                        Direction::Minimize => "above",
                    }
                )
            }
        }
    }
}

/// Transient distribution at a fixed generation.
///
/// Mass over the transient states only; the deficit from 1 is the
/// probability already absorbed at the optimum.
#[derive(Debug, Clone, PartialEq)]
pub struct DistributionVector {
    pub mass: Vec<f64>,
    pub generation: usize,
}

impl DistributionVector {
    pub fn new(mass: Vec<f64>, generation: usize) -> Self {
        DistributionVector { mass, generation }
    }

    /// Total transient mass.
    pub fn total(&self) -> f64 {
        self.mass.iter().sum()
    }
}

/// Result of a spectral-radius computation with its certificate.
#[derive(Debug, Clone)]
pub struct SpectralEstimate {
    pub rho: f64,
    /// Nonnegative left Perron vector, normalized to sum 1.
    pub left_eigenvector: Vec<f64>,
    /// Power-iteration steps plus any bisection steps spent in fallback.
    pub iterations: usize,
    pub collatz_lower: f64,
    pub collatz_upper: f64,
}

/// Verdict on the alternative-rate positivity condition together with the
/// witness vector `g = (I - Q^dt)(f_opt 1 - f)`.
#[derive(Debug, Clone)]
pub struct GCondition {
    pub holds: bool,
    pub g: Vec<f64>,
}

/// Canonical transient block of an absorbing search chain.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionModel {
    state_labels: Vec<String>,
    q: Matrix,
    escape: Vec<f64>,
    fitness: Vec<f64>,
    f_opt: f64,
    direction: Direction,
}

impl TransitionModel {
    /// Assembles a model, enforcing shape consistency only; numeric
    /// invariants are the business of [`TransitionModel::validate`] so that
    /// deliberately broken models can still be constructed and diagnosed.
    pub fn new(
        state_labels: Vec<String>,
        q: Matrix,
        escape: Vec<f64>,
        fitness: Vec<f64>,
        f_opt: f64,
        direction: Direction,
    ) -> Result<Self, ChainError> {
        let n = q.n_rows();
        if n == 0 {
            return Err(ChainError::Empty);
        }
        if !q.is_square() {
            return Err(ChainError::DimensionMismatch {
                expected: n,
                got: q.n_cols(),
            });
        }
        for (len, _name) in [
            (state_labels.len(), "labels"),
            (escape.len(), "B"),
            (fitness.len(), "fitness"),
        ] {
            if len != n {
                return Err(ChainError::DimensionMismatch {
                    expected: n,
                    got: len,
                });
            }
        }
        Ok(TransitionModel {
            state_labels,
            q,
            escape,
            fitness,
            f_opt,
            direction,
        })
    }

    pub fn n_states(&self) -> usize {
        self.q.n_rows()
    }

    pub fn q(&self) -> &Matrix {
        &self.q
    }

    pub fn escape(&self) -> &[f64] {
        &self.escape
    }

    pub fn fitness(&self) -> &[f64] {
        &self.fitness
    }

    pub fn f_opt(&self) -> f64 {
        self.f_opt
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    pub fn state_labels(&self) -> &[String] {
        &self.state_labels
    }

    /// Per-state fitness gap `f_opt - f`, the functional whose expectation
    /// the rate curves track.
    pub fn gap_vector(&self) -> Vec<f64> {
        self.fitness.iter().map(|f| self.f_opt - f).collect()
    }

    /// Checks every numeric model invariant and reports all failures:
    /// `Q` and `B` entries within `[0, 1]`, each `Q` row sum plus `B` equal
    /// to 1 within 1e-12, and every transient fitness strictly worse than
    /// `f_opt` in the model's direction.
    pub fn validate(&self) -> Vec<Violation> {
        let mut violations = Vec::new();
        for row in 0..self.n_states() {
            let mut sum = self.escape[row];
            for (col, &value) in self.q.row(row).iter().enumerate() {
                if !(0.0..=1.0).contains(&value) {
                    violations.push(Violation::QEntryOutOfRange { row, col, value });
                }
                sum += value;
            }
            let b = self.escape[row];
            if !(0.0..=1.0).contains(&b) {
                violations.push(Violation::EscapeOutOfRange { row, value: b });
            }
            if (sum - 1.0).abs() > 1e-12 {
                violations.push(Violation::RowSumMismatch { row, sum });
            }
        }
        for (index, &fitness) in self.fitness.iter().enumerate() {
            if !self.direction.strictly_better(self.f_opt, fitness) {
                violations.push(Violation::FitnessNotWorse {
                    index,
                    fitness,
                    f_opt: self.f_opt,
                    direction: self.direction,
                });
            }
        }
        violations
    }

    /// Fail-fast gate used by every analytic operation.
    fn checked(&self) -> Result<(), ChainError> {
        let violations = self.validate();
        if violations.is_empty() {
            Ok(())
        } else {
            Err(ChainError::InvalidModel { violations })
        }
    }

    fn check_distribution(&self, q0: &DistributionVector) -> Result<(), ChainError> {
        if q0.mass.len() != self.n_states() {
            return Err(ChainError::DimensionMismatch {
                expected: self.n_states(),
                got: q0.mass.len(),
            });
        }
        if q0.generation != 0 {
            return Err(ChainError::InvalidDistribution(format!(
                "expected a generation-0 distribution, got generation {}",
                q0.generation
            )));
        }
        if let Some(bad) = q0.mass.iter().find(|&&m| m.is_nan() || m < 0.0) {
            return Err(ChainError::InvalidDistribution(format!(
                "negative or NaN mass {bad}"
            )));
        }
        let total = q0.total();
        if total > 1.0 + 1e-12 {
            return Err(ChainError::InvalidDistribution(format!(
                "total mass {total} exceeds 1"
            )));
        }
        Ok(())
    }

    /// Advances the transient distribution `t` generations,
    /// `q_t^T = q_0^T Q^t`, by `t` successive row-vector products — never by
    /// forming a matrix power, so the cost is `t * n^2`.
    ///
    /// Transient mass can only shrink: whatever leaves through `B` is
    /// absorbed at the optimum and drops out of the vector.
    pub fn propagate(
        &self,
        q0: &DistributionVector,
        t: usize,
    ) -> Result<DistributionVector, ChainError> {
        self.checked()?;
        self.check_distribution(q0)?;
        let mut mass = q0.mass.clone();
        for _ in 0..t {
            mass = self.q.left_mul(&mass);
        }
        Ok(DistributionVector {
            mass,
            generation: t,
        })
    }

    /// Expected fitness gap `f_opt - f_t = q_t^T (f_opt 1 - f)` under the
    /// given transient distribution. Signed: positive when maximizing,
    /// negative when minimizing; absorbed mass contributes zero by
    /// construction.
    pub fn exact_mean_fitness_gap(&self, q_t: &DistributionVector) -> Result<f64, ChainError> {
        self.checked()?;
        if q_t.mass.len() != self.n_states() {
            return Err(ChainError::DimensionMismatch {
                expected: self.n_states(),
                got: q_t.mass.len(),
            });
        }
        let gap = self.gap_vector();
        Ok(q_t.mass.iter().zip(&gap).map(|(m, g)| m * g).sum())
    }

    /// Expected fitness gap at every generation `0..=t_max` in one pass,
    /// advancing the distribution a single step per entry.
    pub fn exact_gap_series(
        &self,
        q0: &DistributionVector,
        t_max: usize,
    ) -> Result<Vec<f64>, ChainError> {
        self.checked()?;
        self.check_distribution(q0)?;
        let gap_fn = self.gap_vector();
        let dot = |mass: &[f64]| mass.iter().zip(&gap_fn).map(|(m, g)| m * g).sum::<f64>();
        let mut gaps = Vec::with_capacity(t_max + 1);
        let mut mass = q0.mass.clone();
        gaps.push(dot(&mass));
        for _ in 1..=t_max {
            mass = self.q.left_mul(&mass);
            gaps.push(dot(&mass));
        }
        Ok(gaps)
    }

    /// Exact average convergence rate curve
    /// `R(t) = 1 - |gap_t / gap_0|^(1/t)` for `t = 1..=t_max`, propagating
    /// the distribution one step at a time.
    ///
    /// A zero initial gap leaves the curve undefined and is an error. If the
    /// gap hits zero exactly at some generation, the search is done and the
    /// rate is pinned to 1 from that generation on.
    pub fn exact_rate_curve(
        &self,
        q0: &DistributionVector,
        t_max: usize,
    ) -> Result<RateSeries, ChainError> {
        self.checked()?;
        self.check_distribution(q0)?;
        let gap_fn = self.gap_vector();
        let dot = |mass: &[f64]| mass.iter().zip(&gap_fn).map(|(m, g)| m * g).sum::<f64>();
        let gap0 = dot(&q0.mass);
        if gap0 == 0.0 {
            return Err(ChainError::ZeroInitialGap);
        }
        let mut values = Vec::with_capacity(t_max + 1);
        values.push(None);
        let mut mass = q0.mass.clone();
        let mut done = false;
        for t in 1..=t_max {
            mass = self.q.left_mul(&mass);
            let gap_t = dot(&mass);
            if gap_t == 0.0 {
                done = true;
            }
            values.push(Some(if done {
                1.0
            } else {
                1.0 - (gap_t / gap0).abs().powf(1.0 / t as f64)
            }));
        }
        Ok(RateSeries {
            kind: RateKind::Geometric,
            values,
            delta_t: None,
        })
    }

    /// Spectral radius of `Q` with a two-sided Collatz certificate.
    ///
    /// Triangular `Q` (common for fitness-level chains, where search never
    /// moves to a worse level) is dispatched exactly: the eigenvalues are
    /// the diagonal, and the eigenvector follows by back-substitution.
    /// Otherwise, left power iteration runs from the uniform vector until
    /// the Collatz bounds close below `tol`; on a stall it restarts once
    /// from a perturbed vector, and as a last resort locates the Perron
    /// root by determinant bisection (dimension <= 64).
    pub fn spectral_radius(
        &self,
        tol: f64,
        max_iter: usize,
    ) -> Result<SpectralEstimate, ChainError> {
        self.checked()?;
        let q = &self.q;

        if q.is_lower_triangular(TRIANGULAR_TOL) || q.is_upper_triangular(TRIANGULAR_TOL) {
            return Ok(self.triangular_estimate());
        }

        let n = self.n_states();
        let uniform = vec![1.0 / n as f64; n];
        let (first, mut total_steps) = power_iterate(q, &uniform, tol, max_iter);
        if let PowerOutcome::Converged(est) = first {
            return Ok(est);
        }

        // Restart from a perturbed copy of the stalled iterate: if the stall
        // came from landing on an unlucky invariant ray, the nudge breaks it.
        let stalled = match first {
            PowerOutcome::Stalled { iterate, .. } => iterate,
            PowerOutcome::Converged(_) => unreachable!(),
        };
        let mut perturbed: Vec<f64> = stalled.iter().map(|v| v + 1e-9).collect();
        let norm: f64 = perturbed.iter().sum();
        perturbed.iter_mut().for_each(|v| *v /= norm);
        let (second, steps) = power_iterate(q, &perturbed, tol, max_iter);
        total_steps += steps;
        match second {
            PowerOutcome::Converged(mut est) => {
                est.iterations = total_steps;
                Ok(est)
            }
            PowerOutcome::Stalled { lower, upper, .. } if n <= BISECTION_MAX_DIM => {
                let (rho, bisection_steps) = bisect_spectral_radius(q, tol);
                let left_eigenvector = inverse_iteration_eigenvector(q, rho);
                Ok(SpectralEstimate {
                    rho,
                    left_eigenvector,
                    iterations: total_steps + bisection_steps,
                    collatz_lower: lower.min(rho),
                    collatz_upper: upper.max(rho),
                })
            }
            PowerOutcome::Stalled { lower, upper, .. } => Err(ChainError::SpectralStall {
                lower,
                upper,
                iterations: total_steps,
            }),
        }
    }

    fn triangular_estimate(&self) -> SpectralEstimate {
        let q = &self.q;
        let n = self.n_states();
        let rho = (0..n).map(|i| q.get(i, i)).fold(0.0, f64::max);
        let lower_triangular = q.is_lower_triangular(TRIANGULAR_TOL);
        let left_eigenvector = triangular_left_eigenvector(q, rho, lower_triangular)
            .unwrap_or_else(|| inverse_iteration_eigenvector(q, rho));
        SpectralEstimate {
            rho,
            left_eigenvector,
            iterations: 0,
            collatz_lower: rho,
            collatz_upper: rho,
        }
    }

    /// Asymptotic average convergence rate `1 - rho(Q)` at default
    /// tolerances.
    pub fn asymptotic_rate(&self) -> Result<f64, ChainError> {
        Ok(1.0 - self.spectral_radius(DEFAULT_TOL, DEFAULT_MAX_ITER)?.rho)
    }

    /// Expected generations to absorption from each transient state: the
    /// row sums `m = (I - Q)^(-1) 1` of the fundamental matrix, computed by
    /// solving `(I - Q) m = 1`.
    ///
    /// Lower-triangular `Q` gets a direct substitution solve; anything else
    /// goes through LU with partial pivoting. A singular system means some
    /// state never reaches the optimum.
    pub fn hitting_times(&self) -> Result<Vec<f64>, ChainError> {
        self.checked()?;
        let n = self.n_states();
        let mut i_minus_q = Matrix::zeros(n, n);
        for row in 0..n {
            for col in 0..n {
                let id = if row == col { 1.0 } else { 0.0 };
                i_minus_q.set(row, col, id - self.q.get(row, col));
            }
        }
        let ones = vec![1.0; n];
        let solve = if self.q.is_lower_triangular(TRIANGULAR_TOL) {
            linalg::solve_lower_triangular(&i_minus_q, &ones)
        } else {
            linalg::lu_solve(&i_minus_q, &ones)
        };
        solve.map_err(|err| match err {
            LinalgError::Singular { .. } => ChainError::NonConvergent,
            LinalgError::DimensionMismatch { expected, got } => {
                ChainError::DimensionMismatch { expected, got }
            }
        })
    }

    /// Geometric decay forecast `gap_0 * rho^t` for `t = 0..=t_max`.
    pub fn decay_prediction(&self, gap0: f64, t_max: usize) -> Result<Vec<f64>, ChainError> {
        let rho = self.spectral_radius(DEFAULT_TOL, DEFAULT_MAX_ITER)?.rho;
        Ok((0..=t_max).map(|t| gap0 * rho.powi(t as i32)).collect())
    }

    /// Checks the positivity condition backing the optimum-free alternative
    /// rate: `g = (I - Q^dt)(f_opt 1 - f)` must be strictly positive when
    /// maximizing (strictly negative when minimizing) for the rate's
    /// denominators to keep a consistent sign.
    pub fn check_g_condition(&self, delta_t: usize) -> Result<GCondition, ChainError> {
        self.checked()?;
        let gap = self.gap_vector();
        let mut advanced = gap.clone();
        for _ in 0..delta_t {
            advanced = self.q.mul_vec(&advanced);
        }
        let g: Vec<f64> = gap.iter().zip(&advanced).map(|(g0, gt)| g0 - gt).collect();
        let holds = match self.direction {
            Direction::Maximize => g.iter().all(|&v| v > 0.0),
            Direction::Minimize => g.iter().all(|&v| v < 0.0),
        };
        Ok(GCondition { holds, g })
    }

    /// The left Perron vector of `Q`, normalized to total mass 1, as a
    /// generation-0 distribution. Started there, the exact rate curve is
    /// flat at `1 - rho(Q)` for every `t`, which makes this the canonical
    /// worst-case (slowest-decaying) initialization.
    pub fn perron_init(&self) -> Result<DistributionVector, ChainError> {
        let estimate = self.spectral_radius(DEFAULT_TOL, DEFAULT_MAX_ITER)?;
        Ok(DistributionVector {
            mass: estimate.left_eigenvector,
            generation: 0,
        })
    }

    /// Serializes to the interchange JSON layout: direction, optimum,
    /// labeled states with fitness, the `Q` matrix, and the `B` vector.
    /// Numbers are rendered with 17 significant digits, enough for the
    /// parse to reproduce every double bit-exactly.
    pub fn to_json_string(&self) -> String {
        let mut out = String::new();
        out.push_str("{\n");
        out.push_str(&format!(
            "  \"direction\": \"{}\",\n",
            self.direction.as_str()
        ));
        out.push_str(&format!("  \"f_opt\": {},\n", fmt_f64(self.f_opt)));
        out.push_str("  \"states\": [\n");
        for (i, (label, fitness)) in self.state_labels.iter().zip(&self.fitness).enumerate() {
            let comma = if i + 1 == self.n_states() { "" } else { "," };
            out.push_str(&format!(
                "    {{\"label\": {}, \"fitness\": {}}}{comma}\n",
                json_string(label),
                fmt_f64(*fitness)
            ));
        }
        out.push_str("  ],\n");
        out.push_str("  \"Q\": [\n");
        for (i, row) in self.q.rows().enumerate() {
            let cells: Vec<String> = row.iter().map(|v| fmt_f64(*v)).collect();
            let comma = if i + 1 == self.n_states() { "" } else { "," };
            out.push_str(&format!("    [{}]{comma}\n", cells.join(", ")));
        }
        out.push_str("  ],\n");
        let b_cells: Vec<String> = self.escape.iter().map(|v| fmt_f64(*v)).collect();
        out.push_str(&format!("  \"B\": [{}]\n", b_cells.join(", ")));
        out.push_str("}\n");
        out
    }

    /// Parses the interchange JSON layout. Shape problems surface here;
    /// numeric invariants are still checked lazily by the analytic
    /// operations, so a parsed model can be inspected with
    /// [`TransitionModel::validate`] first.
    pub fn from_json_str(text: &str) -> Result<Self, ChainError> {
        let parsed: ModelJson =
            serde_json::from_str(text).map_err(|e| ChainError::MalformedJson(e.to_string()))?;
        let direction = match parsed.direction.as_str() {
            "maximize" => Direction::Maximize,
            "minimize" => Direction::Minimize,
            other => {
                return Err(ChainError::MalformedJson(format!(
                    "direction must be \"maximize\" or \"minimize\", got \"{other}\""
                )))
            }
        };
        let q =
            Matrix::from_rows(parsed.q).map_err(|e| ChainError::MalformedJson(e.to_string()))?;
        let (labels, fitness) = parsed
            .states
            .into_iter()
            .map(|s| (s.label, s.fitness))
            .unzip();
        TransitionModel::new(labels, q, parsed.b, fitness, parsed.f_opt, direction)
    }
}

#[derive(Deserialize)]
struct ModelJson {
    direction: String,
    f_opt: f64,
    states: Vec<StateJson>,
    #[serde(rename = "Q")]
    q: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    b: Vec<f64>,
}

#[derive(Deserialize)]
struct StateJson {
    label: String,
    fitness: f64,
}

/// 17-significant-digit rendering; round-trips any finite double.
pub fn fmt_f64(value: f64) -> String {
    format!("{value:.16e}")
}

fn json_string(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            c if (c as u32) < 0x20 => out.push_str(&format!("\\u{:04x}", c as u32)),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

enum PowerOutcome {
    Converged(SpectralEstimate),
    Stalled {
        lower: f64,
        upper: f64,
        iterate: Vec<f64>,
    },
}

/// One full power-iteration attempt; returns the outcome and steps spent.
fn power_iterate(q: &Matrix, start: &[f64], tol: f64, max_iter: usize) -> (PowerOutcome, usize) {
    let mut v = start.to_vec();
    let (mut last_lower, mut last_upper) = (0.0, f64::INFINITY);
    for step in 1..=max_iter {
        let w = q.left_mul(&v);
        let mut lower = f64::INFINITY;
        let mut upper = f64::NEG_INFINITY;
        for (wi, vi) in w.iter().zip(&v) {
            if *vi > RATIO_FLOOR {
                let ratio = wi / vi;
                lower = lower.min(ratio);
                upper = upper.max(ratio);
            }
        }
        if !lower.is_finite() || !upper.is_finite() {
            // Every entry underflowed; the iterate carries no information.
            return (
                PowerOutcome::Stalled {
                    lower: last_lower,
                    upper: last_upper,
                    iterate: v,
                },
                step,
            );
        }
        (last_lower, last_upper) = (lower, upper);
        let norm: f64 = w.iter().sum();
        if norm == 0.0 {
            // Q annihilated the iterate: nilpotent action, spectral radius 0.
            return (
                PowerOutcome::Converged(SpectralEstimate {
                    rho: 0.0,
                    left_eigenvector: v,
                    iterations: step,
                    collatz_lower: 0.0,
                    collatz_upper: 0.0,
                }),
                step,
            );
        }
        let normalized: Vec<f64> = w.iter().map(|x| x / norm).collect();
        if upper - lower <= tol {
            return (
                PowerOutcome::Converged(SpectralEstimate {
                    rho: 0.5 * (lower + upper),
                    left_eigenvector: normalized,
                    iterations: step,
                    collatz_lower: lower,
                    collatz_upper: upper,
                }),
                step,
            );
        }
        v = normalized;
    }
    (
        PowerOutcome::Stalled {
            lower: last_lower,
            upper: last_upper,
            iterate: v,
        },
        max_iter,
    )
}

/// Left eigenvector of a triangular `Q` for eigenvalue `rho` by
/// back-substitution on `(Q^T - rho I) v = 0`; `None` when the substitution
/// does not produce a (numerically) nonnegative vector, which only happens
/// for repeated eigenvalues with awkward coupling.
fn triangular_left_eigenvector(q: &Matrix, rho: f64, lower_triangular: bool) -> Option<Vec<f64>> {
    let n = q.n_rows();
    let scale = rho.abs().max(1.0);
    let near_zero = |d: f64| d.abs() <= 1e-14 * scale;
    let pivots: Vec<usize> = (0..n).filter(|&i| near_zero(q.get(i, i) - rho)).collect();

    for &p in &pivots {
        let mut v = vec![0.0; n];
        v[p] = 1.0;
        let ok = if lower_triangular {
            // (Q^T - rho I) is upper triangular; solve upward from row p.
            let mut solvable = true;
            for i in (0..p).rev() {
                let diag = q.get(i, i) - rho;
                if near_zero(diag) {
                    solvable = false;
                    break;
                }
                let sum: f64 = (i + 1..=p).map(|j| q.get(j, i) * v[j]).sum();
                v[i] = -sum / diag;
            }
            solvable
        } else {
            // (Q^T - rho I) is lower triangular; solve downward from row p.
            let mut solvable = true;
            for i in p + 1..n {
                let diag = q.get(i, i) - rho;
                if near_zero(diag) {
                    solvable = false;
                    break;
                }
                let sum: f64 = (p..i).map(|j| q.get(j, i) * v[j]).sum();
                v[i] = -sum / diag;
            }
            solvable
        };
        if !ok {
            continue;
        }
        let peak = v.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        if v.iter().all(|&x| x >= -1e-12 * peak) {
            let mut v: Vec<f64> = v.iter().map(|x| x.max(0.0)).collect();
            let total: f64 = v.iter().sum();
            v.iter_mut().for_each(|x| *x /= total);
            return Some(v);
        }
    }
    None
}

/// Locates the Perron root of a nonnegative `Q` by bisection.
///
/// For a nonnegative matrix, `lambda I - Q` is a nonsingular M-matrix — all
/// leading principal minors positive, i.e. Gaussian elimination yields only
/// positive pivots — exactly when `lambda` exceeds the spectral radius.
/// That predicate is monotone in `lambda`, so bisection between 0 and
/// `||Q||_inf + 1` pins the root regardless of reducibility or periodicity,
/// where power iteration can cycle forever.
fn bisect_spectral_radius(q: &Matrix, tol: f64) -> (f64, usize) {
    let mut lo = 0.0;
    let mut hi = q.inf_norm() + 1.0;
    let mut steps = 0;
    while hi - lo > tol.max(f64::EPSILON * hi) && steps < 200 {
        let mid = 0.5 * (lo + hi);
        if all_leading_minors_positive(q, mid) {
            hi = mid;
        } else {
            lo = mid;
        }
        steps += 1;
    }
    (0.5 * (lo + hi), steps)
}

fn all_leading_minors_positive(q: &Matrix, lambda: f64) -> bool {
    let n = q.n_rows();
    let mut a = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let id = if i == j { lambda } else { 0.0 };
            a.set(i, j, id - q.get(i, j));
        }
    }
    for col in 0..n {
        let pivot = a.get(col, col);
        if pivot <= RATIO_FLOOR {
            return false;
        }
        for row in col + 1..n {
            let factor = a.get(row, col) / pivot;
            if factor == 0.0 {
                continue;
            }
            for j in col + 1..n {
                let v = a.get(row, j) - factor * a.get(col, j);
                a.set(row, j, v);
            }
        }
    }
    true
}

/// Left eigenvector for a known eigenvalue by shifted inverse iteration on
/// `Q^T`; used after bisection, where no iterate is available.
fn inverse_iteration_eigenvector(q: &Matrix, rho: f64) -> Vec<f64> {
    let n = q.n_rows();
    let shift = rho + 1e-9 * rho.abs().max(1.0);
    let mut a = q.transpose();
    for i in 0..n {
        a.set(i, i, a.get(i, i) - shift);
    }
    let mut v = vec![1.0 / n as f64; n];
    for _ in 0..4 {
        let Ok(w) = linalg::lu_solve(&a, &v) else {
            break;
        };
        let norm: f64 = w.iter().map(|x| x.abs()).sum();
        if norm == 0.0 {
            break;
        }
        v = w.iter().map(|x| x / norm).collect();
    }
    // The limit direction is defined up to sign; orient it nonnegative and
    // clear the rounding dust.
    let positive: f64 = v.iter().filter(|&&x| x > 0.0).sum();
    let negative: f64 = -v.iter().filter(|&&x| x < 0.0).sum::<f64>();
    if negative > positive {
        v.iter_mut().for_each(|x| *x = -*x);
    }
    let peak = v.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    let mut v: Vec<f64> = v
        .iter()
        .map(|x| {
            if *x < 0.0 && *x >= -1e-9 * peak {
                0.0
            } else {
                *x
            }
        })
        .collect();
    let total: f64 = v.iter().sum();
    if total != 0.0 {
        v.iter_mut().for_each(|x| *x /= total);
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::onemax_chain::{self, OneMaxVariant};
    use crate::rng::SplitMix64;

    fn lumped(n: usize) -> TransitionModel {
        onemax_chain::build_lumped(n).expect("lumped builder")
    }

    fn binomial_start(n: usize) -> DistributionVector {
        onemax_chain::binomial_init(n, OneMaxVariant::Lumped).expect("binomial init")
    }

    /// Wraps a bare transient block into a full model for spectral tests:
    /// escape mass is whatever the rows leave unused, fitness is a strictly
    /// suboptimal ramp.
    fn model_from_q(rows: Vec<Vec<f64>>) -> TransitionModel {
        let q = Matrix::from_rows(rows).unwrap();
        let n = q.n_rows();
        let escape: Vec<f64> = q.rows().map(|r| 1.0 - r.iter().sum::<f64>()).collect();
        let fitness: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let labels = (0..n).map(|i| format!("s{i}")).collect();
        TransitionModel::new(labels, q, escape, fitness, n as f64, Direction::Maximize).unwrap()
    }

    fn random_positive_substochastic(rng: &mut SplitMix64, n: usize) -> Vec<Vec<f64>> {
        (0..n)
            .map(|_| {
                let raw: Vec<f64> = (0..n).map(|_| 0.05 + rng.next_f64()).collect();
                let total: f64 = raw.iter().sum();
                // Keep at least 10% escape mass so the chain is absorbing.
                let budget = 0.3 + 0.6 * rng.next_f64();
                raw.iter().map(|x| budget * x / total).collect()
            })
            .collect()
    }

    // ---- validation ----------------------------------------------------

    #[test]
    fn single_state_half_half_model_is_valid() {
        let model = model_from_q(vec![vec![0.5]]);
        assert!(model.validate().is_empty());
    }

    #[test]
    fn row_sum_deficit_is_reported_with_its_row() {
        let q = Matrix::from_rows(vec![vec![0.5, 0.2], vec![0.1, 0.3]]).unwrap();
        let model = TransitionModel::new(
            vec!["a".into(), "b".into()],
            q,
            vec![0.2, 0.6], // row 0 sums to 0.9
            vec![0.0, 1.0],
            2.0,
            Direction::Maximize,
        )
        .unwrap();
        let violations = model.validate();
        assert_eq!(
            violations.len(),
            1,
            "expected exactly one violation: {violations:?}"
        );
        assert!(
            matches!(violations[0], Violation::RowSumMismatch { row: 0, .. }),
            "wrong violation: {:?}",
            violations[0]
        );
    }

    #[test]
    fn negative_entries_and_non_worse_fitness_are_reported() {
        let q = Matrix::from_rows(vec![vec![-0.1, 0.6], vec![0.2, 0.3]]).unwrap();
        let model = TransitionModel::new(
            vec!["a".into(), "b".into()],
            q,
            vec![0.5, 0.5],
            vec![2.0, 1.0], // state 0 claims fitness equal to f_opt
            2.0,
            Direction::Maximize,
        )
        .unwrap();
        let violations = model.validate();
        assert!(violations
            .iter()
            .any(|v| matches!(v, Violation::QEntryOutOfRange { row: 0, col: 0, .. })));
        assert!(violations
            .iter()
            .any(|v| matches!(v, Violation::FitnessNotWorse { index: 0, .. })));
    }

    #[test]
    fn analytic_operations_fail_fast_on_invalid_models() {
        let q = Matrix::from_rows(vec![vec![0.5, 0.2], vec![0.1, 0.3]]).unwrap();
        let model = TransitionModel::new(
            vec!["a".into(), "b".into()],
            q,
            vec![0.2, 0.6],
            vec![0.0, 1.0],
            2.0,
            Direction::Maximize,
        )
        .unwrap();
        let q0 = DistributionVector::new(vec![0.5, 0.5], 0);
        assert!(matches!(
            model.propagate(&q0, 1),
            Err(ChainError::InvalidModel { .. })
        ));
        assert!(matches!(
            model.spectral_radius(1e-12, 100),
            Err(ChainError::InvalidModel { .. })
        ));
        assert!(matches!(
            model.hitting_times(),
            Err(ChainError::InvalidModel { .. })
        ));
    }

    // ---- propagation and gaps -------------------------------------------

    #[test]
    fn one_step_from_the_last_level_keeps_mass_by_self_loop_only() {
        let model = lumped(10);
        let mut mass = vec![0.0; 10];
        mass[0] = 1.0; // point mass on the level one flip from the optimum
        let q1 = model
            .propagate(&DistributionVector::new(mass, 0), 1)
            .unwrap();
        assert!(
            (q1.mass[0] - 0.9).abs() < 1e-15,
            "self-loop mass {}",
            q1.mass[0]
        );
        assert!(q1.mass[1..].iter().all(|&m| m == 0.0));
        assert!(
            (q1.total() - 0.9).abs() < 1e-15,
            "the rest must be absorbed"
        );
    }

    #[test]
    fn propagation_rejects_bad_inputs() {
        let model = lumped(4);
        let wrong_len = DistributionVector::new(vec![0.5; 3], 0);
        assert!(matches!(
            model.propagate(&wrong_len, 1),
            Err(ChainError::DimensionMismatch { .. })
        ));
        let wrong_gen = DistributionVector::new(vec![0.25; 4], 3);
        assert!(matches!(
            model.propagate(&wrong_gen, 1),
            Err(ChainError::InvalidDistribution(_))
        ));
        let negative = DistributionVector::new(vec![-0.1, 0.5, 0.3, 0.2], 0);
        assert!(matches!(
            model.propagate(&negative, 1),
            Err(ChainError::InvalidDistribution(_))
        ));
        let heavy = DistributionVector::new(vec![0.5; 4], 0);
        assert!(matches!(
            model.propagate(&heavy, 1),
            Err(ChainError::InvalidDistribution(_))
        ));
    }

    #[test]
    fn transient_mass_never_increases() {
        let model = lumped(8);
        let q0 = binomial_start(8);
        let mut previous = q0.total();
        for t in 1..=60 {
            let qt = model.propagate(&q0, t).unwrap();
            let total = qt.total();
            assert!(
                total <= previous + 1e-15,
                "mass grew at t={t}: {total} > {previous}"
            );
            previous = total;
        }
    }

    #[test]
    fn gap_series_agrees_with_stepwise_propagation() {
        let model = lumped(6);
        let q0 = binomial_start(6);
        let series = model.exact_gap_series(&q0, 40).unwrap();
        assert_eq!(series.len(), 41);
        for t in [0usize, 1, 17, 40] {
            let qt = model.propagate(&q0, t).unwrap();
            let gap = model.exact_mean_fitness_gap(&qt).unwrap();
            assert!(
                (series[t] - gap).abs() < 1e-15,
                "t={t}: {} vs {gap}",
                series[t]
            );
        }
    }

    #[test]
    fn binomial_start_has_gap_exactly_five_for_n_10() {
        let model = lumped(10);
        let q0 = binomial_start(10);
        let gap = model.exact_mean_fitness_gap(&q0).unwrap();
        assert_eq!(gap, 5.0, "sum_k k*C(10,k)/2^10 is exactly 5");
    }

    #[test]
    fn point_mass_gap_decays_at_exactly_nine_tenths() {
        let model = lumped(10);
        let mut mass = vec![0.0; 10];
        mass[0] = 1.0;
        let q0 = DistributionVector::new(mass, 0);
        for t in [1usize, 7, 25] {
            let qt = model.propagate(&q0, t).unwrap();
            let gap = model.exact_mean_fitness_gap(&qt).unwrap();
            let want = 0.9f64.powi(t as i32);
            assert!(
                (gap - want).abs() < 1e-14 * want.max(1e-30),
                "gap at t={t}: {gap} vs {want}"
            );
        }
    }

    // ---- exact rate curve ------------------------------------------------

    #[test]
    fn exact_rate_curve_is_flat_at_one_tenth_for_the_bit_counting_chain() {
        // The gap function is a right eigenvector of the lumped Q, so the
        // exact curve is 0.1 at every t, not just in the limit.
        let model = lumped(10);
        let q0 = binomial_start(10);
        let curve = model.exact_rate_curve(&q0, 256).unwrap();
        assert!(curve.values[0].is_none(), "rate is undefined at t = 0");
        for t in 1..=256 {
            let r = curve.values[t].expect("defined for t >= 1");
            assert!((r - 0.1).abs() < 1e-10, "R({t}) = {r}");
        }
        let r50 = curve.values[50].unwrap();
        assert!((r50 - 0.1).abs() < 0.01, "R(50) = {r50} is not near 0.1");
    }

    #[test]
    fn zero_initial_gap_is_rejected() {
        let model = lumped(4);
        let q0 = DistributionVector::new(vec![0.0; 4], 0);
        assert!(matches!(
            model.exact_rate_curve(&q0, 10),
            Err(ChainError::ZeroInitialGap)
        ));
    }

    #[test]
    fn rate_pins_to_one_after_the_gap_hits_zero() {
        // Q = 0: everything jumps to the optimum in one step.
        let model = model_from_q(vec![vec![0.0, 0.0], vec![0.0, 0.0]]);
        let q0 = DistributionVector::new(vec![0.5, 0.5], 0);
        let curve = model.exact_rate_curve(&q0, 5).unwrap();
        for t in 1..=5 {
            assert_eq!(curve.values[t], Some(1.0), "R({t}) must be pinned to 1");
        }
    }

    // ---- spectral radius --------------------------------------------------

    #[test]
    fn single_state_spectral_radius_is_exact() {
        let model = model_from_q(vec![vec![0.5]]);
        let est = model
            .spectral_radius(DEFAULT_TOL, DEFAULT_MAX_ITER)
            .unwrap();
        assert_eq!(est.rho, 0.5);
        assert_eq!(est.left_eigenvector, vec![1.0]);
    }

    #[test]
    fn lumped_chain_spectral_radius_is_one_minus_one_over_n() {
        for n in [2usize, 10, 33, 50] {
            let model = lumped(n);
            let est = model
                .spectral_radius(DEFAULT_TOL, DEFAULT_MAX_ITER)
                .unwrap();
            let want = 1.0 - 1.0 / n as f64;
            assert!(
                (est.rho - want).abs() < 1e-10,
                "rho({n}) = {} vs {want}",
                est.rho
            );
            assert!(est.collatz_lower <= est.rho && est.rho <= est.collatz_upper);
        }
        let rate = lumped(10).asymptotic_rate().unwrap();
        assert!((rate - 0.1).abs() < 1e-10, "asymptotic rate {rate}");
    }

    #[test]
    fn zero_matrix_has_asymptotic_rate_one() {
        let model = model_from_q(vec![vec![0.0, 0.0], vec![0.0, 0.0]]);
        assert_eq!(model.asymptotic_rate().unwrap(), 1.0);
    }

    /// Independent oracle: the characteristic polynomial's largest root via
    /// sign-change bisection on a cofactor-expansion determinant. Shares no
    /// code with the production path.
    fn oracle_rho(rows: &[Vec<f64>]) -> f64 {
        fn cofactor_det(m: &[Vec<f64>]) -> f64 {
            let n = m.len();
            if n == 1 {
                return m[0][0];
            }
            let mut det = 0.0;
            for col in 0..n {
                let minor: Vec<Vec<f64>> = m[1..]
                    .iter()
                    .map(|row| {
                        row.iter()
                            .enumerate()
                            .filter(|(j, _)| *j != col)
                            .map(|(_, v)| *v)
                            .collect()
                    })
                    .collect();
                let sign = if col % 2 == 0 { 1.0 } else { -1.0 };
                det += sign * m[0][col] * cofactor_det(&minor);
            }
            det
        }
        // p(lambda) = det(lambda I - Q), positive above the Perron root.
        let char_poly = |lambda: f64| {
            let n = rows.len();
            let shifted: Vec<Vec<f64>> = (0..n)
                .map(|i| {
                    (0..n)
                        .map(|j| {
                            if i == j {
                                lambda - rows[i][j]
                            } else {
                                -rows[i][j]
                            }
                        })
                        .collect()
                })
                .collect();
            cofactor_det(&shifted)
        };
        let mut hi = 2.0;
        let mut lo = hi;
        // Walk down until the polynomial changes sign, then bisect.
        loop {
            lo -= 1.0 / 64.0;
            if char_poly(lo) < 0.0 {
                break;
            }
            assert!(lo > -0.1, "oracle found no sign change");
            hi = lo;
        }
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if char_poly(mid) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn power_iteration_matches_the_characteristic_polynomial_oracle() {
        let mut rng = SplitMix64::new(4040);
        for round in 0..20 {
            let rows = random_positive_substochastic(&mut rng, 4);
            let model = model_from_q(rows.clone());
            let est = model.spectral_radius(1e-12, DEFAULT_MAX_ITER).unwrap();
            let want = oracle_rho(&rows);
            assert!(
                (est.rho - want).abs() < 1e-8,
                "round {round}: power iteration {} vs oracle {want}",
                est.rho
            );
        }
    }

    #[test]
    fn collatz_bounds_sandwich_and_tighten_monotonically_on_positive_matrices() {
        let mut rng = SplitMix64::new(909);
        for _ in 0..10 {
            let rows = random_positive_substochastic(&mut rng, 6);
            let q = Matrix::from_rows(rows).unwrap();
            let n = q.n_rows();
            let mut v = vec![1.0 / n as f64; n];
            let mut prev_lower = f64::NEG_INFINITY;
            let mut prev_upper = f64::INFINITY;
            for step in 0..200 {
                let w = q.left_mul(&v);
                let ratios: Vec<f64> = w.iter().zip(&v).map(|(wi, vi)| wi / vi).collect();
                let lower = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
                let upper = ratios.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                assert!(lower <= upper, "sandwich broken at step {step}");
                assert!(
                    lower >= prev_lower - 1e-13,
                    "lower bound regressed at step {step}"
                );
                assert!(
                    upper <= prev_upper + 1e-13,
                    "upper bound regressed at step {step}"
                );
                (prev_lower, prev_upper) = (lower, upper);
                let norm: f64 = w.iter().sum();
                v = w.iter().map(|x| x / norm).collect();
            }
            assert!(prev_upper - prev_lower <= 1e-10, "bounds failed to tighten");
        }
    }

    #[test]
    fn eigen_residual_is_within_ten_tolerances() {
        let tol = 1e-12;
        let mut cases: Vec<TransitionModel> = vec![lumped(10), lumped(50)];
        let mut rng = SplitMix64::new(31337);
        for _ in 0..5 {
            cases.push(model_from_q(random_positive_substochastic(&mut rng, 7)));
        }
        for model in &cases {
            let est = model.spectral_radius(tol, DEFAULT_MAX_ITER).unwrap();
            let v = &est.left_eigenvector;
            let vq = model.q().left_mul(v);
            let residual = vq
                .iter()
                .zip(v)
                .map(|(a, b)| (a - est.rho * b).abs())
                .fold(0.0, f64::max);
            assert!(
                residual <= 10.0 * tol,
                "residual {residual} too large for a {}-state model",
                model.n_states()
            );
        }
    }

    #[test]
    fn periodic_chain_falls_back_to_bisection() {
        // A 2-cycle: power iteration oscillates with period 2 from any
        // non-eigenvector start, so the Collatz bounds never close and the
        // bisection fallback must take over. True rho = sqrt(0.25) = 0.5.
        let model = model_from_q(vec![vec![0.0, 1.0], vec![0.25, 0.0]]);
        let est = model.spectral_radius(1e-12, 500).unwrap();
        assert!((est.rho - 0.5).abs() < 1e-10, "fallback rho {}", est.rho);
        assert!(
            est.iterations > 1000,
            "expected both power attempts to be spent"
        );
        // Left eigenvector: v^T Q = 0.5 v^T has solution (1/3, 2/3).
        assert!((est.left_eigenvector[0] - 1.0 / 3.0).abs() < 1e-8);
        assert!((est.left_eigenvector[1] - 2.0 / 3.0).abs() < 1e-8);
        let vq = model.q().left_mul(&est.left_eigenvector);
        let residual = vq
            .iter()
            .zip(&est.left_eigenvector)
            .map(|(a, b)| (a - est.rho * b).abs())
            .fold(0.0, f64::max);
        assert!(residual < 1e-8, "fallback eigenvector residual {residual}");
    }

    #[test]
    fn stall_above_bisection_dimension_reports_last_bounds() {
        // Same 2-cycle block replicated 33 times: 66 states > the bisection
        // ceiling, and every attempt keeps oscillating.
        let blocks = 33;
        let n = 2 * blocks;
        let mut rows = vec![vec![0.0; n]; n];
        for b in 0..blocks {
            rows[2 * b][2 * b + 1] = 1.0;
            rows[2 * b + 1][2 * b] = 0.25;
        }
        let model = model_from_q(rows);
        match model.spectral_radius(1e-12, 300) {
            Err(ChainError::SpectralStall {
                lower,
                upper,
                iterations,
            }) => {
                assert!(lower <= upper, "diagnostic bounds inverted");
                assert_eq!(iterations, 600, "both attempts should exhaust the budget");
            }
            other => panic!("expected SpectralStall, got {other:?}"),
        }
    }

    // ---- hitting times -----------------------------------------------------

    #[test]
    #[allow(clippy::excessive_precision)]
    fn hitting_times_follow_the_harmonic_series() {
        // m_k = n * (1 + 1/2 + ... + 1/k) for the lumped chain.
        let model = lumped(10);
        let m = model.hitting_times().unwrap();
        let max = m.iter().cloned().fold(0.0, f64::max);
        assert!(
            (max - 29.289682539682541).abs() < 1e-9,
            "10*H_10 expected, got {max}"
        );
        assert!(max > 10.0, "expected absorption slower than n generations");
        assert!((m[0] - 10.0).abs() < 1e-12, "m_1 = n, got {}", m[0]);

        let model5 = lumped(5);
        let m5 = model5.hitting_times().unwrap();
        let max5 = m5.iter().cloned().fold(0.0, f64::max);
        assert!(
            (max5 - 137.0 / 12.0).abs() < 1e-12,
            "5*H_5 = 137/12, got {max5}"
        );
    }

    #[test]
    fn hitting_times_satisfy_the_spectral_lower_bound() {
        for n in [3usize, 10, 25] {
            let model = lumped(n);
            let rho = model
                .spectral_radius(DEFAULT_TOL, DEFAULT_MAX_ITER)
                .unwrap()
                .rho;
            let m = model.hitting_times().unwrap();
            let max = m.iter().cloned().fold(0.0, f64::max);
            assert!(
                max >= 1.0 / (1.0 - rho) - 1e-9,
                "max hitting time {max} beats the spectral bound for n={n}"
            );
        }
    }

    #[test]
    fn dense_hitting_times_match_lu_expectations() {
        // Non-triangular two-state chain; solve (I-Q) m = 1 by hand:
        // m = (I-Q)^{-1} 1 with Q = [[0.2, 0.3], [0.4, 0.1]].
        let model = model_from_q(vec![vec![0.2, 0.3], vec![0.4, 0.1]]);
        let m = model.hitting_times().unwrap();
        // (I-Q) = [[0.8, -0.3], [-0.4, 0.9]], det = 0.6
        // m = [ (0.9 + 0.3)/0.6, (0.4 + 0.8)/0.6 ] = [2, 2]
        assert!(
            (m[0] - 2.0).abs() < 1e-12 && (m[1] - 2.0).abs() < 1e-12,
            "{m:?}"
        );
    }

    #[test]
    fn chains_with_an_inescapable_state_are_non_convergent() {
        let model = model_from_q(vec![vec![1.0, 0.0], vec![0.0, 0.5]]);
        assert!(matches!(
            model.hitting_times(),
            Err(ChainError::NonConvergent)
        ));
    }

    // ---- decay prediction and g-condition ----------------------------------

    #[test]
    fn decay_prediction_tracks_the_exact_gap_for_the_lumped_chain() {
        let model = lumped(10);
        let q0 = binomial_start(10);
        let gap0 = model.exact_mean_fitness_gap(&q0).unwrap();
        let prediction = model.decay_prediction(gap0, 200).unwrap();
        for t in [1usize, 50, 200] {
            let qt = model.propagate(&q0, t).unwrap();
            let gap = model.exact_mean_fitness_gap(&qt).unwrap();
            let rel = (gap / prediction[t] - 1.0).abs();
            assert!(rel < 1e-3, "relative deviation {rel} at t={t}");
        }
    }

    #[test]
    fn g_condition_holds_for_the_lumped_chain_and_matches_the_closed_form() {
        let model = lumped(10);
        let result = model.check_g_condition(10).unwrap();
        assert!(result.holds);
        // Q g = 0.9 g for the gap vector g = (1, ..., n), so
        // g_cond = (1 - 0.9^10) * g exactly.
        let factor = 1.0 - 0.9f64.powi(10);
        for (k, &value) in result.g.iter().enumerate() {
            let want = factor * (k + 1) as f64;
            assert!((value - want).abs() < 1e-12, "g[{k}] = {value} vs {want}");
        }
    }

    #[test]
    fn g_condition_single_state_closed_form() {
        let model = model_from_q(vec![vec![0.5]]);
        for delta_t in [1usize, 3, 10] {
            let result = model.check_g_condition(delta_t).unwrap();
            let want = 1.0 - 0.5f64.powi(delta_t as i32);
            assert!(result.holds);
            assert!(
                (result.g[0] - want).abs() < 1e-15,
                "dt={delta_t}: {}",
                result.g[0]
            );
        }
    }

    #[test]
    fn g_condition_fails_when_mass_flows_to_much_worse_states() {
        // From state 0 (gap 1) the chain usually falls to state 1 (gap 10),
        // so the one-step expected gap grows and g_0 goes negative.
        let q = Matrix::from_rows(vec![vec![0.1, 0.9], vec![0.0, 0.2]]).unwrap();
        let model = TransitionModel::new(
            vec!["near".into(), "far".into()],
            q,
            vec![0.0, 0.8],
            vec![9.0, 0.0],
            10.0,
            Direction::Maximize,
        )
        .unwrap();
        let result = model.check_g_condition(1).unwrap();
        assert!(
            !result.holds,
            "g = {:?} should have a negative entry",
            result.g
        );
        assert!(result.g[0] < 0.0);
    }

    // ---- Perron initialization ----------------------------------------------

    #[test]
    fn perron_init_of_the_lumped_chain_is_a_point_mass_on_the_top_level() {
        let model = lumped(10);
        let q0 = model.perron_init().unwrap();
        assert_eq!(q0.generation, 0);
        assert!(
            (q0.mass[0] - 1.0).abs() < 1e-12,
            "mass on S_1: {}",
            q0.mass[0]
        );
        assert!(
            q0.mass[1..].iter().all(|&m| m.abs() < 1e-12),
            "{:?}",
            q0.mass
        );
    }

    #[test]
    fn perron_start_makes_the_exact_rate_constant() {
        let model = lumped(5);
        let q0 = model.perron_init().unwrap();
        let rate = model.asymptotic_rate().unwrap();
        let curve = model.exact_rate_curve(&q0, 100).unwrap();
        for t in 1..=100 {
            let r = curve.values[t].unwrap();
            assert!((r - rate).abs() < 1e-9, "R({t}) = {r} drifted from {rate}");
        }
    }

    #[test]
    fn perron_init_is_strictly_positive_for_positive_matrices() {
        // Cross-checked against an independent 3x3 null-space construction:
        // for a 3x3 matrix A with a one-dimensional null space, the cross
        // product of two independent rows of A spans it.
        let rows = vec![
            vec![0.30, 0.25, 0.20],
            vec![0.15, 0.35, 0.25],
            vec![0.20, 0.10, 0.40],
        ];
        let model = model_from_q(rows.clone());
        let est = model.spectral_radius(1e-13, DEFAULT_MAX_ITER).unwrap();
        let q0 = model.perron_init().unwrap();
        assert!(
            q0.mass.iter().all(|&m| m > 0.0),
            "Perron vector not positive: {:?}",
            q0.mass
        );

        // a = (Q^T - rho I); null vector = cross(a_row0, a_row1).
        let a: Vec<Vec<f64>> = (0..3)
            .map(|i| {
                (0..3)
                    .map(|j| rows[j][i] - if i == j { est.rho } else { 0.0 })
                    .collect()
            })
            .collect();
        let cross = [
            a[0][1] * a[1][2] - a[0][2] * a[1][1],
            a[0][2] * a[1][0] - a[0][0] * a[1][2],
            a[0][0] * a[1][1] - a[0][1] * a[1][0],
        ];
        let total: f64 = cross.iter().sum();
        for (i, &c) in cross.iter().enumerate() {
            let want = c / total;
            assert!(
                (q0.mass[i] - want).abs() < 1e-8,
                "component {i}: {} vs oracle {want}",
                q0.mass[i]
            );
        }
    }

    // ---- JSON round-trip -------------------------------------------------------

    #[test]
    fn json_round_trip_is_bit_exact() {
        let model = lumped(3);
        let text = model.to_json_string();
        assert!(text.contains("\"S_1\""), "labels missing from JSON: {text}");
        let parsed = TransitionModel::from_json_str(&text).unwrap();
        assert_eq!(parsed.n_states(), 3);
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(
                    parsed.q().get(i, j).to_bits(),
                    model.q().get(i, j).to_bits(),
                    "Q[{i},{j}] not bit-identical"
                );
            }
            assert_eq!(parsed.escape()[i].to_bits(), model.escape()[i].to_bits());
            assert_eq!(parsed.fitness()[i].to_bits(), model.fitness()[i].to_bits());
        }
        // diag of the 3-state chain: 1 - k/3 for k = 1, 2, 3.
        assert_eq!(parsed.q().get(0, 0), 1.0 - 1.0 / 3.0);
        assert_eq!(parsed.q().get(1, 1), 1.0 - 2.0 / 3.0);
        assert_eq!(parsed.q().get(2, 2), 0.0);

        let rho_direct = model
            .spectral_radius(DEFAULT_TOL, DEFAULT_MAX_ITER)
            .unwrap()
            .rho;
        let rho_parsed = parsed
            .spectral_radius(DEFAULT_TOL, DEFAULT_MAX_ITER)
            .unwrap()
            .rho;
        assert!((rho_direct - rho_parsed).abs() < 1e-15);
    }

    #[test]
    fn malformed_json_is_rejected_with_context() {
        assert!(matches!(
            TransitionModel::from_json_str("{not json"),
            Err(ChainError::MalformedJson(_))
        ));
        let bad_direction = r#"{"direction": "sideways", "f_opt": 1.0,
            "states": [{"label": "s", "fitness": 0.0}], "Q": [[0.5]], "B": [0.5]}"#;
        assert!(matches!(
            TransitionModel::from_json_str(bad_direction),
            Err(ChainError::MalformedJson(_))
        ));
    }
}
