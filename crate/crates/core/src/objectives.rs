//! Fitness functions shared by the empirical and analytic halves.
//!
//! Two benchmarks are provided: bit-counting (`onemax`, maximized, optimum
//! `n`) and a shifted Ackley landscape (`ackley`, minimized, optimum `0`).
//! The Ackley optimum sits at `(-e, ..., -e)` rather than the origin — the
//! search space is `[-32 - e, 32 - e]` per coordinate — so that a lazy
//! all-zeros individual scores nowhere near optimal. Both functions can be
//! wrapped with a positive scale factor, which convergence-rate estimators
//! must not notice; that invariance is exercised heavily in the tests.

use thiserror::Error;

/// Shift applied to every Ackley coordinate: Euler's number as an IEEE-754
/// double, 2.7182818284590451 to 17 significant digits.
pub const ACKLEY_SHIFT: f64 = std::f64::consts::E;

/// Per-coordinate Ackley domain, `[-32 - e, 32 - e]`.
pub const ACKLEY_LOWER: f64 = -32.0 - ACKLEY_SHIFT;
pub const ACKLEY_UPPER: f64 = 32.0 - ACKLEY_SHIFT;

#[derive(Debug, Error, PartialEq)]
pub enum ObjectiveError {
    #[error("coordinate {index} = {value} outside [{lower}, {upper}]")]
    OutOfBounds {
        index: usize,
        value: f64,
        lower: f64,
        upper: f64,
    },
    #[error("dimension mismatch: objective expects {expected}, genome has {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("scale factor must be positive, got {0}")]
    NonPositiveScale(f64),
    #[error("objective '{0}' does not accept this genome representation")]
    WrongRepresentation(&'static str),
}

/// Optimization sense of an objective or chain model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Maximize,
    Minimize,
}

impl Direction {
    /// True when `a` is strictly better than `b` in this direction.
    pub fn strictly_better(self, a: f64, b: f64) -> bool {
        match self {
            Direction::Maximize => a > b,
            Direction::Minimize => a < b,
        }
    }

    /// True when `a` is at least as good as `b` in this direction.
    pub fn no_worse(self, a: f64, b: f64) -> bool {
        match self {
            Direction::Maximize => a >= b,
            Direction::Minimize => a <= b,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Maximize => "maximize",
            Direction::Minimize => "minimize",
        }
    }
}

/// Number of one-bits in the genome.
pub fn onemax(x: &[bool]) -> f64 {
    x.iter().filter(|&&b| b).count() as f64
}

/// Shifted Ackley function,
/// `f(x) = -20 exp(-0.2 sqrt(sum (x_i + e)^2 / n)) - exp(sum cos(2 pi (x_i + e)) / n) + 20 + e`,
/// minimized, with optimum value 0 at `x = (-e, ..., -e)`.
///
/// Coordinates outside `[-32 - e, 32 - e]` are a caller error here; the
/// evolutionary engine clamps mutations before evaluating, so a violation
/// means a bug upstream rather than an unlucky sample.
pub fn ackley(x: &[f64]) -> Result<f64, ObjectiveError> {
    let n = x.len() as f64;
    let mut sum_sq = 0.0;
    let mut sum_cos = 0.0;
    for (index, &value) in x.iter().enumerate() {
        if !(ACKLEY_LOWER..=ACKLEY_UPPER).contains(&value) {
            return Err(ObjectiveError::OutOfBounds {
                index,
                value,
                lower: ACKLEY_LOWER,
                upper: ACKLEY_UPPER,
            });
        }
        let shifted = value + ACKLEY_SHIFT;
        sum_sq += shifted * shifted;
        sum_cos += (2.0 * std::f64::consts::PI * shifted).cos();
    }
    Ok(-20.0 * (-0.2 * (sum_sq / n).sqrt()).exp() - (sum_cos / n).exp() + 20.0 + ACKLEY_SHIFT)
}

/// Which benchmark an [`ObjectiveSpec`] names.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObjectiveKind {
    OneMax,
    Ackley,
}

impl ObjectiveKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ObjectiveKind::OneMax => "onemax",
            ObjectiveKind::Ackley => "ackley",
        }
    }
}

/// A concrete objective: benchmark, dimension, and an optional positive
/// scale factor applied to every fitness value (and to the optimum).
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveSpec {
    pub kind: ObjectiveKind,
    pub dimension: usize,
    pub scale: f64,
}

impl ObjectiveSpec {
    pub fn new(kind: ObjectiveKind, dimension: usize) -> Self {
        ObjectiveSpec {
            kind,
            dimension,
            scale: 1.0,
        }
    }

    pub fn direction(&self) -> Direction {
        match self.kind {
            ObjectiveKind::OneMax => Direction::Maximize,
            ObjectiveKind::Ackley => Direction::Minimize,
        }
    }

    /// Analytic optimum of the (scaled) objective.
    pub fn f_opt(&self) -> f64 {
        match self.kind {
            ObjectiveKind::OneMax => self.scale * self.dimension as f64,
            ObjectiveKind::Ackley => 0.0,
        }
    }

    /// Per-coordinate box for continuous objectives, `None` for discrete.
    pub fn bounds(&self) -> Option<(f64, f64)> {
        match self.kind {
            ObjectiveKind::OneMax => None,
            ObjectiveKind::Ackley => Some((ACKLEY_LOWER, ACKLEY_UPPER)),
        }
    }

    pub fn is_discrete(&self) -> bool {
        matches!(self.kind, ObjectiveKind::OneMax)
    }

    pub fn eval_bits(&self, x: &[bool]) -> Result<f64, ObjectiveError> {
        if x.len() != self.dimension {
            return Err(ObjectiveError::DimensionMismatch {
                expected: self.dimension,
                got: x.len(),
            });
        }
        match self.kind {
            ObjectiveKind::OneMax => Ok(self.scale * onemax(x)),
            ObjectiveKind::Ackley => Err(ObjectiveError::WrongRepresentation("ackley")),
        }
    }

    pub fn eval_real(&self, x: &[f64]) -> Result<f64, ObjectiveError> {
        if x.len() != self.dimension {
            return Err(ObjectiveError::DimensionMismatch {
                expected: self.dimension,
                got: x.len(),
            });
        }
        match self.kind {
            ObjectiveKind::OneMax => Err(ObjectiveError::WrongRepresentation("onemax")),
            ObjectiveKind::Ackley => Ok(self.scale * ackley(x)?),
        }
    }
}

/// Wraps an objective with an additional positive scale factor `c`,
/// multiplying every fitness value and the optimum by `c`.
///
/// Scaling preserves the optimizer's comparisons and the sign structure of
/// fitness differences, so convergence-rate curves computed from a wrapped
/// objective must match the unwrapped ones; `c <= 0` would flip or collapse
/// comparisons and is rejected.
pub fn scale_wrap(objective: &ObjectiveSpec, c: f64) -> Result<ObjectiveSpec, ObjectiveError> {
    if c.is_nan() || c <= 0.0 {
        return Err(ObjectiveError::NonPositiveScale(c));
    }
    Ok(ObjectiveSpec {
        kind: objective.kind,
        dimension: objective.dimension,
        scale: objective.scale * c,
    })
}
