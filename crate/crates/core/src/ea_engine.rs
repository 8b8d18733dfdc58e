//! Seeded single-run execution of the benchmark searches.
//!
//! Two families are implemented:
//!
//! * a (1+1) one-bit-flip search for discrete objectives — flip one
//!   uniformly chosen bit, keep the child only on strict improvement;
//! * self-adaptive evolutionary programming for bounded continuous
//!   objectives, in its Cauchy-mutation ([`Algorithm::Fep`]) and
//!   Gaussian-mutation ([`Algorithm::Cep`]) forms, with per-coordinate
//!   step sizes that evolve alongside the solutions and q-opponent
//!   tournament selection over the combined parent/offspring pool.
//!
//! A run is a pure function of its [`RunSpec`]: the seed fixes every draw,
//! so the same spec always reproduces the same trace bit for bit. That is
//! what lets the Monte-Carlo layer farm runs out to threads and still
//! produce byte-identical output at any parallelism.
//!
//! The recorded trajectory is the best-so-far (archive) fitness after each
//! generation, which is the quantity the convergence-rate estimators
//! consume. Both searches here are elitist — the one-bit search by
//! construction, the tournament because an individual that loses no
//! encounter is never displaced — so the archive equals the population best
//! at all times.

use thiserror::Error;

use crate::objectives::{ObjectiveError, ObjectiveSpec};
use crate::rate_estimators::GAP_EPS;
use crate::rng::SplitMix64;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("algorithm {algorithm} cannot run on objective {objective}: {reason}")]
    Incompatible {
        algorithm: &'static str,
        objective: &'static str,
        reason: &'static str,
    },
    #[error("population size {got} invalid: {requirement}")]
    PopulationSize {
        got: usize,
        requirement: &'static str,
    },
    #[error("dimension must be at least 1")]
    ZeroDimension,
    #[error(transparent)]
    Objective(#[from] ObjectiveError),
}

/// Search algorithm selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    /// (1+1) one-bit-flip search with strict-improvement acceptance.
    OnebitEa,
    /// Evolutionary programming with Cauchy mutation.
    Fep,
    /// Evolutionary programming with Gaussian mutation.
    Cep,
}

impl Algorithm {
    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::OnebitEa => "onebit-ea",
            Algorithm::Fep => "fep",
            Algorithm::Cep => "cep",
        }
    }
}

/// Self-adaptation parameters for the EP family. `tau` and `tau_prime`
/// default to the standard dimension-dependent schedules
/// `1 / sqrt(2 sqrt(n))` and `1 / sqrt(2 n)` when left unset.
#[derive(Debug, Clone, PartialEq)]
pub struct EpParams {
    /// Opponents each candidate meets in the selection tournament.
    pub tournament_size: usize,
    /// Initial per-coordinate mutation scale.
    pub eta0: f64,
    pub tau: Option<f64>,
    pub tau_prime: Option<f64>,
    /// Floor that keeps mutation scales from collapsing to zero.
    pub eta_min: f64,
}

impl Default for EpParams {
    fn default() -> Self {
        EpParams {
            tournament_size: 10,
            eta0: 3.0,
            tau: None,
            tau_prime: None,
            eta_min: 1e-4,
        }
    }
}

/// Coordinate-wise learning rate `1 / sqrt(2 sqrt(n))`.
pub fn default_tau(dimension: usize) -> f64 {
    1.0 / (2.0 * (dimension as f64).sqrt()).sqrt()
}

/// Global learning rate `1 / sqrt(2 n)`.
pub fn default_tau_prime(dimension: usize) -> f64 {
    1.0 / (2.0 * dimension as f64).sqrt()
}

/// Everything that determines a run.
#[derive(Debug, Clone)]
pub struct RunSpec {
    pub algorithm: Algorithm,
    pub objective: ObjectiveSpec,
    pub population_size: usize,
    pub t_max: usize,
    pub seed: u64,
    pub params: EpParams,
}

/// Best-so-far fitness after each generation, `values[0]` being the best
/// of the initial population.
#[derive(Debug, Clone, PartialEq)]
pub struct FitnessTrace {
    pub values: Vec<f64>,
    pub seed: u64,
    /// First generation whose best fitness is within [`GAP_EPS`] of the
    /// optimum, if any.
    pub hit_generation: Option<usize>,
}

/// Executes one seeded run and records its archive trajectory.
pub fn run(spec: &RunSpec) -> Result<FitnessTrace, EngineError> {
    if spec.objective.dimension == 0 {
        return Err(EngineError::ZeroDimension);
    }
    match spec.algorithm {
        Algorithm::OnebitEa => run_onebit(spec),
        Algorithm::Fep => run_ep(spec, Mutation::Cauchy),
        Algorithm::Cep => run_ep(spec, Mutation::Gaussian),
    }
}

/// Tracks the best-so-far value and the generation of the first hit.
struct Archive {
    spec_f_opt: f64,
    maximize: bool,
    values: Vec<f64>,
    hit_generation: Option<usize>,
}

impl Archive {
    fn new(objective: &ObjectiveSpec, t_max: usize) -> Self {
        Archive {
            spec_f_opt: objective.f_opt(),
            maximize: objective.direction() == crate::objectives::Direction::Maximize,
            values: Vec::with_capacity(t_max + 1),
            hit_generation: None,
        }
    }

    fn record(&mut self, generation_best: f64) {
        let best = match self.values.last() {
            Some(&prev) if self.maximize => prev.max(generation_best),
            Some(&prev) => prev.min(generation_best),
            None => generation_best,
        };
        if self.hit_generation.is_none() && (best - self.spec_f_opt).abs() <= GAP_EPS {
            self.hit_generation = Some(self.values.len());
        }
        self.values.push(best);
    }
}

fn run_onebit(spec: &RunSpec) -> Result<FitnessTrace, EngineError> {
    if !spec.objective.is_discrete() {
        return Err(EngineError::Incompatible {
            algorithm: spec.algorithm.as_str(),
            objective: spec.objective.kind.as_str(),
            reason: "the one-bit search needs a bitstring objective",
        });
    }
    if spec.population_size != 1 {
        return Err(EngineError::PopulationSize {
            got: spec.population_size,
            requirement: "the (1+1) search carries exactly one individual",
        });
    }
    let n = spec.objective.dimension;
    let mut rng = SplitMix64::new(spec.seed);
    let mut genome: Vec<bool> = (0..n).map(|_| rng.next_u64() & 1 == 1).collect();
    let mut fitness = spec.objective.eval_bits(&genome)?;

    let mut archive = Archive::new(&spec.objective, spec.t_max);
    archive.record(fitness);
    for _ in 1..=spec.t_max {
        fitness = onebit_step(&mut genome, fitness, &spec.objective, &mut rng)?;
        archive.record(fitness);
    }
    Ok(FitnessTrace {
        values: archive.values,
        seed: spec.seed,
        hit_generation: archive.hit_generation,
    })
}

/// One accept/reject step: flips a uniformly chosen bit and keeps it only
/// on strict improvement. Returns the (possibly unchanged) fitness.
fn onebit_step(
    genome: &mut [bool],
    fitness: f64,
    objective: &ObjectiveSpec,
    rng: &mut SplitMix64,
) -> Result<f64, EngineError> {
    let idx = rng.next_index(genome.len());
    genome[idx] = !genome[idx];
    let candidate = objective.eval_bits(genome)?;
    if objective.direction().strictly_better(candidate, fitness) {
        Ok(candidate)
    } else {
        genome[idx] = !genome[idx];
        Ok(fitness)
    }
}

#[derive(Clone, Copy)]
enum Mutation {
    Cauchy,
    Gaussian,
}

/// Population state of the EP searches, kept separate from the loop so the
/// generation step can be driven directly in tests.
struct EpState {
    xs: Vec<Vec<f64>>,
    etas: Vec<Vec<f64>>,
    fitness: Vec<f64>,
}

fn run_ep(spec: &RunSpec, mutation: Mutation) -> Result<FitnessTrace, EngineError> {
    if spec.objective.is_discrete() {
        return Err(EngineError::Incompatible {
            algorithm: spec.algorithm.as_str(),
            objective: spec.objective.kind.as_str(),
            reason: "the EP searches need a bounded continuous objective",
        });
    }
    if spec.population_size == 0 {
        return Err(EngineError::PopulationSize {
            got: 0,
            requirement: "at least one individual",
        });
    }
    let mut rng = SplitMix64::new(spec.seed);
    let mut state = ep_initialize(spec, &mut rng)?;

    let direction = spec.objective.direction();
    let population_best = |fitness: &[f64]| {
        fitness
            .iter()
            .copied()
            .reduce(|a, b| if direction.no_worse(a, b) { a } else { b })
            .unwrap()
    };

    let mut archive = Archive::new(&spec.objective, spec.t_max);
    archive.record(population_best(&state.fitness));
    for _ in 1..=spec.t_max {
        ep_generation(&mut state, spec, mutation, &mut rng)?;
        archive.record(population_best(&state.fitness));
    }
    Ok(FitnessTrace {
        values: archive.values,
        seed: spec.seed,
        hit_generation: archive.hit_generation,
    })
}

fn ep_initialize(spec: &RunSpec, rng: &mut SplitMix64) -> Result<EpState, EngineError> {
    let n = spec.objective.dimension;
    let (lower, upper) = spec
        .objective
        .bounds()
        .expect("continuous objectives carry bounds");
    let mut xs = Vec::with_capacity(spec.population_size);
    let mut fitness = Vec::with_capacity(spec.population_size);
    for _ in 0..spec.population_size {
        let x: Vec<f64> = (0..n).map(|_| rng.next_range(lower, upper)).collect();
        fitness.push(spec.objective.eval_real(&x)?);
        xs.push(x);
    }
    let etas = vec![vec![spec.params.eta0; n]; spec.population_size];
    Ok(EpState { xs, etas, fitness })
}

/// One EP generation: mutate every parent into one offspring, then select
/// the next parent population from the combined pool by tournament.
///
/// Per individual the draw order is fixed: one global Gaussian for the
/// step-size update, then per coordinate the mutation variate followed by
/// that coordinate's step-size Gaussian. The offspring position uses the
/// *parent's* step sizes; the updated step sizes belong to the offspring.
fn ep_generation(
    state: &mut EpState,
    spec: &RunSpec,
    mutation: Mutation,
    rng: &mut SplitMix64,
) -> Result<(), EngineError> {
    let n = spec.objective.dimension;
    let (lower, upper) = spec
        .objective
        .bounds()
        .expect("continuous objectives carry bounds");
    let tau = spec.params.tau.unwrap_or_else(|| default_tau(n));
    let tau_prime = spec
        .params
        .tau_prime
        .unwrap_or_else(|| default_tau_prime(n));
    let mu = state.xs.len();

    let mut pool_xs = state.xs.clone();
    let mut pool_etas = state.etas.clone();
    let mut pool_fitness = state.fitness.clone();
    pool_xs.reserve(mu);
    for parent in 0..mu {
        let global = rng.next_normal();
        let mut child_x = Vec::with_capacity(n);
        let mut child_eta = Vec::with_capacity(n);
        for c in 0..n {
            let variate = match mutation {
                Mutation::Cauchy => rng.next_cauchy(),
                Mutation::Gaussian => rng.next_normal(),
            };
            let coordinate_draw = rng.next_normal();
            let eta = state.etas[parent][c];
            child_x.push((state.xs[parent][c] + eta * variate).clamp(lower, upper));
            child_eta.push(
                (eta * (tau_prime * global + tau * coordinate_draw).exp()).max(spec.params.eta_min),
            );
        }
        pool_fitness.push(spec.objective.eval_real(&child_x)?);
        pool_xs.push(child_x);
        pool_etas.push(child_eta);
    }

    let keep = tournament_select(
        &pool_fitness,
        spec.objective.direction(),
        spec.params.tournament_size,
        mu,
        rng,
    );
    state.xs = keep.iter().map(|&i| pool_xs[i].clone()).collect();
    state.etas = keep.iter().map(|&i| pool_etas[i].clone()).collect();
    state.fitness = keep.iter().map(|&i| pool_fitness[i]).collect();
    Ok(())
}

/// Round of q-opponent encounters: every pool member meets `q` uniformly
/// drawn opponents (never itself; draws are with replacement) and scores a
/// win for each it is no worse than, ties included. The `mu` survivors are
/// the highest scorers, ranked by wins, then better fitness, then pool
/// index, which makes selection fully deterministic given the draws.
fn tournament_select(
    pool_fitness: &[f64],
    direction: crate::objectives::Direction,
    q: usize,
    mu: usize,
    rng: &mut SplitMix64,
) -> Vec<usize> {
    let wins = count_wins(pool_fitness, direction, q, rng);
    let mut order: Vec<usize> = (0..pool_fitness.len()).collect();
    order.sort_by(|&a, &b| {
        wins[b]
            .cmp(&wins[a])
            .then_with(|| {
                if pool_fitness[a] == pool_fitness[b] {
                    std::cmp::Ordering::Equal
                } else if direction.strictly_better(pool_fitness[a], pool_fitness[b]) {
                    std::cmp::Ordering::Less
                } else {
                    std::cmp::Ordering::Greater
                }
            })
            .then(a.cmp(&b))
    });
    order.truncate(mu);
    order
}

fn count_wins(
    pool_fitness: &[f64],
    direction: crate::objectives::Direction,
    q: usize,
    rng: &mut SplitMix64,
) -> Vec<usize> {
    let pool = pool_fitness.len();
    (0..pool)
        .map(|me| {
            (0..q)
                .filter(|_| {
                    // Uniform over the pool minus self: draw from a range one
                    // short and skip over our own slot.
                    let draw = rng.next_index(pool - 1);
                    let opponent = if draw < me { draw } else { draw + 1 };
                    direction.no_worse(pool_fitness[me], pool_fitness[opponent])
                })
                .count()
        })
        .collect()
}
