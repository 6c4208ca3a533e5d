//! Simulated annealing over `(n_estimators, max_depth)`.
//!
//! The search box is `n_estimators ∈ [50, 150]` and
//! `max_depth ∈ {5, .., 20} ∪ {None}`. A candidate one perturbation away
//! from the current point is accepted outright when it is fitter and with
//! probability `exp(ΔF / T)` otherwise; `T` shrinks geometrically. Only an
//! accepted candidate can become the best, and among equally fit candidates
//! the one with fewer trees, then shallower depth, wins.

use alloc::{collections::BTreeMap, format, vec::Vec};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::exec::{Executor, Sequential};
use crate::figrf::{fit_figrf_with, FigrfConfig};
use crate::forest::Classifier;
use crate::metrics::evaluate;
use crate::rng::derive_seed;

pub const MIN_ESTIMATORS: u32 = 50;
pub const MAX_ESTIMATORS: u32 = 150;
pub const MIN_DEPTH: u32 = 5;
pub const MAX_DEPTH: u32 = 20;
/// Depth used for `None` when comparing complexity.
const UNBOUNDED_DEPTH_KEY: u32 = MAX_DEPTH + 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct HyperParams {
    n_estimators: u32,
    max_depth: Option<u32>,
}

impl HyperParams {
    pub fn new(n_estimators: u32, max_depth: Option<u32>) -> Result<Self> {
        if !(MIN_ESTIMATORS..=MAX_ESTIMATORS).contains(&n_estimators) {
            return Err(Error::InvalidConfig(format!(
                "n_estimators {n_estimators} outside [{MIN_ESTIMATORS}, {MAX_ESTIMATORS}]"
            )));
        }
        if let Some(d) = max_depth {
            if !(MIN_DEPTH..=MAX_DEPTH).contains(&d) {
                return Err(Error::InvalidConfig(format!(
                    "max_depth {d} outside [{MIN_DEPTH}, {MAX_DEPTH}]"
                )));
            }
        }
        Ok(Self {
            n_estimators,
            max_depth,
        })
    }

    pub fn n_estimators(&self) -> u32 {
        self.n_estimators
    }

    pub fn max_depth(&self) -> Option<u32> {
        self.max_depth
    }

    /// Lexicographic `(n_estimators, depth)` with `None` deeper than 20.
    pub fn complexity(&self) -> (u32, u32) {
        (
            self.n_estimators,
            self.max_depth.unwrap_or(UNBOUNDED_DEPTH_KEY),
        )
    }

    fn with_estimator_step(self, step: i32) -> Self {
        let n =
            (self.n_estimators as i32 + step).clamp(MIN_ESTIMATORS as i32, MAX_ESTIMATORS as i32);
        Self {
            n_estimators: n as u32,
            ..self
        }
    }

    fn with_depth_step(self, step: i32) -> Self {
        let max_depth = self.max_depth.and_then(|d| {
            let next = d as i32 + step;
            if next > MAX_DEPTH as i32 {
                None
            } else {
                Some(next.max(MIN_DEPTH as i32) as u32)
            }
        });
        Self { max_depth, ..self }
    }
}

/// Uniform over `[50, 150]` × the 17 depth options.
pub fn random_initial<R: Rng + ?Sized>(rng: &mut R) -> HyperParams {
    let n_estimators = rng.random_range(MIN_ESTIMATORS..=MAX_ESTIMATORS);
    let k = rng.random_range(0..=MAX_DEPTH - MIN_DEPTH + 1);
    HyperParams {
        n_estimators,
        max_depth: (k <= MAX_DEPTH - MIN_DEPTH).then_some(MIN_DEPTH + k),
    }
}

/// Perturbs one coordinate, each with probability 1/2.
///
/// The estimator step is `±k` with `k = 1` w.p. 0.3 and `k` uniform on
/// `2..=10` otherwise, clamped to the box. A numeric depth moves by ±1 or
/// ±2, clamped below at 5, with anything above 20 becoming `None`; `None`
/// moves to 20 or stays put with equal odds.
pub fn neighbor<R: Rng + ?Sized>(current: HyperParams, rng: &mut R) -> HyperParams {
    if rng.random_bool(0.5) {
        let magnitude = if rng.random_bool(0.3) {
            1
        } else {
            rng.random_range(2..=10)
        };
        let step = if rng.random_bool(0.5) {
            magnitude
        } else {
            -magnitude
        };
        current.with_estimator_step(step)
    } else if current.max_depth.is_none() {
        if rng.random_bool(0.5) {
            HyperParams {
                max_depth: Some(MAX_DEPTH),
                ..current
            }
        } else {
            current
        }
    } else {
        let step = [-2, -1, 1, 2][rng.random_range(0..4)];
        current.with_depth_step(step)
    }
}

/// `1` for an improvement, `exp(ΔF / T)` otherwise.
pub fn acceptance_probability(delta: f64, temperature: f64) -> f64 {
    if delta >= 0.0 {
        1.0
    } else {
        libm::exp(delta / temperature)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SaConfig {
    pub initial_temperature: f64,
    pub cooling_rate: f64,
    pub max_iterations: usize,
    pub seed: u64,
}

impl Default for SaConfig {
    fn default() -> Self {
        Self {
            initial_temperature: 1.0,
            cooling_rate: 0.95,
            max_iterations: 30,
            seed: 42,
        }
    }
}

impl SaConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.initial_temperature.is_finite() && self.initial_temperature > 0.0) {
            return Err(Error::InvalidConfig(
                "initial_temperature must be positive".into(),
            ));
        }
        if !(self.cooling_rate > 0.0 && self.cooling_rate < 1.0) {
            return Err(Error::InvalidConfig(
                "cooling_rate must lie strictly inside (0, 1)".into(),
            ));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidConfig(
                "max_iterations must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// One proposal of the annealing loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SaRecord {
    pub iteration: usize,
    pub candidate: HyperParams,
    pub fitness: f64,
    /// Candidate fitness minus current fitness.
    pub delta: f64,
    /// Temperature in force for this proposal.
    pub temperature: f64,
    /// Uniform draw compared against `exp(ΔF / T)`; absent for improvements.
    pub draw: Option<f64>,
    pub accepted: bool,
    pub new_best: bool,
    /// Best fitness after this proposal.
    pub best_fitness: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SaOutcome {
    pub initial: HyperParams,
    pub initial_fitness: f64,
    pub best: HyperParams,
    pub best_fitness: f64,
    pub trace: Vec<SaRecord>,
}

fn beats_best(
    fitness: f64,
    candidate: &HyperParams,
    best_fitness: f64,
    best: &HyperParams,
) -> bool {
    fitness > best_fitness
        || (fitness == best_fitness && candidate.complexity() < best.complexity())
}

/// Runs the annealing loop against an arbitrary fitness function.
///
/// The random initial configuration is evaluated first and seeds both the
/// current and the best state.
pub fn anneal<F>(config: &SaConfig, mut fitness: F) -> Result<SaOutcome>
where
    F: FnMut(&HyperParams) -> Result<f64>,
{
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let initial = random_initial(&mut rng);
    let initial_fitness = fitness(&initial)?;

    let (mut current, mut current_fitness) = (initial, initial_fitness);
    let (mut best, mut best_fitness) = (initial, initial_fitness);
    let mut temperature = config.initial_temperature;
    let mut trace = Vec::with_capacity(config.max_iterations);

    for iteration in 0..config.max_iterations {
        let candidate = neighbor(current, &mut rng);
        let candidate_fitness = fitness(&candidate)?;
        let delta = candidate_fitness - current_fitness;
        let (accepted, draw) = if delta > 0.0 {
            (true, None)
        } else {
            let u: f64 = rng.random();
            (u < acceptance_probability(delta, temperature), Some(u))
        };
        let mut new_best = false;
        if accepted {
            current = candidate;
            current_fitness = candidate_fitness;
            if beats_best(candidate_fitness, &candidate, best_fitness, &best) {
                best = candidate;
                best_fitness = candidate_fitness;
                new_best = true;
            }
        }
        trace.push(SaRecord {
            iteration,
            candidate,
            fitness: candidate_fitness,
            delta,
            temperature,
            draw,
            accepted,
            new_best,
            best_fitness,
        });
        temperature *= config.cooling_rate;
    }

    Ok(SaOutcome {
        initial,
        initial_fitness,
        best,
        best_fitness,
        trace,
    })
}

/// Seed for the forest trained at `params`, so a configuration always
/// maps to the same model within one search.
pub fn params_seed(base_seed: u64, params: &HyperParams) -> u64 {
    let (n, depth) = params.complexity();
    derive_seed(base_seed, (u64::from(n) << 8) | u64::from(depth))
}

/// FIGRF fitness on validation data, memoized per configuration.
pub struct FigrfObjective<'a, E: Executor> {
    train: &'a Dataset,
    validation: &'a Dataset,
    probabilities: &'a [f64],
    base_seed: u64,
    exec: &'a E,
    cache: BTreeMap<HyperParams, f64>,
}

impl<'a, E: Executor> FigrfObjective<'a, E> {
    pub fn new(
        train: &'a Dataset,
        validation: &'a Dataset,
        probabilities: &'a [f64],
        base_seed: u64,
        exec: &'a E,
    ) -> Self {
        Self {
            train,
            validation,
            probabilities,
            base_seed,
            exec,
            cache: BTreeMap::new(),
        }
    }

    pub fn figrf_config(&self, params: &HyperParams) -> FigrfConfig {
        FigrfConfig {
            n_estimators: params.n_estimators() as usize,
            max_depth: params.max_depth().map(|d| d as usize),
            seed: params_seed(self.base_seed, params),
            ..FigrfConfig::new(self.probabilities.to_vec())
        }
    }

    pub fn fitness(&mut self, params: &HyperParams) -> Result<f64> {
        if let Some(&f) = self.cache.get(params) {
            return Ok(f);
        }
        if self.validation.is_empty() {
            return Err(Error::Degenerate("one validation row"));
        }
        let model = fit_figrf_with(self.train, &self.figrf_config(params), self.exec)?;
        let predictions = model.predict_dataset(self.validation);
        let f = evaluate(&predictions, self.validation.labels())?.fitness;
        self.cache.insert(*params, f);
        Ok(f)
    }
}

/// Composite validation fitness of a FIGRF model trained with `params`.
pub fn fitness_of(
    params: &HyperParams,
    train: &Dataset,
    validation: &Dataset,
    probabilities: &[f64],
    base_seed: u64,
) -> Result<f64> {
    FigrfObjective::new(train, validation, probabilities, base_seed, &Sequential).fitness(params)
}

/// Tunes a FIGRF model; forest seeds derive from `config.seed`.
pub fn anneal_figrf<E: Executor>(
    train: &Dataset,
    validation: &Dataset,
    probabilities: &[f64],
    config: &SaConfig,
    exec: &E,
) -> Result<SaOutcome> {
    let mut objective = FigrfObjective::new(train, validation, probabilities, config.seed, exec);
    anneal(config, |p| objective.fitness(p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use crate::Label;
    use alloc::vec;

    fn hp(n: u32, d: Option<u32>) -> HyperParams {
        HyperParams::new(n, d).unwrap()
    }

    #[test]
    fn construction_enforces_the_box() {
        assert!(HyperParams::new(49, None).is_err());
        assert!(HyperParams::new(151, Some(10)).is_err());
        assert!(HyperParams::new(100, Some(4)).is_err());
        assert!(HyperParams::new(100, Some(21)).is_err());
        assert!(HyperParams::new(50, Some(5)).is_ok());
    }

    #[test]
    fn acceptance_rule() {
        assert_eq!(acceptance_probability(0.0, 1.0), 1.0);
        assert_eq!(acceptance_probability(0.2, 1e-3), 1.0);
        let p = acceptance_probability(-0.1, 0.1);
        assert!((p - (-1.0f64).exp()).abs() < 1e-15);
        assert!((p - 0.3679).abs() < 1e-4);
        assert_eq!(acceptance_probability(0.0, 0.0), 1.0);
    }

    #[test]
    fn complexity_order() {
        assert!(hp(50, Some(5)).complexity() < hp(50, Some(6)).complexity());
        assert!(hp(50, Some(6)).complexity() < hp(51, Some(5)).complexity());
        assert!(hp(100, None).complexity() > hp(100, Some(20)).complexity());
        assert!(beats_best(1.0, &hp(71, Some(10)), 1.0, &hp(109, Some(13))));
        assert!(!beats_best(1.0, &hp(109, Some(13)), 1.0, &hp(71, Some(10))));
        assert!(beats_best(0.9, &hp(150, None), 0.8, &hp(50, Some(5))));
    }

    #[test]
    fn clamped_steps() {
        assert_eq!(hp(150, Some(20)).with_estimator_step(7), hp(150, Some(20)));
        assert_eq!(hp(55, Some(20)).with_estimator_step(-9), hp(50, Some(20)));
        assert_eq!(hp(100, Some(19)).with_depth_step(2), hp(100, None));
        assert_eq!(hp(100, Some(20)).with_depth_step(1), hp(100, None));
        assert_eq!(hp(100, Some(6)).with_depth_step(-2), hp(100, Some(5)));
        assert_eq!(hp(100, Some(10)).with_depth_step(-2), hp(100, Some(8)));
    }

    #[test]
    fn unbounded_depth_neighbors() {
        let mut rng = stream_rng(3, 0);
        let start = hp(100, None);
        for _ in 0..500 {
            let next = neighbor(start, &mut rng);
            if next.n_estimators() == 100 {
                assert!(next.max_depth().is_none() || next.max_depth() == Some(20));
            } else {
                assert!(next.max_depth().is_none());
            }
        }
    }

    #[test]
    fn neighbors_stay_in_box_and_split_evenly() {
        let mut rng = stream_rng(4, 0);
        let start = hp(100, Some(10));
        let (mut est, mut depth) = (0, 0);
        for _ in 0..10_000 {
            let next = neighbor(start, &mut rng);
            assert!(HyperParams::new(next.n_estimators(), next.max_depth()).is_ok());
            assert_ne!(next, start);
            if next.n_estimators() != 100 {
                est += 1;
                assert!((90..=110).contains(&next.n_estimators()));
            } else {
                depth += 1;
                assert!((8..=12).contains(&next.max_depth().unwrap()));
            }
        }
        assert!(
            (est as f64 / 10_000.0 - 0.5).abs() < 0.02,
            "{est} vs {depth}"
        );
    }

    #[test]
    fn random_initial_distribution() {
        let mut rng = stream_rng(5, 0);
        let mut none = 0;
        for _ in 0..10_000 {
            let p = random_initial(&mut rng);
            assert!(HyperParams::new(p.n_estimators(), p.max_depth()).is_ok());
            none += usize::from(p.max_depth().is_none());
        }
        assert!((none as f64 / 10_000.0 - 1.0 / 17.0).abs() < 0.01, "{none}");
        assert_eq!(
            random_initial(&mut stream_rng(6, 0)),
            random_initial(&mut stream_rng(6, 0))
        );
    }

    #[test]
    fn flat_landscape_settles_on_simplest_accepted() {
        let config = SaConfig {
            max_iterations: 60,
            seed: 17,
            ..SaConfig::default()
        };
        let out = anneal(&config, |_| Ok(1.0)).unwrap();
        // ΔF = 0 is always accepted, so every candidate was accepted.
        assert!(out.trace.iter().all(|r| r.accepted));
        let simplest = out
            .trace
            .iter()
            .map(|r| r.candidate)
            .chain(core::iter::once(out.initial))
            .min_by_key(HyperParams::complexity)
            .unwrap();
        assert_eq!(out.best, simplest);
    }

    #[test]
    fn temperatures_follow_the_geometric_schedule() {
        let config = SaConfig {
            max_iterations: 100,
            cooling_rate: 0.9,
            initial_temperature: 2.0,
            seed: 1,
        };
        let out = anneal(&config, |p| Ok(p.n_estimators() as f64 / 150.0)).unwrap();
        for r in &out.trace {
            let expected = 2.0 * libm::pow(0.9, r.iteration as f64);
            assert!((r.temperature - expected).abs() < 1e-12);
        }
        assert!(out
            .trace
            .windows(2)
            .all(|w| w[1].best_fitness >= w[0].best_fitness));
    }

    #[test]
    fn invalid_configs() {
        for bad in [
            SaConfig {
                cooling_rate: 1.0,
                ..SaConfig::default()
            },
            SaConfig {
                cooling_rate: 0.0,
                ..SaConfig::default()
            },
            SaConfig {
                initial_temperature: 0.0,
                ..SaConfig::default()
            },
            SaConfig {
                max_iterations: 0,
                ..SaConfig::default()
            },
        ] {
            assert!(anneal(&bad, |_| Ok(0.0)).is_err());
        }
    }

    #[test]
    fn separable_fitness_is_perfect_and_repeatable() {
        let rows: Vec<[f64; 4]> = (0..60)
            .map(|i| {
                let c = f64::from(u8::from(i % 2 == 0));
                [
                    c * 10.0 + (i % 5) as f64,
                    c * 8.0,
                    (i % 7) as f64,
                    c * 3.0 - 1.0,
                ]
            })
            .collect();
        let labels: Vec<Label> = (0..60).map(|i| Label::from(i % 2 == 0)).collect();
        let data = Dataset::from_rows(&rows, labels).unwrap();
        let p = vec![0.25; 4];
        let params = hp(60, Some(5));
        let a = fitness_of(&params, &data, &data, &p, 9).unwrap();
        let b = fitness_of(&params, &data, &data, &p, 9).unwrap();
        assert_eq!(a, 1.0);
        assert_eq!(a, b);
    }
}
