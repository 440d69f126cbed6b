//! Generational rule-string search, random baselines and exhaustive
//! oracles.
//!
//! One run is fully determined by the instance and its config: a master
//! seed fans out into four independent random streams (initialization,
//! selection, model sampling, rule decoding), so equal inputs replay equal
//! runs and component tests can re-create any single stream.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::bayes::{count, normalize, ProbabilityModel};
use crate::coverage::{evaluate, FitnessBreakdown, Schedule};
use crate::instance::SchedulingInstance;
use crate::rules::{decode, RuleId, RuleParams, RuleSet, RuleString};

/// Per-purpose random streams derived from one master seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamPurpose {
    Initialization = 1,
    Selection = 2,
    Sampling = 3,
    Decoding = 4,
}

/// The documented seed split: the master seed keys the generator, the
/// purpose selects its stream.
pub fn stream_rng(seed: u64, purpose: StreamPurpose) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(purpose as u64);
    rng
}

/// Solver configuration. Defaults: population 140, keep 40, at most 200
/// generations, the four-rule set, penalty weight 200.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoaConfig {
    pub population_size: usize,
    /// Solutions kept each generation: the learning-set size and the elite
    /// count.
    pub keep_count: usize,
    pub max_generations: usize,
    pub rule_set: RuleSet,
    pub rule_params: RuleParams,
    pub w_demand: u64,
    pub seed: u64,
    /// Stop early once the best fitness is at or below this value.
    pub target_fitness: Option<u64>,
}

impl Default for BoaConfig {
    fn default() -> Self {
        BoaConfig {
            population_size: 140,
            keep_count: 40,
            max_generations: 200,
            rule_set: RuleSet::default_four(),
            rule_params: RuleParams::default(),
            w_demand: 200,
            seed: 0,
            target_fitness: None,
        }
    }
}

impl BoaConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        if self.keep_count == 0 || self.keep_count >= self.population_size {
            return Err(SolverError::BadKeepCount {
                keep_count: self.keep_count,
                population_size: self.population_size,
            });
        }
        if self.max_generations == 0 {
            return Err(SolverError::NoGenerations);
        }
        if self.rule_params.k_cheapest == 0 {
            return Err(SolverError::BadRuleParams);
        }
        Ok(())
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SolverError {
    #[error("keep_count ({keep_count}) must be positive and below the population size ({population_size})")]
    BadKeepCount {
        keep_count: usize,
        population_size: usize,
    },
    #[error("max_generations must be at least 1")]
    NoGenerations,
    #[error("k_cheapest must be at least 1")]
    BadRuleParams,
    #[error("instance failed validation:\n{0}")]
    InvalidInstance(String),
}

/// A scored member of the population.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Individual {
    pub rule_string: RuleString,
    pub schedule: Schedule,
    pub breakdown: FitnessBreakdown,
}

/// Population summary recorded once per generation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenerationStats {
    pub best_fitness: u64,
    pub mean_fitness: f64,
    pub feasible_count: usize,
}

/// Outcome of one run. `per_generation[0]` describes the initial
/// population; one entry follows per completed generation.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub best: Individual,
    pub per_generation: Vec<GenerationStats>,
    pub generations_run: usize,
    pub evaluations: u64,
    pub wall_time: Duration,
}

// Equality deliberately ignores wall_time: it is the one field outside the
// deterministic payload.
impl PartialEq for RunResult {
    fn eq(&self, other: &Self) -> bool {
        self.best == other.best
            && self.per_generation == other.per_generation
            && self.generations_run == other.generations_run
            && self.evaluations == other.evaluations
    }
}

impl RunResult {
    pub fn csv_header() -> &'static str {
        "instance,seed,best,mean_final,feasible,generations,millis"
    }

    /// One result row in the batch CSV shape.
    pub fn csv_row(&self, instance: &str, seed: u64) -> String {
        let final_stats = self.per_generation.last().expect("at least one generation");
        format!(
            "{},{},{},{:.3},{},{},{}",
            instance,
            seed,
            self.best.breakdown.fitness,
            final_stats.mean_fitness,
            u8::from(self.best.breakdown.is_feasible()),
            self.generations_run,
            self.wall_time.as_millis()
        )
    }
}

/// Roulette selection for minimization: `count` draws with replacement,
/// each individual weighted `worst - fitness + 1` against the current
/// population's worst. Equal fitnesses degrade to a uniform pick, and the
/// population best always carries the largest weight.
pub fn select_promising(
    population: &[Individual],
    count: usize,
    rng: &mut impl Rng,
) -> Vec<Individual> {
    assert!(!population.is_empty(), "selection from an empty population");
    let worst = population
        .iter()
        .map(|ind| ind.breakdown.fitness)
        .max()
        .expect("population is non-empty");
    let weights: Vec<u64> = population
        .iter()
        .map(|ind| worst - ind.breakdown.fitness + 1)
        .collect();
    let total: u64 = weights.iter().sum();
    (0..count)
        .map(|_| {
            let mut x = rng.gen_range(0..total);
            let mut pick = population.len() - 1;
            for (index, &w) in weights.iter().enumerate() {
                if x < w {
                    pick = index;
                    break;
                }
                x -= w;
            }
            population[pick].clone()
        })
        .collect()
}

enum OffspringMode {
    /// Learn a chain model from the selected strings and sample it.
    Learned,
    /// Every string is all-Random: pure random search.
    AllRandom,
    /// Fresh uniform rule picks every generation: rule selection without
    /// learning.
    UniformRules,
}

/// Full solver: learn a chain model from roulette-selected strings each
/// generation, sample replacements, keep the best `keep_count` of parents
/// and offspring.
pub fn run_boa(
    instance: &SchedulingInstance,
    config: &BoaConfig,
) -> Result<RunResult, SolverError> {
    run_generational(instance, config, OffspringMode::Learned, |_, _| {})
}

/// As [`run_boa`], invoking `on_model(generation, model)` with each learned
/// probability model. Generations are numbered from 0 (the model learned
/// from the initial population).
pub fn run_boa_traced(
    instance: &SchedulingInstance,
    config: &BoaConfig,
    on_model: impl FnMut(usize, &ProbabilityModel),
) -> Result<RunResult, SolverError> {
    run_generational(instance, config, OffspringMode::Learned, on_model)
}

/// Random-search baseline: identical loop and budget, every rule string
/// all-Random, no learning.
pub fn run_rd1(
    instance: &SchedulingInstance,
    config: &BoaConfig,
) -> Result<RunResult, SolverError> {
    run_generational(instance, config, OffspringMode::AllRandom, |_, _| {})
}

/// Rule-selection baseline: identical loop and budget, every position of
/// every offspring drawn uniformly over the rule set, no learning.
pub fn run_rd2(
    instance: &SchedulingInstance,
    config: &BoaConfig,
) -> Result<RunResult, SolverError> {
    run_generational(instance, config, OffspringMode::UniformRules, |_, _| {})
}

fn run_generational(
    instance: &SchedulingInstance,
    config: &BoaConfig,
    mode: OffspringMode,
    mut on_model: impl FnMut(usize, &ProbabilityModel),
) -> Result<RunResult, SolverError> {
    config.validate()?;
    let report = instance.validate();
    if !report.is_pass() {
        return Err(SolverError::InvalidInstance(report.to_string()));
    }
    if instance.num_nurses() == 0 {
        return Err(SolverError::InvalidInstance("no nurses".to_string()));
    }

    let started = Instant::now();
    let nurses = instance.num_nurses();
    let offspring_count = config.population_size - config.keep_count;
    let string_set = match mode {
        OffspringMode::AllRandom => {
            RuleSet::new(vec![RuleId::Random]).expect("single-rule set is valid")
        }
        _ => config.rule_set.clone(),
    };

    let mut init_rng = stream_rng(config.seed, StreamPurpose::Initialization);
    let mut select_rng = stream_rng(config.seed, StreamPurpose::Selection);
    let mut sample_rng = stream_rng(config.seed, StreamPurpose::Sampling);
    let mut decode_rng = stream_rng(config.seed, StreamPurpose::Decoding);

    let mut evaluations = 0u64;
    let realize = |string: RuleString, rng: &mut ChaCha8Rng, evals: &mut u64| {
        let schedule = decode(instance, &string, &config.rule_params, rng);
        let breakdown = evaluate(instance, &schedule, config.w_demand)
            .expect("decoded schedules stay within feasible sets");
        *evals += 1;
        Individual {
            rule_string: string,
            schedule,
            breakdown,
        }
    };

    let mut population: Vec<Individual> = (0..config.population_size)
        .map(|_| {
            let string = random_string(&string_set, nurses, &mut init_rng);
            realize(string, &mut decode_rng, &mut evaluations)
        })
        .collect();

    let mut best = best_of(&population).clone();
    let mut per_generation = vec![stats_of(&population)];
    let mut generations_run = 0;

    let target_met =
        |best: &Individual| config.target_fitness.is_some_and(|t| best.breakdown.fitness <= t);

    if !target_met(&best) {
        for generation in 1..=config.max_generations {
            let parents = select_promising(&population, config.keep_count, &mut select_rng);
            let offspring_strings: Vec<RuleString> = match mode {
                OffspringMode::Learned => {
                    let parent_strings: Vec<RuleString> =
                        parents.iter().map(|p| p.rule_string.clone()).collect();
                    let counts = count(&config.rule_set, &parent_strings)
                        .expect("selected strings are non-empty and equal length");
                    let model = normalize(&counts);
                    on_model(generation - 1, &model);
                    (0..offspring_count)
                        .map(|_| model.sample(&mut sample_rng))
                        .collect()
                }
                OffspringMode::AllRandom => (0..offspring_count)
                    .map(|_| RuleString::new(vec![RuleId::Random; nurses]))
                    .collect(),
                OffspringMode::UniformRules => (0..offspring_count)
                    .map(|_| random_string(&config.rule_set, nurses, &mut sample_rng))
                    .collect(),
            };

            let offspring: Vec<Individual> = offspring_strings
                .into_iter()
                .map(|s| realize(s, &mut decode_rng, &mut evaluations))
                .collect();

            // Elitist replacement: the best keep_count of parents and
            // offspring survive, the offspring fill the rest.
            let mut union: Vec<Individual> = population;
            union.extend(offspring.iter().cloned());
            union.sort_by_key(|ind| ind.breakdown.fitness);
            union.truncate(config.keep_count);
            union.extend(offspring);
            population = union;

            let candidate = best_of(&population);
            if candidate.breakdown.fitness < best.breakdown.fitness {
                best = candidate.clone();
            }
            per_generation.push(stats_of(&population));
            generations_run = generation;
            if target_met(&best) {
                break;
            }
        }
    }

    Ok(RunResult {
        best,
        per_generation,
        generations_run,
        evaluations,
        wall_time: started.elapsed(),
    })
}

fn random_string(set: &RuleSet, length: usize, rng: &mut impl Rng) -> RuleString {
    RuleString::new(
        (0..length)
            .map(|_| set.get(rng.gen_range(0..set.len())))
            .collect(),
    )
}

fn best_of(population: &[Individual]) -> &Individual {
    population
        .iter()
        .min_by_key(|ind| ind.breakdown.fitness)
        .expect("population is non-empty")
}

fn stats_of(population: &[Individual]) -> GenerationStats {
    let best_fitness = population
        .iter()
        .map(|ind| ind.breakdown.fitness)
        .min()
        .expect("population is non-empty");
    let sum: u64 = population.iter().map(|ind| ind.breakdown.fitness).sum();
    GenerationStats {
        best_fitness,
        mean_fitness: sum as f64 / population.len() as f64,
        feasible_count: population
            .iter()
            .filter(|ind| ind.breakdown.is_feasible())
            .count(),
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("assignment space holds about {estimated:.3e} schedules, above the 1e7 guard")]
    AssignmentSpaceTooLarge { estimated: f64 },
    #[error("rule-string space holds about {estimated:.3e} strings, above the 1e6 guard")]
    RuleSpaceTooLarge { estimated: f64 },
    #[error("instance failed validation:\n{0}")]
    InvalidInstance(String),
}

const ASSIGNMENT_SPACE_GUARD: f64 = 1e7;
const RULE_SPACE_GUARD: f64 = 1e6;

/// Exhaustive minimum over every assignment vector. Refuses when the
/// product of feasible-set sizes exceeds 1e7; fitness ties resolve to the
/// lexicographically smallest assignment.
pub fn brute_force_optimum(
    instance: &SchedulingInstance,
    w_demand: u64,
) -> Result<(Schedule, FitnessBreakdown), OracleError> {
    let report = instance.validate();
    if !report.is_pass() {
        return Err(OracleError::InvalidInstance(report.to_string()));
    }
    let estimated = instance
        .feasible_sets
        .iter()
        .map(|f| f.len() as f64)
        .product::<f64>();
    if estimated > ASSIGNMENT_SPACE_GUARD {
        return Err(OracleError::AssignmentSpaceTooLarge { estimated });
    }

    let mut search = OptimumSearch {
        instance,
        w_demand,
        state: crate::coverage::CoverageState::empty(instance),
        assignment: Vec::with_capacity(instance.num_nurses()),
        best: None,
    };
    search.descend(0, 0);
    let (_, assignment) = search.best.expect("non-empty feasible sets yield a leaf");
    let schedule = Schedule::new(assignment);
    let breakdown = evaluate(instance, &schedule, w_demand).expect("assignment is feasible");
    Ok((schedule, breakdown))
}

struct OptimumSearch<'a> {
    instance: &'a SchedulingInstance,
    w_demand: u64,
    state: crate::coverage::CoverageState,
    assignment: Vec<usize>,
    best: Option<(u64, Vec<usize>)>,
}

impl OptimumSearch<'_> {
    fn descend(&mut self, nurse: usize, preference_so_far: u64) {
        // Costs only grow along a branch, so a partial sum already above
        // the incumbent cannot improve on it.
        if let Some((best_fitness, _)) = &self.best {
            if preference_so_far > *best_fitness {
                return;
            }
        }
        if nurse == self.instance.num_nurses() {
            let fitness = preference_so_far + self.w_demand * self.state.total_undercover();
            let better = match &self.best {
                None => true,
                Some((bf, ba)) => fitness < *bf || (fitness == *bf && self.assignment < *ba),
            };
            if better {
                self.best = Some((fitness, self.assignment.clone()));
            }
            return;
        }
        let grade = self.instance.nurses[nurse].grade;
        for &j in self.instance.feasible_set(nurse) {
            let cost = u64::from(
                self.instance
                    .preference_cost(nurse, j)
                    .expect("valid instances cost every feasible pattern"),
            );
            let pattern = self.instance.pattern(j);
            self.state.apply(grade, pattern);
            self.assignment.push(j);
            self.descend(nurse + 1, preference_so_far + cost);
            self.assignment.pop();
            self.state.remove(grade, pattern);
        }
    }
}

/// Exhaustive best over every rule string in the config's rule set,
/// decoding each with a fresh stream seeded from `config.seed` so
/// stochastic rules stay comparable. Refuses above 1e6 strings. The first
/// string reaching the minimum (last position varying fastest) wins.
pub fn brute_force_rule_strings(
    instance: &SchedulingInstance,
    config: &BoaConfig,
) -> Result<Individual, OracleError> {
    let report = instance.validate();
    if !report.is_pass() {
        return Err(OracleError::InvalidInstance(report.to_string()));
    }
    let k = config.rule_set.len();
    let nurses = instance.num_nurses();
    let estimated = (k as f64).powi(nurses as i32);
    if estimated > RULE_SPACE_GUARD {
        return Err(OracleError::RuleSpaceTooLarge { estimated });
    }

    let mut digits = vec![0usize; nurses];
    let mut best: Option<Individual> = None;
    loop {
        let string = RuleString::new(digits.iter().map(|&d| config.rule_set.get(d)).collect());
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let schedule = decode(instance, &string, &config.rule_params, &mut rng);
        let breakdown =
            evaluate(instance, &schedule, config.w_demand).expect("decoded schedule is feasible");
        if best
            .as_ref()
            .is_none_or(|b| breakdown.fitness < b.breakdown.fitness)
        {
            best = Some(Individual {
                rule_string: string,
                schedule,
                breakdown,
            });
        }

        // Odometer step, last position fastest.
        let mut pos = nurses;
        loop {
            if pos == 0 {
                return Ok(best.expect("at least one string was evaluated"));
            }
            pos -= 1;
            digits[pos] += 1;
            if digits[pos] < k {
                break;
            }
            digits[pos] = 0;
        }
    }
}
