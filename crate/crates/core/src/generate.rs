//! Synthetic instance generation.
//!
//! Real ward data is not distributable, so benchmarking runs on generated
//! instances: a ward of nurses with mixed grades and contracts, preference
//! costs biased toward low values, and a demand matrix scaled from a
//! planted assignment so that a covering solution is known to exist at any
//! tightness up to 1.

use std::collections::{BTreeMap, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::coverage::Schedule;
use crate::instance::{
    ContractType, Grade, Nurse, SchedulingInstance, MAX_PREFERENCE_COST, NUM_GRADES, NUM_SLOTS,
};

/// Parameters for [`generate_instance`].
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorSpec {
    pub num_nurses: usize,
    /// Demand as a fraction of the planted supply, in `[0, 1]`.
    pub tightness: f64,
    /// Relative frequency of grade bands 1..=3.
    pub grade_weights: [f64; NUM_GRADES],
    /// Contracts and their relative frequencies.
    pub contract_mix: Vec<(ContractType, f64)>,
}

impl Default for GeneratorSpec {
    fn default() -> Self {
        let contract = |d, n| ContractType::new(d, n, false).expect("static contract");
        GeneratorSpec {
            num_nurses: 25,
            tightness: 0.8,
            grade_weights: [0.2, 0.3, 0.5],
            contract_mix: vec![
                (contract(5, 4), 0.4),
                (contract(4, 3), 0.2),
                (contract(3, 3), 0.2),
                (contract(3, 2), 0.2),
            ],
        }
    }
}

impl GeneratorSpec {
    pub fn with_nurses(mut self, num_nurses: usize) -> Self {
        self.num_nurses = num_nurses;
        self
    }

    pub fn with_tightness(mut self, tightness: f64) -> Self {
        self.tightness = tightness;
        self
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeneratorError {
    #[error("tightness must be in [0, 1], got {0}")]
    TightnessOutOfRange(f64),
    #[error("cannot generate an instance with zero nurses")]
    NoNurses,
    #[error("contract mix must not be empty")]
    EmptyContractMix,
    #[error("mix weights must be non-negative with a positive sum")]
    BadWeights,
}

/// Deterministic instance generation: equal `(spec, seed)` gives equal
/// instances. See [`generate_instance_with_plant`] for the assignment the
/// demand was scaled from.
pub fn generate_instance(
    spec: &GeneratorSpec,
    seed: u64,
) -> Result<SchedulingInstance, GeneratorError> {
    generate_instance_with_plant(spec, seed).map(|(inst, _)| inst)
}

/// As [`generate_instance`], additionally returning the planted assignment.
/// The planted schedule covers the generated demand whenever
/// `tightness <= 1`, so it witnesses feasibility.
pub fn generate_instance_with_plant(
    spec: &GeneratorSpec,
    seed: u64,
) -> Result<(SchedulingInstance, Schedule), GeneratorError> {
    if !(0.0..=1.0).contains(&spec.tightness) {
        return Err(GeneratorError::TightnessOutOfRange(spec.tightness));
    }
    if spec.num_nurses == 0 {
        return Err(GeneratorError::NoNurses);
    }
    if spec.contract_mix.is_empty() {
        return Err(GeneratorError::EmptyContractMix);
    }
    check_weights(spec.contract_mix.iter().map(|(_, w)| *w))?;
    check_weights(spec.grade_weights.iter().copied())?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // Grades and contracts first, so the pattern table layout does not
    // depend on later draws.
    let mut assignments: Vec<(Grade, ContractType)> = Vec::with_capacity(spec.num_nurses);
    for _ in 0..spec.num_nurses {
        let band = pick_weighted(
            &mut rng,
            (1..=NUM_GRADES as u8).zip(spec.grade_weights.iter().copied()),
        );
        let contract = pick_weighted(
            &mut rng,
            spec.contract_mix.iter().map(|&(c, w)| (c, w)),
        );
        assignments.push((Grade::new(band).expect("band in range"), contract));
    }

    // Global pattern table, deduplicated in first-seen order.
    let mut patterns = Vec::new();
    let mut index_of = HashMap::new();
    let mut feasible_sets = Vec::with_capacity(spec.num_nurses);
    for &(_, contract) in &assignments {
        let mut feasible = Vec::new();
        for pattern in contract.feasible_patterns() {
            let idx = *index_of.entry(pattern.bits()).or_insert_with(|| {
                patterns.push(pattern);
                patterns.len() - 1
            });
            feasible.push(idx);
        }
        feasible_sets.push(feasible);
    }

    // Preference costs: floor(100 * u^2) biases toward low values.
    let mut nurses = Vec::with_capacity(spec.num_nurses);
    for (id, &(grade, contract)) in assignments.iter().enumerate() {
        let mut costs = BTreeMap::new();
        for &j in &feasible_sets[id] {
            let u: f64 = rng.gen();
            let cost = (f64::from(MAX_PREFERENCE_COST) * u * u).floor() as u32;
            costs.insert(j, cost);
        }
        nurses.push(Nurse {
            id,
            grade,
            contract,
            preference_costs: costs,
        });
    }

    // Plant one pattern per nurse on the side of the contract with the
    // larger shift count, then scale its coverage down to the demand.
    let mut planted = Vec::with_capacity(spec.num_nurses);
    for (id, nurse) in nurses.iter().enumerate() {
        let contract = nurse.contract;
        let candidates: Vec<usize> = if contract.mixed_allowed() {
            feasible_sets[id].clone()
        } else if contract.days_on() >= contract.nights_on() && contract.days_on() > 0 {
            feasible_sets[id]
                .iter()
                .copied()
                .filter(|&j| patterns[j].is_day_only())
                .collect()
        } else {
            feasible_sets[id]
                .iter()
                .copied()
                .filter(|&j| patterns[j].is_night_only())
                .collect()
        };
        planted.push(candidates[rng.gen_range(0..candidates.len())]);
    }

    let mut cover = [[0i64; NUM_GRADES]; NUM_SLOTS];
    for (id, nurse) in nurses.iter().enumerate() {
        let pattern = patterns[planted[id]];
        for (slot, row) in cover.iter_mut().enumerate() {
            if pattern.covers(slot) {
                for band in nurse.grade.band()..=NUM_GRADES as u8 {
                    row[band as usize - 1] += 1;
                }
            }
        }
    }
    let mut demand = [[0i32; NUM_GRADES]; NUM_SLOTS];
    for slot in 0..NUM_SLOTS {
        for band0 in 0..NUM_GRADES {
            demand[slot][band0] = (spec.tightness * cover[slot][band0] as f64).round() as i32;
        }
    }

    let instance = SchedulingInstance {
        nurses,
        patterns,
        feasible_sets,
        demand,
    };
    debug_assert!(instance.is_valid(), "{}", instance.validate());
    Ok((instance, Schedule::new(planted)))
}

fn check_weights(weights: impl Iterator<Item = f64>) -> Result<(), GeneratorError> {
    let mut total = 0.0;
    for w in weights {
        if w.is_nan() || w < 0.0 {
            return Err(GeneratorError::BadWeights);
        }
        total += w;
    }
    if total > 0.0 {
        Ok(())
    } else {
        Err(GeneratorError::BadWeights)
    }
}

/// One uniform draw inverted against the cumulative weights.
fn pick_weighted<T: Copy>(rng: &mut impl Rng, items: impl Iterator<Item = (T, f64)>) -> T {
    let items: Vec<(T, f64)> = items.collect();
    let total: f64 = items.iter().map(|(_, w)| w).sum();
    let mut x = rng.gen::<f64>() * total;
    for &(item, w) in &items {
        x -= w;
        if x < 0.0 {
            return item;
        }
    }
    items.last().expect("weights validated as non-empty").0
}
