//! Coverage tracking and schedule evaluation.
//!
//! [`CoverageState`] carries the running surplus per slot and grade while a
//! schedule is built one nurse at a time; [`evaluate`] scores a complete
//! schedule from scratch. The surplus is grade cumulative: the entry for
//! band `s` counts every assigned nurse of grade `s` or higher, so demand
//! satisfaction is a direct sign check.

use thiserror::Error;

use crate::instance::{Grade, SchedulingInstance, ShiftPattern, NUM_GRADES, NUM_SLOTS};

/// One pattern index per nurse, in instance order.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Schedule {
    assignment: Vec<usize>,
}

impl Schedule {
    pub fn new(assignment: Vec<usize>) -> Self {
        Schedule { assignment }
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn pattern_for(&self, nurse: usize) -> usize {
        self.assignment[nurse]
    }

    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }
}

/// Running cover minus demand, per slot and grade band.
///
/// `surplus(k, s)` is negative while demand at `(k, s)` is unmet. Applying
/// a grade-g nurse raises every band `s >= g` on her worked slots;
/// removing the same assignment restores the prior state exactly.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoverageState {
    surplus: [[i32; NUM_GRADES]; NUM_SLOTS],
}

impl CoverageState {
    /// State with nothing assigned: surplus is the negated demand.
    pub fn empty(instance: &SchedulingInstance) -> Self {
        let mut surplus = [[0i32; NUM_GRADES]; NUM_SLOTS];
        for (slot, row) in surplus.iter_mut().enumerate() {
            for (band0, cell) in row.iter_mut().enumerate() {
                *cell = -instance.demand[slot][band0];
            }
        }
        CoverageState { surplus }
    }

    /// Build a state from raw surplus values, mostly useful in tests and
    /// what-if evaluations.
    pub fn from_surplus(surplus: [[i32; NUM_GRADES]; NUM_SLOTS]) -> Self {
        CoverageState { surplus }
    }

    pub fn apply(&mut self, grade: Grade, pattern: ShiftPattern) {
        for (slot, row) in self.surplus.iter_mut().enumerate() {
            if pattern.covers(slot) {
                for band in grade.band()..=NUM_GRADES as u8 {
                    row[band as usize - 1] += 1;
                }
            }
        }
    }

    /// Exact inverse of [`CoverageState::apply`].
    pub fn remove(&mut self, grade: Grade, pattern: ShiftPattern) {
        for (slot, row) in self.surplus.iter_mut().enumerate() {
            if pattern.covers(slot) {
                for band in grade.band()..=NUM_GRADES as u8 {
                    row[band as usize - 1] -= 1;
                }
            }
        }
    }

    pub fn surplus(&self, slot: usize, band: u8) -> i32 {
        self.surplus[slot][band as usize - 1]
    }

    /// Unmet demand at one slot and band.
    pub fn deficit(&self, slot: usize, band: u8) -> i64 {
        -i64::from(self.surplus(slot, band).min(0))
    }

    /// Whether any band anywhere is short.
    pub fn has_deficit_at(&self, band: u8) -> bool {
        self.surplus.iter().any(|row| row[band as usize - 1] < 0)
    }

    /// Total unmet demand over all slots and bands.
    pub fn total_undercover(&self) -> u64 {
        self.surplus
            .iter()
            .flatten()
            .map(|&s| u64::from(s.min(0).unsigned_abs()))
            .sum()
    }
}

/// Scored schedule: total preference cost, total undercover, and the
/// penalized objective `preference_cost + w_demand * undercover`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FitnessBreakdown {
    pub preference_cost: u64,
    pub undercover: u64,
    pub fitness: u64,
}

impl FitnessBreakdown {
    pub fn is_feasible(&self) -> bool {
        self.undercover == 0
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EvaluateError {
    #[error("schedule has {found} entries for {expected} nurses")]
    LengthMismatch { expected: usize, found: usize },
    #[error("nurse {nurse} assigned pattern {pattern}, which is outside her feasible set")]
    ContractViolation { nurse: usize, pattern: usize },
    #[error("nurse {nurse} has no preference cost for pattern {pattern}")]
    MissingPreferenceCost { nurse: usize, pattern: usize },
}

/// Score a complete schedule.
///
/// The cover of each (slot, band) cell is recomputed directly from the
/// assignment, independently of any incremental state. Only undercover is
/// penalized; surplus staffing is free.
pub fn evaluate(
    instance: &SchedulingInstance,
    schedule: &Schedule,
    w_demand: u64,
) -> Result<FitnessBreakdown, EvaluateError> {
    let assignment = schedule.assignment();
    if assignment.len() != instance.num_nurses() {
        return Err(EvaluateError::LengthMismatch {
            expected: instance.num_nurses(),
            found: assignment.len(),
        });
    }
    let mut preference_cost = 0u64;
    for (i, &j) in assignment.iter().enumerate() {
        if !instance.feasible_set(i).contains(&j) {
            return Err(EvaluateError::ContractViolation { nurse: i, pattern: j });
        }
        let cost = instance
            .preference_cost(i, j)
            .ok_or(EvaluateError::MissingPreferenceCost { nurse: i, pattern: j })?;
        preference_cost += u64::from(cost);
    }

    let mut undercover = 0u64;
    for slot in 0..NUM_SLOTS {
        for band in 1..=NUM_GRADES as u8 {
            let cover = assignment
                .iter()
                .enumerate()
                .filter(|&(i, &j)| {
                    instance.nurses[i].grade.qualifies_for(band)
                        && instance.pattern(j).covers(slot)
                })
                .count() as i64;
            let short = i64::from(instance.required(slot, band)) - cover;
            if short > 0 {
                undercover += short as u64;
            }
        }
    }

    Ok(FitnessBreakdown {
        preference_cost,
        undercover,
        fitness: preference_cost + w_demand * undercover,
    })
}

/// Whether the schedule meets demand at every slot and band.
pub fn is_feasible(
    instance: &SchedulingInstance,
    schedule: &Schedule,
) -> Result<bool, EvaluateError> {
    Ok(evaluate(instance, schedule, 0)?.undercover == 0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{ContractType, Nurse};
    use std::collections::BTreeMap;

    /// Instance with explicit patterns and demand, one feasible set shared
    /// by all nurses.
    fn build_instance(
        grades: &[u8],
        pattern_strs: &[&str],
        costs: &[&[u32]],
        demand: &[(usize, u8, i32)],
    ) -> SchedulingInstance {
        let patterns: Vec<ShiftPattern> = pattern_strs.iter().map(|s| s.parse().unwrap()).collect();
        let mut demand_matrix = [[0i32; NUM_GRADES]; NUM_SLOTS];
        for &(slot, band, r) in demand {
            demand_matrix[slot][band as usize - 1] = r;
        }
        let nurses: Vec<Nurse> = grades
            .iter()
            .enumerate()
            .map(|(id, &band)| Nurse {
                id,
                grade: Grade::new(band).unwrap(),
                contract: ContractType::new(1, 1, false).unwrap(),
                preference_costs: costs[id]
                    .iter()
                    .enumerate()
                    .map(|(j, &c)| (j, c))
                    .collect::<BTreeMap<_, _>>(),
            })
            .collect();
        let feasible = (0..patterns.len()).collect::<Vec<_>>();
        SchedulingInstance {
            feasible_sets: vec![feasible; nurses.len()],
            nurses,
            patterns,
            demand: demand_matrix,
        }
    }

    #[test]
    fn empty_state_is_negated_demand() {
        let inst = build_instance(
            &[1],
            &["10000000000000"],
            &[&[0]],
            &[(0, 2, 2), (13, 1, 1)],
        );
        let state = CoverageState::empty(&inst);
        assert_eq!(state.surplus(0, 2), -2);
        assert_eq!(state.surplus(13, 1), -1);
        assert_eq!(state.surplus(5, 3), 0);
        for slot in 0..NUM_SLOTS {
            for band in 1..=NUM_GRADES as u8 {
                assert_eq!(state.surplus(slot, band), -inst.required(slot, band));
            }
        }
    }

    #[test]
    fn grade_one_assignment_cascades_to_all_bands() {
        let inst = build_instance(&[1], &["10000000000000"], &[&[0]], &[]);
        let mut state = CoverageState::empty(&inst);
        state.apply(Grade::new(1).unwrap(), inst.pattern(0));
        assert_eq!(state.surplus(0, 1), 1);
        assert_eq!(state.surplus(0, 2), 1);
        assert_eq!(state.surplus(0, 3), 1);
        assert_eq!(state.surplus(1, 1), 0);
    }

    #[test]
    fn grade_three_assignment_touches_only_band_three() {
        let inst = build_instance(&[3], &["10000000000000"], &[&[0]], &[]);
        let mut state = CoverageState::empty(&inst);
        state.apply(Grade::new(3).unwrap(), inst.pattern(0));
        assert_eq!(state.surplus(0, 1), 0);
        assert_eq!(state.surplus(0, 2), 0);
        assert_eq!(state.surplus(0, 3), 1);
    }

    #[test]
    fn remove_is_the_exact_inverse_of_apply() {
        let inst = build_instance(&[2], &["11000001100000"], &[&[0]], &[(0, 1, 3), (8, 3, 1)]);
        let initial = CoverageState::empty(&inst);
        let mut state = initial.clone();
        state.apply(Grade::new(2).unwrap(), inst.pattern(0));
        assert_ne!(state, initial);
        state.remove(Grade::new(2).unwrap(), inst.pattern(0));
        assert_eq!(state, initial);
    }

    // Preference cost 22, one short on the Monday day shift, two short on
    // the Tuesday night shift, penalty weight 20 => 22 + (1+2)*20 = 82.
    #[test]
    fn penalized_fitness_matches_worked_example() {
        let inst = build_instance(
            &[1],
            &["10000000000000"],
            &[&[22]],
            &[(0, 3, 2), (8, 3, 2)],
        );
        let schedule = Schedule::new(vec![0]);
        let breakdown = evaluate(&inst, &schedule, 20).unwrap();
        assert_eq!(breakdown.preference_cost, 22);
        assert_eq!(breakdown.undercover, 3);
        assert_eq!(breakdown.fitness, 82);
        assert!(!breakdown.is_feasible());
    }

    #[test]
    fn zero_demand_makes_fitness_the_preference_cost() {
        let inst = build_instance(&[2], &["10000000000000", "01000000000000"], &[&[7, 9]], &[]);
        let breakdown = evaluate(&inst, &Schedule::new(vec![1]), 200).unwrap();
        assert_eq!(breakdown.fitness, 9);
        assert!(breakdown.is_feasible());
        assert!(is_feasible(&inst, &Schedule::new(vec![0])).unwrap());
    }

    #[test]
    fn demand_beyond_supply_is_never_feasible() {
        let inst = build_instance(&[3], &["10000000000000"], &[&[0]], &[(0, 3, 5)]);
        assert!(!is_feasible(&inst, &Schedule::new(vec![0])).unwrap());
    }

    #[test]
    fn assignment_outside_feasible_set_is_a_contract_violation() {
        let mut inst = build_instance(&[1], &["10000000000000", "01000000000000"], &[&[1, 1]], &[]);
        inst.feasible_sets[0] = vec![0];
        assert_eq!(
            evaluate(&inst, &Schedule::new(vec![1]), 1).unwrap_err(),
            EvaluateError::ContractViolation { nurse: 0, pattern: 1 }
        );
    }

    #[test]
    fn overcover_is_free() {
        let inst = build_instance(
            &[1, 1, 1],
            &["10000000000000"],
            &[&[0], &[0], &[0]],
            &[(0, 3, 1)],
        );
        let breakdown = evaluate(&inst, &Schedule::new(vec![0, 0, 0]), 20).unwrap();
        assert_eq!(breakdown.undercover, 0);
        assert_eq!(breakdown.fitness, 0);
    }

    #[test]
    fn incremental_fold_matches_batch_evaluation() {
        let inst = build_instance(
            &[1, 2, 3],
            &["11111000000000", "00000001111100", "10101010101010"],
            &[&[3, 5, 8], &[2, 4, 6], &[9, 1, 7]],
            &[(0, 1, 2), (8, 2, 1), (12, 3, 4)],
        );
        let schedule = Schedule::new(vec![2, 1, 0]);
        let mut state = CoverageState::empty(&inst);
        for (i, &j) in schedule.assignment().iter().enumerate() {
            state.apply(inst.nurses[i].grade, inst.pattern(j));
        }
        let breakdown = evaluate(&inst, &schedule, 200).unwrap();
        assert_eq!(breakdown.undercover, state.total_undercover());
    }

    #[test]
    fn fitness_is_monotone_in_penalty_weight() {
        let inst = build_instance(&[2], &["10000000000000"], &[&[5]], &[(1, 3, 2)]);
        let schedule = Schedule::new(vec![0]);
        let f1 = evaluate(&inst, &schedule, 1).unwrap().fitness;
        let f10 = evaluate(&inst, &schedule, 10).unwrap().fitness;
        assert!(f1 < f10);
    }
}
