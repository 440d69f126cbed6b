//! Rostering problem data: shift patterns, contracts, nurses and demand.
//!
//! A week is 14 shift slots: slots 0..7 are the day shifts Monday through
//! Sunday, slots 7..14 the corresponding night shifts. Each nurse works
//! exactly one weekly shift pattern drawn from the feasible set implied by
//! her contract, and demand is stated per slot and grade band, where a
//! higher-graded nurse may stand in for a lower grade but not vice versa.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

/// Shift slots per week: 7 days followed by 7 nights.
pub const NUM_SLOTS: usize = 14;
/// Days per week; also the length of each half of a pattern.
pub const DAYS_PER_WEEK: usize = 7;
/// Number of grade bands. Band 1 is the highest qualification.
pub const NUM_GRADES: usize = 3;
/// Preference costs live in `0..=MAX_PREFERENCE_COST`.
pub const MAX_PREFERENCE_COST: u32 = 100;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum InstanceError {
    #[error("grade band must be in 1..=3, got {0}")]
    InvalidGrade(u8),
    #[error("contract must include at least one day or night shift")]
    EmptyContract,
    #[error("per-week shift count must be at most 7, got {0}")]
    ShiftCountTooLarge(u8),
    #[error("pattern bits exceed the 14-slot range: {0:#x}")]
    PatternBitsOutOfRange(u16),
    #[error("pattern must be 14 characters of 0/1, got {0:?}")]
    MalformedPattern(String),
}

/// Nurse qualification band, 1 (highest) through 3.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Grade(u8);

impl Grade {
    pub fn new(band: u8) -> Result<Self, InstanceError> {
        if band == 0 || band as usize > NUM_GRADES {
            return Err(InstanceError::InvalidGrade(band));
        }
        Ok(Grade(band))
    }

    pub const fn band(self) -> u8 {
        self.0
    }

    /// Whether this nurse counts toward demand at `band`. Substitution is
    /// downward only: a grade-1 nurse covers grade-2 and grade-3 demand,
    /// never the reverse.
    pub fn qualifies_for(self, band: u8) -> bool {
        self.0 <= band
    }
}

impl fmt::Display for Grade {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A weekly work pattern: one bit per slot, slot 0 = Monday day,
/// slot 13 = Sunday night.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct ShiftPattern(u16);

impl ShiftPattern {
    pub fn from_bits(bits: u16) -> Result<Self, InstanceError> {
        if bits >= 1 << NUM_SLOTS {
            return Err(InstanceError::PatternBitsOutOfRange(bits));
        }
        Ok(ShiftPattern(bits))
    }

    pub fn from_slots(slots: &[u8; NUM_SLOTS]) -> Result<Self, InstanceError> {
        let mut bits = 0u16;
        for (k, &v) in slots.iter().enumerate() {
            match v {
                0 => {}
                1 => bits |= 1 << k,
                _ => {
                    return Err(InstanceError::MalformedPattern(format!(
                        "slot {k} holds {v}"
                    )))
                }
            }
        }
        Ok(ShiftPattern(bits))
    }

    pub const fn bits(self) -> u16 {
        self.0
    }

    /// Whether slot `k` is worked.
    pub fn covers(self, slot: usize) -> bool {
        debug_assert!(slot < NUM_SLOTS);
        self.0 & (1 << slot) != 0
    }

    pub fn shift_count(self) -> u32 {
        self.0.count_ones()
    }

    pub fn day_shifts(self) -> u32 {
        (self.0 & 0x7f).count_ones()
    }

    pub fn night_shifts(self) -> u32 {
        (self.0 >> DAYS_PER_WEEK).count_ones()
    }

    pub fn is_day_only(self) -> bool {
        self.night_shifts() == 0
    }

    pub fn is_night_only(self) -> bool {
        self.day_shifts() == 0
    }

    pub fn to_slots(self) -> [u8; NUM_SLOTS] {
        let mut slots = [0u8; NUM_SLOTS];
        for (k, s) in slots.iter_mut().enumerate() {
            *s = u8::from(self.covers(k));
        }
        slots
    }
}

impl fmt::Display for ShiftPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for k in 0..NUM_SLOTS {
            write!(f, "{}", u8::from(self.covers(k)))?;
        }
        Ok(())
    }
}

impl fmt::Debug for ShiftPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ShiftPattern({self})")
    }
}

impl FromStr for ShiftPattern {
    type Err = InstanceError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.len() != NUM_SLOTS {
            return Err(InstanceError::MalformedPattern(s.to_string()));
        }
        let mut bits = 0u16;
        for (k, c) in s.chars().enumerate() {
            match c {
                '0' => {}
                '1' => bits |= 1 << k,
                _ => return Err(InstanceError::MalformedPattern(s.to_string())),
            }
        }
        Ok(ShiftPattern(bits))
    }
}

/// Weekly working agreement: how many days or nights are worked, and
/// whether a single week may mix the two.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ContractType {
    days_on: u8,
    nights_on: u8,
    mixed_allowed: bool,
}

impl ContractType {
    pub fn new(days_on: u8, nights_on: u8, mixed_allowed: bool) -> Result<Self, InstanceError> {
        if days_on as usize > DAYS_PER_WEEK {
            return Err(InstanceError::ShiftCountTooLarge(days_on));
        }
        if nights_on as usize > DAYS_PER_WEEK {
            return Err(InstanceError::ShiftCountTooLarge(nights_on));
        }
        if days_on == 0 && nights_on == 0 {
            return Err(InstanceError::EmptyContract);
        }
        Ok(ContractType {
            days_on,
            nights_on,
            mixed_allowed,
        })
    }

    pub const fn days_on(self) -> u8 {
        self.days_on
    }

    pub const fn nights_on(self) -> u8 {
        self.nights_on
    }

    pub const fn mixed_allowed(self) -> bool {
        self.mixed_allowed
    }

    /// Nominal shifts worked per week: the larger of the two options, or
    /// their sum for a mixed contract. Used as the supply estimate when
    /// scaling generated demand.
    pub fn weekly_shifts(self) -> u32 {
        if self.mixed_allowed {
            u32::from(self.days_on) + u32::from(self.nights_on)
        } else {
            u32::from(self.days_on.max(self.nights_on))
        }
    }

    /// All patterns compatible with this contract.
    ///
    /// Non-mixed contracts yield every all-day pattern with `days_on` ones
    /// followed by every all-night pattern with `nights_on` ones. Mixed
    /// contracts yield the cross product of day and night subsets.
    pub fn feasible_patterns(self) -> Vec<ShiftPattern> {
        if self.mixed_allowed {
            let days = half_masks(u32::from(self.days_on));
            let nights = half_masks(u32::from(self.nights_on));
            let mut out = Vec::with_capacity(days.len() * nights.len());
            for &d in &days {
                for &n in &nights {
                    out.push(ShiftPattern(d | (n << DAYS_PER_WEEK)));
                }
            }
            out
        } else {
            enumerate_patterns(self.days_on, self.nights_on)
                .expect("contract was validated on construction")
        }
    }
}

/// All single-sided patterns for the given shift counts: first the all-day
/// patterns with exactly `days_on` ones in slots 0..7, then the all-night
/// patterns with exactly `nights_on` ones in slots 7..14. Each group is in
/// lexicographic order of the 14-character 0/1 string.
pub fn enumerate_patterns(
    days_on: u8,
    nights_on: u8,
) -> Result<Vec<ShiftPattern>, InstanceError> {
    if days_on as usize > DAYS_PER_WEEK {
        return Err(InstanceError::ShiftCountTooLarge(days_on));
    }
    if nights_on as usize > DAYS_PER_WEEK {
        return Err(InstanceError::ShiftCountTooLarge(nights_on));
    }
    if days_on == 0 && nights_on == 0 {
        return Err(InstanceError::EmptyContract);
    }
    let mut out = Vec::new();
    if days_on > 0 {
        out.extend(half_masks(u32::from(days_on)).into_iter().map(ShiftPattern));
    }
    if nights_on > 0 {
        out.extend(
            half_masks(u32::from(nights_on))
                .into_iter()
                .map(|m| ShiftPattern(m << DAYS_PER_WEEK)),
        );
    }
    Ok(out)
}

/// 7-bit masks with the given popcount, in lexicographic order of the 0/1
/// string they spell with slot 0 first. Ascending integers enumerate that
/// order when bit (6 - k) carries slot k, so remap after filtering.
fn half_masks(count: u32) -> Vec<u16> {
    (0u16..1 << DAYS_PER_WEEK)
        .filter(|m| m.count_ones() == count)
        .map(|m| {
            (0..DAYS_PER_WEEK)
                .filter(|&k| m & (1 << (DAYS_PER_WEEK - 1 - k)) != 0)
                .fold(0u16, |acc, k| acc | (1 << k))
        })
        .collect()
}

/// One nurse: qualification band, contract, and the preference cost of
/// each feasible pattern (0 = perfect, 100 = unacceptable).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Nurse {
    /// Position of this nurse in the instance ordering.
    pub id: usize,
    pub grade: Grade,
    pub contract: ContractType,
    /// Pattern index -> preference cost. Must cover the feasible set.
    pub preference_costs: BTreeMap<usize, u32>,
}

/// A complete rostering problem: the nurses in decoding order, the global
/// pattern table, each nurse's feasible indices into it, and the demand
/// matrix `demand[slot][band-1]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SchedulingInstance {
    pub nurses: Vec<Nurse>,
    pub patterns: Vec<ShiftPattern>,
    pub feasible_sets: Vec<Vec<usize>>,
    pub demand: [[i32; NUM_GRADES]; NUM_SLOTS],
}

impl SchedulingInstance {
    pub fn num_nurses(&self) -> usize {
        self.nurses.len()
    }

    pub fn num_patterns(&self) -> usize {
        self.patterns.len()
    }

    pub fn pattern(&self, index: usize) -> ShiftPattern {
        self.patterns[index]
    }

    pub fn feasible_set(&self, nurse: usize) -> &[usize] {
        &self.feasible_sets[nurse]
    }

    pub fn preference_cost(&self, nurse: usize, pattern: usize) -> Option<u32> {
        self.nurses[nurse].preference_costs.get(&pattern).copied()
    }

    /// Demanded nurses of grade `band` or higher on `slot`.
    pub fn required(&self, slot: usize, band: u8) -> i32 {
        self.demand[slot][band as usize - 1]
    }

    pub fn validate(&self) -> ValidationReport {
        let mut violations = Vec::new();
        if self.feasible_sets.len() != self.nurses.len() {
            violations.push(Violation::FeasibleSetCountMismatch {
                nurses: self.nurses.len(),
                sets: self.feasible_sets.len(),
            });
        }
        for (position, nurse) in self.nurses.iter().enumerate() {
            if nurse.id != position {
                violations.push(Violation::NurseIdMismatch {
                    position,
                    id: nurse.id,
                });
            }
            let Some(set) = self.feasible_sets.get(position) else {
                continue;
            };
            if set.is_empty() {
                violations.push(Violation::EmptyFeasibleSet { nurse: position });
            }
            for &j in set {
                if j >= self.patterns.len() {
                    violations.push(Violation::PatternIndexOutOfRange {
                        nurse: position,
                        index: j,
                    });
                    continue;
                }
                match nurse.preference_costs.get(&j) {
                    None => violations.push(Violation::MissingPreferenceCost {
                        nurse: position,
                        pattern: j,
                    }),
                    Some(&cost) if cost > MAX_PREFERENCE_COST => {
                        violations.push(Violation::PreferenceCostOutOfRange {
                            nurse: position,
                            pattern: j,
                            cost,
                        })
                    }
                    Some(_) => {}
                }
            }
        }
        for (slot, row) in self.demand.iter().enumerate() {
            for (band0, &r) in row.iter().enumerate() {
                if r < 0 {
                    violations.push(Violation::NegativeDemand {
                        slot,
                        grade: band0 as u8 + 1,
                        value: r,
                    });
                }
            }
        }
        ValidationReport { violations }
    }

    pub fn is_valid(&self) -> bool {
        self.validate().is_pass()
    }
}

/// A single broken instance invariant.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Violation {
    #[error("{nurses} nurses but {sets} feasible sets")]
    FeasibleSetCountMismatch { nurses: usize, sets: usize },
    #[error("nurse at position {position} carries id {id}")]
    NurseIdMismatch { position: usize, id: usize },
    #[error("nurse {nurse} has an empty feasible set")]
    EmptyFeasibleSet { nurse: usize },
    #[error("nurse {nurse} references pattern {index}, which does not exist")]
    PatternIndexOutOfRange { nurse: usize, index: usize },
    #[error("nurse {nurse} has no preference cost for feasible pattern {pattern}")]
    MissingPreferenceCost { nurse: usize, pattern: usize },
    #[error("nurse {nurse} pattern {pattern}: cost {cost} exceeds {MAX_PREFERENCE_COST}")]
    PreferenceCostOutOfRange {
        nurse: usize,
        pattern: usize,
        cost: u32,
    },
    #[error("demand for slot {slot} grade {grade} is negative ({value})")]
    NegativeDemand { slot: usize, grade: u8, value: i32 },
}

/// Outcome of [`SchedulingInstance::validate`]: pass, or the list of
/// violations found. Validation never mutates the instance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_pass(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_pass() {
            return write!(f, "pass");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}
