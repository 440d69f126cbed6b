//! Constructive scheduling rules and the rule-string decoder.
//!
//! A rule maps one nurse plus the current coverage state to a pattern from
//! her feasible set. A rule string names one rule per nurse; decoding walks
//! the nurses in instance order, applies each nurse's rule against the
//! running state, and commits the chosen assignment before moving on. Every
//! decoded schedule therefore assigns each nurse a feasible pattern by
//! construction.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use thiserror::Error;

use crate::coverage::{CoverageState, Schedule};
use crate::instance::{Grade, SchedulingInstance, ShiftPattern, NUM_GRADES, NUM_SLOTS};

/// The available constructive rules.
///
/// The first four form the default working set; the last two are
/// experimental variants that must be opted into.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RuleId {
    /// Uniform pick from the feasible set.
    Random,
    /// Uniform pick among the k cheapest feasible patterns.
    KCheapest,
    /// Pattern covering the most undercover, costs ignored.
    OverallCover,
    /// Weighted blend of preference cost and binary grade shortfalls.
    Contribution,
    /// Pattern reaching the single deepest shortfall.
    HighestCover,
    /// Contribution with shortfall magnitudes instead of flags.
    EnhancedContribution,
}

pub const ALL_RULES: [RuleId; 6] = [
    RuleId::Random,
    RuleId::KCheapest,
    RuleId::OverallCover,
    RuleId::Contribution,
    RuleId::HighestCover,
    RuleId::EnhancedContribution,
];

impl RuleId {
    /// Whether applying the rule consumes randomness.
    pub fn is_stochastic(self) -> bool {
        matches!(self, RuleId::Random | RuleId::KCheapest)
    }

    pub fn token(self) -> &'static str {
        match self {
            RuleId::Random => "random",
            RuleId::KCheapest => "k-cheapest",
            RuleId::OverallCover => "overall-cover",
            RuleId::Contribution => "contribution",
            RuleId::HighestCover => "highest-cover",
            RuleId::EnhancedContribution => "enhanced-contribution",
        }
    }
}

impl fmt::Display for RuleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for RuleId {
    type Err = RuleError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.to_ascii_lowercase();
        ALL_RULES
            .into_iter()
            .find(|r| r.token() == lower)
            .ok_or_else(|| RuleError::UnknownRule(s.to_string()))
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RuleError {
    #[error("unknown rule {0:?}")]
    UnknownRule(String),
    #[error("rule set must not be empty")]
    EmptyRuleSet,
    #[error("rule {0} listed twice")]
    DuplicateRule(RuleId),
}

/// The ordered set of rules active in one run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RuleSet {
    rules: Vec<RuleId>,
}

impl RuleSet {
    pub fn new(rules: Vec<RuleId>) -> Result<Self, RuleError> {
        if rules.is_empty() {
            return Err(RuleError::EmptyRuleSet);
        }
        for (i, &rule) in rules.iter().enumerate() {
            if rules[..i].contains(&rule) {
                return Err(RuleError::DuplicateRule(rule));
            }
        }
        Ok(RuleSet { rules })
    }

    /// Random, k-cheapest, overall-cover, contribution.
    pub fn default_four() -> Self {
        RuleSet {
            rules: vec![
                RuleId::Random,
                RuleId::KCheapest,
                RuleId::OverallCover,
                RuleId::Contribution,
            ],
        }
    }

    pub fn rules(&self) -> &[RuleId] {
        &self.rules
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    pub fn get(&self, index: usize) -> RuleId {
        self.rules[index]
    }

    pub fn index_of(&self, rule: RuleId) -> Option<usize> {
        self.rules.iter().position(|&r| r == rule)
    }

    pub fn contains(&self, rule: RuleId) -> bool {
        self.index_of(rule).is_some()
    }
}

impl FromStr for RuleSet {
    type Err = RuleError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let rules = s
            .split(',')
            .map(|t| t.trim().parse())
            .collect::<Result<Vec<RuleId>, _>>()?;
        RuleSet::new(rules)
    }
}

impl fmt::Display for RuleSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, rule) in self.rules.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{rule}")?;
        }
        Ok(())
    }
}

/// Tunable rule weights.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RuleParams {
    /// Pool size for [`RuleId::KCheapest`].
    pub k_cheapest: usize,
    /// Weight of `100 - cost` in the contribution score.
    pub w_preference: u64,
    /// Weight of covering a shortfall at grade band 1, 2, 3.
    pub w_grade: [u64; NUM_GRADES],
}

impl Default for RuleParams {
    fn default() -> Self {
        RuleParams {
            k_cheapest: 5,
            w_preference: 1,
            w_grade: [8, 2, 1],
        }
    }
}

/// One rule per nurse: the genotype the solver evolves.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RuleString {
    rules: Vec<RuleId>,
}

impl RuleString {
    pub fn new(rules: Vec<RuleId>) -> Self {
        RuleString { rules }
    }

    pub fn rules(&self) -> &[RuleId] {
        &self.rules
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }
}

/// Uniform pick from the nurse's feasible set.
pub fn rule_random(
    instance: &SchedulingInstance,
    nurse: usize,
    rng: &mut impl Rng,
) -> usize {
    let feasible = instance.feasible_set(nurse);
    feasible[rng.gen_range(0..feasible.len())]
}

/// Uniform pick among the `k` cheapest feasible patterns. Cost ties break
/// toward the lower pattern index; a feasible set smaller than `k` is used
/// whole.
pub fn rule_k_cheapest(
    instance: &SchedulingInstance,
    nurse: usize,
    params: &RuleParams,
    rng: &mut impl Rng,
) -> usize {
    let feasible = instance.feasible_set(nurse);
    let mut ranked: Vec<(u32, usize)> = feasible
        .iter()
        .map(|&j| (expect_cost(instance, nurse, j), j))
        .collect();
    ranked.sort();
    let k = params.k_cheapest.max(1).min(ranked.len());
    ranked[rng.gen_range(0..k)].1
}

/// The grade band a nurse's cover counts toward right now: her own band
/// while it has any open shortfall, else the next lower band with one, else
/// the lowest band. Shortfalls above her own band are out of reach and
/// never scanned.
fn cascade_band(grade: Grade, state: &CoverageState) -> u8 {
    for band in grade.band()..=NUM_GRADES as u8 {
        if state.has_deficit_at(band) {
            return band;
        }
    }
    NUM_GRADES as u8
}

/// Total shortfall the pattern would soak up at the cascade band: the sum
/// of per-slot deficit magnitudes over the slots the pattern works.
pub fn cover_value(pattern: ShiftPattern, grade: Grade, state: &CoverageState) -> u64 {
    let band = cascade_band(grade, state);
    (0..NUM_SLOTS)
        .filter(|&k| pattern.covers(k))
        .map(|k| state.deficit(k, band) as u64)
        .sum()
}

/// Feasible pattern with the largest [`cover_value`]; ties go to the lower
/// pattern index. Preference costs play no part.
pub fn rule_overall_cover(
    instance: &SchedulingInstance,
    nurse: usize,
    state: &CoverageState,
) -> usize {
    let grade = instance.nurses[nurse].grade;
    let mut best: Option<(u64, usize)> = None;
    for &j in instance.feasible_set(nurse) {
        let value = cover_value(instance.pattern(j), grade, state);
        let better = match best {
            None => true,
            Some((bv, bj)) => value > bv || (value == bv && j < bj),
        };
        if better {
            best = Some((value, j));
        }
    }
    best.expect("feasible set is non-empty").1
}

/// Weighted score of a candidate assignment: cheapness plus flagged
/// shortfall coverage over every band the nurse qualifies for.
pub fn contribution_score(
    instance: &SchedulingInstance,
    nurse: usize,
    pattern_index: usize,
    state: &CoverageState,
    params: &RuleParams,
) -> u64 {
    shortfall_score(instance, nurse, pattern_index, state, params, |deficit| {
        u64::from(deficit > 0)
    })
}

/// [`contribution_score`] with shortfall magnitudes instead of flags.
pub fn enhanced_contribution_score(
    instance: &SchedulingInstance,
    nurse: usize,
    pattern_index: usize,
    state: &CoverageState,
    params: &RuleParams,
) -> u64 {
    shortfall_score(instance, nurse, pattern_index, state, params, |deficit| {
        deficit as u64
    })
}

fn shortfall_score(
    instance: &SchedulingInstance,
    nurse: usize,
    pattern_index: usize,
    state: &CoverageState,
    params: &RuleParams,
    weight_of_deficit: impl Fn(i64) -> u64,
) -> u64 {
    let cost = expect_cost(instance, nurse, pattern_index);
    let pattern = instance.pattern(pattern_index);
    let grade = instance.nurses[nurse].grade;
    let mut score =
        params.w_preference * u64::from(crate::instance::MAX_PREFERENCE_COST.saturating_sub(cost));
    for band in grade.band()..=NUM_GRADES as u8 {
        let covered: u64 = (0..NUM_SLOTS)
            .filter(|&k| pattern.covers(k))
            .map(|k| weight_of_deficit(state.deficit(k, band)))
            .sum();
        score += params.w_grade[band as usize - 1] * covered;
    }
    score
}

/// Feasible pattern with the highest [`contribution_score`]; the first of
/// several best-scoring patterns wins.
pub fn rule_contribution(
    instance: &SchedulingInstance,
    nurse: usize,
    state: &CoverageState,
    params: &RuleParams,
) -> usize {
    argmax_first(instance.feasible_set(nurse), |j| {
        contribution_score(instance, nurse, j, state, params)
    })
}

/// As [`rule_contribution`] but scored by [`enhanced_contribution_score`].
pub fn rule_enhanced_contribution(
    instance: &SchedulingInstance,
    nurse: usize,
    state: &CoverageState,
    params: &RuleParams,
) -> usize {
    argmax_first(instance.feasible_set(nurse), |j| {
        enhanced_contribution_score(instance, nurse, j, state, params)
    })
}

/// Feasible pattern reaching the single deepest per-slot shortfall at the
/// cascade band. Ties prefer the larger total [`cover_value`], then the
/// lower pattern index.
pub fn rule_highest_cover(
    instance: &SchedulingInstance,
    nurse: usize,
    state: &CoverageState,
) -> usize {
    let grade = instance.nurses[nurse].grade;
    let band = cascade_band(grade, state);
    let mut best: Option<(u64, u64, usize)> = None;
    for &j in instance.feasible_set(nurse) {
        let pattern = instance.pattern(j);
        let mut peak = 0u64;
        let mut total = 0u64;
        for k in (0..NUM_SLOTS).filter(|&k| pattern.covers(k)) {
            let deficit = state.deficit(k, band) as u64;
            peak = peak.max(deficit);
            total += deficit;
        }
        let better = match best {
            None => true,
            Some((bp, bt, bj)) => {
                peak > bp || (peak == bp && (total > bt || (total == bt && j < bj)))
            }
        };
        if better {
            best = Some((peak, total, j));
        }
    }
    best.expect("feasible set is non-empty").2
}

fn argmax_first(candidates: &[usize], score: impl Fn(usize) -> u64) -> usize {
    let mut best: Option<(u64, usize)> = None;
    for &j in candidates {
        let s = score(j);
        if best.is_none_or(|(bs, _)| s > bs) {
            best = Some((s, j));
        }
    }
    best.expect("feasible set is non-empty").1
}

fn expect_cost(instance: &SchedulingInstance, nurse: usize, pattern: usize) -> u32 {
    instance
        .preference_cost(nurse, pattern)
        .expect("valid instances cost every feasible pattern")
}

/// Apply one rule for one nurse against the current state. Only the
/// stochastic rules draw from `rng`.
pub fn apply_rule(
    rule: RuleId,
    instance: &SchedulingInstance,
    nurse: usize,
    state: &CoverageState,
    params: &RuleParams,
    rng: &mut impl Rng,
) -> usize {
    match rule {
        RuleId::Random => rule_random(instance, nurse, rng),
        RuleId::KCheapest => rule_k_cheapest(instance, nurse, params, rng),
        RuleId::OverallCover => rule_overall_cover(instance, nurse, state),
        RuleId::Contribution => rule_contribution(instance, nurse, state, params),
        RuleId::HighestCover => rule_highest_cover(instance, nurse, state),
        RuleId::EnhancedContribution => {
            rule_enhanced_contribution(instance, nurse, state, params)
        }
    }
}

/// Decode a rule string into a schedule, nurse by nurse in instance order.
/// Each chosen assignment is committed to the coverage state before the
/// next nurse's rule runs.
pub fn decode(
    instance: &SchedulingInstance,
    rule_string: &RuleString,
    params: &RuleParams,
    rng: &mut impl Rng,
) -> Schedule {
    assert_eq!(
        rule_string.len(),
        instance.num_nurses(),
        "rule string length must equal the nurse count"
    );
    let mut state = CoverageState::empty(instance);
    let mut assignment = Vec::with_capacity(instance.num_nurses());
    for (nurse, &rule) in rule_string.rules().iter().enumerate() {
        let j = apply_rule(rule, instance, nurse, &state, params, rng);
        state.apply(instance.nurses[nurse].grade, instance.pattern(j));
        assignment.push(j);
    }
    Schedule::new(assignment)
}
