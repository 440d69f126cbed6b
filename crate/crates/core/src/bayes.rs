//! Chain-structured probabilistic model over rule strings.
//!
//! Learning is frequency counting: the first position gets a marginal over
//! rules, every later position a conditional table keyed on the previous
//! position's rule. Counts are kept as exact integers and probabilities as
//! integer fractions, so tests can compare fractions instead of floats and
//! sampling can run entirely on integer roulette wheels. The structure is a
//! fixed chain over the nurse order; nothing is smoothed, so a transition
//! never seen in training keeps probability exactly zero.

use std::fmt;

use rand::Rng;
use thiserror::Error;

use crate::rules::{RuleSet, RuleString};

/// Exact probability as kept by the model: `numerator / denominator`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Fraction {
    pub numerator: u64,
    pub denominator: u64,
}

impl Fraction {
    pub fn new(numerator: u64, denominator: u64) -> Self {
        Fraction {
            numerator,
            denominator,
        }
    }

    pub fn value(self) -> f64 {
        self.numerator as f64 / self.denominator as f64
    }

    /// Lowest terms, with zero canonicalized to 0/1.
    pub fn reduced(self) -> Self {
        if self.numerator == 0 {
            return Fraction::new(0, 1);
        }
        let g = gcd(self.numerator, self.denominator);
        Fraction::new(self.numerator / g, self.denominator / g)
    }
}

impl fmt::Display for Fraction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.numerator, self.denominator)
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// 256-level gray for a probability: 0 maps to 0, 1 to 255, 0.5 to 128
/// (rounding half up, in exact integer arithmetic).
pub fn gray_level(probability: Fraction) -> u8 {
    assert!(probability.denominator > 0, "gray of an empty fraction");
    let num = probability.numerator;
    let den = probability.denominator;
    debug_assert!(num <= den, "probability above one");
    ((510 * num + den) / (2 * den)) as u8
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ModelError {
    #[error("cannot learn from an empty training set")]
    EmptyTrainingSet,
    #[error("training string {index} has length {found}, expected {expected}")]
    RaggedLengths {
        index: usize,
        expected: usize,
        found: usize,
    },
    #[error("training string {index} uses a rule outside the active set")]
    ForeignRule { index: usize },
    #[error("count table has the wrong shape: {0}")]
    ShapeMismatch(String),
    #[error("position {position} counts total {found}, expected {expected}")]
    TotalMismatch {
        position: usize,
        expected: u64,
        found: u64,
    },
}

/// Raw tallies over a training set of equal-length rule strings.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountModel {
    rule_set: RuleSet,
    positions: usize,
    training_count: u64,
    /// Per rule: how many strings start with it.
    first: Vec<u64>,
    /// `trans[i][j][j']`: strings with rule `j` at position `i` and rule
    /// `j'` at position `i + 1`.
    trans: Vec<Vec<Vec<u64>>>,
}

impl CountModel {
    pub fn rule_set(&self) -> &RuleSet {
        &self.rule_set
    }

    pub fn positions(&self) -> usize {
        self.positions
    }

    pub fn training_count(&self) -> u64 {
        self.training_count
    }

    pub fn first_count(&self, rule: usize) -> u64 {
        self.first[rule]
    }

    pub fn transition_count(&self, position: usize, parent: usize, child: usize) -> u64 {
        self.trans[position][parent][child]
    }

    /// Build a model from externally tallied counts. Every position's
    /// table must account for the same number of training strings.
    pub fn from_counts(
        rule_set: RuleSet,
        first: Vec<u64>,
        trans: Vec<Vec<Vec<u64>>>,
    ) -> Result<Self, ModelError> {
        let k = rule_set.len();
        if first.len() != k {
            return Err(ModelError::ShapeMismatch(format!(
                "first-position table has {} rules, rule set has {k}",
                first.len()
            )));
        }
        for (i, table) in trans.iter().enumerate() {
            if table.len() != k || table.iter().any(|row| row.len() != k) {
                return Err(ModelError::ShapeMismatch(format!(
                    "transition table {i} is not {k}x{k}"
                )));
            }
        }
        let training_count: u64 = first.iter().sum();
        if training_count == 0 {
            return Err(ModelError::EmptyTrainingSet);
        }
        for (i, table) in trans.iter().enumerate() {
            let total: u64 = table.iter().flatten().sum();
            if total != training_count {
                return Err(ModelError::TotalMismatch {
                    position: i,
                    expected: training_count,
                    found: total,
                });
            }
        }
        Ok(CountModel {
            rule_set,
            positions: trans.len() + 1,
            training_count,
            first,
            trans,
        })
    }
}

/// Tally first-position and transition counts over the training strings.
/// All strings must share one length of at least 1 and stay within the
/// rule set. Pure: the result depends only on the multiset of strings.
pub fn count(rule_set: &RuleSet, strings: &[RuleString]) -> Result<CountModel, ModelError> {
    let Some(head) = strings.first() else {
        return Err(ModelError::EmptyTrainingSet);
    };
    let positions = head.len();
    if positions == 0 {
        return Err(ModelError::EmptyTrainingSet);
    }
    let k = rule_set.len();
    let mut first = vec![0u64; k];
    let mut trans = vec![vec![vec![0u64; k]; k]; positions - 1];
    for (index, string) in strings.iter().enumerate() {
        if string.len() != positions {
            return Err(ModelError::RaggedLengths {
                index,
                expected: positions,
                found: string.len(),
            });
        }
        let indices: Vec<usize> = string
            .rules()
            .iter()
            .map(|&r| rule_set.index_of(r).ok_or(ModelError::ForeignRule { index }))
            .collect::<Result<_, _>>()?;
        first[indices[0]] += 1;
        for (i, pair) in indices.windows(2).enumerate() {
            trans[i][pair[0]][pair[1]] += 1;
        }
    }
    Ok(CountModel {
        rule_set: rule_set.clone(),
        positions,
        training_count: strings.len() as u64,
        first,
        trans,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum TransitionRow {
    Observed(Vec<Fraction>),
    /// The parent rule never appeared at this position in training;
    /// sampling falls back to a uniform pick.
    Unobserved,
}

/// Normalized model: a marginal for the first position, a conditional row
/// per (position, parent rule) after that.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProbabilityModel {
    rule_set: RuleSet,
    positions: usize,
    first: Vec<Fraction>,
    rows: Vec<Vec<TransitionRow>>,
}

/// Turn counts into row-normalized probabilities. Rows that saw support
/// divide by their row sum; unseen parent rows are flagged for the uniform
/// fallback rather than smoothed.
pub fn normalize(counts: &CountModel) -> ProbabilityModel {
    let first = counts
        .first
        .iter()
        .map(|&c| Fraction::new(c, counts.training_count))
        .collect();
    let rows = counts
        .trans
        .iter()
        .map(|table| {
            table
                .iter()
                .map(|row| {
                    let total: u64 = row.iter().sum();
                    if total == 0 {
                        TransitionRow::Unobserved
                    } else {
                        TransitionRow::Observed(
                            row.iter().map(|&c| Fraction::new(c, total)).collect(),
                        )
                    }
                })
                .collect()
        })
        .collect();
    ProbabilityModel {
        rule_set: counts.rule_set.clone(),
        positions: counts.positions,
        first,
        rows,
    }
}

impl ProbabilityModel {
    pub fn rule_set(&self) -> &RuleSet {
        &self.rule_set
    }

    pub fn positions(&self) -> usize {
        self.positions
    }

    pub fn first_probability(&self, rule: usize) -> Fraction {
        self.first[rule]
    }

    /// Conditional probability of `child` following `parent` between
    /// `position` and `position + 1`. Fallback rows are uniform.
    pub fn transition_probability(&self, position: usize, parent: usize, child: usize) -> Fraction {
        match &self.rows[position][parent] {
            TransitionRow::Observed(row) => row[child],
            TransitionRow::Unobserved => Fraction::new(1, self.rule_set.len() as u64),
        }
    }

    pub fn is_fallback_row(&self, position: usize, parent: usize) -> bool {
        matches!(self.rows[position][parent], TransitionRow::Unobserved)
    }

    /// Draw a rule string by one roulette spin per position: the first
    /// position from the marginal, each later one from its parent's row.
    /// The wheels run on the exact integer counts, so a zero-count
    /// transition is never produced.
    pub fn sample(&self, rng: &mut impl Rng) -> RuleString {
        let mut rules = Vec::with_capacity(self.positions);
        let mut previous = spin(self.first.iter().map(|f| f.numerator), rng);
        rules.push(self.rule_set.get(previous));
        for position in 0..self.positions - 1 {
            let next = match &self.rows[position][previous] {
                TransitionRow::Observed(row) => spin(row.iter().map(|f| f.numerator), rng),
                TransitionRow::Unobserved => rng.gen_range(0..self.rule_set.len()),
            };
            rules.push(self.rule_set.get(next));
            previous = next;
        }
        RuleString::new(rules)
    }

    /// Every probability in the model, position-major, parents in rule
    /// order: the export table behind the probability dumps.
    pub fn entries(&self) -> Vec<ProbabilityEntry> {
        let k = self.rule_set.len();
        let mut out = Vec::with_capacity(k + (self.positions - 1) * k * k);
        for (rule, &fraction) in self.first.iter().enumerate() {
            out.push(ProbabilityEntry {
                position: 0,
                parent: None,
                rule,
                count: fraction,
                probability: fraction,
            });
        }
        for (position, table) in self.rows.iter().enumerate() {
            for (parent, row) in table.iter().enumerate() {
                for rule in 0..k {
                    let (count, probability) = match row {
                        TransitionRow::Observed(fractions) => (fractions[rule], fractions[rule]),
                        TransitionRow::Unobserved => {
                            (Fraction::new(0, 0), Fraction::new(1, k as u64))
                        }
                    };
                    out.push(ProbabilityEntry {
                        position: position + 1,
                        parent: Some(parent),
                        rule,
                        count,
                        probability,
                    });
                }
            }
        }
        out
    }
}

/// One cumulative-sum inversion of a single uniform integer draw.
fn spin(weights: impl Iterator<Item = u64> + Clone, rng: &mut impl Rng) -> usize {
    let total: u64 = weights.clone().sum();
    debug_assert!(total > 0, "roulette wheel with no mass");
    let mut x = rng.gen_range(0..total);
    for (index, w) in weights.enumerate() {
        if x < w {
            return index;
        }
        x -= w;
    }
    unreachable!("draw below total mass always lands")
}

/// One row of the probability dump. `parent` is `None` for first-position
/// marginals. `count` is 0/0 on fallback rows, where `probability` is the
/// uniform value used at sampling time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProbabilityEntry {
    pub position: usize,
    pub parent: Option<usize>,
    pub rule: usize,
    pub count: Fraction,
    pub probability: Fraction,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rules::RuleId;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::HashMap;

    fn three_rules() -> RuleSet {
        RuleSet::new(vec![RuleId::Random, RuleId::KCheapest, RuleId::OverallCover]).unwrap()
    }

    fn string_of(indices: &[usize], set: &RuleSet) -> RuleString {
        RuleString::new(indices.iter().map(|&i| set.get(i)).collect())
    }

    /// Hand-tallied three-nurse, three-rule table used across these tests:
    /// 15/20/15 starts, transitions (10,2,3 / 5,11,4 / 7,5,3) then
    /// (7,9,3 / 11,1,5 / 10,4,0).
    fn worked_example_counts() -> CountModel {
        CountModel::from_counts(
            three_rules(),
            vec![15, 20, 15],
            vec![
                vec![vec![10, 2, 3], vec![5, 11, 4], vec![7, 5, 3]],
                vec![vec![7, 9, 3], vec![11, 1, 5], vec![10, 4, 0]],
            ],
        )
        .unwrap()
    }

    #[test]
    fn single_string_counts_one_start_and_one_transition() {
        let set = three_rules();
        let model = count(&set, &[string_of(&[0, 1], &set)]).unwrap();
        assert_eq!(model.first_count(0), 1);
        assert_eq!(model.first_count(1), 0);
        assert_eq!(model.transition_count(0, 0, 1), 1);
        let others: u64 = (0..3)
            .flat_map(|a| (0..3).map(move |b| (a, b)))
            .filter(|&(a, b)| (a, b) != (0, 1))
            .map(|(a, b)| model.transition_count(0, a, b))
            .sum();
        assert_eq!(others, 0);
    }

    #[test]
    fn counting_matches_a_hash_map_tally() {
        let set = three_rules();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let strings: Vec<RuleString> = (0..100)
            .map(|_| {
                string_of(
                    &(0..5).map(|_| rng.gen_range(0..3)).collect::<Vec<_>>(),
                    &set,
                )
            })
            .collect();
        let model = count(&set, &strings).unwrap();

        let mut first_tally: HashMap<usize, u64> = HashMap::new();
        let mut pair_tally: HashMap<(usize, usize, usize), u64> = HashMap::new();
        for s in &strings {
            let idx: Vec<usize> = s.rules().iter().map(|&r| set.index_of(r).unwrap()).collect();
            *first_tally.entry(idx[0]).or_default() += 1;
            for (i, w) in idx.windows(2).enumerate() {
                *pair_tally.entry((i, w[0], w[1])).or_default() += 1;
            }
        }
        for j in 0..3 {
            assert_eq!(model.first_count(j), first_tally.get(&j).copied().unwrap_or(0));
        }
        for i in 0..4 {
            for a in 0..3 {
                for b in 0..3 {
                    assert_eq!(
                        model.transition_count(i, a, b),
                        pair_tally.get(&(i, a, b)).copied().unwrap_or(0)
                    );
                }
            }
        }
    }

    #[test]
    fn counting_is_order_invariant() {
        let set = three_rules();
        let strings = vec![
            string_of(&[0, 1, 2], &set),
            string_of(&[2, 2, 0], &set),
            string_of(&[1, 0, 1], &set),
        ];
        let mut reversed = strings.clone();
        reversed.reverse();
        assert_eq!(count(&set, &strings).unwrap(), count(&set, &reversed).unwrap());
    }

    #[test]
    fn empty_and_ragged_training_sets_are_rejected() {
        let set = three_rules();
        assert_eq!(count(&set, &[]).unwrap_err(), ModelError::EmptyTrainingSet);
        let ragged = vec![string_of(&[0, 1], &set), string_of(&[0], &set)];
        assert_eq!(
            count(&set, &ragged).unwrap_err(),
            ModelError::RaggedLengths {
                index: 1,
                expected: 2,
                found: 1
            }
        );
    }

    #[test]
    fn normalization_reproduces_the_worked_fractions() {
        let model = normalize(&worked_example_counts());
        assert_eq!(model.first_probability(0), Fraction::new(15, 50));
        assert_eq!(model.first_probability(1), Fraction::new(20, 50));
        assert_eq!(model.first_probability(2), Fraction::new(15, 50));
        assert_eq!(model.transition_probability(0, 0, 0), Fraction::new(10, 15));
        assert_eq!(model.transition_probability(0, 0, 1), Fraction::new(2, 15));
        assert_eq!(model.transition_probability(0, 0, 2), Fraction::new(3, 15));
        assert_eq!(model.transition_probability(0, 1, 0), Fraction::new(5, 20));
        assert_eq!(model.transition_probability(1, 1, 0), Fraction::new(11, 17));
        assert_eq!(model.transition_probability(1, 2, 2), Fraction::new(0, 14));
    }

    #[test]
    fn zero_support_rows_fall_back_to_uniform() {
        let set = RuleSet::default_four();
        let counts = CountModel::from_counts(
            set,
            vec![4, 0, 0, 0],
            vec![vec![
                vec![0, 4, 0, 0],
                vec![0, 0, 0, 0],
                vec![0, 0, 0, 0],
                vec![0, 0, 0, 0],
            ]],
        )
        .unwrap();
        let model = normalize(&counts);
        assert!(model.is_fallback_row(0, 2));
        assert!(!model.is_fallback_row(0, 0));
        assert_eq!(model.transition_probability(0, 2, 1), Fraction::new(1, 4));
    }

    #[test]
    fn reachable_fallback_rows_sample_uniformly() {
        // Layer totals agree (2 each) yet the rule-1 row at the last hop is
        // empty, so sampling position 2 is a uniform coin.
        let set = RuleSet::new(vec![RuleId::Random, RuleId::KCheapest]).unwrap();
        let counts = CountModel::from_counts(
            set,
            vec![2, 0],
            vec![
                vec![vec![0, 2], vec![0, 0]],
                vec![vec![2, 0], vec![0, 0]],
            ],
        )
        .unwrap();
        let model = normalize(&counts);
        assert!(model.is_fallback_row(1, 1));
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut last_is_kcheapest = 0u64;
        let draws = 10_000;
        for _ in 0..draws {
            let s = model.sample(&mut rng);
            assert_eq!(s.rules()[0], RuleId::Random);
            assert_eq!(s.rules()[1], RuleId::KCheapest);
            if s.rules()[2] == RuleId::KCheapest {
                last_is_kcheapest += 1;
            }
        }
        let mean = draws as f64 * 0.5;
        let sigma = (draws as f64 * 0.25).sqrt();
        assert!((last_is_kcheapest as f64 - mean).abs() <= 5.0 * sigma);
    }

    #[test]
    fn degenerate_distributions_sample_deterministically() {
        let set = three_rules();
        let counts = CountModel::from_counts(
            set.clone(),
            vec![5, 0, 0],
            vec![vec![vec![0, 5, 0], vec![0, 0, 0], vec![0, 0, 0]]],
        )
        .unwrap();
        let model = normalize(&counts);
        for seed in 0..10 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            assert_eq!(model.sample(&mut rng), string_of(&[0, 1], &set));
        }
    }

    #[test]
    fn sampling_frequencies_match_the_model_within_5_sigma() {
        let model = normalize(&worked_example_counts());
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let samples = 100_000usize;
        let mut first_is_rule1 = 0u64;
        for _ in 0..samples {
            let s = model.sample(&mut rng);
            let idx = model.rule_set().index_of(s.rules()[0]).unwrap();
            if idx == 1 {
                first_is_rule1 += 1;
            }
            // The 0/14 transition can never appear.
            let mid = model.rule_set().index_of(s.rules()[1]).unwrap();
            let last = model.rule_set().index_of(s.rules()[2]).unwrap();
            assert!(!(mid == 2 && last == 2), "sampled a zero-probability edge");
        }
        let p = 0.4;
        let mean = samples as f64 * p;
        let sigma = (samples as f64 * p * (1.0 - p)).sqrt();
        assert!(
            (first_is_rule1 as f64 - mean).abs() <= 5.0 * sigma,
            "{first_is_rule1} starts with rule 1, expected about {mean:.0}"
        );
    }

    #[test]
    fn duplicating_the_training_set_preserves_probabilities() {
        let set = three_rules();
        let strings = vec![
            string_of(&[0, 1, 2], &set),
            string_of(&[1, 1, 0], &set),
            string_of(&[0, 2, 2], &set),
        ];
        let mut tripled = Vec::new();
        for _ in 0..3 {
            tripled.extend(strings.iter().cloned());
        }
        let once = normalize(&count(&set, &strings).unwrap());
        let thrice = normalize(&count(&set, &tripled).unwrap());
        for j in 0..3 {
            assert_eq!(
                once.first_probability(j).reduced(),
                thrice.first_probability(j).reduced()
            );
        }
        for pos in 0..2 {
            for a in 0..3 {
                assert_eq!(once.is_fallback_row(pos, a), thrice.is_fallback_row(pos, a));
                for b in 0..3 {
                    assert_eq!(
                        once.transition_probability(pos, a, b).reduced(),
                        thrice.transition_probability(pos, a, b).reduced()
                    );
                }
            }
        }
    }

    #[test]
    fn export_covers_every_node_and_edge_once() {
        let model = normalize(&worked_example_counts());
        let entries = model.entries();
        assert_eq!(entries.len(), 3 + 2 * 9);
        assert_eq!(entries[0].position, 0);
        assert_eq!(entries[0].parent, None);
        let p21_given_11 = entries
            .iter()
            .find(|e| e.position == 1 && e.parent == Some(0) && e.rule == 0)
            .unwrap();
        assert_eq!(p21_given_11.probability, Fraction::new(10, 15));
    }

    #[test]
    fn gray_levels_hit_the_stated_anchors() {
        assert_eq!(gray_level(Fraction::new(1, 2)), 128);
        assert_eq!(gray_level(Fraction::new(0, 7)), 0);
        assert_eq!(gray_level(Fraction::new(7, 7)), 255);
        assert_eq!(gray_level(Fraction::new(1, 4)), 64);
        assert_eq!(gray_level(Fraction::new(1, 3)), 85);
    }

    #[test]
    fn from_counts_rejects_mismatched_totals() {
        let set = three_rules();
        let err = CountModel::from_counts(
            set,
            vec![2, 0, 0],
            vec![vec![vec![1, 0, 0], vec![0, 0, 0], vec![0, 0, 0]]],
        )
        .unwrap_err();
        assert_eq!(
            err,
            ModelError::TotalMismatch {
                position: 0,
                expected: 2,
                found: 1
            }
        );
    }
}
