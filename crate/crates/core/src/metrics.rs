//! Answer equivalence, probe classification and aggregate statistics.

use std::collections::{BTreeMap, BTreeSet};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backends::parse_numeric_answer;
use crate::funql::{extract_funql, FunQlTree};
use crate::prompt::{parse_choice_answer, Label};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("no records to aggregate")]
    EmptyInput,
    #[error("edit distance between two empty strings is undefined")]
    BothEmpty,
}

/// Which notion of "same answer" applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Equivalence {
    /// Exact rationals; decimals agree with a fraction to 1e-9.
    Numeric,
    FunQlTree,
    ChoiceLetter,
}

/// The comparison key a string reduces to. Two strings are equivalent iff
/// their keys are equal, which makes every kind an equivalence relation.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Canonical {
    /// Value rounded to the nearest multiple of 1e-9 (ties away from zero), scaled by 1e9.
    Number(BigInt),
    Tree(String),
    Letter(Label),
    /// Fallback for strings outside the kind's domain: trimmed text.
    Text(String),
}

impl Equivalence {
    pub fn canonical(self, s: &str) -> Canonical {
        match self {
            Equivalence::Numeric => {
                let first = first_line(s);
                match parse_numeric_answer(first) {
                    Some(v) => Canonical::Number(grid_round(&v)),
                    None => Canonical::Text(first.to_string()),
                }
            }
            Equivalence::FunQlTree => match extract_funql(s) {
                Ok(t) => Canonical::Tree(t.render()),
                Err(_) => Canonical::Text(s.trim().to_string()),
            },
            Equivalence::ChoiceLetter => match parse_choice_answer(s, None) {
                Some(l) => Canonical::Letter(l),
                None => Canonical::Text(s.trim().to_string()),
            },
        }
    }

    pub fn equivalent(self, a: &str, b: &str) -> bool {
        self.canonical(a) == self.canonical(b)
    }
}

/// Arithmetic completions are read up to the first newline.
pub fn first_line(s: &str) -> &str {
    s.trim_start().lines().next().unwrap_or("").trim()
}

fn grid_round(v: &BigRational) -> BigInt {
    let scaled = v * BigRational::from_integer(BigInt::from(1_000_000_000u64));
    let half = BigRational::new(BigInt::one(), BigInt::from(2));
    if scaled >= BigRational::zero() {
        (scaled + half).floor().to_integer()
    } else {
        (scaled - half).ceil().to_integer()
    }
}

/// Whether a numeric completion is the exact value.
pub fn numeric_correct(completion: &str, value: &BigRational) -> bool {
    Equivalence::Numeric.canonical(completion) == Canonical::Number(grid_round(value))
}

/// The four cases of a compositional probe.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CcOutcome {
    Consistent,
    InconsistentSubWrongRootSame,
    InconsistentSubRightRootDiffers,
    /// Sub-answer wrong and root answers differ: neither consistent nor inconsistent.
    Undefined,
}

impl CcOutcome {
    pub const ALL: [CcOutcome; 4] = [
        CcOutcome::Consistent,
        CcOutcome::InconsistentSubWrongRootSame,
        CcOutcome::InconsistentSubRightRootDiffers,
        CcOutcome::Undefined,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CcOutcome::Consistent => "consistent",
            CcOutcome::InconsistentSubWrongRootSame => "sub_wrong_root_same",
            CcOutcome::InconsistentSubRightRootDiffers => "sub_right_root_differs",
            CcOutcome::Undefined => "undefined",
        }
    }
}

pub fn classify_compositional(sub_correct: bool, root_match: bool) -> CcOutcome {
    match (sub_correct, root_match) {
        (true, true) => CcOutcome::Consistent,
        (false, true) => CcOutcome::InconsistentSubWrongRootSame,
        (true, false) => CcOutcome::InconsistentSubRightRootDiffers,
        (false, false) => CcOutcome::Undefined,
    }
}

/// Arithmetic probe judgement: is the sub-answer the exact value, and do the
/// root answers before and after splicing agree?
pub fn arith_probe(
    sub_value: &BigRational,
    sub_completion: &str,
    root: &str,
    spliced_root: Option<&str>,
) -> (bool, bool) {
    let sub_correct = numeric_correct(sub_completion, sub_value);
    let root_match = spliced_root.is_some_and(|s| Equivalence::Numeric.equivalent(root, s));
    (sub_correct, root_match)
}

/// GeoQuery probe judgement: the sub-parse must equal gold, and the
/// model's sub-parse must sit inside its own root parse.
pub fn geo_probe(
    gold_sub: &FunQlTree,
    sub_completion: &str,
    root_completion: &str,
) -> (bool, bool) {
    let sub = extract_funql(sub_completion).ok();
    let root = extract_funql(root_completion).ok();
    let sub_correct = sub.as_ref() == Some(gold_sub);
    let contained = match (&root, &sub) {
        (Some(r), Some(s)) => r.contains_subparse(s),
        _ => false,
    };
    (sub_correct, contained)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TaskKind {
    HypotheticalText,
    HypotheticalDialog,
    CompArith,
    CompGeo,
}

impl TaskKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TaskKind::HypotheticalText => "hypothetical-text",
            TaskKind::HypotheticalDialog => "hypothetical-dialog",
            TaskKind::CompArith => "comp-arith",
            TaskKind::CompGeo => "comp-geo",
        }
    }

    pub fn is_hypothetical(self) -> bool {
        matches!(
            self,
            TaskKind::HypotheticalText | TaskKind::HypotheticalDialog
        )
    }
}

/// One evaluated probe.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConsistencyRecord {
    pub task: TaskKind,
    /// Source item (document, dialog, expression or example).
    pub item: String,
    pub probe: String,
    pub model: String,
    pub k: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub template: Option<u8>,
    /// Selected letter; `None` when the answer was unparseable.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chosen: Option<Label>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub own: Option<Label>,
    /// Provenance of the selected choice ("dataset" or a model name).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chosen_provenance: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outcome: Option<CcOutcome>,
    #[serde(default)]
    pub sub_correct: bool,
    #[serde(default)]
    pub root_match: bool,
    /// Whether the root prompt was answered correctly (arithmetic only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub root_correct: Option<bool>,
}

impl ConsistencyRecord {
    #[allow(clippy::too_many_arguments)]
    pub fn hypothetical(
        task: TaskKind,
        item: &str,
        model: &str,
        k: usize,
        m: usize,
        template: u8,
        chosen: Option<Label>,
        own: Label,
        chosen_provenance: Option<String>,
    ) -> Self {
        ConsistencyRecord {
            task,
            item: item.to_string(),
            probe: format!("{item}/m{m}/t{template}/k{k}"),
            model: model.to_string(),
            k,
            m: Some(m),
            template: Some(template),
            chosen,
            own: Some(own),
            chosen_provenance,
            outcome: None,
            sub_correct: false,
            root_match: false,
            root_correct: None,
        }
    }

    #[allow(clippy::too_many_arguments)]
    pub fn compositional(
        task: TaskKind,
        item: &str,
        probe: &str,
        model: &str,
        k: usize,
        sub_correct: bool,
        root_match: bool,
        root_correct: Option<bool>,
    ) -> Self {
        ConsistencyRecord {
            task,
            item: item.to_string(),
            probe: format!("{item}/{probe}/k{k}"),
            model: model.to_string(),
            k,
            m: None,
            template: None,
            chosen: None,
            own: None,
            chosen_provenance: None,
            outcome: Some(classify_compositional(sub_correct, root_match)),
            sub_correct,
            root_match,
            root_correct,
        }
    }
}

/// A proportion with its exact integer parts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Rate {
    pub numerator: u64,
    pub denominator: u64,
}

impl Rate {
    pub fn new(numerator: u64, denominator: u64) -> Self {
        Rate {
            numerator,
            denominator,
        }
    }

    pub fn value(&self) -> f64 {
        if self.denominator == 0 {
            0.0
        } else {
            self.numerator as f64 / self.denominator as f64
        }
    }

    fn count<T>(items: &[T], hit: impl Fn(&T) -> bool) -> Result<Rate, MetricsError> {
        if items.is_empty() {
            return Err(MetricsError::EmptyInput);
        }
        let n = items.iter().filter(|x| hit(x)).count();
        Ok(Rate::new(n as u64, items.len() as u64))
    }
}

/// Counts per compositional outcome.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Breakdown(pub BTreeMap<CcOutcome, u64>);

impl Breakdown {
    pub fn get(&self, o: CcOutcome) -> u64 {
        self.0.get(&o).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.0.values().sum()
    }
}

fn outcome_of(r: &ConsistencyRecord) -> CcOutcome {
    r.outcome
        .unwrap_or_else(|| classify_compositional(r.sub_correct, r.root_match))
}

/// Strict rate: consistent probes over all probes, plus the four-way breakdown.
pub fn compositional_rate(
    records: &[ConsistencyRecord],
) -> Result<(Rate, Breakdown), MetricsError> {
    let rate = Rate::count(records, |r| outcome_of(r) == CcOutcome::Consistent)?;
    let mut b = Breakdown::default();
    for r in records {
        *b.0.entry(outcome_of(r)).or_insert(0) += 1;
    }
    Ok((rate, b))
}

/// GeoQuery rate: sub-parse exactly right and contained in the model's root parse.
/// Unparseable completions already carry `false` in both fields.
pub fn geoquery_rate(records: &[ConsistencyRecord]) -> Result<Rate, MetricsError> {
    Rate::count(records, |r| r.sub_correct && r.root_match)
}

/// Own-choice accuracy. Unparseable answers count as misses.
pub fn hypothetical_accuracy(records: &[ConsistencyRecord]) -> Result<Rate, MetricsError> {
    Rate::count(records, |r| r.chosen.is_some() && r.chosen == r.own)
}

/// How often each provenance was selected, over parseable answers only.
pub fn choice_distribution(
    records: &[ConsistencyRecord],
) -> Result<(BTreeMap<String, u64>, u64), MetricsError> {
    if records.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let mut counts = BTreeMap::new();
    let mut total = 0;
    for r in records {
        if let (Some(_), Some(p)) = (r.chosen, &r.chosen_provenance) {
            *counts.entry(p.clone()).or_insert(0) += 1;
            total += 1;
        }
    }
    Ok((counts, total))
}

/// Character-level Levenshtein distance as a percentage of the longer string.
pub fn percent_edit_distance(a: &str, b: &str) -> Result<f64, MetricsError> {
    let longest = a.chars().count().max(b.chars().count());
    if longest == 0 {
        return Err(MetricsError::BothEmpty);
    }
    Ok(strsim::levenshtein(a, b) as f64 / longest as f64 * 100.0)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrectnessPoint {
    pub k: usize,
    pub correctness: Rate,
    pub consistency: Rate,
}

/// Per-k root correctness against compositional consistency. Correctness is
/// counted once per root item; records without a correctness verdict
/// (non-arithmetic) are ignored.
pub fn correctness_vs_consistency(records: &[ConsistencyRecord]) -> Vec<CorrectnessPoint> {
    let mut by_k: BTreeMap<usize, Vec<&ConsistencyRecord>> = BTreeMap::new();
    for r in records.iter().filter(|r| r.root_correct.is_some()) {
        by_k.entry(r.k).or_default().push(r);
    }
    by_k.into_iter()
        .map(|(k, rs)| {
            let mut roots: BTreeMap<&str, bool> = BTreeMap::new();
            for r in &rs {
                roots.insert(&r.item, r.root_correct == Some(true));
            }
            let correct = roots.values().filter(|&&c| c).count() as u64;
            let consistent = rs
                .iter()
                .filter(|r| outcome_of(r) == CcOutcome::Consistent)
                .count() as u64;
            CorrectnessPoint {
                k,
                correctness: Rate::new(correct, roots.len() as u64),
                consistency: Rate::new(consistent, rs.len() as u64),
            }
        })
        .collect()
}

/// Distinct item ids, in sorted order.
pub fn items(records: &[ConsistencyRecord]) -> BTreeSet<&str> {
    records.iter().map(|r| r.item.as_str()).collect()
}
