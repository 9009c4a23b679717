//! Five-way multiple-choice sets and answer-letter extraction.

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use rand::seq::{index, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::truncate_words;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    A,
    B,
    C,
    D,
    E,
}

impl Label {
    pub const ALL: [Label; 5] = [Label::A, Label::B, Label::C, Label::D, Label::E];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_char(c: char) -> Option<Self> {
        match c.to_ascii_uppercase() {
            'A' => Some(Label::A),
            'B' => Some(Label::B),
            'C' => Some(Label::C),
            'D' => Some(Label::D),
            'E' => Some(Label::E),
            _ => None,
        }
    }

    pub fn as_char(self) -> char {
        (b'A' + self as u8) as char
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_char())
    }
}

/// Where an answer choice's text came from.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    DatasetContinuation,
    Model(String),
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Provenance::DatasetContinuation => f.write_str("dataset"),
            Provenance::Model(id) => f.write_str(id),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Choice {
    pub label: Label,
    pub text: String,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ChoiceError {
    #[error("need at least 4 model completions, got {0}")]
    InsufficientModels(usize),
    #[error("subject model {0:?} has no completion")]
    MissingSubject(String),
    #[error("dataset continuation is empty")]
    EmptyContinuation,
    #[error("malformed choice set: {0}")]
    Malformed(String),
}

/// Why a candidate set was dropped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Rejection {
    DuplicateText,
    EmptyText,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ChoiceOutcome {
    Accepted(ChoiceSet),
    Rejected(Rejection),
}

/// Exactly five labeled, pairwise-distinct choices: one dataset continuation,
/// the subject model's completion, and three other models' completions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChoiceSet {
    choices: Vec<Choice>,
    m: usize,
    subject: String,
}

impl ChoiceSet {
    pub fn from_parts(
        choices: Vec<Choice>,
        m: usize,
        subject: String,
    ) -> Result<Self, ChoiceError> {
        if choices.len() != 5 {
            return Err(ChoiceError::Malformed(format!("{} choices", choices.len())));
        }
        if choices.iter().zip(Label::ALL).any(|(c, l)| c.label != l) {
            return Err(ChoiceError::Malformed("labels out of order".into()));
        }
        let distinct: HashSet<_> = choices.iter().map(|c| c.text.as_str()).collect();
        if distinct.len() != 5 || choices.iter().any(|c| c.text.is_empty()) {
            return Err(ChoiceError::Malformed(
                "texts not distinct and non-empty".into(),
            ));
        }
        let datasets = choices
            .iter()
            .filter(|c| c.provenance == Provenance::DatasetContinuation)
            .count();
        let own = choices
            .iter()
            .filter(|c| c.provenance == Provenance::Model(subject.clone()))
            .count();
        if datasets != 1 || own != 1 {
            return Err(ChoiceError::Malformed("provenance counts".into()));
        }
        Ok(ChoiceSet {
            choices,
            m,
            subject,
        })
    }

    pub fn choices(&self) -> &[Choice] {
        &self.choices
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn subject(&self) -> &str {
        &self.subject
    }

    pub fn get(&self, label: Label) -> &Choice {
        &self.choices[label.index()]
    }

    /// Label of the subject model's own completion.
    pub fn own_label(&self) -> Label {
        self.choices
            .iter()
            .find(|c| matches!(&c.provenance, Provenance::Model(id) if *id == self.subject))
            .map(|c| c.label)
            .expect("validated: subject present")
    }

    /// `A) t1 B) t2 C) t3 D) t4 E) t5`
    pub fn render_block(&self) -> String {
        self.choices
            .iter()
            .map(|c| format!("{}) {}", c.label, c.text))
            .collect::<Vec<_>>()
            .join(" ")
    }
}

/// Builds a shuffled choice set from a dataset continuation and per-model
/// completions, all truncated to `m` words. When more than four models are
/// supplied, three non-subject models are sampled with `rng`.
pub fn build_choice_set<R: Rng + ?Sized>(
    dataset_cont: &str,
    completions: &BTreeMap<String, String>,
    subject: &str,
    m: usize,
    rng: &mut R,
) -> Result<ChoiceOutcome, ChoiceError> {
    if completions.len() < 4 {
        return Err(ChoiceError::InsufficientModels(completions.len()));
    }
    let own = completions
        .get(subject)
        .ok_or_else(|| ChoiceError::MissingSubject(subject.to_string()))?;
    if dataset_cont.trim().is_empty() {
        return Err(ChoiceError::EmptyContinuation);
    }

    let others: Vec<(&String, &String)> = completions
        .iter()
        .filter(|(id, _)| id.as_str() != subject)
        .collect();
    let picked: Vec<usize> = if others.len() == 3 {
        vec![0, 1, 2]
    } else {
        let mut idx = index::sample(rng, others.len(), 3).into_vec();
        idx.sort_unstable();
        idx
    };

    let mut candidates = vec![
        (
            truncate_words(dataset_cont, m),
            Provenance::DatasetContinuation,
        ),
        (
            truncate_words(own, m),
            Provenance::Model(subject.to_string()),
        ),
    ];
    for i in picked {
        let (id, text) = others[i];
        candidates.push((truncate_words(text, m), Provenance::Model(id.clone())));
    }

    if candidates.iter().any(|(t, _)| t.is_empty()) {
        return Ok(ChoiceOutcome::Rejected(Rejection::EmptyText));
    }
    let distinct: HashSet<_> = candidates.iter().map(|(t, _)| t.as_str()).collect();
    if distinct.len() != candidates.len() {
        return Ok(ChoiceOutcome::Rejected(Rejection::DuplicateText));
    }

    candidates.shuffle(rng);
    let choices = candidates
        .into_iter()
        .zip(Label::ALL)
        .map(|((text, provenance), label)| Choice {
            label,
            text,
            provenance,
        })
        .collect();
    ChoiceSet::from_parts(choices, m, subject.to_string()).map(ChoiceOutcome::Accepted)
}

/// Reads an answer letter out of a completion.
///
/// Accepts a leading `A`-`E` (either case) that stands alone or is followed
/// by `)`, `.`, `:` or whitespace. Failing that, a completion equal
/// (case-insensitively) to exactly one choice's text selects that choice.
pub fn parse_choice_answer(completion: &str, choices: Option<&ChoiceSet>) -> Option<Label> {
    let s = completion.trim();
    let mut chars = s.chars();
    if let Some(first) = chars.next() {
        if let Some(label) = Label::from_char(first) {
            match chars.next() {
                None => return Some(label),
                Some(c) if matches!(c, ')' | '.' | ':') || c.is_whitespace() => return Some(label),
                _ => {}
            }
        }
    }
    let choices = choices?;
    let lowered = s.to_lowercase();
    let mut hits = choices
        .choices()
        .iter()
        .filter(|c| c.text.to_lowercase() == lowered);
    match (hits.next(), hits.next()) {
        (Some(c), None) => Some(c.label),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn completions(texts: [(&str, &str); 4]) -> BTreeMap<String, String> {
        texts
            .iter()
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect()
    }

    #[test]
    fn accepts_distinct_one_word_choices() {
        let c = completions([
            ("s", "no way"),
            ("b", "maybe so"),
            ("c", "ok then"),
            ("d", "sure thing"),
        ]);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let ChoiceOutcome::Accepted(cs) =
            build_choice_set("yes indeed", &c, "s", 1, &mut rng).unwrap()
        else {
            panic!("expected accepted");
        };
        let mut texts: Vec<_> = cs.choices().iter().map(|c| c.text.clone()).collect();
        texts.sort();
        assert_eq!(texts, ["maybe", "no", "ok", "sure", "yes"]);
        assert_eq!(cs.get(cs.own_label()).text, "no");
    }

    #[test]
    fn duplicate_after_truncation_rejected() {
        let c = completions([("s", "the cat"), ("b", "a dog"), ("c", "one"), ("d", "two")]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let out = build_choice_set("the mouse", &c, "s", 1, &mut rng).unwrap();
        assert_eq!(out, ChoiceOutcome::Rejected(Rejection::DuplicateText));
        let out = build_choice_set("the mouse", &c, "s", 2, &mut rng).unwrap();
        assert!(matches!(out, ChoiceOutcome::Accepted(_)));
    }

    #[test]
    fn empty_completion_rejected() {
        let c = completions([("s", "   "), ("b", "a"), ("c", "b"), ("d", "c")]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let out = build_choice_set("x", &c, "s", 1, &mut rng).unwrap();
        assert_eq!(out, ChoiceOutcome::Rejected(Rejection::EmptyText));
    }

    #[test]
    fn build_errors() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let three: BTreeMap<_, _> = [("s", "a"), ("b", "b"), ("c", "c")]
            .iter()
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect();
        assert_eq!(
            build_choice_set("x", &three, "s", 1, &mut rng),
            Err(ChoiceError::InsufficientModels(3))
        );
        let c = completions([("s", "a"), ("b", "b"), ("c", "c"), ("d", "d")]);
        assert!(matches!(
            build_choice_set("x", &c, "zz", 1, &mut rng),
            Err(ChoiceError::MissingSubject(_))
        ));
        assert_eq!(
            build_choice_set(" ", &c, "s", 1, &mut rng),
            Err(ChoiceError::EmptyContinuation)
        );
    }

    #[test]
    fn label_order_depends_only_on_seed() {
        let c = completions([("s", "a"), ("b", "b"), ("c", "c"), ("d", "d")]);
        let run =
            |seed| build_choice_set("x", &c, "s", 1, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        assert_eq!(run(11), run(11));
    }

    #[test]
    fn extra_models_are_sampled_down() {
        let c: BTreeMap<String, String> =
            (0..7).map(|i| (format!("m{i}"), format!("w{i}"))).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let ChoiceOutcome::Accepted(cs) = build_choice_set("x", &c, "m3", 1, &mut rng).unwrap()
        else {
            panic!()
        };
        assert_eq!(cs.choices().len(), 5);
        assert_eq!(cs.get(cs.own_label()).text, "w3");
    }

    fn sample_set() -> ChoiceSet {
        let c = completions([
            ("s", "alpha"),
            ("b", "beta"),
            ("c", "gamma"),
            ("d", "delta"),
        ]);
        match build_choice_set("epsilon", &c, "s", 1, &mut ChaCha8Rng::seed_from_u64(1)).unwrap() {
            ChoiceOutcome::Accepted(cs) => cs,
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn parses_letters() {
        assert_eq!(parse_choice_answer(" B) the quick", None), Some(Label::B));
        assert_eq!(parse_choice_answer("e", None), Some(Label::E));
        assert_eq!(parse_choice_answer("C.", None), Some(Label::C));
        assert_eq!(parse_choice_answer("D: because", None), Some(Label::D));
        assert_eq!(
            parse_choice_answer("I think the answer is obvious", None),
            None
        );
        assert_eq!(parse_choice_answer("Z", None), None);
        assert_eq!(parse_choice_answer("Because", None), None);
        assert_eq!(parse_choice_answer("", None), None);
    }

    #[test]
    fn full_text_fallback_needs_unique_match() {
        let cs = sample_set();
        let gamma = cs
            .choices()
            .iter()
            .find(|c| c.text == "gamma")
            .unwrap()
            .label;
        assert_eq!(parse_choice_answer("GAMMA", Some(&cs)), Some(gamma));
        assert_eq!(parse_choice_answer("omega", Some(&cs)), None);
    }

    #[test]
    fn every_rendered_label_round_trips() {
        let cs = sample_set();
        for c in cs.choices() {
            let rendered = format!("{}) {}", c.label, c.text);
            assert_eq!(parse_choice_answer(&rendered, Some(&cs)), Some(c.label));
        }
    }

    #[test]
    fn from_parts_validates() {
        let cs = sample_set();
        let mut bad = cs.choices().to_vec();
        bad[1].text = bad[0].text.clone();
        assert!(ChoiceSet::from_parts(bad, 1, "s".into()).is_err());
        let mut swapped = cs.choices().to_vec();
        swapped.swap(0, 1);
        assert!(ChoiceSet::from_parts(swapped, 1, "s".into()).is_err());
    }
}
