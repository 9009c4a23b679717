//! Corpus ingestion and initial-prompt extraction.
//!
//! Corpora are line-delimited JSON:
//!
//! * text: `{"id": ..., "body": ..., "created": "2021-07-01"}` (`created` optional)
//! * dialog: `{"id": ..., "turns": ["...", "..."]}`
//! * GeoQuery: see [`GeoExample`].
//! * arithmetic: `{"id": ..., "expr": "(2*3)+(6/2)", "value": "9"}` (`value` optional)

mod geo;
mod sentences;

use std::fs;
use std::path::Path;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use geo::{GeoExample, GeoLineError, SubSpan};

use crate::backends::ArithAnswer;
use crate::expr::{parse_expr, Expr};
pub use sentences::split_sentences;

/// Continuations are cut to this many words.
pub const CONTINUATION_WORDS: usize = 64;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {reason}")]
    Format { line: usize, reason: String },
    #[error("example {0}: span parse is not a sub-parse of the gold parse")]
    SubparseMismatch(String),
    #[error("{0}: too short")]
    TooShort(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TextDoc {
    pub id: String,
    pub body: String,
    #[serde(default)]
    pub created: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dialog {
    pub id: String,
    pub turns: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptSource {
    Text,
    Dialog,
    Arith,
    Geo,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InitialPrompt {
    pub source: PromptSource,
    pub id: String,
    pub prompt: String,
    /// The corpus's own next words, for the dataset answer choice.
    pub continuation: Option<String>,
}

/// Two full sentences plus a random-length word prefix of the third, starting
/// at a uniformly chosen sentence. The prefix is strictly shorter than the
/// third sentence, so the continuation is never empty.
pub fn make_text_prompt<R: Rng + ?Sized>(
    doc: &TextDoc,
    rng: &mut R,
) -> Result<InitialPrompt, DatasetError> {
    let spans = split_sentences(&doc.body);
    if spans.len() < 3 {
        return Err(DatasetError::TooShort(doc.id.clone()));
    }
    let i = rng.random_range(0..=spans.len() - 3);
    let third = spans[i + 2].clone();
    let words = word_spans(&doc.body[third.clone()]);
    let prefix_len = rng.random_range(0..words.len());
    let prompt_end = if prefix_len == 0 {
        spans[i + 1].end
    } else {
        third.start + words[prefix_len - 1].1
    };
    let prompt = &doc.body[spans[i].start..prompt_end];
    let rest = &doc.body[prompt_end..];
    let rest = rest.trim_start();
    let cont_end = word_spans(rest)
        .get(CONTINUATION_WORDS - 1)
        .map_or(rest.len(), |&(_, end)| end);
    Ok(InitialPrompt {
        source: PromptSource::Text,
        id: doc.id.clone(),
        prompt: prompt.to_string(),
        continuation: Some(rest[..cont_end].to_string()),
    })
}

/// First turn as the prompt, second turn as the continuation.
pub fn make_dialog_prompt(id: &str, turns: &[String]) -> Result<InitialPrompt, DatasetError> {
    match turns {
        [first, second, ..] if !first.trim().is_empty() && !second.trim().is_empty() => {
            Ok(InitialPrompt {
                source: PromptSource::Dialog,
                id: id.to_string(),
                prompt: first.trim().to_string(),
                continuation: Some(second.trim().to_string()),
            })
        }
        _ => Err(DatasetError::TooShort(id.to_string())),
    }
}

fn word_spans(s: &str) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, c) in s.char_indices() {
        match (c.is_whitespace(), start) {
            (false, None) => start = Some(i),
            (true, Some(st)) => {
                out.push((st, i));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(st) = start {
        out.push((st, s.len()));
    }
    out
}

/// Indices of `n` items drawn without replacement from `len`, in draw order.
/// Draws everything (in shuffled order) when `n >= len`.
pub fn sample_indices<R: Rng + ?Sized>(len: usize, n: usize, rng: &mut R) -> Vec<usize> {
    index::sample(rng, len, n.min(len)).into_vec()
}

fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<(usize, T)>, DatasetError> {
    let text = fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(line).map_err(|e| DatasetError::Format {
            line: i + 1,
            reason: e.to_string(),
        })?;
        out.push((i + 1, rec));
    }
    Ok(out)
}

pub fn load_text_corpus(path: impl AsRef<Path>) -> Result<Vec<TextDoc>, DatasetError> {
    read_jsonl::<TextDoc>(path.as_ref())?
        .into_iter()
        .map(|(line, doc)| {
            if doc.body.trim().is_empty() {
                Err(DatasetError::Format {
                    line,
                    reason: format!("document {} has an empty body", doc.id),
                })
            } else {
                Ok(doc)
            }
        })
        .collect()
}

pub fn load_dialog_corpus(path: impl AsRef<Path>) -> Result<Vec<Dialog>, DatasetError> {
    Ok(read_jsonl::<Dialog>(path.as_ref())?
        .into_iter()
        .map(|(_, d)| d)
        .collect())
}

pub fn load_geo(path: impl AsRef<Path>) -> Result<Vec<GeoExample>, DatasetError> {
    let text = fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match GeoExample::from_record_line(line, i + 1) {
            Ok(ex) => out.push(ex),
            Err(GeoLineError::Format(reason)) => {
                return Err(DatasetError::Format {
                    line: i + 1,
                    reason,
                })
            }
            Err(GeoLineError::SubparseMismatch(id)) => {
                return Err(DatasetError::SubparseMismatch(id))
            }
        }
    }
    Ok(out)
}

/// One stored arithmetic expression.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArithItem {
    pub id: String,
    pub expr: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<String>,
}

impl ArithItem {
    /// Record for a well-defined expression.
    pub fn new(id: impl Into<String>, e: &Expr) -> Option<Self> {
        let v = e.evaluate().ok()?;
        Some(ArithItem {
            id: id.into(),
            expr: e.render(),
            value: Some(ArithAnswer(v).to_string()),
        })
    }
}

/// Loads expressions, checking that each parses, is an operator node, and
/// (when given) that the stored value is the exact value.
pub fn load_arith(path: impl AsRef<Path>) -> Result<Vec<(String, Expr)>, DatasetError> {
    let mut out = Vec::new();
    for (line, item) in read_jsonl::<ArithItem>(path.as_ref())? {
        let fail = |reason: String| DatasetError::Format { line, reason };
        let e = parse_expr(&item.expr).map_err(|e| fail(format!("{}: {e}", item.id)))?;
        if !e.is_node() {
            return Err(fail(format!(
                "{}: a bare literal has no sub-expressions",
                item.id
            )));
        }
        let v = e
            .evaluate()
            .map_err(|e| fail(format!("{}: {e}", item.id)))?;
        if let Some(stored) = &item.value {
            if *stored != ArithAnswer(v).to_string() {
                return Err(fail(format!("{}: stored value {stored} is wrong", item.id)));
            }
        }
        out.push((item.id, e));
    }
    Ok(out)
}
