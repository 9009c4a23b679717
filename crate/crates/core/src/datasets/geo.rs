//! GeoQuery example files.
//!
//! One JSON object per line:
//!
//! ```json
//! {"id": "geo-17", "question": "...", "funql": "state(...)",
//!  "spans": [{"text": "...", "funql": "..."}]}
//! ```
//!
//! `id` is optional and defaults to `line-<n>`. `spans` lists the
//! natural-language span for each probed sub-parse; the root pair
//! (question, funql) is prepended when it is not already the first entry.

use serde::{Deserialize, Serialize};

use crate::funql::{parse_funql, FunQlTree};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubSpan {
    pub text: String,
    pub gold: FunQlTree,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeoExample {
    pub id: String,
    pub question: String,
    pub gold: FunQlTree,
    /// Root pair first, then the probed sub-spans.
    pub sub_spans: Vec<SubSpan>,
}

#[derive(Debug, Deserialize)]
struct SpanRecord {
    text: String,
    funql: String,
}

#[derive(Debug, Deserialize)]
struct GeoRecord {
    #[serde(default)]
    id: Option<String>,
    question: String,
    funql: String,
    #[serde(default)]
    spans: Vec<SpanRecord>,
}

/// Why a single GeoQuery line was rejected.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GeoLineError {
    Format(String),
    SubparseMismatch(String),
}

impl GeoExample {
    /// Decodes and validates one line. `line_no` supplies the default id.
    pub fn from_record_line(line: &str, line_no: usize) -> Result<Self, GeoLineError> {
        let rec: GeoRecord =
            serde_json::from_str(line).map_err(|e| GeoLineError::Format(e.to_string()))?;
        let id = rec.id.unwrap_or_else(|| format!("line-{line_no}"));
        if rec.question.trim().is_empty() {
            return Err(GeoLineError::Format("empty question".into()));
        }
        let gold =
            parse_funql(&rec.funql).map_err(|e| GeoLineError::Format(format!("funql: {e}")))?;
        let mut sub_spans = vec![SubSpan {
            text: rec.question.clone(),
            gold: gold.clone(),
        }];
        for (i, span) in rec.spans.into_iter().enumerate() {
            let sub = parse_funql(&span.funql)
                .map_err(|e| GeoLineError::Format(format!("span {i} funql: {e}")))?;
            if i == 0 && span.text == rec.question && sub == gold {
                continue;
            }
            if span.text.trim().is_empty() {
                return Err(GeoLineError::Format(format!("span {i} has empty text")));
            }
            if sub.is_leaf() {
                return Err(GeoLineError::Format(format!(
                    "span {i} is a leaf sub-parse"
                )));
            }
            if !gold.contains_subparse(&sub) {
                return Err(GeoLineError::SubparseMismatch(id));
            }
            sub_spans.push(SubSpan {
                text: span.text,
                gold: sub,
            });
        }
        Ok(GeoExample {
            id,
            question: rec.question,
            gold,
            sub_spans,
        })
    }

    /// Sub-spans other than the root pair.
    pub fn probes(&self) -> &[SubSpan] {
        &self.sub_spans[1..]
    }
}
