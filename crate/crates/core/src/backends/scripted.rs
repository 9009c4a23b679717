//! Deterministic scripted completion sources used for calibration and tests.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::stable_hash;
use crate::prompt::{parse_hypothetical_query, truncate_words, Label};

const VOCABULARY: &[&str] = &[
    "the", "a", "river", "city", "was", "is", "and", "of", "to", "in", "north", "old", "new",
    "people", "said", "year", "first", "later", "during", "after", "small", "large", "village",
    "school", "team", "music", "album", "song", "played", "built", "known", "called", "that",
    "which", "it", "he", "she", "they", "we", "you", "really", "maybe", "yes", "no", "sure",
    "thanks", "please", "today", "tomorrow", "good", "great", "bad", "home", "work", "dinner",
    "coffee", "movie", "weekend", "money", "time", "morning", "night", "friend", "family",
];

/// What a scripted backend does with a prompt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Script {
    /// Looks the prompt up. An exact key wins; otherwise the longest key the
    /// prompt ends with (so k-shot prompts match on their final query).
    Map { entries: BTreeMap<String, String> },
    /// Always answers `text`.
    Constant { text: String },
    /// Emits `words` pseudo-random words keyed on (seed, prompt). Hypothetical
    /// multiple-choice queries are answered according to `on_choice`.
    Babbler {
        seed: u64,
        #[serde(default = "default_words")]
        words: usize,
        #[serde(default)]
        on_choice: ChoicePolicy,
    },
}

fn default_words() -> usize {
    8
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChoicePolicy {
    /// Babble as for any other prompt.
    #[default]
    Babble,
    /// A uniformly distributed letter keyed on (seed, prompt).
    RandomLetter,
    /// The letter of the choice equal to this backend's own completion of
    /// the embedded prompt: a perfectly hypothetically consistent model.
    OwnChoice,
}

impl Script {
    pub fn respond(&self, prompt: &str) -> Option<String> {
        match self {
            Script::Map { entries } => map_lookup(entries, prompt),
            Script::Constant { text } => Some(text.clone()),
            Script::Babbler {
                seed,
                words,
                on_choice,
            } => Some(babbler(*seed, *words, *on_choice, prompt)),
        }
    }
}

fn map_lookup(entries: &BTreeMap<String, String>, prompt: &str) -> Option<String> {
    if let Some(v) = entries.get(prompt) {
        return Some(v.clone());
    }
    entries
        .iter()
        .filter(|(k, _)| !k.is_empty() && prompt.ends_with(k.as_str()))
        .max_by_key(|(k, _)| k.len())
        .map(|(_, v)| v.clone())
}

fn babble(seed: u64, words: usize, prompt: &str) -> String {
    (0..words)
        .map(|i| {
            let h = stable_hash(seed, &["babble", prompt, &i.to_string()]);
            VOCABULARY[(h % VOCABULARY.len() as u64) as usize]
        })
        .collect::<Vec<_>>()
        .join(" ")
}

fn babbler(seed: u64, words: usize, policy: ChoicePolicy, prompt: &str) -> String {
    if policy != ChoicePolicy::Babble {
        if let Some(query) = parse_hypothetical_query(prompt) {
            return match policy {
                ChoicePolicy::RandomLetter => {
                    let h = stable_hash(seed, &["letter", prompt]);
                    Label::ALL[(h % 5) as usize].to_string()
                }
                _ => {
                    let own = truncate_words(&babble(seed, words, &query.prompt), query.m);
                    query
                        .choices
                        .iter()
                        .position(|c| *c == own)
                        .map(|i| Label::ALL[i].to_string())
                        .unwrap_or_else(|| "none of these".to_string())
                }
            };
        }
    }
    babble(seed, words, prompt)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn map_prefers_exact_then_longest_suffix() {
        let entries: BTreeMap<_, _> = [("Q: 1 \n A:", "1"), ("1 \n A:", "x"), ("full", "exact")]
            .iter()
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect();
        let s = Script::Map { entries };
        assert_eq!(s.respond("full").as_deref(), Some("exact"));
        assert_eq!(s.respond("Q: 9 \n A: 9\nQ: 1 \n A:").as_deref(), Some("1"));
        assert_eq!(s.respond("nothing"), None);
    }

    #[test]
    fn babble_is_deterministic_and_seeded() {
        let a = Script::Babbler {
            seed: 1,
            words: 6,
            on_choice: ChoicePolicy::Babble,
        };
        let b = Script::Babbler {
            seed: 2,
            words: 6,
            on_choice: ChoicePolicy::Babble,
        };
        assert_eq!(a.respond("hello"), a.respond("hello"));
        assert_ne!(a.respond("hello"), b.respond("hello"));
        assert_eq!(a.respond("hello").unwrap().split(' ').count(), 6);
    }
}
