//! The four hypothetical-transformation templates and their inverse.

use serde::{Deserialize, Serialize};

use super::choices::{ChoiceSet, Label};

const PATTERNS: [&str; 4] = [
    "I predict that the next <m> words after \"<prompt>\" would be <answer_choices>. Answer:",
    "Given the prompt \"<prompt>\", my next <m> words would be <answer_choices>. Answer:",
    "Given the context \"<prompt>\", my next <m> words would be <answer_choices>. Answer:",
    "I predict that after the context \"<prompt>\" the next <m> words I would say are <answer_choices>. Answer:",
];

/// One of the four hypothetical templates, numbered 1 to 4.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct HypTemplate(u8);

impl HypTemplate {
    pub const ALL: [HypTemplate; 4] = [
        HypTemplate(1),
        HypTemplate(2),
        HypTemplate(3),
        HypTemplate(4),
    ];

    pub fn new(id: u8) -> Option<Self> {
        (1..=4).contains(&id).then_some(HypTemplate(id))
    }

    pub fn id(self) -> u8 {
        self.0
    }

    pub fn pattern(self) -> &'static str {
        PATTERNS[usize::from(self.0 - 1)]
    }

    /// Fills the template. `<prompt>`, `<m>` and `<answer_choices>` are
    /// substituted in a single pass, so placeholder-like text inside the
    /// prompt is left alone.
    pub fn render(self, prompt: &str, choices: &ChoiceSet) -> String {
        let block = choices.render_block();
        let m = choices.m().to_string();
        let mut out = String::new();
        let mut rest = self.pattern();
        while let Some(start) = rest.find('<') {
            out.push_str(&rest[..start]);
            let tail = &rest[start..];
            let (value, len) = if tail.starts_with("<prompt>") {
                (prompt, "<prompt>".len())
            } else if tail.starts_with("<m>") {
                (m.as_str(), "<m>".len())
            } else if tail.starts_with("<answer_choices>") {
                (block.as_str(), "<answer_choices>".len())
            } else {
                ("<", 1)
            };
            out.push_str(value);
            rest = &tail[len..];
        }
        out.push_str(rest);
        out
    }

    /// Literal segments around the placeholders, plus the placeholder
    /// order (template 1 asks for `<m>` before `<prompt>`).
    fn segments(self) -> ([&'static str; 4], [Slot; 3]) {
        let p = self.pattern();
        let mut slots = [
            (
                p.find("<prompt>").expect("pattern has <prompt>"),
                Slot::Prompt,
            ),
            (p.find("<m>").expect("pattern has <m>"), Slot::M),
            (
                p.find("<answer_choices>")
                    .expect("pattern has <answer_choices>"),
                Slot::Choices,
            ),
        ];
        slots.sort_by_key(|(at, _)| *at);
        let mut lits = [""; 4];
        let mut cursor = 0;
        for (i, (at, slot)) in slots.iter().enumerate() {
            lits[i] = &p[cursor..*at];
            cursor = at + slot.placeholder().len();
        }
        lits[3] = &p[cursor..];
        (lits, slots.map(|(_, s)| s))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Slot {
    Prompt,
    M,
    Choices,
}

impl Slot {
    fn placeholder(self) -> &'static str {
        match self {
            Slot::Prompt => "<prompt>",
            Slot::M => "<m>",
            Slot::Choices => "<answer_choices>",
        }
    }
}

impl TryFrom<u8> for HypTemplate {
    type Error = String;

    fn try_from(id: u8) -> Result<Self, Self::Error> {
        HypTemplate::new(id).ok_or_else(|| format!("template id must be 1..=4, got {id}"))
    }
}

impl From<HypTemplate> for u8 {
    fn from(t: HypTemplate) -> u8 {
        t.0
    }
}

pub fn render_hypothetical(template: HypTemplate, prompt: &str, choices: &ChoiceSet) -> String {
    template.render(prompt, choices)
}

/// A hypothetical query recovered from prompt text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HypotheticalQuery {
    pub template: HypTemplate,
    pub prompt: String,
    pub m: usize,
    pub choices: Vec<String>,
}

/// Recovers the last hypothetical query in `text` (the query of a k-shot
/// prompt). Returns `None` if no template instance parses.
pub fn parse_hypothetical_query(text: &str) -> Option<HypotheticalQuery> {
    let mut best: Option<(usize, HypotheticalQuery)> = None;
    for template in HypTemplate::ALL {
        let ([prefix, ..], _) = template.segments();
        for (start, _) in text.rmatch_indices(prefix) {
            if best.as_ref().is_some_and(|(s, _)| *s >= start) {
                break;
            }
            if let Some(q) = parse_instance(template, &text[start..]) {
                best = Some((start, q));
                break;
            }
        }
    }
    best.map(|(_, q)| q)
}

fn parse_instance(template: HypTemplate, text: &str) -> Option<HypotheticalQuery> {
    let ([prefix, first, second, suffix], order) = template.segments();
    let body = text.strip_prefix(prefix)?.trim_end().strip_suffix(suffix)?;
    for (a, _) in body.match_indices(first) {
        let rest = &body[a + first.len()..];
        for (b, _) in rest.match_indices(second) {
            let parts = [&body[..a], &rest[..b], &rest[b + second.len()..]];
            if let Some(q) = assemble(template, order, parts) {
                return Some(q);
            }
        }
    }
    None
}

fn assemble(
    template: HypTemplate,
    order: [Slot; 3],
    parts: [&str; 3],
) -> Option<HypotheticalQuery> {
    let mut prompt = None;
    let mut m = None;
    let mut choices = None;
    for (slot, part) in order.into_iter().zip(parts) {
        match slot {
            Slot::Prompt => prompt = Some(part.to_string()),
            Slot::M => {
                if part.is_empty() || !part.bytes().all(|b| b.is_ascii_digit()) {
                    return None;
                }
                m = Some(part.parse().ok()?);
            }
            Slot::Choices => choices = Some(split_choice_block(part)?),
        }
    }
    Some(HypotheticalQuery {
        template,
        prompt: prompt?,
        m: m?,
        choices: choices?,
    })
}

fn split_choice_block(block: &str) -> Option<Vec<String>> {
    let mut rest = block.strip_prefix("A) ")?;
    let mut out = Vec::with_capacity(5);
    for label in &Label::ALL[1..] {
        let marker = format!(" {label}) ");
        let at = rest.find(&marker)?;
        out.push(rest[..at].to_string());
        rest = &rest[at + marker.len()..];
    }
    out.push(rest.to_string());
    Some(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prompt::choices::{Choice, Provenance};

    fn choice_set(texts: [&str; 5], m: usize) -> ChoiceSet {
        let choices = texts
            .iter()
            .enumerate()
            .map(|(i, t)| Choice {
                label: Label::ALL[i],
                text: t.to_string(),
                provenance: if i == 0 {
                    Provenance::DatasetContinuation
                } else {
                    Provenance::Model(format!("m{i}"))
                },
            })
            .collect();
        ChoiceSet::from_parts(choices, m, "m1".into()).unwrap()
    }

    #[test]
    fn template_two_rendering() {
        let cs = choice_set(["a", "b", "c", "d", "e"], 1);
        let s = HypTemplate::new(2).unwrap().render("Hello", &cs);
        assert_eq!(
            s,
            "Given the prompt \"Hello\", my next 1 words would be A) a B) b C) c D) d E) e. Answer:"
        );
    }

    #[test]
    fn placeholders_inside_prompt_untouched() {
        let cs = choice_set(["a", "b", "c", "d", "e"], 3);
        let s = HypTemplate::new(1)
            .unwrap()
            .render("x <m> <answer_choices>", &cs);
        assert!(s.contains("\"x <m> <answer_choices>\""));
        assert!(s.contains("next 3 words"));
    }

    #[test]
    fn inverse_recovers_parts() {
        let cs = choice_set(["one two", "three", "four five", "six", "seven"], 2);
        for t in HypTemplate::ALL {
            let prompt = "He said \"hi\", my next guess.";
            let text = format!("demo line\n{}", t.render(prompt, &cs));
            let q = parse_hypothetical_query(&text).unwrap();
            assert_eq!(q.template, t);
            assert_eq!(q.prompt, prompt);
            assert_eq!(q.m, 2);
            assert_eq!(q.choices, ["one two", "three", "four five", "six", "seven"]);
        }
        assert!(parse_hypothetical_query("Q: 1+2 \n A:").is_none());
    }

    #[test]
    fn inverse_picks_last_instance() {
        let a = choice_set(["a", "b", "c", "d", "e"], 1);
        let b = choice_set(["v", "w", "x", "y", "z"], 4);
        let text = format!(
            "{} C\n{}",
            HypTemplate::new(3).unwrap().render("first", &a),
            HypTemplate::new(1).unwrap().render("second", &b)
        );
        let q = parse_hypothetical_query(&text).unwrap();
        assert_eq!(q.prompt, "second");
        assert_eq!(q.m, 4);
    }
}
