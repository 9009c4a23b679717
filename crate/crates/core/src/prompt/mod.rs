//! Prompt construction: arithmetic and FunQL queries, k-shot assembly, and
//! the hypothetical multiple-choice probes.

mod choices;
mod templates;

use serde::{Deserialize, Serialize};

pub use choices::{
    build_choice_set, parse_choice_answer, Choice, ChoiceError, ChoiceOutcome, ChoiceSet, Label,
    Provenance, Rejection,
};
pub use templates::{
    parse_hypothetical_query, render_hypothetical, HypTemplate, HypotheticalQuery,
};

/// First `m` whitespace-delimited words of `text`, joined by single spaces.
pub fn truncate_words(text: &str, m: usize) -> String {
    text.split_whitespace()
        .take(m)
        .collect::<Vec<_>>()
        .join(" ")
}

/// `Q: <expr> \n A:`
pub fn render_arith_prompt(expr: &str) -> String {
    format!("Q: {expr} \n A:")
}

pub fn render_geoquery_prompt(text: &str) -> String {
    format!("Create a FunQL query for the following question: '{text}' A:")
}

/// Demonstrations followed by a query. Each shot renders as the shot prompt,
/// a space, the answer and a newline; the query follows with no answer.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FewShotPrompt {
    pub shots: Vec<(String, String)>,
    pub query: String,
}

impl FewShotPrompt {
    pub fn new(shots: Vec<(String, String)>, query: impl Into<String>) -> Self {
        FewShotPrompt {
            shots,
            query: query.into(),
        }
    }

    pub fn k(&self) -> usize {
        self.shots.len()
    }

    pub fn render(&self) -> String {
        assemble_kshot(&self.shots, &self.query)
    }
}

pub fn render_shot(prompt: &str, answer: &str) -> String {
    format!("{prompt} {answer}\n")
}

pub fn assemble_kshot(shots: &[(String, String)], query: &str) -> String {
    let mut out = String::new();
    for (p, a) in shots {
        out.push_str(&render_shot(p, a));
    }
    out.push_str(query);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn truncation() {
        assert_eq!(truncate_words("the quick brown fox", 2), "the quick");
        assert_eq!(truncate_words("hello", 6), "hello");
        assert_eq!(truncate_words("a  b\tc", 3), "a b c");
        assert_eq!(truncate_words("  ", 3), "");
    }

    #[test]
    fn arith_prompts() {
        assert_eq!(render_arith_prompt("(2*3)+(6/2)"), "Q: (2*3)+(6/2) \n A:");
        assert_eq!(assemble_kshot(&[], "Q: 1+1 \n A:"), "Q: 1+1 \n A:");
        let shots = vec![
            (render_arith_prompt("1+2"), "3".to_string()),
            (render_arith_prompt("(4*5)-6"), "14".to_string()),
            (render_arith_prompt("7/2"), "7/2".to_string()),
        ];
        let p = FewShotPrompt::new(shots, render_arith_prompt("2*3"));
        assert_eq!(p.k(), 3);
        assert_eq!(
            p.render(),
            "Q: 1+2 \n A: 3\nQ: (4*5)-6 \n A: 14\nQ: 7/2 \n A: 7/2\nQ: 2*3 \n A:"
        );
    }

    #[test]
    fn kshot_concatenates_shot_blocks() {
        let shots: Vec<_> = (0..5).map(|i| (format!("p{i}"), format!("a{i}"))).collect();
        let whole = assemble_kshot(&shots, "q");
        let (head, tail) = shots.split_at(2);
        let pieces: String = head.iter().map(|(p, a)| render_shot(p, a)).collect();
        assert_eq!(whole, pieces + &assemble_kshot(tail, "q"));
    }

    #[test]
    fn geoquery_prompts() {
        assert_eq!(
            render_geoquery_prompt("Which state has the city with the most population?"),
            "Create a FunQL query for the following question: 'Which state has the city with the most population?' A:"
        );
        assert_eq!(
            render_geoquery_prompt("city with the most population"),
            "Create a FunQL query for the following question: 'city with the most population' A:"
        );
        assert_eq!(
            render_geoquery_prompt(""),
            "Create a FunQL query for the following question: '' A:"
        );
    }
}
