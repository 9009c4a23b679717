//! Independent reference implementations and fixtures shared by the
//! integration tests. Nothing here calls the code under test for the value
//! it is meant to check.

#![allow(dead_code)]

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use selfcon::backends::{BackendKind, BackendSpec, ChoicePolicy, Script};
use selfcon::funql::FunQlTree;

/// Textbook O(nm) Levenshtein over chars, full matrix.
pub fn levenshtein_dp(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut d = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for (i, row) in d.iter_mut().enumerate() {
        row[0] = i;
    }
    for (j, cell) in d[0].iter_mut().enumerate() {
        *cell = j;
    }
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            let sub = d[i - 1][j - 1] + usize::from(a[i - 1] != b[j - 1]);
            d[i][j] = sub.min(d[i - 1][j] + 1).min(d[i][j - 1] + 1);
        }
    }
    d[a.len()][b.len()]
}

pub fn percent_dp(a: &str, b: &str) -> f64 {
    let longest = a.chars().count().max(b.chars().count());
    levenshtein_dp(a, b) as f64 / longest as f64 * 100.0
}

/// Every subtree of `t`, found by explicit-stack traversal.
pub fn all_subtrees(t: &FunQlTree) -> Vec<&FunQlTree> {
    let mut out = Vec::new();
    let mut stack = vec![t];
    while let Some(n) = stack.pop() {
        out.push(n);
        stack.extend(n.args.iter());
    }
    out
}

/// Structural equality written out by hand rather than via `PartialEq`.
pub fn same_tree(a: &FunQlTree, b: &FunQlTree) -> bool {
    a.head == b.head
        && a.args.len() == b.args.len()
        && a.args.iter().zip(&b.args).all(|(x, y)| same_tree(x, y))
}

pub fn naive_contains(haystack: &FunQlTree, needle: &FunQlTree) -> bool {
    all_subtrees(haystack)
        .into_iter()
        .any(|s| same_tree(s, needle))
}

/// Random FunQL tree over a small head alphabet so that collisions happen.
pub fn random_tree(rng: &mut impl Rng, depth: usize) -> FunQlTree {
    const HEADS: &[&str] = &[
        "state",
        "loc_1",
        "city",
        "all",
        "river",
        "largest",
        "a b",
        "'new york'",
    ];
    let head = HEADS[rng.random_range(0..HEADS.len())];
    let arity = if depth == 0 {
        0
    } else {
        rng.random_range(0..=3)
    };
    let args = (0..arity).map(|_| random_tree(rng, depth - 1)).collect();
    FunQlTree::apply(head, args)
}

pub fn oracle_spec(name: &str) -> BackendSpec {
    BackendSpec::new(name, BackendKind::ArithOracle)
}

pub fn noisy_spec(name: &str, epsilon: f64, seed: u64) -> BackendSpec {
    BackendSpec::new(name, BackendKind::NoisyOracle { epsilon, seed })
}

pub fn babbler(name: &str, seed: u64, on_choice: ChoicePolicy) -> BackendSpec {
    BackendSpec::new(
        name,
        BackendKind::Scripted {
            script: Script::Babbler {
                seed,
                words: 8,
                on_choice,
            },
        },
    )
}

/// A subject plus three plain babblers: the minimum for a choice set.
pub fn hypothetical_backends(subject_policy: ChoicePolicy) -> Vec<BackendSpec> {
    vec![
        babbler("subject", 11, subject_policy),
        babbler("other-a", 12, ChoicePolicy::Babble),
        babbler("other-b", 13, ChoicePolicy::Babble),
        babbler("other-c", 14, ChoicePolicy::Babble),
    ]
}

const WORDS: &[&str] = &[
    "river", "stone", "market", "garden", "winter", "signal", "harbor", "lantern", "meadow",
    "copper", "violet", "engine", "orchard", "canyon", "pepper", "ribbon", "falcon", "marble",
    "tunnel", "velvet",
];

fn sentence(rng: &mut impl Rng) -> String {
    let n = rng.random_range(3..9);
    let mut s = String::new();
    for i in 0..n {
        let w = WORDS[rng.random_range(0..WORDS.len())];
        if i == 0 {
            let mut c = w.chars();
            let first = c.next().unwrap().to_ascii_uppercase();
            s.push(first);
            s.push_str(c.as_str());
        } else {
            s.push(' ');
            s.push_str(w);
        }
    }
    s.push(['.', '!', '?'][rng.random_range(0..3)]);
    s
}

/// Line-delimited dialog corpus with `n` conversations.
pub fn write_dialog_corpus(path: &Path, n: usize, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut text = String::new();
    for i in 0..n {
        let turns: Vec<String> = (0..rng.random_range(2..5))
            .map(|_| sentence(&mut rng))
            .collect();
        let rec = serde_json::json!({"id": format!("dlg-{i:04}"), "turns": turns});
        let _ = writeln!(text, "{rec}");
    }
    fs::write(path, text).unwrap();
}

/// Line-delimited text corpus; every document has at least three sentences.
pub fn write_text_corpus(path: &Path, n: usize, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut text = String::new();
    for i in 0..n {
        let body: Vec<String> = (0..rng.random_range(3..8))
            .map(|_| sentence(&mut rng))
            .collect();
        let rec = serde_json::json!({"id": format!("doc-{i:04}"), "body": body.join(" "), "created": "2021-07-01"});
        let _ = writeln!(text, "{rec}");
    }
    fs::write(path, text).unwrap();
}

/// GeoQuery-style examples: chains and branching parses with spans for each
/// non-leaf sub-parse.
pub fn write_geo_corpus(path: &Path, n: usize, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut text = String::new();
    for i in 0..n {
        let mut t = FunQlTree::leaf("all");
        let depth = rng.random_range(2..5);
        for _ in 0..depth {
            let head = [
                "state",
                "loc_1",
                "city",
                "river",
                "largest_one",
                "population_1",
            ][rng.random_range(0..6)];
            t = if rng.random_bool(0.2) {
                FunQlTree::apply(head, vec![t, FunQlTree::leaf(format!("c{i}"))])
            } else {
                FunQlTree::apply(head, vec![t])
            };
        }
        let spans: Vec<_> = selfcon::funql::FunQlTree::subparses(&t)
            .into_iter()
            .skip(1)
            .map(|s| serde_json::json!({"text": format!("span of {}", s.render()), "funql": s.render()}))
            .collect();
        let rec = serde_json::json!({
            "id": format!("geo-{i:04}"),
            "question": format!("question {i} about {}?", t.render()),
            "funql": t.render(),
            "spans": spans,
        });
        let _ = writeln!(text, "{rec}");
    }
    fs::write(path, text).unwrap();
}

/// Map-script backend answering every GeoQuery prompt with its gold parse,
/// optionally replacing root answers with `root_override`.
pub fn geo_gold_script(path: &Path, root_override: Option<&str>) -> Script {
    use selfcon::datasets::load_geo;
    use selfcon::prompt::render_geoquery_prompt;
    let mut entries = std::collections::BTreeMap::new();
    for ex in load_geo(path).unwrap() {
        for (i, span) in ex.sub_spans.iter().enumerate() {
            let answer = match (i, root_override) {
                (0, Some(o)) => o.to_string(),
                _ => span.gold.render(),
            };
            entries.insert(render_geoquery_prompt(&span.text), answer);
        }
    }
    Script::Map { entries }
}

/// Every file a run writes except the manifest, which carries timestamps.
pub fn report_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut names: Vec<String> = selfcon::harness::REPORT_FILES
        .iter()
        .map(|s| s.to_string())
        .collect();
    names.push(selfcon::harness::RECORDS_FILE.into());
    names.push(selfcon::harness::EDIT_DISTANCES_FILE.into());
    names
        .into_iter()
        .map(|n| {
            let bytes = fs::read(dir.join(&n)).unwrap_or_else(|e| panic!("{n}: {e}"));
            (n, bytes)
        })
        .collect()
}
