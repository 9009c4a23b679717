//! FunQL meaning representations as rose trees.
//!
//! A term is `head(arg1,arg2,...)` or a bare `head`. Heads may contain inner
//! spaces (entity names such as `'new york'`) but never parentheses or
//! commas. Rendering is canonical: no whitespace around tokens.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

const MAX_NESTING: usize = 512;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FunQlTree {
    pub head: String,
    pub args: Vec<FunQlTree>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("FunQL parse error at byte {position}: {reason}")]
pub struct FunQlParseError {
    pub position: usize,
    pub reason: String,
}

impl FunQlTree {
    pub fn leaf(head: impl Into<String>) -> Self {
        FunQlTree {
            head: head.into(),
            args: Vec::new(),
        }
    }

    pub fn apply(head: impl Into<String>, args: Vec<FunQlTree>) -> Self {
        FunQlTree {
            head: head.into(),
            args,
        }
    }

    pub fn is_leaf(&self) -> bool {
        self.args.is_empty()
    }

    pub fn node_count(&self) -> usize {
        1 + self.args.iter().map(FunQlTree::node_count).sum::<usize>()
    }

    pub fn leaf_count(&self) -> usize {
        if self.is_leaf() {
            1
        } else {
            self.args.iter().map(FunQlTree::leaf_count).sum()
        }
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        self.render_into(&mut out);
        out
    }

    fn render_into(&self, out: &mut String) {
        out.push_str(&self.head);
        if !self.args.is_empty() {
            out.push('(');
            for (i, a) in self.args.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                a.render_into(out);
            }
            out.push(')');
        }
    }

    /// All subtrees in pre-order, root first.
    pub fn subtrees(&self) -> Vec<&FunQlTree> {
        let mut out = Vec::new();
        let mut stack = vec![self];
        while let Some(t) = stack.pop() {
            out.push(t);
            stack.extend(t.args.iter().rev());
        }
        out
    }

    /// Non-leaf subtrees in pre-order, root first, duplicates kept.
    pub fn subparses(&self) -> Vec<&FunQlTree> {
        self.subtrees()
            .into_iter()
            .filter(|t| !t.is_leaf())
            .collect()
    }

    /// True iff some subtree of `self` equals `needle` exactly.
    pub fn contains_subparse(&self, needle: &FunQlTree) -> bool {
        self.subtrees().into_iter().any(|t| t == needle)
    }
}

impl fmt::Display for FunQlTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

impl std::str::FromStr for FunQlTree {
    type Err = FunQlParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_funql(s)
    }
}

pub fn parse_funql(s: &str) -> Result<FunQlTree, FunQlParseError> {
    let mut p = Parser { src: s, pos: 0 };
    let t = p.term(0)?;
    p.skip_ws();
    if p.pos < s.len() {
        return Err(p.error("trailing input"));
    }
    Ok(t)
}

/// Cuts a model completion down to its first balanced top-level term and
/// parses it. Text after that term is ignored.
pub fn extract_funql(completion: &str) -> Result<FunQlTree, FunQlParseError> {
    let s = completion.trim();
    let mut depth = 0usize;
    let mut end = s.len();
    for (i, c) in s.char_indices() {
        match c {
            '(' => depth += 1,
            ')' if depth == 0 => {
                end = i;
                break;
            }
            ')' => {
                depth -= 1;
                if depth == 0 {
                    end = i + 1;
                    break;
                }
            }
            ',' | '\n' | '\r' if depth == 0 => {
                end = i;
                break;
            }
            _ => {}
        }
    }
    parse_funql(&s[..end])
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

impl Parser<'_> {
    fn error(&self, reason: &str) -> FunQlParseError {
        FunQlParseError {
            position: self.pos,
            reason: reason.to_string(),
        }
    }

    fn skip_ws(&mut self) {
        let rest = &self.src[self.pos..];
        self.pos += rest.len() - rest.trim_start().len();
    }

    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn term(&mut self, depth: usize) -> Result<FunQlTree, FunQlParseError> {
        if depth > MAX_NESTING {
            return Err(self.error("nesting too deep"));
        }
        self.skip_ws();
        let start = self.pos;
        let rest = &self.src[start..];
        let len = rest.find(['(', ')', ',']).unwrap_or(rest.len());
        self.pos += len;
        let head = rest[..len].trim();
        if head.is_empty() {
            self.pos = start;
            return Err(self.error("empty head"));
        }
        let mut tree = FunQlTree::leaf(head);
        if self.peek() == Some('(') {
            self.pos += 1;
            loop {
                tree.args.push(self.term(depth + 1)?);
                self.skip_ws();
                match self.peek() {
                    Some(',') => self.pos += 1,
                    Some(')') => {
                        self.pos += 1;
                        break;
                    }
                    Some(_) => return Err(self.error("expected ',' or ')'")),
                    None => return Err(self.error("unbalanced parentheses")),
                }
            }
        }
        Ok(tree)
    }
}
