//! Randomly nested binary arithmetic expressions.
//!
//! Expressions are binary trees with positive integer leaves. They are
//! rendered fully parenthesized, except for the root node which drops its
//! outer pair, e.g. `(2*3)+(6/2)`. The rendered string is the wire format
//! used in prompts; [`parse_expr`] is its inverse.

mod generate;
mod parse;

use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use generate::{
    generate_expression, generate_with_stats, ExprGenConfig, ExprGenerator, GenConfigError,
    NestStats,
};
pub use parse::{parse_expr, ExprParseError};

/// Binary arithmetic operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Operator {
    Add,
    Sub,
    Div,
    Mul,
}

impl Operator {
    pub const ALL: [Operator; 4] = [Operator::Add, Operator::Sub, Operator::Div, Operator::Mul];

    pub fn symbol(self) -> char {
        match self {
            Operator::Add => '+',
            Operator::Sub => '-',
            Operator::Div => '/',
            Operator::Mul => '*',
        }
    }

    pub fn from_symbol(c: char) -> Option<Self> {
        match c {
            '+' => Some(Operator::Add),
            '-' => Some(Operator::Sub),
            '/' => Some(Operator::Div),
            '*' => Some(Operator::Mul),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Expr {
    Leaf(u64),
    Node {
        op: Operator,
        left: Box<Expr>,
        right: Box<Expr>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("division by zero")]
    DivisionByZero,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SpliceError {
    #[error("path {0} does not address a non-root operator node")]
    PathInvalid(ExprPath),
    #[error("completion is empty after trimming")]
    EmptyCompletion,
}

impl Expr {
    pub fn leaf(value: u64) -> Self {
        Expr::Leaf(value)
    }

    pub fn node(op: Operator, left: Expr, right: Expr) -> Self {
        Expr::Node {
            op,
            left: Box::new(left),
            right: Box::new(right),
        }
    }

    pub fn is_node(&self) -> bool {
        matches!(self, Expr::Node { .. })
    }

    /// Nesting depth; a leaf has depth 0.
    pub fn depth(&self) -> usize {
        match self {
            Expr::Leaf(_) => 0,
            Expr::Node { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    pub fn leaves(&self) -> Vec<u64> {
        let mut out = Vec::new();
        self.collect_leaves(&mut out);
        out
    }

    fn collect_leaves(&self, out: &mut Vec<u64>) {
        match self {
            Expr::Leaf(v) => out.push(*v),
            Expr::Node { left, right, .. } => {
                left.collect_leaves(out);
                right.collect_leaves(out);
            }
        }
    }

    /// Renders the expression in the prompt grammar.
    pub fn render(&self) -> String {
        let mut out = String::new();
        match self {
            Expr::Leaf(v) => out.push_str(&v.to_string()),
            Expr::Node { op, left, right } => {
                left.render_nested(&mut out);
                out.push(op.symbol());
                right.render_nested(&mut out);
            }
        }
        out
    }

    fn render_nested(&self, out: &mut String) {
        match self {
            Expr::Leaf(v) => out.push_str(&v.to_string()),
            Expr::Node { op, left, right } => {
                out.push('(');
                left.render_nested(out);
                out.push(op.symbol());
                right.render_nested(out);
                out.push(')');
            }
        }
    }

    /// Exact rational value of the expression.
    pub fn evaluate(&self) -> Result<BigRational, EvalError> {
        match self {
            Expr::Leaf(v) => Ok(BigRational::from_integer(BigInt::from(*v))),
            Expr::Node { op, left, right } => {
                let l = left.evaluate()?;
                let r = right.evaluate()?;
                Ok(match op {
                    Operator::Add => l + r,
                    Operator::Sub => l - r,
                    Operator::Mul => l * r,
                    Operator::Div => {
                        if r.is_zero() {
                            return Err(EvalError::DivisionByZero);
                        }
                        l / r
                    }
                })
            }
        }
    }

    /// Pre-order list of every operator-rooted sub-expression, root first.
    /// Leaves are not listed.
    pub fn subexpressions(&self) -> Vec<(ExprPath, &Expr)> {
        let mut out = Vec::new();
        let mut path = Vec::new();
        self.collect_subexpressions(&mut path, &mut out);
        out
    }

    fn collect_subexpressions<'a>(
        &'a self,
        path: &mut Vec<Step>,
        out: &mut Vec<(ExprPath, &'a Expr)>,
    ) {
        if let Expr::Node { left, right, .. } = self {
            out.push((ExprPath(path.clone()), self));
            path.push(Step::Left);
            left.collect_subexpressions(path, out);
            path.pop();
            path.push(Step::Right);
            right.collect_subexpressions(path, out);
            path.pop();
        }
    }

    /// Renders the root expression with the sub-expression at `path`
    /// replaced by `completion`.
    ///
    /// A completion that is a plain non-negative integer is spliced verbatim;
    /// anything else is wrapped in parentheses so it cannot rebind with the
    /// surrounding operators.
    pub fn splice(&self, path: &ExprPath, completion: &str) -> Result<String, SpliceError> {
        if path.is_root() || !path.get(self).is_some_and(Expr::is_node) {
            return Err(SpliceError::PathInvalid(path.clone()));
        }
        let completion = completion.trim();
        if completion.is_empty() {
            return Err(SpliceError::EmptyCompletion);
        }
        let replacement = if completion.bytes().all(|b| b.is_ascii_digit()) {
            completion.to_string()
        } else {
            format!("({completion})")
        };

        let mut out = String::new();
        let (op, left, right) = match self {
            Expr::Node { op, left, right } => (op, left, right),
            Expr::Leaf(_) => unreachable!("non-root path on a leaf"),
        };
        let steps = path.steps();
        let (first, rest) = (steps[0], &steps[1..]);
        splice_into(left, first == Step::Left, rest, &replacement, &mut out);
        out.push(op.symbol());
        splice_into(right, first == Step::Right, rest, &replacement, &mut out);
        Ok(out)
    }
}

fn splice_into(e: &Expr, on_path: bool, rest: &[Step], replacement: &str, out: &mut String) {
    if !on_path {
        e.render_nested(out);
        return;
    }
    let Some((&next, tail)) = rest.split_first() else {
        out.push_str(replacement);
        return;
    };
    match e {
        Expr::Leaf(_) => e.render_nested(out),
        Expr::Node { op, left, right } => {
            out.push('(');
            splice_into(left, next == Step::Left, tail, replacement, out);
            out.push(op.symbol());
            splice_into(right, next == Step::Right, tail, replacement, out);
            out.push(')');
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

impl std::str::FromStr for Expr {
    type Err = ExprParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_expr(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Step {
    Left,
    Right,
}

/// Route from the root to a sub-expression.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ExprPath(Vec<Step>);

impl ExprPath {
    pub fn root() -> Self {
        ExprPath(Vec::new())
    }

    pub fn new(steps: Vec<Step>) -> Self {
        ExprPath(steps)
    }

    pub fn is_root(&self) -> bool {
        self.0.is_empty()
    }

    pub fn steps(&self) -> &[Step] {
        &self.0
    }

    pub fn get<'a>(&self, e: &'a Expr) -> Option<&'a Expr> {
        let mut cur = e;
        for step in &self.0 {
            cur = match (cur, step) {
                (Expr::Node { left, .. }, Step::Left) => left,
                (Expr::Node { right, .. }, Step::Right) => right,
                (Expr::Leaf(_), _) => return None,
            };
        }
        Some(cur)
    }
}

impl fmt::Display for ExprPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("root");
        }
        for step in &self.0 {
            f.write_str(match step {
                Step::Left => "L",
                Step::Right => "R",
            })?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigInt;

    fn worked_example() -> Expr {
        Expr::node(
            Operator::Add,
            Expr::node(Operator::Mul, Expr::leaf(2), Expr::leaf(3)),
            Expr::node(Operator::Div, Expr::leaf(6), Expr::leaf(2)),
        )
    }

    fn rat(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn render_drops_only_root_parens() {
        assert_eq!(worked_example().render(), "(2*3)+(6/2)");
        assert_eq!(Expr::leaf(7).render(), "7");
        let e = Expr::node(
            Operator::Sub,
            Expr::leaf(10),
            Expr::node(Operator::Add, Expr::leaf(1), Expr::leaf(2)),
        );
        assert_eq!(e.render(), "10-(1+2)");
    }

    #[test]
    fn evaluate_exact() {
        assert_eq!(worked_example().evaluate().unwrap(), rat(9, 1));
        let e: Expr = "(7/2)+(1/3)".parse().unwrap();
        assert_eq!(e.evaluate().unwrap(), rat(23, 6));
        let z: Expr = "5/(3-3)".parse().unwrap();
        assert_eq!(z.evaluate(), Err(EvalError::DivisionByZero));
    }

    #[test]
    fn subexpressions_preorder() {
        let e = worked_example();
        let subs = e.subexpressions();
        let rendered: Vec<_> = subs
            .iter()
            .map(|(p, s)| (p.to_string(), s.render()))
            .collect();
        assert_eq!(
            rendered,
            vec![
                ("root".to_string(), "(2*3)+(6/2)".to_string()),
                ("L".to_string(), "2*3".to_string()),
                ("R".to_string(), "6/2".to_string()),
            ]
        );
        assert!(Expr::leaf(5).subexpressions().is_empty());
        let e: Expr = "((1+2)*3)-4".parse().unwrap();
        let r: Vec<_> = e.subexpressions().iter().map(|(_, s)| s.render()).collect();
        assert_eq!(r, vec!["((1+2)*3)-4", "(1+2)*3", "1+2"]);
    }

    #[test]
    fn splice_examples() {
        let e = worked_example();
        let l = ExprPath::new(vec![Step::Left]);
        let r = ExprPath::new(vec![Step::Right]);
        assert_eq!(e.splice(&l, "6").unwrap(), "6+(6/2)");
        assert_eq!(e.splice(&r, " 3 ").unwrap(), "(2*3)+3");

        let e: Expr = "6/(1/2)".parse().unwrap();
        let spliced = e.splice(&r, "1/2").unwrap();
        assert_eq!(spliced, "6/(1/2)");
        // A verbatim splice would have changed the value.
        let verbatim: Expr = "(6/1)/2".parse().unwrap();
        assert_eq!(verbatim.evaluate().unwrap(), rat(3, 1));
        assert_eq!(e.evaluate().unwrap(), rat(12, 1));
    }

    #[test]
    fn splice_deep_path() {
        let e: Expr = "((1+2)*3)-4".parse().unwrap();
        let p = ExprPath::new(vec![Step::Left, Step::Left]);
        assert_eq!(e.splice(&p, "3").unwrap(), "(3*3)-4");
        assert_eq!(e.splice(&p, "-3").unwrap(), "((-3)*3)-4");
    }

    #[test]
    fn splice_errors() {
        let e = worked_example();
        assert!(matches!(
            e.splice(&ExprPath::root(), "9"),
            Err(SpliceError::PathInvalid(_))
        ));
        let leaf_path = ExprPath::new(vec![Step::Left, Step::Left]);
        assert!(matches!(
            e.splice(&leaf_path, "9"),
            Err(SpliceError::PathInvalid(_))
        ));
        let too_deep = ExprPath::new(vec![Step::Left, Step::Left, Step::Left]);
        assert!(matches!(
            e.splice(&too_deep, "9"),
            Err(SpliceError::PathInvalid(_))
        ));
        assert_eq!(
            e.splice(&ExprPath::new(vec![Step::Left]), "  \n"),
            Err(SpliceError::EmptyCompletion)
        );
    }

    #[test]
    fn depth_counts_nesting() {
        assert_eq!(Expr::leaf(1).depth(), 0);
        assert_eq!(worked_example().depth(), 2);
    }
}
