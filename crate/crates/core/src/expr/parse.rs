use thiserror::Error;

use super::{Expr, Operator};

const MAX_NESTING: usize = 256;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("expression parse error at byte {position}: {reason}")]
pub struct ExprParseError {
    pub position: usize,
    pub reason: String,
}

/// Parses the fully parenthesized prompt grammar produced by [`Expr::render`].
///
/// ```text
/// root    := operand [op operand]
/// operand := integer | "(" operand op operand ")"
/// ```
///
/// ASCII whitespace between tokens is ignored.
pub fn parse_expr(s: &str) -> Result<Expr, ExprParseError> {
    let mut p = Parser {
        src: s.as_bytes(),
        pos: 0,
    };
    let first = p.operand(0)?;
    p.skip_ws();
    let e = if p.at_end() {
        first
    } else {
        let op = p.operator()?;
        let right = p.operand(0)?;
        Expr::node(op, first, right)
    };
    p.skip_ws();
    if !p.at_end() {
        return Err(p.error("trailing input"));
    }
    Ok(e)
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn error(&self, reason: &str) -> ExprParseError {
        ExprParseError {
            position: self.pos,
            reason: reason.to_string(),
        }
    }

    fn at_end(&self) -> bool {
        self.pos >= self.src.len()
    }

    fn skip_ws(&mut self) {
        while self.src.get(self.pos).is_some_and(u8::is_ascii_whitespace) {
            self.pos += 1;
        }
    }

    fn operator(&mut self) -> Result<Operator, ExprParseError> {
        self.skip_ws();
        let op = self
            .src
            .get(self.pos)
            .and_then(|&b| Operator::from_symbol(b as char))
            .ok_or_else(|| self.error("expected operator"))?;
        self.pos += 1;
        Ok(op)
    }

    fn operand(&mut self, depth: usize) -> Result<Expr, ExprParseError> {
        if depth > MAX_NESTING {
            return Err(self.error("nesting too deep"));
        }
        self.skip_ws();
        match self.src.get(self.pos) {
            Some(b'(') => {
                self.pos += 1;
                let left = self.operand(depth + 1)?;
                let op = self.operator()?;
                let right = self.operand(depth + 1)?;
                self.skip_ws();
                if self.src.get(self.pos) != Some(&b')') {
                    return Err(self.error("expected ')'"));
                }
                self.pos += 1;
                Ok(Expr::node(op, left, right))
            }
            Some(b) if b.is_ascii_digit() => {
                let start = self.pos;
                while self.src.get(self.pos).is_some_and(u8::is_ascii_digit) {
                    self.pos += 1;
                }
                let digits = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii digits");
                digits.parse().map(Expr::Leaf).map_err(|_| ExprParseError {
                    position: start,
                    reason: "integer literal out of range".into(),
                })
            }
            Some(_) => Err(self.error("expected integer or '('")),
            None => Err(self.error("unexpected end of input")),
        }
    }
}
