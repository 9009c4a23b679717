//! Exact and noisy arithmetic oracles.
//!
//! The oracle grammar is a conventional precedence grammar that accepts
//! everything the rendered expression grammar produces, plus unary minus,
//! decimals and fraction literals, so that spliced prompts re-parse:
//!
//! ```text
//! expr   := term (("+" | "-") term)*
//! term   := unary (("*" | "/") unary)*
//! unary  := ("-" | "+") unary | atom
//! atom   := number | "(" expr ")"
//! number := digits ["." digits] | "." digits
//! ```

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use thiserror::Error;

use super::answer::ArithAnswer;
use super::stable_hash;

const MAX_NESTING: usize = 256;

/// Completion returned for a query whose value is undefined.
pub const UNDEFINED_ANSWER: &str = "undefined";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("no `Q: <expr> \\n A:` query block found")]
    NoQuery,
    #[error("arithmetic parse error at byte {position}: {reason}")]
    Parse { position: usize, reason: String },
    #[error("division by zero")]
    DivisionByZero,
}

/// Pulls the expression out of the final `Q: <expr> \n A:` block.
pub fn extract_arith_query(prompt: &str) -> Result<&str, OracleError> {
    let body = prompt
        .trim_end()
        .strip_suffix("A:")
        .ok_or(OracleError::NoQuery)?
        .trim_end();
    let line = body.rsplit('\n').next().unwrap_or(body);
    let expr = line
        .trim_start()
        .strip_prefix("Q:")
        .ok_or(OracleError::NoQuery)?;
    Ok(expr.trim())
}

/// Evaluates an expression in the oracle grammar exactly.
pub fn evaluate_arith(src: &str) -> Result<BigRational, OracleError> {
    let mut p = Parser {
        src: src.as_bytes(),
        pos: 0,
    };
    let v = p.expr(0)?;
    p.skip_ws();
    if p.pos < p.src.len() {
        return Err(p.error("trailing input"));
    }
    v.ok_or(OracleError::DivisionByZero)
}

/// Oracle answer for a Q/A prompt: the canonical exact value, or
/// [`UNDEFINED_ANSWER`] when the query divides by zero.
pub fn oracle_answer(prompt: &str) -> Result<String, OracleError> {
    match query_value(prompt)? {
        Some(v) => Ok(ArithAnswer(v).to_string()),
        None => Ok(UNDEFINED_ANSWER.to_string()),
    }
}

/// Like [`oracle_answer`] but adds one to the answer for a seeded fraction
/// `epsilon` of queries. Whether a query is corrupted depends only on the
/// seed and the query's exact value, so value-equivalent prompts are
/// answered identically.
pub fn noisy_answer(prompt: &str, epsilon: f64, seed: u64) -> Result<String, OracleError> {
    let Some(v) = query_value(prompt)? else {
        return Ok(UNDEFINED_ANSWER.to_string());
    };
    let canonical = ArithAnswer(v.clone()).to_string();
    if corrupts(&canonical, epsilon, seed) {
        Ok(ArithAnswer(v + BigRational::one()).to_string())
    } else {
        Ok(canonical)
    }
}

pub(crate) fn corrupts(key: &str, epsilon: f64, seed: u64) -> bool {
    if epsilon >= 1.0 {
        return true;
    }
    let h = stable_hash(seed, &["noisy-oracle", key]);
    (h as f64) < epsilon * 2f64.powi(64)
}

fn query_value(prompt: &str) -> Result<Option<BigRational>, OracleError> {
    match evaluate_arith(extract_arith_query(prompt)?) {
        Ok(v) => Ok(Some(v)),
        Err(OracleError::DivisionByZero) => Ok(None),
        Err(e) => Err(e),
    }
}

/// `None` marks a value that divided by zero; it absorbs every operation.
type Value = Option<BigRational>;

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn error(&self, reason: &str) -> OracleError {
        OracleError::Parse {
            position: self.pos,
            reason: reason.to_string(),
        }
    }

    fn skip_ws(&mut self) {
        while self.src.get(self.pos).is_some_and(u8::is_ascii_whitespace) {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn expr(&mut self, depth: usize) -> Result<Value, OracleError> {
        let mut acc = self.term(depth)?;
        while let Some(op @ (b'+' | b'-')) = self.peek() {
            self.pos += 1;
            let rhs = self.term(depth)?;
            acc = match (acc, rhs) {
                (Some(a), Some(b)) => Some(if op == b'+' { a + b } else { a - b }),
                _ => None,
            };
        }
        Ok(acc)
    }

    fn term(&mut self, depth: usize) -> Result<Value, OracleError> {
        let mut acc = self.unary(depth)?;
        while let Some(op @ (b'*' | b'/')) = self.peek() {
            self.pos += 1;
            let rhs = self.unary(depth)?;
            acc = match (acc, rhs) {
                (Some(a), Some(b)) if op == b'*' => Some(a * b),
                (Some(_), Some(b)) if b.is_zero() => None,
                (Some(a), Some(b)) => Some(a / b),
                _ => None,
            };
        }
        Ok(acc)
    }

    fn unary(&mut self, depth: usize) -> Result<Value, OracleError> {
        if depth > MAX_NESTING {
            return Err(self.error("nesting too deep"));
        }
        match self.peek() {
            Some(b'-') => {
                self.pos += 1;
                Ok(self.unary(depth + 1)?.map(|v| -v))
            }
            Some(b'+') => {
                self.pos += 1;
                self.unary(depth + 1)
            }
            Some(b'(') => {
                self.pos += 1;
                let v = self.expr(depth + 1)?;
                if self.peek() != Some(b')') {
                    return Err(self.error("expected ')'"));
                }
                self.pos += 1;
                Ok(v)
            }
            Some(b) if b.is_ascii_digit() || b == b'.' => self.number().map(Some),
            Some(_) => Err(self.error("expected number, sign or '('")),
            None => Err(self.error("unexpected end of input")),
        }
    }

    fn number(&mut self) -> Result<BigRational, OracleError> {
        let start = self.pos;
        self.digits();
        let mut frac_len = 0;
        if self.src.get(self.pos) == Some(&b'.') {
            self.pos += 1;
            frac_len = self.digits();
            if frac_len == 0 {
                return Err(self.error("expected digits after '.'"));
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii");
        let digits: String = text.chars().filter(|c| *c != '.').collect();
        let numer: BigInt = digits.parse().map_err(|_| self.error("bad number"))?;
        let denom = num_traits::pow(BigInt::from(10u8), frac_len);
        Ok(BigRational::new(numer, denom))
    }

    fn digits(&mut self) -> usize {
        let start = self.pos;
        while self.src.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        self.pos - start
    }
}
