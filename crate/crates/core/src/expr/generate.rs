use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Expr, Operator};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GenConfigError {
    #[error("operand_min must be at least 1, got {0}")]
    OperandMin(u64),
    #[error("operand range is empty: {min} > {max}")]
    EmptyRange { min: u64, max: u64 },
    #[error("nest_prob must lie in [0, 1], got {0}")]
    NestProb(f64),
}

/// Parameters of the random expression generator. Validated on construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGenConfig", into = "RawGenConfig")]
pub struct ExprGenConfig {
    max_depth: usize,
    nest_prob: f64,
    operand_min: u64,
    operand_max: u64,
    seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RawGenConfig {
    #[serde(default = "default_max_depth")]
    max_depth: usize,
    #[serde(default = "default_nest_prob")]
    nest_prob: f64,
    #[serde(default = "default_operand_min")]
    operand_min: u64,
    #[serde(default = "default_operand_max")]
    operand_max: u64,
    #[serde(default)]
    seed: u64,
}

fn default_max_depth() -> usize {
    5
}
fn default_nest_prob() -> f64 {
    0.5
}
fn default_operand_min() -> u64 {
    1
}
fn default_operand_max() -> u64 {
    999
}

impl TryFrom<RawGenConfig> for ExprGenConfig {
    type Error = GenConfigError;

    fn try_from(raw: RawGenConfig) -> Result<Self, Self::Error> {
        ExprGenConfig::new(
            raw.max_depth,
            raw.nest_prob,
            raw.operand_min,
            raw.operand_max,
            raw.seed,
        )
    }
}

impl From<ExprGenConfig> for RawGenConfig {
    fn from(c: ExprGenConfig) -> Self {
        RawGenConfig {
            max_depth: c.max_depth,
            nest_prob: c.nest_prob,
            operand_min: c.operand_min,
            operand_max: c.operand_max,
            seed: c.seed,
        }
    }
}

impl Default for ExprGenConfig {
    fn default() -> Self {
        ExprGenConfig {
            max_depth: 5,
            nest_prob: 0.5,
            operand_min: 1,
            operand_max: 999,
            seed: 0,
        }
    }
}

impl ExprGenConfig {
    pub fn new(
        max_depth: usize,
        nest_prob: f64,
        operand_min: u64,
        operand_max: u64,
        seed: u64,
    ) -> Result<Self, GenConfigError> {
        if operand_min < 1 {
            return Err(GenConfigError::OperandMin(operand_min));
        }
        if operand_min > operand_max {
            return Err(GenConfigError::EmptyRange {
                min: operand_min,
                max: operand_max,
            });
        }
        if !(0.0..=1.0).contains(&nest_prob) {
            return Err(GenConfigError::NestProb(nest_prob));
        }
        Ok(ExprGenConfig {
            max_depth,
            nest_prob,
            operand_min,
            operand_max,
            seed,
        })
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn max_depth(&self) -> usize {
        self.max_depth
    }

    pub fn nest_prob(&self) -> f64 {
        self.nest_prob
    }

    pub fn operand_range(&self) -> (u64, u64) {
        (self.operand_min, self.operand_max)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    fn can_nest(&self) -> bool {
        self.max_depth > 0 && self.nest_prob > 0.0
    }
}

/// Counts of nest-or-leaf decisions taken by the generator.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct NestStats {
    pub draws: u64,
    pub nodes: u64,
}

/// Draws one expression. The root is redrawn until it is an operator node,
/// unless the configuration cannot produce one (zero depth or zero nesting
/// probability), in which case a leaf is returned.
pub fn generate_expression<R: Rng + ?Sized>(cfg: &ExprGenConfig, rng: &mut R) -> Expr {
    generate_with_stats(cfg, rng, &mut NestStats::default())
}

pub fn generate_with_stats<R: Rng + ?Sized>(
    cfg: &ExprGenConfig,
    rng: &mut R,
    stats: &mut NestStats,
) -> Expr {
    loop {
        let e = draw(cfg, cfg.max_depth, rng, stats);
        if e.is_node() || !cfg.can_nest() {
            return e;
        }
    }
}

fn draw<R: Rng + ?Sized>(
    cfg: &ExprGenConfig,
    budget: usize,
    rng: &mut R,
    stats: &mut NestStats,
) -> Expr {
    if budget > 0 {
        stats.draws += 1;
        if rng.random_bool(cfg.nest_prob) {
            stats.nodes += 1;
            let op = Operator::ALL[rng.random_range(0..Operator::ALL.len())];
            let left = draw(cfg, budget - 1, rng, stats);
            let right = draw(cfg, budget - 1, rng, stats);
            return Expr::node(op, left, right);
        }
    }
    Expr::Leaf(rng.random_range(cfg.operand_min..=cfg.operand_max))
}

/// Infinite stream of expressions whose exact value is defined.
/// Expressions that divide by zero anywhere are discarded and counted.
#[derive(Debug, Clone)]
pub struct ExprGenerator {
    cfg: ExprGenConfig,
    rng: ChaCha8Rng,
    discarded: usize,
}

impl ExprGenerator {
    pub fn new(cfg: ExprGenConfig) -> Self {
        let rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        ExprGenerator {
            cfg,
            rng,
            discarded: 0,
        }
    }

    /// Number of expressions dropped for dividing by zero so far.
    pub fn discarded(&self) -> usize {
        self.discarded
    }
}

impl Iterator for ExprGenerator {
    type Item = Expr;

    fn next(&mut self) -> Option<Expr> {
        loop {
            let e = generate_expression(&self.cfg, &mut self.rng);
            if e.evaluate().is_ok() {
                return Some(e);
            }
            self.discarded += 1;
        }
    }
}
