//! Run configuration, loaded from TOML.
//!
//! ```toml
//! task = "comp-arith"
//! subject = "oracle"
//! seed = 7
//! k_range = [3, 10]
//! sample_size = 500
//! out_dir = "out"
//! cache = "cache.jsonl"
//!
//! [[backends]]
//! name = "oracle"
//! kind = "arith_oracle"
//! ```
//!
//! Relative paths are resolved against the config file's directory.

use std::fs;
use std::ops::RangeInclusive;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::HarnessError;
use crate::backends::BackendSpec;
use crate::expr::ExprGenConfig;
use crate::metrics::TaskKind;
use crate::prompt::HypTemplate;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub task: TaskKind,
    pub subject: String,
    pub backends: Vec<BackendSpec>,
    /// Shot counts, inclusive. Defaults to the task's full range.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_range: Option<[usize; 2]>,
    /// Answer lengths in words, inclusive (hypothetical tasks).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m_range: Option<[usize; 2]>,
    #[serde(default = "all_templates")]
    pub templates: Vec<u8>,
    /// Items to evaluate. Defaults to 500 expressions or 400 examples.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_size: Option<usize>,
    /// Items set aside as demonstrations, disjoint from the sample.
    #[serde(default = "default_demo_pool")]
    pub demo_pool: usize,
    #[serde(default)]
    pub seed: u64,
    /// Dataset file. Required except for comp-arith, which generates
    /// expressions when no file is given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<ExprGenConfig>,
    #[serde(default = "default_cache")]
    pub cache: PathBuf,
    #[serde(default = "default_out")]
    pub out_dir: PathBuf,
    /// Upper bound on in-flight backend calls.
    #[serde(default = "default_concurrency")]
    pub concurrency: usize,
    /// max_tokens for multiple-choice answers.
    #[serde(default = "default_choice_tokens")]
    pub choice_max_tokens: u32,
    /// Permit k and m outside the protocol's ranges.
    #[serde(default)]
    pub allow_out_of_range: bool,
}

fn all_templates() -> Vec<u8> {
    vec![1, 2, 3, 4]
}
fn default_demo_pool() -> usize {
    20
}
fn default_cache() -> PathBuf {
    PathBuf::from("cache.jsonl")
}
fn default_out() -> PathBuf {
    PathBuf::from("out")
}
fn default_concurrency() -> usize {
    8
}
fn default_choice_tokens() -> u32 {
    8
}

/// Protocol bounds for k.
pub fn protocol_k_range(task: TaskKind) -> RangeInclusive<usize> {
    match task {
        TaskKind::HypotheticalText | TaskKind::HypotheticalDialog => 1..=10,
        TaskKind::CompArith => 3..=10,
        TaskKind::CompGeo => 2..=10,
    }
}

pub const PROTOCOL_M_RANGE: RangeInclusive<usize> = 1..=6;

impl RunConfig {
    /// A config with defaults for everything but the essentials.
    pub fn new(task: TaskKind, subject: impl Into<String>, backends: Vec<BackendSpec>) -> Self {
        RunConfig {
            task,
            subject: subject.into(),
            backends,
            k_range: None,
            m_range: None,
            templates: all_templates(),
            sample_size: None,
            demo_pool: default_demo_pool(),
            seed: 0,
            data: None,
            generator: None,
            cache: default_cache(),
            out_dir: default_out(),
            concurrency: default_concurrency(),
            choice_max_tokens: default_choice_tokens(),
            allow_out_of_range: false,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        let cfg = Self::parse_toml(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Decodes without validating, for callers that patch fields first.
    pub fn parse_toml(text: &str) -> Result<Self, HarnessError> {
        toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))
    }

    /// Reads, resolves relative paths against the file's directory, and validates.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, HarnessError> {
        let cfg = Self::read(path)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// [`RunConfig::load`] without the validation step.
    pub fn read(path: impl AsRef<Path>) -> Result<Self, HarnessError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::parse_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.cache);
        fix(&mut self.out_dir);
        if let Some(d) = self.data.as_mut() {
            fix(d);
        }
    }

    pub fn k_values(&self) -> RangeInclusive<usize> {
        match self.k_range {
            Some([lo, hi]) => lo..=hi,
            None => protocol_k_range(self.task),
        }
    }

    pub fn m_values(&self) -> RangeInclusive<usize> {
        match self.m_range {
            Some([lo, hi]) => lo..=hi,
            None => PROTOCOL_M_RANGE,
        }
    }

    pub fn sample_size(&self) -> usize {
        self.sample_size.unwrap_or(match self.task {
            TaskKind::CompArith => 500,
            _ => 400,
        })
    }

    pub fn hyp_templates(&self) -> Vec<HypTemplate> {
        self.templates
            .iter()
            .filter_map(|&t| HypTemplate::new(t))
            .collect()
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let err = |msg: String| Err(HarnessError::Config(msg));
        if self.backends.is_empty() {
            return err("no backends configured".into());
        }
        for (i, b) in self.backends.iter().enumerate() {
            b.validate()
                .map_err(|e| HarnessError::Config(e.to_string()))?;
            if self.backends[..i].iter().any(|o| o.name == b.name) {
                return err(format!("duplicate backend name {:?}", b.name));
            }
        }
        if !self.backends.iter().any(|b| b.name == self.subject) {
            return err(format!(
                "subject {:?} is not among the backends",
                self.subject
            ));
        }
        if self.task.is_hypothetical() && self.backends.len() < 4 {
            return err(format!(
                "hypothetical tasks need at least 4 backends for the answer choices, got {}",
                self.backends.len()
            ));
        }
        if self.sample_size == Some(0) {
            return err("sample_size must be at least 1".into());
        }
        if self.concurrency == 0 {
            return err("concurrency must be at least 1".into());
        }
        if self.choice_max_tokens == 0 {
            return err("choice_max_tokens must be at least 1".into());
        }
        let ks = self.k_values();
        if ks.is_empty() {
            return err(format!("empty k range {ks:?}"));
        }
        let protocol = protocol_k_range(self.task);
        if !self.allow_out_of_range && (ks.start() < protocol.start() || ks.end() > protocol.end())
        {
            return err(format!(
                "k range {ks:?} lies outside {protocol:?} for {} (set allow_out_of_range to override)",
                self.task.as_str()
            ));
        }
        if self.task.is_hypothetical() {
            let ms = self.m_values();
            if ms.is_empty() || *ms.start() == 0 {
                return err(format!("invalid m range {ms:?}"));
            }
            if !self.allow_out_of_range && *ms.end() > *PROTOCOL_M_RANGE.end() {
                return err(format!("m range {ms:?} lies outside {PROTOCOL_M_RANGE:?}"));
            }
            if self.templates.is_empty() {
                return err("no templates selected".into());
            }
            if let Some(t) = self
                .templates
                .iter()
                .find(|&&t| HypTemplate::new(t).is_none())
            {
                return err(format!("unknown template {t}"));
            }
        }
        if self.task != TaskKind::CompArith && self.data.is_none() {
            return err(format!("task {} needs a data file", self.task.as_str()));
        }
        if self.demo_pool < *ks.end() {
            return err(format!(
                "demo_pool ({}) is smaller than the largest k ({})",
                self.demo_pool,
                ks.end()
            ));
        }
        Ok(())
    }

    /// Hex sha256 of the canonical JSON form. Any field change alters it.
    pub fn digest(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const ARITH: &str = r#"
        task = "comp-arith"
        subject = "oracle"
        k_range = [3, 4]
        sample_size = 20

        [[backends]]
        name = "oracle"
        kind = "arith_oracle"
    "#;

    #[test]
    fn parses_and_defaults() {
        let cfg = RunConfig::from_toml(ARITH).unwrap();
        assert_eq!(cfg.k_values(), 3..=4);
        assert_eq!(cfg.sample_size(), 20);
        assert_eq!(cfg.demo_pool, 20);
        assert_eq!(cfg.templates, vec![1, 2, 3, 4]);
    }

    #[test]
    fn rejects_invalid() {
        let bad = [
            ARITH.replace("subject = \"oracle\"", "subject = \"gpt\""),
            ARITH.replace("[3, 4]", "[1, 4]"),
            ARITH.replace("[3, 4]", "[5, 4]"),
            ARITH.replace("sample_size = 20", "sample_size = 0"),
            ARITH.replace("comp-arith", "comp-geo"),
            ARITH.replace("comp-arith", "hypothetical-text"),
            ARITH.replace("sample_size = 20", "bogus = 1"),
            ARITH.replace("sample_size = 20", "demo_pool = 2"),
        ];
        for text in bad {
            assert!(
                matches!(RunConfig::from_toml(&text), Err(HarnessError::Config(_))),
                "{text}"
            );
        }
        let overridden =
            "allow_out_of_range = true\n".to_string() + &ARITH.replace("[3, 4]", "[0, 4]");
        assert!(RunConfig::from_toml(&overridden).is_ok());
    }

    #[test]
    fn digest_is_stable_and_sensitive() {
        let a = RunConfig::from_toml(ARITH).unwrap();
        let round = RunConfig::from_toml(&toml::to_string(&a).unwrap()).unwrap();
        assert_eq!(a.digest(), round.digest());
        let mut b = a.clone();
        b.seed = 1;
        assert_ne!(a.digest(), b.digest());
        let mut c = a.clone();
        c.backends[0].max_tokens = 9;
        assert_ne!(a.digest(), c.digest());
    }

    #[test]
    fn relative_paths_follow_the_config() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        fs::write(&path, ARITH).unwrap();
        let cfg = RunConfig::load(&path).unwrap();
        assert_eq!(cfg.out_dir, dir.path().join("out"));
        assert_eq!(cfg.cache, dir.path().join("cache.jsonl"));
    }
}
