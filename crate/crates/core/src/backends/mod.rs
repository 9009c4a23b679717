//! Greedy completion sources behind one contract, and the persistent
//! completion cache.

mod answer;
mod cache;
mod http;
mod oracle;
mod scripted;

use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use answer::{parse_numeric_answer, ArithAnswer};
pub use cache::{CacheError, CacheStats, CompletionCache, CompletionRecord};
pub use http::HttpParams;
pub use oracle::{
    evaluate_arith, extract_arith_query, noisy_answer, oracle_answer, OracleError, UNDEFINED_ANSWER,
};
pub use scripted::{ChoicePolicy, Script};

use http::HttpClient;

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("invalid backend spec: {0}")]
    InvalidSpec(String),
    #[error("prompt is empty")]
    EmptyPrompt,
    #[error("HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("transport error: {0}")]
    Transport(String),
    #[error("malformed completion response: {0}")]
    BadResponse(String),
    #[error("credential environment variable {0} is not set")]
    MissingCredential(String),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error("scripted backend has no entry for the prompt")]
    ScriptMiss,
    #[error(transparent)]
    Cache(#[from] CacheError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BackendKind {
    Http(HttpParams),
    ArithOracle,
    NoisyOracle { epsilon: f64, seed: u64 },
    Scripted { script: Script },
}

/// A greedy-decoding completion source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendSpec {
    pub name: String,
    #[serde(flatten)]
    pub kind: BackendKind,
    #[serde(default = "default_max_tokens")]
    pub max_tokens: u32,
    #[serde(default)]
    pub temperature: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop: Option<Vec<String>>,
}

fn default_max_tokens() -> u32 {
    64
}

impl BackendSpec {
    pub fn new(name: impl Into<String>, kind: BackendKind) -> Self {
        BackendSpec {
            name: name.into(),
            kind,
            max_tokens: default_max_tokens(),
            temperature: 0.0,
            stop: None,
        }
    }

    pub fn with_max_tokens(mut self, max_tokens: u32) -> Self {
        self.max_tokens = max_tokens;
        self
    }

    pub fn validate(&self) -> Result<(), BackendError> {
        if self.name.trim().is_empty() {
            return Err(BackendError::InvalidSpec("empty backend name".into()));
        }
        if self.temperature != 0.0 {
            return Err(BackendError::InvalidSpec(format!(
                "{}: temperature must be 0 for greedy decoding, got {}",
                self.name, self.temperature
            )));
        }
        if let BackendKind::NoisyOracle { epsilon, .. } = self.kind {
            if !(0.0..=1.0).contains(&epsilon) {
                return Err(BackendError::InvalidSpec(format!(
                    "{}: epsilon must lie in [0, 1], got {epsilon}",
                    self.name
                )));
            }
        }
        Ok(())
    }

    /// Digest of every parameter that can change a completion. The name is
    /// not included; it is a separate part of the cache key.
    pub fn params_digest(&self) -> String {
        #[derive(Serialize)]
        struct Params<'a> {
            kind: &'a BackendKind,
            max_tokens: u32,
            temperature: f64,
            stop: &'a Option<Vec<String>>,
        }
        let json = serde_json::to_string(&Params {
            kind: &self.kind,
            max_tokens: self.max_tokens,
            temperature: self.temperature,
            stop: &self.stop,
        })
        .expect("params serialize");
        hex::encode(Sha256::digest(json.as_bytes()))
    }
}

/// A validated backend with an invocation counter.
pub struct Backend {
    spec: BackendSpec,
    digest: String,
    http: Option<HttpClient>,
    calls: AtomicU64,
}

impl std::fmt::Debug for Backend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Backend")
            .field("spec", &self.spec)
            .field("calls", &self.calls())
            .finish()
    }
}

impl Backend {
    pub fn new(spec: BackendSpec) -> Result<Self, BackendError> {
        spec.validate()?;
        let http = match &spec.kind {
            BackendKind::Http(p) => Some(HttpClient::new(p.clone())),
            _ => None,
        };
        Ok(Backend {
            digest: spec.params_digest(),
            spec,
            http,
            calls: AtomicU64::new(0),
        })
    }

    pub fn spec(&self) -> &BackendSpec {
        &self.spec
    }

    pub fn name(&self) -> &str {
        &self.spec.name
    }

    pub fn params_digest(&self) -> &str {
        &self.digest
    }

    /// Number of times the underlying source has been invoked.
    pub fn calls(&self) -> u64 {
        self.calls.load(Ordering::Relaxed)
    }

    pub fn complete(&self, prompt: &str) -> Result<String, BackendError> {
        if prompt.is_empty() {
            return Err(BackendError::EmptyPrompt);
        }
        self.calls.fetch_add(1, Ordering::Relaxed);
        match &self.spec.kind {
            BackendKind::Http(_) => self.http.as_ref().expect("http client").complete(
                prompt,
                self.spec.max_tokens,
                self.spec.stop.as_deref(),
            ),
            BackendKind::ArithOracle => Ok(oracle_answer(prompt)?),
            BackendKind::NoisyOracle { epsilon, seed } => {
                Ok(noisy_answer(prompt, *epsilon, *seed)?)
            }
            BackendKind::Scripted { script } => {
                script.respond(prompt).ok_or(BackendError::ScriptMiss)
            }
        }
    }
}

/// One-shot completion without a cache.
pub fn complete(spec: &BackendSpec, prompt: &str) -> Result<String, BackendError> {
    Backend::new(spec.clone())?.complete(prompt)
}

/// Returns the cached completion for `prompt` or computes and records it.
pub fn cached_complete(
    cache: &CompletionCache,
    backend: &Backend,
    prompt: &str,
) -> Result<String, BackendError> {
    cache.get_or_complete(backend, prompt)
}

/// Platform-independent 64-bit hash of a seed and a sequence of strings.
pub fn stable_hash(seed: u64, parts: &[&str]) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p.as_bytes());
    }
    let out = h.finalize();
    u64::from_le_bytes(out[..8].try_into().expect("8 bytes"))
}
