//! End-to-end runs: configuration, probe pipelines, manifests and reports.

mod config;
mod pipeline;
mod report;

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use config::{protocol_k_range, RunConfig, PROTOCOL_M_RANGE};
pub use report::{write_reports, EditDistanceRecord, REPORT_FILES};

use crate::backends::{Backend, CacheError, CompletionCache};
use crate::datasets::DatasetError;
use crate::metrics::ConsistencyRecord;

pub const RECORDS_FILE: &str = "records.jsonl";
pub const EDIT_DISTANCES_FILE: &str = "edit_distances.jsonl";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("no records found in {0}")]
    EmptyRecords(PathBuf),
    #[error("backends exhausted: all {quarantined} probes failed; first failure: {first}")]
    BackendExhausted { quarantined: usize, first: String },
    #[error(transparent)]
    Cache(#[from] CacheError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

impl HarnessError {
    /// Process exit status for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 2,
            HarnessError::Data(_) | HarnessError::EmptyRecords(_) | HarnessError::Cache(_) => 3,
            HarnessError::BackendExhausted { .. } => 4,
            HarnessError::Io { .. } => 1,
        }
    }

    pub(crate) fn io(path: &Path, source: io::Error) -> Self {
        HarnessError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

impl From<DatasetError> for HarnessError {
    fn from(e: DatasetError) -> Self {
        HarnessError::Data(e.to_string())
    }
}

/// Items dropped before or during probing, by reason.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Discards {
    /// Choice sets rejected because two truncated texts coincided (or one was empty).
    pub distinctness_rejections: u64,
    /// Generated expressions regenerated because they divide by zero.
    pub division_by_zero: u64,
    /// Answers that could not be parsed (choice letters, numbers or parses).
    pub unparseable: u64,
    /// Documents with fewer than three sentences, or dialogs with one turn.
    pub too_short: u64,
    /// Probes skipped for lack of accepted demonstrations.
    pub insufficient_demos: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Quarantined {
    pub probe: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_digest: String,
    pub code_version: String,
    pub task: String,
    pub subject: String,
    /// Seconds since the Unix epoch.
    pub started_at: u64,
    pub finished_at: u64,
    pub backend_calls: BTreeMap<String, u64>,
    pub cache_hits: u64,
    pub cache_misses: u64,
    pub records: usize,
    pub discards: Discards,
    /// Probes whose backend calls failed; excluded from every denominator.
    pub quarantined: Vec<Quarantined>,
}

impl RunManifest {
    pub fn total_calls(&self) -> u64 {
        self.backend_calls.values().sum()
    }
}

/// What a pipeline hands back before anything is written.
#[derive(Debug, Default)]
pub struct RunOutput {
    pub records: Vec<ConsistencyRecord>,
    pub edit_distances: Vec<EditDistanceRecord>,
    pub discards: Discards,
    pub quarantined: Vec<Quarantined>,
}

fn now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

/// Runs the configured task, writing records, the manifest and reports to
/// `cfg.out_dir`. Completions go through the cache at `cfg.cache`.
pub fn run(cfg: &RunConfig) -> Result<RunManifest, HarnessError> {
    cfg.validate()?;
    let cache = CompletionCache::open(&cfg.cache)?;
    run_with_cache(cfg, &cache)
}

/// Like [`run`] with a caller-supplied cache.
pub fn run_with_cache(
    cfg: &RunConfig,
    cache: &CompletionCache,
) -> Result<RunManifest, HarnessError> {
    cfg.validate()?;
    let started_at = now();
    let (hits0, misses0) = (cache.hits(), cache.misses());
    let backends = cfg
        .backends
        .iter()
        .map(|s| Backend::new(s.clone()).map_err(|e| HarnessError::Config(e.to_string())))
        .collect::<Result<Vec<_>, _>>()?;
    let subject = backends
        .iter()
        .find(|b| b.name() == cfg.subject)
        .expect("validated subject");
    let chooser = Backend::new(
        subject
            .spec()
            .clone()
            .with_max_tokens(cfg.choice_max_tokens),
    )
    .map_err(|e| HarnessError::Config(e.to_string()))?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.concurrency)
        .build()
        .map_err(|e| HarnessError::Config(format!("thread pool: {e}")))?;
    let ctx = pipeline::Context {
        cfg,
        cache,
        backends: &backends,
        subject,
        chooser: &chooser,
    };
    let out = pool.install(|| pipeline::execute(&ctx))?;

    if out.records.is_empty() {
        if let Some(first) = out.quarantined.first() {
            return Err(HarnessError::BackendExhausted {
                quarantined: out.quarantined.len(),
                first: format!("{}: {}", first.probe, first.reason),
            });
        }
        return Err(HarnessError::Data("the run produced no probes".into()));
    }

    let mut backend_calls = BTreeMap::new();
    for b in backends.iter().chain(std::iter::once(&chooser)) {
        *backend_calls.entry(b.name().to_string()).or_insert(0) += b.calls();
    }
    let manifest = RunManifest {
        config_digest: cfg.digest(),
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        task: cfg.task.as_str().to_string(),
        subject: cfg.subject.clone(),
        started_at,
        finished_at: now(),
        backend_calls,
        cache_hits: cache.hits() - hits0,
        cache_misses: cache.misses() - misses0,
        records: out.records.len(),
        discards: out.discards,
        quarantined: out.quarantined,
    };

    let dir = &cfg.out_dir;
    fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    write_jsonl(&dir.join(RECORDS_FILE), &out.records)?;
    write_jsonl(&dir.join(EDIT_DISTANCES_FILE), &out.edit_distances)?;
    let manifest_path = dir.join(MANIFEST_FILE);
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(&manifest_path, json + "\n").map_err(|e| HarnessError::io(&manifest_path, e))?;
    write_reports(dir, dir)?;
    Ok(manifest)
}

fn write_jsonl<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), HarnessError> {
    let mut text = String::new();
    for r in rows {
        text.push_str(&serde_json::to_string(r).expect("record serializes"));
        text.push('\n');
    }
    fs::write(path, text).map_err(|e| HarnessError::io(path, e))
}

pub(crate) fn read_jsonl<T: for<'de> Deserialize<'de>>(
    path: &Path,
) -> Result<Vec<T>, HarnessError> {
    let text = fs::read_to_string(path).map_err(|e| match e.kind() {
        io::ErrorKind::NotFound => HarnessError::Data(format!("{} not found", path.display())),
        _ => HarnessError::io(path, e),
    })?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l)
                .map_err(|e| HarnessError::Data(format!("{}:{}: {e}", path.display(), i + 1)))
        })
        .collect()
}

/// Loads the records of a finished run.
pub fn load_records(dir: &Path) -> Result<Vec<ConsistencyRecord>, HarnessError> {
    read_jsonl(&dir.join(RECORDS_FILE))
}
