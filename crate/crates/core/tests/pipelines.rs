mod common;

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::path::Path;
use std::sync::{Arc, Mutex};
use std::thread;

use selfcon::backends::{
    cached_complete, Backend, BackendError, BackendKind, BackendSpec, ChoicePolicy,
    CompletionCache, HttpParams, Script,
};
use selfcon::harness::{
    self, load_records, run_with_cache, HarnessError, RunConfig, RunManifest, MANIFEST_FILE,
};
use selfcon::metrics::{geoquery_rate, hypothetical_accuracy, TaskKind};

fn geo_config(dir: &Path, script: Script) -> RunConfig {
    let corpus = dir.join("geo.jsonl");
    let spec = BackendSpec::new("gold", BackendKind::Scripted { script });
    let mut cfg = RunConfig::new(TaskKind::CompGeo, "gold", vec![spec]);
    cfg.data = Some(corpus);
    cfg.sample_size = Some(15);
    cfg.k_range = Some([2, 3]);
    cfg.out_dir = dir.join("out");
    cfg.cache = dir.join("cache.jsonl");
    cfg
}

#[test]
fn geo_gold_backend_is_fully_consistent() {
    let dir = tempfile::tempdir().unwrap();
    common::write_geo_corpus(&dir.path().join("geo.jsonl"), 40, 1);
    let script = common::geo_gold_script(&dir.path().join("geo.jsonl"), None);
    let cfg = geo_config(dir.path(), script);
    let manifest = harness::run(&cfg).unwrap();
    assert!(
        manifest.quarantined.is_empty(),
        "{:?}",
        manifest.quarantined
    );
    let records = load_records(&cfg.out_dir).unwrap();
    assert!(!records.is_empty());
    let rate = geoquery_rate(&records).unwrap();
    assert_eq!(rate.numerator, rate.denominator);
    assert!(records.iter().all(|r| r.root_correct == Some(true)));
}

#[test]
fn geo_unrelated_root_is_never_consistent() {
    let dir = tempfile::tempdir().unwrap();
    common::write_geo_corpus(&dir.path().join("geo.jsonl"), 40, 2);
    let script =
        common::geo_gold_script(&dir.path().join("geo.jsonl"), Some("answer(unrelated(x))"));
    let cfg = geo_config(dir.path(), script);
    harness::run(&cfg).unwrap();
    let records = load_records(&cfg.out_dir).unwrap();
    let rate = geoquery_rate(&records).unwrap();
    assert!(rate.denominator > 0);
    assert_eq!(rate.numerator, 0);
}

#[test]
fn script_misses_exhaust_backends() {
    let dir = tempfile::tempdir().unwrap();
    common::write_geo_corpus(&dir.path().join("geo.jsonl"), 40, 3);
    let cfg = geo_config(
        dir.path(),
        Script::Map {
            entries: Default::default(),
        },
    );
    let err = harness::run(&cfg).unwrap_err();
    assert!(
        matches!(err, HarnessError::BackendExhausted { .. }),
        "{err}"
    );
    assert_eq!(err.exit_code(), 4);
}

#[test]
fn partial_script_quarantines_failed_probes() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("geo.jsonl");
    common::write_geo_corpus(&corpus, 40, 4);
    let Script::Map { mut entries } = common::geo_gold_script(&corpus, None) else {
        unreachable!()
    };
    let dropped: Vec<String> = entries.keys().step_by(5).cloned().collect();
    for k in &dropped {
        entries.remove(k);
    }
    let cfg = geo_config(dir.path(), Script::Map { entries });
    let manifest = harness::run(&cfg).unwrap();
    assert!(!manifest.quarantined.is_empty());
    assert!(manifest.records > 0);
    let records = load_records(&cfg.out_dir).unwrap();
    assert_eq!(records.len(), manifest.records);
    for q in &manifest.quarantined {
        assert!(records.iter().all(|r| r.probe != q.probe));
    }
}

#[test]
fn missing_data_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = geo_config(dir.path(), Script::Constant { text: "x".into() });
    cfg.data = Some(dir.path().join("nope.jsonl"));
    let err = harness::run(&cfg).unwrap_err();
    assert_eq!(err.exit_code(), 3, "{err}");
}

fn text_config(dir: &Path) -> RunConfig {
    let corpus = dir.join("docs.jsonl");
    if !corpus.exists() {
        common::write_text_corpus(&corpus, 50, 21);
    }
    let mut cfg = RunConfig::new(
        TaskKind::HypotheticalText,
        "subject",
        common::hypothetical_backends(ChoicePolicy::RandomLetter),
    );
    cfg.data = Some(corpus);
    cfg.sample_size = Some(20);
    cfg.k_range = Some([1, 2]);
    cfg.m_range = Some([1, 3]);
    cfg.cache = dir.join("cache.jsonl");
    cfg
}

fn manifest(dir: &Path) -> RunManifest {
    serde_json::from_str(&fs::read_to_string(dir.join(MANIFEST_FILE)).unwrap()).unwrap()
}

#[test]
fn hypothetical_text_run_writes_everything() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = text_config(dir.path());
    cfg.out_dir = dir.path().join("out");
    let m = harness::run(&cfg).unwrap();
    assert_eq!(m.total_calls(), m.cache_misses);
    assert_eq!(m.cache_hits + m.cache_misses, m.cache_misses);
    assert_eq!(manifest(&cfg.out_dir).config_digest, cfg.digest());
    let records = load_records(&cfg.out_dir).unwrap();
    assert_eq!(records.len(), m.records);
    // 20 items × 3 m × 4 templates × 2 k, less any rejected choice sets.
    assert!(
        records.len() <= 480 && records.len() > 400,
        "{}",
        records.len()
    );
    assert!(hypothetical_accuracy(&records).unwrap().denominator > 0);
    let bytes = common::report_bytes(&cfg.out_dir);
    assert!(bytes.iter().all(|(_, b)| !b.is_empty()));
}

#[test]
fn interrupted_cache_resumes_to_identical_output() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = text_config(dir.path());
    cfg.out_dir = dir.path().join("full");
    let full = harness::run(&cfg).unwrap();

    // Keep the first half of the cache and a torn partial line.
    let text = fs::read_to_string(&cfg.cache).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    let mut kept: String = lines[..lines.len() / 2]
        .iter()
        .map(|l| format!("{l}\n"))
        .collect();
    kept.push_str(&lines[lines.len() / 2][..10]);
    fs::write(&cfg.cache, kept).unwrap();

    cfg.out_dir = dir.path().join("resumed");
    let resumed = harness::run(&cfg).unwrap();
    assert!(resumed.total_calls() > 0 && resumed.total_calls() < full.total_calls());
    assert_eq!(resumed.total_calls(), resumed.cache_misses);
    assert_eq!(resumed.cache_hits + resumed.cache_misses, full.cache_misses);
    assert_eq!(
        common::report_bytes(&dir.path().join("full")),
        common::report_bytes(&dir.path().join("resumed"))
    );
    assert_eq!(
        fs::read_to_string(&cfg.cache).unwrap().lines().count(),
        lines.len()
    );
}

#[test]
fn concurrency_does_not_change_output() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = text_config(dir.path());
    for (threads, name) in [(1, "serial"), (16, "parallel")] {
        cfg.concurrency = threads;
        cfg.out_dir = dir.path().join(name);
        run_with_cache(&cfg, &CompletionCache::in_memory()).unwrap();
    }
    assert_eq!(
        common::report_bytes(&dir.path().join("serial")),
        common::report_bytes(&dir.path().join("parallel"))
    );
}

#[test]
fn config_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = text_config(dir.path());
    cfg.backends.truncate(3);
    cfg.out_dir = dir.path().join("out");
    let err = harness::run(&cfg).unwrap_err();
    assert_eq!(err.exit_code(), 2, "{err}");
}

/// Minimal HTTP/1.1 server: answers each request with the next canned
/// (status, body) pair and records the request headers and bodies.
fn serve(responses: Vec<(u16, String)>) -> (String, Arc<Mutex<Vec<String>>>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let seen = Arc::new(Mutex::new(Vec::new()));
    let log = seen.clone();
    thread::spawn(move || {
        for (status, body) in responses {
            let (stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut head = String::new();
            let mut len = 0;
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                    len = v.trim().parse().unwrap();
                }
                if line == "\r\n" || line.is_empty() {
                    break;
                }
                head.push_str(&line);
            }
            let mut req_body = vec![0; len];
            reader.read_exact(&mut req_body).unwrap();
            log.lock()
                .unwrap()
                .push(format!("{head}\n{}", String::from_utf8_lossy(&req_body)));
            let mut stream = stream;
            write!(
                stream,
                "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                body.len()
            )
            .unwrap();
        }
    });
    (format!("http://{addr}/v1/complete"), seen)
}

fn complete_via(
    cache: &CompletionCache,
    spec: &BackendSpec,
    prompt: &str,
) -> Result<String, BackendError> {
    cached_complete(cache, &Backend::new(spec.clone())?, prompt)
}

fn http_spec(endpoint: String, credential_env: Option<&str>) -> BackendSpec {
    BackendSpec::new(
        "remote",
        BackendKind::Http(HttpParams {
            endpoint,
            credential_env: credential_env.map(String::from),
            max_retries: 2,
            backoff_ms: 1,
            timeout_secs: 5,
        }),
    )
    .with_max_tokens(7)
}

#[test]
fn http_backend_retries_and_sends_credentials() {
    let (endpoint, seen) = serve(vec![
        (503, "busy".into()),
        (200, r#"{"text": " Paris"}"#.into()),
    ]);
    std::env::set_var("SELFCON_TEST_TOKEN", "s3cret");
    let spec = http_spec(endpoint, Some("SELFCON_TEST_TOKEN"));
    let cache = CompletionCache::in_memory();
    let out = complete_via(&cache, &spec, "The capital of France is").unwrap();
    assert_eq!(out, " Paris");
    let requests = seen.lock().unwrap();
    assert_eq!(requests.len(), 2);
    let last = requests[1].to_ascii_lowercase();
    assert!(last.contains("authorization: bearer s3cret"), "{last}");
    let body: serde_json::Value =
        serde_json::from_str(requests[1].split("\n\n").last().unwrap()).unwrap();
    assert_eq!(body["prompt"], "The capital of France is");
    assert_eq!(body["max_tokens"], 7);
    assert_eq!(body["temperature"], 0.0);
    drop(requests);
    // Served from the cache: the server would refuse a third connection.
    assert_eq!(
        complete_via(&cache, &spec, "The capital of France is").unwrap(),
        " Paris"
    );
}

#[test]
fn http_backend_gives_up_on_client_errors() {
    let (endpoint, seen) = serve(vec![(400, "bad request".into())]);
    let err = complete_via(
        &CompletionCache::in_memory(),
        &http_spec(endpoint, None),
        "x",
    )
    .unwrap_err();
    assert!(
        matches!(err, BackendError::Http { status: 400, .. }),
        "{err}"
    );
    assert_eq!(seen.lock().unwrap().len(), 1);
}

#[test]
fn http_backend_requires_its_credential() {
    let spec = http_spec(
        "http://127.0.0.1:9/".into(),
        Some("SELFCON_TEST_UNSET_VARIABLE"),
    );
    let err = complete_via(&CompletionCache::in_memory(), &spec, "x").unwrap_err();
    assert!(matches!(err, BackendError::MissingCredential(_)), "{err}");
}

#[test]
fn cache_replays_across_processes() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.jsonl");
    let spec = common::oracle_spec("oracle");
    {
        let cache = CompletionCache::open(&path).unwrap();
        assert_eq!(complete_via(&cache, &spec, "Q: 1+2 \n A:").unwrap(), "3");
        assert_eq!(cache.misses(), 1);
    }
    // Tamper with the stored completion: a replay must return the cached text.
    let text = fs::read_to_string(&path).unwrap().replace("\"3\"", "\"4\"");
    fs::write(&path, text).unwrap();
    let cache = CompletionCache::open(&path).unwrap();
    assert_eq!(complete_via(&cache, &spec, "Q: 1+2 \n A:").unwrap(), "4");
    assert_eq!((cache.hits(), cache.misses()), (1, 0));
    // A different parameter digest is a different key.
    let other = spec.clone().with_max_tokens(3);
    assert_eq!(complete_via(&cache, &other, "Q: 1+2 \n A:").unwrap(), "3");
    assert_eq!(cache.stats().records, 2);
}
