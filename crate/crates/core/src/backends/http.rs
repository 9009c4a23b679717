//! Generic JSON completion endpoint.
//!
//! Request body: `{"prompt": ..., "max_tokens": ..., "temperature": 0, "stop": [...]}`.
//! Response body: `{"text": ...}`. Credentials, when configured, are read
//! from the named environment variable and sent as a bearer token.

use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::BackendError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HttpParams {
    pub endpoint: String,
    #[serde(default)]
    pub credential_env: Option<String>,
    #[serde(default = "default_retries")]
    pub max_retries: u32,
    #[serde(default = "default_backoff_ms")]
    pub backoff_ms: u64,
    #[serde(default = "default_timeout_secs")]
    pub timeout_secs: u64,
}

fn default_retries() -> u32 {
    3
}
fn default_backoff_ms() -> u64 {
    500
}
fn default_timeout_secs() -> u64 {
    60
}

#[derive(Debug, Serialize)]
struct CompletionRequest<'a> {
    prompt: &'a str,
    max_tokens: u32,
    temperature: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    stop: Option<&'a [String]>,
}

#[derive(Debug, Deserialize)]
struct CompletionResponse {
    text: String,
}

fn is_transient(status: u16) -> bool {
    matches!(status, 408 | 429 | 500 | 502 | 503 | 504)
}

pub(crate) struct HttpClient {
    agent: ureq::Agent,
    params: HttpParams,
}

impl HttpClient {
    pub(crate) fn new(params: HttpParams) -> Self {
        let agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_secs(params.timeout_secs)))
            .build()
            .into();
        HttpClient { agent, params }
    }

    pub(crate) fn complete(
        &self,
        prompt: &str,
        max_tokens: u32,
        stop: Option<&[String]>,
    ) -> Result<String, BackendError> {
        let token = match &self.params.credential_env {
            Some(var) => {
                Some(std::env::var(var).map_err(|_| BackendError::MissingCredential(var.clone()))?)
            }
            None => None,
        };
        let body = CompletionRequest {
            prompt,
            max_tokens,
            temperature: 0.0,
            stop,
        };

        let mut attempt = 0;
        loop {
            let outcome = self.send_once(&body, token.as_deref());
            let retry = match &outcome {
                Err(BackendError::Http { status, .. }) => is_transient(*status),
                Err(BackendError::Transport(_)) => true,
                _ => false,
            };
            if !retry || attempt >= self.params.max_retries {
                return outcome;
            }
            thread::sleep(Duration::from_millis(
                self.params.backoff_ms << attempt.min(16),
            ));
            attempt += 1;
        }
    }

    fn send_once(
        &self,
        body: &CompletionRequest<'_>,
        token: Option<&str>,
    ) -> Result<String, BackendError> {
        let mut req = self.agent.post(&self.params.endpoint);
        if let Some(t) = token {
            req = req.header("Authorization", format!("Bearer {t}"));
        }
        let mut resp = req
            .send_json(body)
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        let status = resp.status().as_u16();
        let text = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        if !(200..300).contains(&status) {
            return Err(BackendError::Http { status, body: text });
        }
        serde_json::from_str::<CompletionResponse>(&text)
            .map(|r| r.text)
            .map_err(|e| BackendError::BadResponse(e.to_string()))
    }
}
