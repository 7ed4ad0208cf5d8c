use std::time::{Duration, Instant};

use serde_json::{json, Value as Json};

use super::{check_request, secs, LanguageModel, LmError, LmRequest, LmResponse, LmResult};
use super::{DEFAULT_CONTEXT_BUDGET, DEFAULT_MAX_IN_FLIGHT};

/// Retry schedule for transport failures and 5xx responses. Client errors
/// (4xx) and malformed bodies are never retried.
#[derive(Debug, Clone, PartialEq)]
pub struct RetryPolicy {
    /// Total attempts, including the first.
    pub attempts: u32,
    pub initial_backoff: Duration,
    /// Upper bound on the summed sleep time between attempts.
    pub max_total_backoff: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            attempts: 3,
            initial_backoff: Duration::from_millis(500),
            max_total_backoff: Duration::from_secs(10),
        }
    }
}

impl RetryPolicy {
    pub fn none() -> Self {
        RetryPolicy {
            attempts: 1,
            ..RetryPolicy::default()
        }
    }

    /// Sleep before attempt `n` (1-based, n >= 2), or `None` when the
    /// ceiling has been used up.
    fn backoff(&self, n: u32, slept: Duration) -> Option<Duration> {
        let exp = self.initial_backoff.saturating_mul(1 << (n - 2).min(20));
        let left = self.max_total_backoff.checked_sub(slept)?;
        if left.is_zero() && !exp.is_zero() {
            return None;
        }
        Some(exp.min(left))
    }
}

enum Failure {
    Retryable(String),
    Fatal(String),
}

fn attempt(client: &reqwest::blocking::Client, url: &str, api_key: Option<&str>, body: &Json) -> Result<Json, Failure> {
    let mut rb = client.post(url).json(body);
    if let Some(key) = api_key {
        rb = rb.bearer_auth(key);
    }
    let resp = rb.send().map_err(|e| Failure::Retryable(format!("transport: {e}")))?;
    let status = resp.status();
    let text = resp
        .text()
        .map_err(|e| Failure::Retryable(format!("reading body: {e}")))?;
    if status.is_server_error() {
        return Err(Failure::Retryable(format!("HTTP {status}: {}", snippet(&text))));
    }
    if !status.is_success() {
        return Err(Failure::Fatal(format!("HTTP {status}: {}", snippet(&text))));
    }
    serde_json::from_str(&text).map_err(|e| Failure::Fatal(format!("invalid JSON body: {e}")))
}

fn snippet(s: &str) -> String {
    s.chars().take(200).collect()
}

/// POSTs `body` as JSON and returns the parsed reply, retrying per `policy`.
pub(crate) fn post_json(
    client: &reqwest::blocking::Client,
    url: &str,
    api_key: Option<&str>,
    body: &Json,
    policy: &RetryPolicy,
) -> Result<Json, LmError> {
    let attempts = policy.attempts.max(1);
    let mut slept = Duration::ZERO;
    let mut last = String::new();
    for n in 1..=attempts {
        if n > 1 {
            match policy.backoff(n, slept) {
                Some(d) => {
                    std::thread::sleep(d);
                    slept += d;
                }
                None => break,
            }
        }
        match attempt(client, url, api_key, body) {
            Ok(v) => return Ok(v),
            Err(Failure::Fatal(m)) => return Err(LmError::Backend(m)),
            Err(Failure::Retryable(m)) => {
                log::debug!("attempt {n}/{attempts} to {url} failed: {m}");
                last = m;
            }
        }
    }
    Err(LmError::Backend(format!("{last} (after retries)")))
}

#[derive(Debug, Clone)]
pub struct HttpLmConfig {
    /// Full URL of the chat-completions route.
    pub endpoint: String,
    pub api_key: Option<String>,
    pub model: String,
    pub context_budget: usize,
    pub max_in_flight: usize,
    pub retry: RetryPolicy,
    pub timeout: Duration,
}

impl HttpLmConfig {
    pub fn new(endpoint: impl Into<String>, model: impl Into<String>) -> Self {
        HttpLmConfig {
            endpoint: endpoint.into(),
            api_key: None,
            model: model.into(),
            context_budget: DEFAULT_CONTEXT_BUDGET,
            max_in_flight: DEFAULT_MAX_IN_FLIGHT,
            retry: RetryPolicy::default(),
            timeout: Duration::from_secs(120),
        }
    }

    /// Reads `TAG_LM_ENDPOINT`, `TAG_LM_MODEL` and optional `TAG_LM_API_KEY`.
    pub fn from_env() -> Result<Self, LmError> {
        let endpoint = env_required("TAG_LM_ENDPOINT")?;
        let model = env_required("TAG_LM_MODEL")?;
        let mut cfg = HttpLmConfig::new(endpoint, model);
        cfg.api_key = std::env::var("TAG_LM_API_KEY").ok().filter(|k| !k.is_empty());
        Ok(cfg)
    }
}

pub(crate) fn env_required(name: &str) -> Result<String, LmError> {
    match std::env::var(name) {
        Ok(v) if !v.trim().is_empty() => Ok(v),
        _ => Err(LmError::Backend(format!("environment variable {name} is not set"))),
    }
}

/// Chat-completions client.
#[derive(Debug)]
pub struct HttpLm {
    cfg: HttpLmConfig,
    client: reqwest::blocking::Client,
}

impl HttpLm {
    pub fn new(cfg: HttpLmConfig) -> Result<Self, LmError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(cfg.timeout)
            .build()
            .map_err(|e| LmError::Backend(format!("building HTTP client: {e}")))?;
        Ok(HttpLm { cfg, client })
    }

    pub fn config(&self) -> &HttpLmConfig {
        &self.cfg
    }

    fn body(&self, req: &LmRequest) -> Json {
        let mut messages = Vec::new();
        if let Some(sys) = &req.system_prompt {
            messages.push(json!({"role": "system", "content": sys}));
        }
        messages.push(json!({"role": "user", "content": req.user_prompt}));
        json!({
            "model": self.cfg.model,
            "messages": messages,
            "max_tokens": req.max_tokens,
            "temperature": req.temperature,
        })
    }
}

impl LanguageModel for HttpLm {
    fn complete(&self, req: &LmRequest) -> LmResult {
        check_request(req, self.cfg.context_budget)?;
        let start = Instant::now();
        let reply = post_json(
            &self.client,
            &self.cfg.endpoint,
            self.cfg.api_key.as_deref(),
            &self.body(req),
            &self.cfg.retry,
        )?;
        let text = reply
            .pointer("/choices/0/message/content")
            .and_then(Json::as_str)
            .ok_or_else(|| LmError::Backend("response has no choices[0].message.content".into()))?
            .to_string();
        Ok(LmResponse {
            prompt_chars: req.prompt_chars(),
            completion_chars: text.chars().count(),
            text,
            latency_s: secs(start.elapsed()),
        })
    }

    fn context_budget(&self) -> usize {
        self.cfg.context_budget
    }

    fn max_in_flight(&self) -> usize {
        self.cfg.max_in_flight.max(1)
    }
}
