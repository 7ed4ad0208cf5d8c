//! Language-model gateway: one request/response shape, a backend trait with
//! bounded concurrent batching, an HTTP chat-completions client and a
//! deterministic substring-rule mock.

mod http;
mod mock;

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use thiserror::Error;

pub(crate) use http::{env_required, post_json};
pub use http::{HttpLm, HttpLmConfig, RetryPolicy};
pub use mock::{MockConfig, MockLm, MockRule};

/// Default prompt budget in estimated tokens.
pub const DEFAULT_CONTEXT_BUDGET: usize = 8192;
/// Default number of requests a batch keeps in flight.
pub const DEFAULT_MAX_IN_FLIGHT: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct LmRequest {
    pub system_prompt: Option<String>,
    pub user_prompt: String,
    pub max_tokens: u32,
    pub temperature: f32,
}

impl LmRequest {
    pub fn new(user_prompt: impl Into<String>) -> Self {
        LmRequest {
            system_prompt: None,
            user_prompt: user_prompt.into(),
            max_tokens: 512,
            temperature: 0.0,
        }
    }

    pub fn with_system(mut self, system: impl Into<String>) -> Self {
        self.system_prompt = Some(system.into());
        self
    }

    pub fn with_max_tokens(mut self, max_tokens: u32) -> Self {
        self.max_tokens = max_tokens;
        self
    }

    /// Characters counted against the context budget.
    pub fn prompt_chars(&self) -> usize {
        self.user_prompt.chars().count() + self.system_prompt.as_deref().map_or(0, |s| s.chars().count())
    }

    fn check(&self) -> Result<(), LmError> {
        if self.max_tokens == 0 {
            return Err(LmError::InvalidRequest("max_tokens must be positive".into()));
        }
        if self.temperature.is_nan() || self.temperature < 0.0 {
            return Err(LmError::InvalidRequest("temperature must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LmResponse {
    pub text: String,
    pub prompt_chars: usize,
    pub completion_chars: usize,
    pub latency_s: f64,
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum LmError {
    #[error("backend error: {0}")]
    Backend(String),
    #[error("prompt needs ~{estimated} tokens, budget is {budget}")]
    ContextOverflow { estimated: usize, budget: usize },
    #[error("no mock rule matches and no default response is configured")]
    MockUnmatched,
    #[error("invalid request: {0}")]
    InvalidRequest(String),
}

/// Token estimate used for budgeting: one token per four characters,
/// rounded up.
pub fn estimate_tokens(chars: usize) -> usize {
    chars.div_ceil(4)
}

/// Fails with `ContextOverflow` when the request's estimated size exceeds
/// `budget`, and rejects malformed requests.
pub fn check_request(req: &LmRequest, budget: usize) -> Result<(), LmError> {
    req.check()?;
    let estimated = estimate_tokens(req.prompt_chars());
    if estimated > budget {
        return Err(LmError::ContextOverflow { estimated, budget });
    }
    Ok(())
}

pub type LmResult = Result<LmResponse, LmError>;

/// A chat-completion backend. Implementations must be safe to call from
/// several threads at once.
pub trait LanguageModel: Send + Sync {
    fn complete(&self, req: &LmRequest) -> LmResult;

    /// Prompt budget in estimated tokens (see [`estimate_tokens`]).
    fn context_budget(&self) -> usize {
        DEFAULT_CONTEXT_BUDGET
    }

    fn max_in_flight(&self) -> usize {
        DEFAULT_MAX_IN_FLIGHT
    }

    /// Runs requests with at most [`max_in_flight`](Self::max_in_flight)
    /// in flight. `result[i]` always answers `reqs[i]`; a failed request
    /// fails only its own slot.
    fn complete_batch(&self, reqs: &[LmRequest]) -> Vec<LmResult> {
        fan_out(reqs, self.max_in_flight(), |r| self.complete(r))
    }
}

impl<T: LanguageModel + ?Sized> LanguageModel for &T {
    fn complete(&self, req: &LmRequest) -> LmResult {
        (**self).complete(req)
    }

    fn context_budget(&self) -> usize {
        (**self).context_budget()
    }

    fn max_in_flight(&self) -> usize {
        (**self).max_in_flight()
    }

    fn complete_batch(&self, reqs: &[LmRequest]) -> Vec<LmResult> {
        (**self).complete_batch(reqs)
    }
}

impl<T: LanguageModel + ?Sized> LanguageModel for std::sync::Arc<T> {
    fn complete(&self, req: &LmRequest) -> LmResult {
        (**self).complete(req)
    }

    fn context_budget(&self) -> usize {
        (**self).context_budget()
    }

    fn max_in_flight(&self) -> usize {
        (**self).max_in_flight()
    }

    fn complete_batch(&self, reqs: &[LmRequest]) -> Vec<LmResult> {
        (**self).complete_batch(reqs)
    }
}

/// Applies `f` to every item using up to `max_in_flight` worker threads.
/// Output is positionally aligned with input.
pub fn fan_out<T, R, F>(items: &[T], max_in_flight: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync,
{
    let workers = max_in_flight.max(1).min(items.len());
    if workers <= 1 {
        return items.iter().map(&f).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<R>>> = Mutex::new((0..items.len()).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= items.len() {
                    break;
                }
                let r = f(&items[i]);
                slots.lock().unwrap()[i] = Some(r);
            });
        }
    });
    slots
        .into_inner()
        .unwrap()
        .into_iter()
        .map(|r| r.expect("every slot filled"))
        .collect()
}

pub(crate) fn secs(d: Duration) -> f64 {
    d.as_secs_f64()
}
