use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{check_request, secs, LanguageModel, LmError, LmRequest, LmResponse, LmResult};
use super::{DEFAULT_CONTEXT_BUDGET, DEFAULT_MAX_IN_FLIGHT};

/// Returns `response` when `pattern` occurs in the user prompt. Lower
/// `priority` wins; ties go to the rule listed first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MockRule {
    pub pattern: String,
    pub response: String,
    #[serde(default)]
    pub priority: i32,
}

impl MockRule {
    pub fn new(pattern: impl Into<String>, response: impl Into<String>) -> Self {
        MockRule {
            pattern: pattern.into(),
            response: response.into(),
            priority: 0,
        }
    }

    pub fn with_priority(mut self, priority: i32) -> Self {
        self.priority = priority;
        self
    }
}

/// File form of a mock configuration.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MockConfig {
    #[serde(default)]
    pub rules: Vec<MockRule>,
    #[serde(default)]
    pub default: Option<String>,
    #[serde(default)]
    pub context_budget: Option<usize>,
}

impl MockConfig {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

/// Deterministic backend for tests and offline benchmarking.
#[derive(Debug)]
pub struct MockLm {
    rules: Vec<MockRule>,
    default: Option<String>,
    budget: usize,
    max_in_flight: usize,
    calls: AtomicUsize,
    log: Mutex<Vec<String>>,
}

impl MockLm {
    pub fn new(rules: Vec<MockRule>, default: Option<String>) -> Self {
        let mut rules = rules;
        // Stable: equal priorities keep their listed order.
        rules.sort_by_key(|r| r.priority);
        MockLm {
            rules,
            default,
            budget: DEFAULT_CONTEXT_BUDGET,
            max_in_flight: DEFAULT_MAX_IN_FLIGHT,
            calls: AtomicUsize::new(0),
            log: Mutex::new(Vec::new()),
        }
    }

    /// A mock that answers every prompt with `response`.
    pub fn constant(response: impl Into<String>) -> Self {
        MockLm::new(Vec::new(), Some(response.into()))
    }

    pub fn from_config(cfg: MockConfig) -> Self {
        let budget = cfg.context_budget;
        let mut lm = MockLm::new(cfg.rules, cfg.default);
        if let Some(b) = budget {
            lm.budget = b;
        }
        lm
    }

    pub fn with_budget(mut self, budget: usize) -> Self {
        self.budget = budget;
        self
    }

    pub fn with_max_in_flight(mut self, n: usize) -> Self {
        self.max_in_flight = n.max(1);
        self
    }

    /// Number of `complete` calls that reached the rule table.
    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    /// User prompts seen so far, in arrival order.
    pub fn prompts(&self) -> Vec<String> {
        self.log.lock().unwrap().clone()
    }

    fn lookup(&self, prompt: &str) -> Option<&str> {
        self.rules
            .iter()
            .find(|r| prompt.contains(&r.pattern))
            .map(|r| r.response.as_str())
            .or(self.default.as_deref())
    }
}

impl LanguageModel for MockLm {
    fn complete(&self, req: &LmRequest) -> LmResult {
        let start = Instant::now();
        check_request(req, self.budget)?;
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.log.lock().unwrap().push(req.user_prompt.clone());
        let text = self.lookup(&req.user_prompt).ok_or(LmError::MockUnmatched)?;
        Ok(LmResponse {
            text: text.to_string(),
            prompt_chars: req.prompt_chars(),
            completion_chars: text.chars().count(),
            latency_s: secs(start.elapsed()),
        })
    }

    fn context_budget(&self) -> usize {
        self.budget
    }

    fn max_in_flight(&self) -> usize {
        self.max_in_flight
    }
}
