use std::time::Duration;

use serde_json::Value;

use super::{ChatClient, LlmError, LlmRequest};

pub const API_KEY_ENV: &str = "KGR_API_KEY";

#[derive(Debug, Clone)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub base_delay: Duration,
    pub max_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_attempts: 5,
            base_delay: Duration::from_millis(500),
            max_delay: Duration::from_secs(8),
        }
    }
}

impl RetryPolicy {
    /// Delay before attempt `attempt + 1` (attempts are 1-based).
    pub fn delay(&self, attempt: u32) -> Duration {
        let factor = 1u32 << attempt.saturating_sub(1).min(16);
        self.base_delay.saturating_mul(factor).min(self.max_delay)
    }
}

/// POSTs `{model, messages, temperature, max_tokens}` to a chat-completion URL.
pub struct HttpBackend {
    url: String,
    api_key: Option<String>,
    agent: ureq::Agent,
    retry: RetryPolicy,
}

enum Attempt {
    Done(String),
    Fatal(LlmError),
    Retry(String),
}

impl HttpBackend {
    pub fn new(url: impl Into<String>, api_key: Option<String>, timeout: Duration, retry: RetryPolicy) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(timeout))
            .build()
            .into();
        HttpBackend {
            url: url.into(),
            api_key,
            agent,
            retry,
        }
    }

    /// Reads the bearer token from `KGR_API_KEY`.
    pub fn from_env(url: impl Into<String>, timeout: Duration, retry: RetryPolicy) -> Self {
        let key = std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty());
        Self::new(url, key, timeout, retry)
    }

    fn attempt(&self, request: &LlmRequest) -> Attempt {
        let mut call = self.agent.post(&self.url);
        if let Some(key) = &self.api_key {
            call = call.header("Authorization", &format!("Bearer {key}"));
        }
        let mut response = match call.send_json(request) {
            Ok(response) => response,
            Err(err) => return Attempt::Retry(err.to_string()),
        };
        let status = response.status().as_u16();
        let body = match response.body_mut().read_to_string() {
            Ok(body) => body,
            Err(err) => return Attempt::Retry(format!("reading body: {err}")),
        };
        match status {
            200..=299 => match extract_answer(&body) {
                Ok(text) => Attempt::Done(text),
                Err(err) => Attempt::Fatal(err),
            },
            408 | 429 | 500..=599 => Attempt::Retry(format!("status {status}: {body}")),
            _ => Attempt::Fatal(LlmError::Client { status, body }),
        }
    }
}

impl ChatClient for HttpBackend {
    fn complete(&self, request: &LlmRequest, _trial: u32) -> Result<String, LlmError> {
        let mut last = String::new();
        for attempt in 1..=self.retry.max_attempts {
            match self.attempt(request) {
                Attempt::Done(text) => return Ok(text),
                Attempt::Fatal(err) => return Err(err),
                Attempt::Retry(reason) => {
                    log::warn!("{} attempt {attempt} failed: {reason}", self.url);
                    last = reason;
                }
            }
            if attempt < self.retry.max_attempts {
                std::thread::sleep(self.retry.delay(attempt));
            }
        }
        Err(LlmError::RetriesExhausted {
            attempts: self.retry.max_attempts,
            last,
        })
    }
}

/// First choice's message content (chat API), or its `text` (completions API).
pub(crate) fn extract_answer(body: &str) -> Result<String, LlmError> {
    let value: Value = serde_json::from_str(body).map_err(|e| LlmError::Decode(e.to_string()))?;
    let choice = value
        .get("choices")
        .and_then(|c| c.get(0))
        .ok_or_else(|| LlmError::Decode("response has no choices".into()))?;
    choice
        .pointer("/message/content")
        .or_else(|| choice.get("text"))
        .and_then(Value::as_str)
        .map(str::to_string)
        .ok_or_else(|| LlmError::Decode("first choice has no content".into()))
}
