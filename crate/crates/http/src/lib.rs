//! Chat-completions backend over HTTP.
//!
//! Endpoint, credential and model come from `MULPROBE_ENDPOINT`,
//! `MULPROBE_API_KEY` and `MULPROBE_MODEL`. Every attempt is logged to an
//! optional raw archive; wrap the backend in
//! [`mulprobe_core::backend::ReplayBackend`] to make runs replayable.

pub mod archive;
pub mod wire;

use std::path::PathBuf;
use std::thread::sleep;
use std::time::Duration;

use mulprobe_core::backend::{
    check_budget, check_score_request, BackendError, GenerationResult, ScoringBackend, ScoringContext, TokenLosses,
};
use mulprobe_core::hash::sha256_hex;
use serde::{Deserialize, Serialize};
use serde_json::Value;

pub use archive::{read_archive, Exchange, RawArchive};

pub const ENV_ENDPOINT: &str = "MULPROBE_ENDPOINT";
pub const ENV_API_KEY: &str = "MULPROBE_API_KEY";
pub const ENV_MODEL: &str = "MULPROBE_MODEL";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub base_delay_ms: u64,
    pub max_delay_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self { max_attempts: 4, base_delay_ms: 500, max_delay_ms: 8000 }
    }
}

impl RetryPolicy {
    /// Delay after failed attempt `attempt` (1-based).
    pub fn delay(&self, attempt: u32) -> Duration {
        let ms = self.base_delay_ms.saturating_mul(1u64 << (attempt - 1).min(20));
        Duration::from_millis(ms.min(self.max_delay_ms))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HttpConfig {
    /// Base URL such as `http://host:8000/v1`, or the full completions URL.
    pub endpoint: String,
    pub api_key: Option<String>,
    pub model: String,
    pub timeout: Duration,
    pub retry: RetryPolicy,
    /// Set to false for endpoints that cannot echo continuation logprobs.
    pub scoring: bool,
    pub max_budget: usize,
    pub archive: Option<PathBuf>,
}

impl HttpConfig {
    pub fn new(endpoint: impl Into<String>, model: impl Into<String>) -> Self {
        Self {
            endpoint: endpoint.into(),
            api_key: None,
            model: model.into(),
            timeout: Duration::from_secs(120),
            retry: RetryPolicy::default(),
            scoring: true,
            max_budget: mulprobe_core::backend::DEFAULT_BUDGET,
            archive: None,
        }
    }

    pub fn from_env() -> Result<Self, BackendError> {
        let var = |k: &str| std::env::var(k).ok().filter(|v| !v.trim().is_empty());
        let endpoint =
            var(ENV_ENDPOINT).ok_or_else(|| BackendError::InvalidRequest(format!("{ENV_ENDPOINT} is not set")))?;
        let model = var(ENV_MODEL).ok_or_else(|| BackendError::InvalidRequest(format!("{ENV_MODEL} is not set")))?;
        let mut c = Self::new(endpoint, model);
        c.api_key = var(ENV_API_KEY);
        Ok(c)
    }

    pub fn url(&self) -> String {
        let base = self.endpoint.trim_end_matches('/');
        if base.ends_with("/chat/completions") {
            base.to_string()
        } else {
            format!("{base}/chat/completions")
        }
    }
}

pub struct HttpBackend {
    config: HttpConfig,
    agent: ureq::Agent,
    archive: Option<RawArchive>,
    name: String,
}

enum Outcome {
    Done(Value),
    Retry(BackendError),
    Fail(BackendError),
}

impl HttpBackend {
    pub fn new(config: HttpConfig) -> Result<Self, BackendError> {
        if config.retry.max_attempts == 0 {
            return Err(BackendError::InvalidRequest("retry.max_attempts must be at least 1".into()));
        }
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(config.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        let archive = config.archive.as_deref().map(RawArchive::open).transpose()?;
        let name = format!("http:{}", config.model);
        Ok(Self { config, agent, archive, name })
    }

    pub fn config(&self) -> &HttpConfig {
        &self.config
    }

    fn attempt(&self, url: &str, body: &Value, hash: &str, n: u32, scoring: bool) -> Result<Outcome, BackendError> {
        let mut req = self.agent.post(url).header("Content-Type", "application/json");
        if let Some(k) = &self.config.api_key {
            req = req.header("Authorization", format!("Bearer {k}"));
        }
        let (status, text) = match req.send_json(body) {
            Ok(mut resp) => {
                let status = resp.status().as_u16();
                match resp.body_mut().read_to_string() {
                    Ok(t) => (Some(status), t),
                    Err(e) => (Some(status), format!("<unreadable body: {e}>")),
                }
            }
            Err(e) => (None, e.to_string()),
        };
        if let Some(a) = &self.archive {
            a.append(&Exchange {
                request_hash: hash.to_string(),
                attempt: n,
                url: url.to_string(),
                request: body.clone(),
                status,
                response: text.clone(),
            })?;
        }
        let Some(status) = status else {
            return Ok(Outcome::Retry(BackendError::Transport { message: text, retryable: true }));
        };
        let parsed: Option<Value> = serde_json::from_str(&text).ok();
        let server_msg = parsed.as_ref().and_then(wire::error_message).unwrap_or_else(|| text.clone());
        Ok(match status {
            200..=299 => match parsed {
                Some(v) => Outcome::Done(v),
                None => Outcome::Fail(BackendError::Protocol(format!("response is not JSON: {text}"))),
            },
            429 | 500..=599 => Outcome::Retry(BackendError::Transport {
                message: format!("HTTP {status}: {server_msg}"),
                retryable: true,
            }),
            400 | 404 | 422 if scoring => Outcome::Fail(BackendError::Capability {
                backend: self.name.clone(),
                reason: format!("scoring request refused with HTTP {status}: {server_msg}"),
            }),
            _ => Outcome::Fail(BackendError::InvalidRequest(format!("HTTP {status}: {server_msg}"))),
        })
    }

    fn post(&self, body: &Value, scoring: bool) -> Result<Value, BackendError> {
        let url = self.config.url();
        let hash = sha256_hex(body.to_string());
        let mut last = None;
        for n in 1..=self.config.retry.max_attempts {
            match self.attempt(&url, body, &hash, n, scoring)? {
                Outcome::Done(v) => return Ok(v),
                Outcome::Fail(e) => return Err(e),
                Outcome::Retry(e) => {
                    log::warn!("attempt {n} for request {} failed: {e}", &hash[..12]);
                    last = Some(e);
                    if n < self.config.retry.max_attempts {
                        sleep(self.config.retry.delay(n));
                    }
                }
            }
        }
        let e = last.expect("at least one attempt");
        Err(BackendError::Transport {
            message: format!("gave up after {} attempts: {e}", self.config.retry.max_attempts),
            retryable: false,
        })
    }
}

impl ScoringBackend for HttpBackend {
    fn name(&self) -> &str {
        &self.name
    }

    fn max_budget(&self) -> usize {
        self.config.max_budget
    }

    fn supports_scoring(&self) -> bool {
        self.config.scoring
    }

    fn generate(&self, ctx: &ScoringContext, budget: usize) -> Result<GenerationResult, BackendError> {
        check_budget(self, budget)?;
        let v = self.post(&wire::generation_body(&self.config.model, ctx, budget), false)?;
        wire::parse_generation(&v)
    }

    fn score_continuation(&self, ctx: &ScoringContext, continuation: &str) -> Result<TokenLosses, BackendError> {
        check_score_request(continuation)?;
        if !self.config.scoring {
            return Err(BackendError::Capability {
                backend: self.name.clone(),
                reason: "endpoint configured without continuation scoring".into(),
            });
        }
        let v = self.post(&wire::scoring_body(&self.config.model, ctx, continuation), true)?;
        wire::parse_scoring(&v, &self.name, continuation)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn url_normalization() {
        assert_eq!(HttpConfig::new("http://h/v1/", "m").url(), "http://h/v1/chat/completions");
        assert_eq!(HttpConfig::new("http://h/v1/chat/completions", "m").url(), "http://h/v1/chat/completions");
    }

    #[test]
    fn backoff_is_bounded() {
        let p = RetryPolicy { max_attempts: 10, base_delay_ms: 100, max_delay_ms: 1000 };
        assert_eq!(p.delay(1), Duration::from_millis(100));
        assert_eq!(p.delay(3), Duration::from_millis(400));
        assert_eq!(p.delay(9), Duration::from_millis(1000));
    }

    #[test]
    fn zero_attempts_rejected() {
        let mut c = HttpConfig::new("http://127.0.0.1:9", "m");
        c.retry.max_attempts = 0;
        assert!(HttpBackend::new(c).is_err());
    }
}
