//! Model-facing contract: deterministic generation and forced-completion
//! scoring.

mod mock;
mod replay;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hash::sha256_fields;
use crate::render::{Payload, RenderedInstance, Representation, AUDIO_INSTRUCTION, IMAGE_INSTRUCTION};

pub use mock::{GenerationRule, LossRule, MockBackend, MockSpec, OpsProxy, TableEntry, TableLosses};
pub use replay::{CacheMode, ReplayBackend, ReplayCache, ReplayRecord};

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("transport error: {message}")]
    Transport { message: String, retryable: bool },
    /// The backend cannot score a supplied continuation.
    #[error("backend {backend} is probe-incapable: {reason}")]
    Capability { backend: String, reason: String },
    #[error("malformed backend response: {0}")]
    Protocol(String),
    #[error("invalid backend request: {0}")]
    InvalidRequest(String),
    #[error("replay cache has no entry for request {key}")]
    ReplayMiss { key: String },
    #[error("replay cache: {0}")]
    Cache(String),
}

impl BackendError {
    pub fn is_retryable(&self) -> bool {
        matches!(self, Self::Transport { retryable: true, .. })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MediaPayload {
    pub media_type: String,
    #[serde(with = "crate::hash::hex_bytes")]
    pub bytes: Vec<u8>,
}

/// Everything the model sees before the continuation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoringContext {
    pub system: Option<String>,
    pub prompt: String,
    pub image: Option<MediaPayload>,
    pub audio: Option<MediaPayload>,
}

impl ScoringContext {
    pub fn text(prompt: impl Into<String>) -> Self {
        Self { system: None, prompt: prompt.into(), image: None, audio: None }
    }

    pub fn with_system(mut self, system: Option<String>) -> Self {
        self.system = system;
        self
    }

    /// Context for one rendered instance. Text payloads become the prompt;
    /// image and audio payloads travel with a fixed instruction.
    pub fn from_rendered(inst: &RenderedInstance) -> Self {
        match (&inst.payload, inst.representation) {
            (Payload::Text { text }, _) => Self::text(text.clone()),
            (Payload::Bytes { media_type, bytes }, Representation::Audio) => Self {
                system: None,
                prompt: AUDIO_INSTRUCTION.to_string(),
                image: None,
                audio: Some(MediaPayload { media_type: media_type.clone(), bytes: bytes.clone() }),
            },
            (Payload::Bytes { media_type, bytes }, _) => Self {
                system: None,
                prompt: IMAGE_INSTRUCTION.to_string(),
                image: Some(MediaPayload { media_type: media_type.clone(), bytes: bytes.clone() }),
                audio: None,
            },
        }
    }

    pub fn content_hash(&self) -> String {
        let none: &[u8] = b"\0none";
        let sys = self.system.as_deref().map(str::as_bytes).unwrap_or(none);
        let img_t = self.image.as_ref().map(|m| m.media_type.as_bytes()).unwrap_or(none);
        let img_b = self.image.as_ref().map(|m| m.bytes.as_slice()).unwrap_or(none);
        let aud_t = self.audio.as_ref().map(|m| m.media_type.as_bytes()).unwrap_or(none);
        let aud_b = self.audio.as_ref().map(|m| m.bytes.as_slice()).unwrap_or(none);
        sha256_fields([sys, self.prompt.as_bytes(), img_t, img_b, aud_t, aud_b])
    }
}

/// Per-token negative log-probabilities of the continuation only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenLosses {
    pub values: Vec<f64>,
}

impl TokenLosses {
    pub fn new(values: Vec<f64>) -> Result<Self, BackendError> {
        if values.is_empty() {
            return Err(BackendError::Protocol("continuation scored with zero tokens".into()));
        }
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(BackendError::Protocol(format!("token loss {v} is not finite and non-negative")));
        }
        Ok(Self { values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn total(&self) -> f64 {
        crate::scalar::stable_sum(self.values.iter().copied())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FinishReason {
    Stop,
    Length,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TokenUsage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationResult {
    pub text: String,
    pub finish_reason: FinishReason,
    pub usage: TokenUsage,
}

/// Generation budget used by the evaluation harness.
pub const DEFAULT_BUDGET: usize = 2048;

/// A model endpoint. Decoding is greedy (temperature 0).
pub trait ScoringBackend: Send + Sync {
    fn name(&self) -> &str;

    fn max_budget(&self) -> usize {
        DEFAULT_BUDGET
    }

    /// Whether [`ScoringBackend::score_continuation`] is available.
    fn supports_scoring(&self) -> bool;

    fn generate(&self, ctx: &ScoringContext, budget: usize) -> Result<GenerationResult, BackendError>;

    fn score_continuation(&self, ctx: &ScoringContext, continuation: &str) -> Result<TokenLosses, BackendError>;
}

impl<B: ScoringBackend + ?Sized> ScoringBackend for Box<B> {
    fn name(&self) -> &str {
        (**self).name()
    }
    fn max_budget(&self) -> usize {
        (**self).max_budget()
    }
    fn supports_scoring(&self) -> bool {
        (**self).supports_scoring()
    }
    fn generate(&self, ctx: &ScoringContext, budget: usize) -> Result<GenerationResult, BackendError> {
        (**self).generate(ctx, budget)
    }
    fn score_continuation(&self, ctx: &ScoringContext, continuation: &str) -> Result<TokenLosses, BackendError> {
        (**self).score_continuation(ctx, continuation)
    }
}

impl<B: ScoringBackend + ?Sized> ScoringBackend for std::sync::Arc<B> {
    fn name(&self) -> &str {
        (**self).name()
    }
    fn max_budget(&self) -> usize {
        (**self).max_budget()
    }
    fn supports_scoring(&self) -> bool {
        (**self).supports_scoring()
    }
    fn generate(&self, ctx: &ScoringContext, budget: usize) -> Result<GenerationResult, BackendError> {
        (**self).generate(ctx, budget)
    }
    fn score_continuation(&self, ctx: &ScoringContext, continuation: &str) -> Result<TokenLosses, BackendError> {
        (**self).score_continuation(ctx, continuation)
    }
}

/// Shared request checks for implementations.
pub fn check_score_request(continuation: &str) -> Result<(), BackendError> {
    if continuation.is_empty() {
        return Err(BackendError::InvalidRequest("continuation must be non-empty".into()));
    }
    Ok(())
}

pub fn check_budget(backend: &dyn ScoringBackend, budget: usize) -> Result<(), BackendError> {
    if budget == 0 || budget > backend.max_budget() {
        return Err(BackendError::InvalidRequest(format!("budget {budget} outside 1..={}", backend.max_budget())));
    }
    Ok(())
}
