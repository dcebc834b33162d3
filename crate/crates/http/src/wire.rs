//! Chat-completions request bodies and response parsing.
//!
//! Scoring requests append the continuation as a final assistant message
//! and ask the server to echo its per-token log-probabilities instead of
//! generating. The expected response carries them in
//! `choices[0].logprobs.content`, one `{token, logprob}` object per
//! continuation token.

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use mulprobe_core::backend::{BackendError, FinishReason, GenerationResult, ScoringContext, TokenLosses, TokenUsage};
use serde_json::{json, Value};

fn data_url(media_type: &str, bytes: &[u8]) -> String {
    format!("data:{media_type};base64,{}", STANDARD.encode(bytes))
}

fn audio_format(media_type: &str) -> &str {
    media_type.rsplit('/').next().map(|s| s.trim_start_matches("x-")).unwrap_or("wav")
}

/// The `messages` array for one context.
pub fn messages(ctx: &ScoringContext) -> Value {
    let mut out = Vec::new();
    if let Some(sys) = &ctx.system {
        out.push(json!({"role": "system", "content": sys}));
    }
    let user = if ctx.image.is_none() && ctx.audio.is_none() {
        json!(ctx.prompt)
    } else {
        let mut parts = vec![json!({"type": "text", "text": ctx.prompt})];
        if let Some(img) = &ctx.image {
            parts.push(json!({"type": "image_url", "image_url": {"url": data_url(&img.media_type, &img.bytes)}}));
        }
        if let Some(aud) = &ctx.audio {
            parts.push(json!({
                "type": "input_audio",
                "input_audio": {"data": STANDARD.encode(&aud.bytes), "format": audio_format(&aud.media_type)}
            }));
        }
        Value::Array(parts)
    };
    out.push(json!({"role": "user", "content": user}));
    Value::Array(out)
}

pub fn generation_body(model: &str, ctx: &ScoringContext, budget: usize) -> Value {
    json!({
        "model": model,
        "messages": messages(ctx),
        "temperature": 0,
        "top_p": 1,
        "max_tokens": budget,
    })
}

pub fn scoring_body(model: &str, ctx: &ScoringContext, continuation: &str) -> Value {
    let mut msgs = messages(ctx);
    if let Value::Array(v) = &mut msgs {
        v.push(json!({"role": "assistant", "content": continuation}));
    }
    json!({
        "model": model,
        "messages": msgs,
        "temperature": 0,
        "max_tokens": 0,
        "echo": true,
        "logprobs": true,
        "add_generation_prompt": false,
        "continue_final_message": true,
    })
}

fn first_choice(v: &Value) -> Result<&Value, BackendError> {
    v.get("choices").and_then(|c| c.get(0)).ok_or_else(|| BackendError::Protocol("response has no choices[0]".into()))
}

pub fn parse_generation(v: &Value) -> Result<GenerationResult, BackendError> {
    let choice = first_choice(v)?;
    let text = choice
        .pointer("/message/content")
        .and_then(Value::as_str)
        .ok_or_else(|| BackendError::Protocol("choices[0].message.content missing".into()))?
        .to_string();
    let finish_reason = match choice.get("finish_reason").and_then(Value::as_str) {
        Some("length") => FinishReason::Length,
        _ => FinishReason::Stop,
    };
    let count = |k: &str| v.pointer(&format!("/usage/{k}")).and_then(Value::as_u64).unwrap_or(0);
    Ok(GenerationResult {
        text,
        finish_reason,
        usage: TokenUsage { prompt_tokens: count("prompt_tokens"), completion_tokens: count("completion_tokens") },
    })
}

fn squash(s: &str) -> String {
    s.chars().filter(|c| !c.is_whitespace()).collect()
}

/// Per-token losses of the echoed continuation. A response without
/// continuation log-probabilities marks the endpoint as probe-incapable.
pub fn parse_scoring(v: &Value, backend: &str, continuation: &str) -> Result<TokenLosses, BackendError> {
    let choice = first_choice(v)?;
    let Some(items) = choice.pointer("/logprobs/content").and_then(Value::as_array) else {
        return Err(BackendError::Capability {
            backend: backend.into(),
            reason: "response carries no continuation logprobs".into(),
        });
    };
    let mut losses = Vec::with_capacity(items.len());
    let mut text = String::new();
    let mut all_tokens = true;
    for (i, it) in items.iter().enumerate() {
        let lp = it
            .get("logprob")
            .and_then(Value::as_f64)
            .ok_or_else(|| BackendError::Protocol(format!("logprobs.content[{i}].logprob missing")))?;
        // 0.0 - lp rather than -lp keeps a zero loss positive
        losses.push(0.0 - lp);
        match it.get("token").and_then(Value::as_str) {
            Some(t) => text.push_str(t),
            None => all_tokens = false,
        }
    }
    // token strings are optional; when present they must spell the continuation
    if all_tokens && squash(&text) != squash(continuation) {
        return Err(BackendError::Protocol(format!(
            "scored tokens {text:?} do not spell the continuation {continuation:?}"
        )));
    }
    TokenLosses::new(losses)
}

/// Server-side error text if the body is an error object.
pub fn error_message(v: &Value) -> Option<String> {
    let e = v.get("error")?;
    Some(e.get("message").and_then(Value::as_str).map(str::to_string).unwrap_or_else(|| e.to_string()))
}
