//! Deterministic in-process backend.
//!
//! Tokenization is one token per Unicode scalar value, and every scoring
//! rule assigns a loss to each token from the context and that token
//! alone. Scoring is therefore additive: scoring `x + y` returns the losses
//! of `x` followed by those of `y`.

use std::collections::BTreeMap;

use num_bigint::BigUint;
use regex::Regex;
use serde::{Deserialize, Serialize};

use super::{
    check_budget, check_score_request, BackendError, FinishReason, GenerationResult, ScoringBackend, ScoringContext,
    TokenLosses, TokenUsage,
};
use crate::arith::{compute_load, Operand};
use crate::hash::sha256_fields;
use crate::render::image::embedded_text;
use crate::render::words::parse_words;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TableLosses {
    Uniform(f64),
    PerToken(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableEntry {
    /// Only applies when the perceived problem text contains this string.
    #[serde(default)]
    pub context: Option<String>,
    pub continuation: String,
    pub losses: TableLosses,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum LossRule {
    Constant {
        value: f64,
    },
    /// Each token's loss is uniform in `[min, max)` from a hash of the
    /// seed, the context and the token.
    Hash {
        seed: u64,
        min: f64,
        max: f64,
    },
    /// Exact `(context, continuation)` lookup, first match wins.
    Table {
        entries: Vec<TableEntry>,
        #[serde(default)]
        fallback: Option<Box<LossRule>>,
    },
    /// Elementwise sum of several rules.
    Sum {
        rules: Vec<LossRule>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OpsProxy {
    /// Arithmetic load `C`.
    #[default]
    Load,
    /// Non-zero digit products plus carries.
    CarryAware,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum GenerationRule {
    /// Always answers with the exact product.
    Correct,
    /// Correct with probability `(1 - p)^N`, `N` from `proxy`. The draw is
    /// a hash of the seed, the operands and the channel.
    Accuracy {
        p: f64,
        seed: u64,
        #[serde(default)]
        proxy: OpsProxy,
        /// Channel overrides of `p` keyed by `text`, `image` or `audio`.
        #[serde(default)]
        per_modality: BTreeMap<String, f64>,
    },
    /// Repeats the prompt.
    Echo,
    Fixed {
        text: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MockSpec {
    #[serde(default)]
    pub scoring: Option<LossRule>,
    #[serde(default = "default_generation")]
    pub generation: GenerationRule,
    #[serde(default = "default_max_budget")]
    pub max_budget: usize,
}

fn default_generation() -> GenerationRule {
    GenerationRule::Correct
}

fn default_max_budget() -> usize {
    super::DEFAULT_BUDGET
}

impl Default for MockSpec {
    fn default() -> Self {
        Self { scoring: None, generation: GenerationRule::Correct, max_budget: super::DEFAULT_BUDGET }
    }
}

#[derive(Debug, Clone)]
pub struct MockBackend {
    spec: MockSpec,
    numeral: Regex,
    worded: Regex,
}

fn unit_hash(fields: &[&[u8]]) -> f64 {
    let h = sha256_fields(fields.iter().copied());
    let v = u64::from_str_radix(&h[..16], 16).expect("hex");
    (v >> 11) as f64 / (1u64 << 53) as f64
}

impl MockBackend {
    pub fn new(spec: MockSpec) -> Self {
        Self {
            spec,
            numeral: Regex::new(r"(\d+)\s*[×x*]\s*(\d+)").expect("regex"),
            worded: Regex::new(r"(?i)what is ([a-z\- ]+?) times ([a-z\- ]+?)\?").expect("regex"),
        }
    }

    pub fn spec(&self) -> &MockSpec {
        &self.spec
    }

    /// The problem text visible in the context: the prompt plus any text
    /// embedded in an image payload.
    pub fn perceived_text(ctx: &ScoringContext) -> String {
        let mut s = ctx.prompt.clone();
        if let Some(img) = &ctx.image {
            if let Some(t) = embedded_text(&img.bytes) {
                s.push('\n');
                s.push_str(&t);
            }
        }
        s
    }

    /// Operands as read from the context. Audio is not transcribed.
    pub fn perceive(&self, ctx: &ScoringContext) -> Option<(BigUint, BigUint)> {
        let text = Self::perceived_text(ctx);
        if let Some(c) = self.numeral.captures(&text) {
            let a = c[1].parse::<BigUint>().ok()?;
            let b = c[2].parse::<BigUint>().ok()?;
            return Some((a, b));
        }
        let c = self.worded.captures(&text)?;
        Some((BigUint::from(parse_words(&c[1])?), BigUint::from(parse_words(&c[2])?)))
    }

    fn modality(ctx: &ScoringContext) -> &'static str {
        if ctx.image.is_some() {
            "image"
        } else if ctx.audio.is_some() {
            "audio"
        } else {
            "text"
        }
    }

    fn answer(&self, ctx: &ScoringContext) -> String {
        let Some((a, b)) = self.perceive(ctx) else {
            return "I cannot read the problem.".to_string();
        };
        if ctx.prompt.starts_with(crate::stats::TRANSCRIBE_INSTRUCTION) {
            return format!("{a} × {b}");
        }
        let product = &a * &b;
        match &self.spec.generation {
            GenerationRule::Correct => format!("The answer is {product}."),
            GenerationRule::Echo => ctx.prompt.clone(),
            GenerationRule::Fixed { text } => text.clone(),
            GenerationRule::Accuracy { p, seed, proxy, per_modality } => {
                let modality = Self::modality(ctx);
                let p = per_modality.get(modality).copied().unwrap_or(*p).clamp(0.0, 1.0);
                let (oa, ob) = (Operand::new(a.clone()), Operand::new(b.clone()));
                let load = compute_load(&oa, &ob);
                let n = match proxy {
                    OpsProxy::Load => load.load_c,
                    OpsProxy::CarryAware => load.carry_aware_ops(),
                } as f64;
                let (sa, sb) = (a.to_string(), b.to_string());
                let u = unit_hash(&[&seed.to_le_bytes(), sa.as_bytes(), sb.as_bytes(), modality.as_bytes()]);
                if u < (1.0 - p).powf(n) {
                    format!("The answer is {product}.")
                } else {
                    let digits = product.to_string().len() as u32;
                    let j = (u * 1e6) as u32 % digits;
                    let wrong = &product + BigUint::from(10u32).pow(j);
                    format!("The answer is {wrong}.")
                }
            }
        }
    }

    fn rule_losses(
        &self,
        rule: &LossRule,
        ctx: &ScoringContext,
        ctx_hash: &str,
        cont: &str,
    ) -> Result<Vec<f64>, BackendError> {
        let n = cont.chars().count();
        match rule {
            LossRule::Constant { value } => Ok(vec![*value; n]),
            LossRule::Hash { seed, min, max } => Ok(cont
                .chars()
                .map(|c| {
                    let mut buf = [0u8; 4];
                    let u = unit_hash(&[&seed.to_le_bytes(), ctx_hash.as_bytes(), c.encode_utf8(&mut buf).as_bytes()]);
                    min + (max - min) * u
                })
                .collect()),
            LossRule::Table { entries, fallback } => {
                let seen = Self::perceived_text(ctx);
                let hit = entries
                    .iter()
                    .find(|e| e.continuation == cont && e.context.as_ref().is_none_or(|c| seen.contains(c.as_str())));
                match (hit, fallback) {
                    (Some(e), _) => match &e.losses {
                        TableLosses::Uniform(v) => Ok(vec![*v; n]),
                        TableLosses::PerToken(v) if v.len() == n => Ok(v.clone()),
                        TableLosses::PerToken(v) => Err(BackendError::Protocol(format!(
                            "table entry has {} losses for a {n}-token continuation",
                            v.len()
                        ))),
                    },
                    (None, Some(f)) => self.rule_losses(f, ctx, ctx_hash, cont),
                    (None, None) => {
                        Err(BackendError::InvalidRequest(format!("mock table has no entry for continuation {cont:?}")))
                    }
                }
            }
            LossRule::Sum { rules } => {
                let mut acc = vec![0.0; n];
                for r in rules {
                    for (a, v) in acc.iter_mut().zip(self.rule_losses(r, ctx, ctx_hash, cont)?) {
                        *a += v;
                    }
                }
                Ok(acc)
            }
        }
    }
}

impl ScoringBackend for MockBackend {
    fn name(&self) -> &str {
        "mock"
    }

    fn max_budget(&self) -> usize {
        self.spec.max_budget
    }

    fn supports_scoring(&self) -> bool {
        self.spec.scoring.is_some()
    }

    fn generate(&self, ctx: &ScoringContext, budget: usize) -> Result<GenerationResult, BackendError> {
        check_budget(self, budget)?;
        let full = self.answer(ctx);
        let n = full.chars().count();
        let (text, finish_reason) = if n > budget {
            (full.chars().take(budget).collect(), FinishReason::Length)
        } else {
            (full, FinishReason::Stop)
        };
        let usage = TokenUsage {
            prompt_tokens: ctx.prompt.chars().count() as u64,
            completion_tokens: text.chars().count() as u64,
        };
        Ok(GenerationResult { text, finish_reason, usage })
    }

    fn score_continuation(&self, ctx: &ScoringContext, continuation: &str) -> Result<TokenLosses, BackendError> {
        check_score_request(continuation)?;
        let rule = self.spec.scoring.as_ref().ok_or_else(|| BackendError::Capability {
            backend: "mock".into(),
            reason: "no scoring rule configured".into(),
        })?;
        let h = ctx.content_hash();
        TokenLosses::new(self.rule_losses(rule, ctx, &h, continuation)?)
    }
}
