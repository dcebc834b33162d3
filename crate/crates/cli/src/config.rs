//! Run configuration: one JSON file drives every stage.
//!
//! `${VAR}` references are expanded from the environment in
//! `backend.http.api_key` only; anywhere else they are rejected. The config
//! hash is computed over the unexpanded file, so credentials never reach an
//! output.

use std::path::{Path, PathBuf};

use mulprobe_core::arith::{DigitTemplate, TemplateMode, STANDARD_TEMPLATES};
use mulprobe_core::backend::{CacheMode, GenerationRule, LossRule, MockSpec, OpsProxy, DEFAULT_BUDGET};
use mulprobe_core::hash::sha256_hex;
use mulprobe_core::probe::BankProfile;
use mulprobe_core::render::{RenderOptions, Representation};
use mulprobe_core::CostParams;
use mulprobe_http::RetryPolicy;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{CliError, CliResult};

/// The only field where environment references are expanded.
pub const CREDENTIAL_FIELDS: [&str; 1] = ["backend.http.api_key"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    /// Not part of the config hash.
    pub output_dir: PathBuf,
    pub dataset: DatasetConfig,
    pub cost_params: CostParams,
    pub render: RenderConfig,
    pub eval: EvalConfig,
    pub probe: ProbeConfig,
    pub backend: BackendConfig,
    pub geometry: GeometryConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateModeName {
    #[default]
    Standard,
    Extended,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    pub suite_count: usize,
    pub hds_count: usize,
    pub trap_count: usize,
    pub perturbation_count: usize,
    /// Traces per heuristic, train and validation together.
    pub trace_count: usize,
    pub templates: Vec<String>,
    pub template_mode: TemplateModeName,
    pub representations: Vec<Representation>,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            suite_count: 10_000,
            hds_count: 1000,
            trap_count: 30,
            perturbation_count: 100,
            trace_count: 1000,
            templates: STANDARD_TEMPLATES.iter().map(|s| s.to_string()).collect(),
            template_mode: TemplateModeName::Standard,
            representations: vec![
                Representation::NumeralText,
                Representation::WordText,
                Representation::NumeralImage,
                Representation::WordImage,
            ],
        }
    }
}

impl DatasetConfig {
    pub fn parsed_templates(&self) -> mulprobe_core::Result<Vec<DigitTemplate>> {
        let mode = match self.template_mode {
            TemplateModeName::Standard => TemplateMode::Standard,
            TemplateModeName::Extended => TemplateMode::Extended,
        };
        self.templates.iter().map(|t| DigitTemplate::parse_with_mode(t, mode)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
#[derive(Default)]
pub struct RenderConfig {
    pub options: RenderOptions,
    /// Directory with recorded word clips for the audio representation.
    pub clip_dir: Option<PathBuf>,
    /// Use generated tones instead of recorded clips.
    pub synthetic_audio: bool,
    /// Also write each image and audio payload as a standalone file.
    pub export_media: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub budget: usize,
    /// Run the operand transcription check on image and audio items.
    pub perception: bool,
    pub max_items: Option<usize>,
    pub ops_proxy: OpsProxy,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self { budget: DEFAULT_BUDGET, perception: true, max_items: None, ops_proxy: OpsProxy::Load }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeConfig {
    pub bank: BankProfile,
    pub representations: Vec<Representation>,
    /// Cap on probed HDS test items, taken in id order.
    pub max_items: Option<usize>,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            bank: BankProfile::Balanced,
            representations: vec![Representation::NumeralText, Representation::NumeralImage],
            max_items: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    #[default]
    Mock,
    Http,
    /// Serve from the replay cache only.
    Replay,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HttpSection {
    /// Falls back to `MULPROBE_ENDPOINT`.
    pub endpoint: Option<String>,
    /// Falls back to `MULPROBE_MODEL`.
    pub model: Option<String>,
    /// Usually `${MULPROBE_API_KEY}`.
    pub api_key: Option<String>,
    pub timeout_secs: u64,
    pub scoring: bool,
    pub max_budget: usize,
    /// Raw request/response log, relative to the output directory.
    pub archive: Option<PathBuf>,
}

impl Default for HttpSection {
    fn default() -> Self {
        Self {
            endpoint: None,
            model: None,
            api_key: None,
            timeout_secs: 120,
            scoring: true,
            max_budget: DEFAULT_BUDGET,
            archive: Some(PathBuf::from("cache/raw.jsonl")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CacheSection {
    pub mode: CacheMode,
    /// Relative to the output directory.
    pub path: PathBuf,
}

impl Default for CacheSection {
    fn default() -> Self {
        Self { mode: CacheMode::Live, path: PathBuf::from("cache/replay.jsonl") }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackendConfig {
    pub kind: BackendKind,
    /// Namespace for replay-cache keys; defaults to `mock` or the model name.
    pub label: Option<String>,
    pub mock: MockSpec,
    pub http: HttpSection,
    pub retry: RetryPolicy,
    pub cache: CacheSection,
    pub parallelism: usize,
    /// Largest tolerated fraction of failed items before exit code 4.
    pub max_failure_rate: f64,
}

pub fn default_mock_spec(seed: u64) -> MockSpec {
    MockSpec {
        scoring: Some(LossRule::Hash { seed, min: 0.5, max: 4.0 }),
        generation: GenerationRule::Accuracy { p: 0.02, seed, proxy: OpsProxy::Load, per_modality: Default::default() },
        max_budget: DEFAULT_BUDGET,
    }
}

impl Default for BackendConfig {
    fn default() -> Self {
        Self {
            kind: BackendKind::Mock,
            label: None,
            mock: default_mock_spec(7),
            http: HttpSection::default(),
            retry: RetryPolicy::default(),
            cache: CacheSection::default(),
            parallelism: 4,
            max_failure_rate: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometryConfig {
    pub adapters: Vec<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 20_250_101,
            output_dir: PathBuf::from("out"),
            dataset: DatasetConfig::default(),
            cost_params: CostParams::default(),
            render: RenderConfig::default(),
            eval: EvalConfig::default(),
            probe: ProbeConfig::default(),
            backend: BackendConfig::default(),
            geometry: GeometryConfig::default(),
        }
    }
}

fn reject_env_refs(v: &Value, path: &str, errors: &mut Vec<String>) {
    match v {
        Value::String(s) if s.contains("${") && !CREDENTIAL_FIELDS.contains(&path) => {
            errors.push(format!("{path}: environment references are only allowed in {}", CREDENTIAL_FIELDS.join(", ")))
        }
        Value::Array(items) => {
            for (i, x) in items.iter().enumerate() {
                reject_env_refs(x, &format!("{path}[{i}]"), errors);
            }
        }
        Value::Object(map) => {
            for (k, x) in map {
                let p = if path.is_empty() { k.clone() } else { format!("{path}.{k}") };
                reject_env_refs(x, &p, errors);
            }
        }
        _ => {}
    }
}

/// Expand `${VAR}` references from `lookup`.
pub fn interpolate(s: &str, field: &str, lookup: impl Fn(&str) -> Option<String>) -> CliResult<String> {
    let mut out = String::new();
    let mut rest = s;
    while let Some(start) = rest.find("${") {
        out.push_str(&rest[..start]);
        let after = &rest[start + 2..];
        let end = after.find('}').ok_or_else(|| CliError::validation(format!("{field}: unterminated ${{")))?;
        let name = &after[..end];
        if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
            return Err(CliError::validation(format!("{field}: bad variable name {name:?}")));
        }
        let value = lookup(name)
            .ok_or_else(|| CliError::validation(format!("{field}: environment variable {name} is not set")))?;
        out.push_str(&value);
        rest = &after[end + 1..];
    }
    out.push_str(rest);
    Ok(out)
}

impl RunConfig {
    pub fn from_json_str(text: &str) -> CliResult<Self> {
        let value: Value = serde_json::from_str(text).map_err(|e| CliError::validation(format!("config: {e}")))?;
        let mut errors = Vec::new();
        reject_env_refs(&value, "", &mut errors);
        if !errors.is_empty() {
            return Err(CliError::validation(errors.join("\n")));
        }
        let cfg: RunConfig = serde_path_to_error::deserialize(value).map_err(|e| {
            let path = e.path().to_string();
            CliError::validation(format!("{path}: {}", e.into_inner()))
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_json_str(&text).map_err(|e| match e {
            CliError::Validation(m) => CliError::validation(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// Every violated constraint, one `field.path: message` per line.
    pub fn problems(&self) -> Vec<String> {
        let mut errs = Vec::new();
        let mut need = |ok: bool, msg: String| {
            if !ok {
                errs.push(msg);
            }
        };
        let d = &self.dataset;
        need(d.suite_count >= 1, "dataset.suite_count: must be at least 1".into());
        need(d.hds_count >= 3, "dataset.hds_count: must be at least 3".into());
        need(d.trap_count >= 1, "dataset.trap_count: must be at least 1".into());
        need(d.perturbation_count >= 1, "dataset.perturbation_count: must be at least 1".into());
        need(d.trace_count >= 2, "dataset.trace_count: must be at least 2".into());
        need(!d.templates.is_empty(), "dataset.templates: must not be empty".into());
        let mode = match d.template_mode {
            TemplateModeName::Standard => TemplateMode::Standard,
            TemplateModeName::Extended => TemplateMode::Extended,
        };
        for (i, t) in d.templates.iter().enumerate() {
            if let Err(e) = DigitTemplate::parse_with_mode(t, mode) {
                need(false, format!("dataset.templates[{i}]: {e}"));
            }
        }
        need(!d.representations.is_empty(), "dataset.representations: must not be empty".into());
        for (i, r) in d.representations.iter().enumerate() {
            need(!d.representations[..i].contains(r), format!("dataset.representations[{i}]: duplicate {r}"));
        }
        let audio = d.representations.contains(&Representation::Audio);
        need(
            !audio || self.render.clip_dir.is_some() || self.render.synthetic_audio,
            "render.clip_dir: required when dataset.representations includes audio (or set render.synthetic_audio)"
                .into(),
        );
        if let Err(e) = self.cost_params.validate() {
            need(false, e.to_string().trim_start_matches("configuration error: ").to_string());
        }
        need(self.eval.budget >= 1, "eval.budget: must be at least 1".into());
        need(self.eval.max_items != Some(0), "eval.max_items: must be at least 1".into());
        need(!self.probe.representations.is_empty(), "probe.representations: must not be empty".into());
        for (i, r) in self.probe.representations.iter().enumerate() {
            need(*r != Representation::Audio, format!("probe.representations[{i}]: audio scoring is not supported"));
            need(!self.probe.representations[..i].contains(r), format!("probe.representations[{i}]: duplicate {r}"));
        }
        need(self.probe.max_items != Some(0), "probe.max_items: must be at least 1".into());
        let b = &self.backend;
        need(b.parallelism >= 1, "backend.parallelism: must be at least 1".into());
        need((0.0..=1.0).contains(&b.max_failure_rate), "backend.max_failure_rate: must lie in [0, 1]".into());
        need(b.retry.max_attempts >= 1, "backend.retry.max_attempts: must be at least 1".into());
        need(b.http.timeout_secs >= 1, "backend.http.timeout_secs: must be at least 1".into());
        need(
            b.kind != BackendKind::Replay || b.label.is_some(),
            "backend.label: required for the replay backend (use the label of the recording run)".into(),
        );
        errs
    }

    pub fn validate(&self) -> CliResult<()> {
        let errs = self.problems();
        if errs.is_empty() {
            Ok(())
        } else {
            Err(CliError::validation(errs.join("\n")))
        }
    }

    /// sha256 over the canonical JSON of everything but `output_dir`.
    pub fn hash(&self) -> String {
        let mut v = serde_json::to_value(self).expect("config serializes");
        if let Value::Object(m) = &mut v {
            m.remove("output_dir");
        }
        sha256_hex(v.to_string())
    }

    pub fn out(&self, rel: impl AsRef<Path>) -> PathBuf {
        self.output_dir.join(rel)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips_and_validates() {
        let c = RunConfig::default();
        let text = serde_json::to_string_pretty(&c).unwrap();
        let back = RunConfig::from_json_str(&text).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.hash(), c.hash());
    }

    #[test]
    fn empty_object_is_the_default() {
        assert_eq!(RunConfig::from_json_str("{}").unwrap(), RunConfig::default());
    }

    #[test]
    fn errors_name_the_field() {
        let e = RunConfig::from_json_str(r#"{"dataset": {"hds_count": 0}}"#).unwrap_err();
        assert!(e.to_string().contains("dataset.hds_count"), "{e}");
        assert_eq!(e.exit_code(), 2);
        let e = RunConfig::from_json_str(r#"{"dataset": {"hds_cnt": 5}}"#).unwrap_err();
        assert!(e.to_string().starts_with("dataset"), "{e}");
        let e = RunConfig::from_json_str(r#"{"dataset": {"templates": ["V", "0V"]}}"#).unwrap_err();
        assert!(e.to_string().contains("dataset.templates[1]"), "{e}");
        let e = RunConfig::from_json_str(r#"{"probe": {"representations": ["audio"]}}"#).unwrap_err();
        assert!(e.to_string().contains("probe.representations[0]"), "{e}");
    }

    #[test]
    fn env_references_only_in_credentials() {
        let ok = r#"{"backend": {"http": {"api_key": "${MULPROBE_API_KEY}"}}}"#;
        assert!(RunConfig::from_json_str(ok).is_ok());
        let bad = r#"{"backend": {"http": {"endpoint": "${HOST}"}}}"#;
        let e = RunConfig::from_json_str(bad).unwrap_err();
        assert!(e.to_string().starts_with("backend.http.endpoint"), "{e}");
    }

    #[test]
    fn interpolation() {
        let look = |k: &str| (k == "KEY").then(|| "s3cret".to_string());
        assert_eq!(interpolate("Bearer ${KEY}", "f", look).unwrap(), "Bearer s3cret");
        assert_eq!(interpolate("plain", "f", look).unwrap(), "plain");
        assert!(interpolate("${MISSING}", "f", look).is_err());
        assert!(interpolate("${KEY", "f", look).is_err());
    }

    #[test]
    fn output_dir_does_not_change_the_hash() {
        let a = RunConfig::default();
        let b = RunConfig { output_dir: "elsewhere".into(), ..a.clone() };
        assert_eq!(a.hash(), b.hash());
        let c = RunConfig { seed: 1, ..a.clone() };
        assert_ne!(a.hash(), c.hash());
    }

    #[test]
    fn audio_needs_clips() {
        let e = RunConfig::from_json_str(r#"{"dataset": {"representations": ["audio"]}}"#).unwrap_err();
        assert!(e.to_string().contains("render.clip_dir"));
        assert!(RunConfig::from_json_str(
            r#"{"dataset": {"representations": ["audio"]}, "render": {"synthetic_audio": true}}"#
        )
        .is_ok());
    }
}
