//! Pipeline stages. Each reads its inputs from the run directory and
//! writes headered outputs back into it.

mod data;
mod eval;
mod probe;
mod report;

use std::path::{Path, PathBuf};
use std::sync::Arc;

use mulprobe_core::backend::{CacheMode, MockBackend, ReplayBackend, ReplayCache, ScoringBackend};
use mulprobe_core::dataset::DatasetManifest;
use mulprobe_http::{HttpBackend, HttpConfig, ENV_API_KEY, ENV_ENDPOINT, ENV_MODEL};

pub use data::{build_dataset, cmd_gen, cmd_render, dataset_files, probe_items, Dataset};
pub use eval::{cmd_eval, cmd_stats};
pub use probe::{cmd_ablate, cmd_contrast, cmd_probe, run_probe};
pub use report::{cmd_geometry, cmd_report, cmd_verify};

use crate::config::{interpolate, BackendKind, RunConfig};
use crate::error::{CliError, CliResult};
use crate::output::{read_json, Stamp, Writer, NO_MANIFEST};

pub const MANIFEST_FILE: &str = "dataset/manifest.json";

/// What a stage did, for the terminal and for exit-code decisions.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StageOutcome {
    pub files: Vec<PathBuf>,
    pub notes: Vec<String>,
    pub failed: usize,
    pub total: usize,
}

impl StageOutcome {
    pub fn note(&mut self, s: impl Into<String>) {
        self.notes.push(s.into());
    }

    pub fn absorb(&mut self, other: StageOutcome) {
        self.files.extend(other.files);
        self.notes.extend(other.notes);
        self.failed += other.failed;
        self.total += other.total;
    }

    /// Exit code 4 territory when too many items failed.
    pub fn check(&self, max_failure_rate: f64) -> CliResult<()> {
        if self.total > 0 && self.failed as f64 > max_failure_rate * self.total as f64 {
            return Err(CliError::PartialFailure { failed: self.failed, total: self.total, limit: max_failure_rate });
        }
        Ok(())
    }
}

pub fn manifest_hash(cfg: &RunConfig) -> CliResult<String> {
    let path = cfg.out(MANIFEST_FILE);
    if !path.exists() {
        return Err(CliError::validation(format!("{}: dataset manifest not found; run `gen` first", path.display())));
    }
    let m: DatasetManifest = read_json(&path)?;
    Ok(m.content_hash)
}

/// Writer stamped with the config hash and, when `needs_dataset`, the
/// dataset manifest hash.
pub fn writer(cfg: &RunConfig, needs_dataset: bool) -> CliResult<Writer> {
    let manifest_hash = if needs_dataset { manifest_hash(cfg)? } else { NO_MANIFEST.to_string() };
    Ok(Writer::new(&cfg.output_dir, Stamp { config_hash: cfg.hash(), manifest_hash }))
}

fn env_or(value: &Option<String>, var: &str, field: &str) -> CliResult<String> {
    value
        .clone()
        .or_else(|| std::env::var(var).ok())
        .filter(|v| !v.trim().is_empty())
        .ok_or_else(|| CliError::validation(format!("{field}: not set in the config and {var} is empty")))
}

fn resolve(cfg: &RunConfig, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        cfg.out(p)
    }
}

pub fn backend_label(cfg: &RunConfig) -> String {
    if let Some(l) = &cfg.backend.label {
        return l.clone();
    }
    match cfg.backend.kind {
        BackendKind::Http => {
            cfg.backend.http.model.clone().or_else(|| std::env::var(ENV_MODEL).ok()).unwrap_or_else(|| "http".into())
        }
        _ => "mock".into(),
    }
}

/// The configured backend, wrapped in the replay cache when one is in use.
pub fn build_backend(cfg: &RunConfig) -> CliResult<Box<dyn ScoringBackend>> {
    let b = &cfg.backend;
    let label = backend_label(cfg);
    let cache_path = resolve(cfg, &b.cache.path);
    let open_cache = || -> CliResult<Arc<ReplayCache>> { Ok(Arc::new(ReplayCache::open(&cache_path)?)) };
    match b.kind {
        BackendKind::Mock => {
            let mock = MockBackend::new(b.mock.clone());
            match b.cache.mode {
                CacheMode::Live => Ok(Box::new(mock)),
                mode => Ok(Box::new(ReplayBackend::new(mock, open_cache()?, mode, label))),
            }
        }
        BackendKind::Http => {
            let mut hc = HttpConfig::new(
                env_or(&b.http.endpoint, ENV_ENDPOINT, "backend.http.endpoint")?,
                env_or(&b.http.model, ENV_MODEL, "backend.http.model")?,
            );
            hc.api_key = match &b.http.api_key {
                Some(raw) => Some(interpolate(raw, "backend.http.api_key", |k| std::env::var(k).ok())?),
                None => std::env::var(ENV_API_KEY).ok().filter(|v| !v.is_empty()),
            };
            hc.timeout = std::time::Duration::from_secs(b.http.timeout_secs);
            hc.retry = b.retry;
            hc.scoring = b.http.scoring;
            hc.max_budget = b.http.max_budget;
            hc.archive = b.http.archive.as_ref().map(|p| resolve(cfg, p));
            let http = HttpBackend::new(hc)?;
            // live HTTP runs are always archived
            let mode = match b.cache.mode {
                CacheMode::Live => CacheMode::Record,
                m => m,
            };
            Ok(Box::new(ReplayBackend::new(http, open_cache()?, mode, label)))
        }
        BackendKind::Replay => {
            if !cache_path.exists() {
                return Err(CliError::validation(format!(
                    "backend.cache.path: {} does not exist",
                    cache_path.display()
                )));
            }
            Ok(Box::new(ReplayBackend::replay_only(open_cache()?, label, true)))
        }
    }
}

pub fn pool(cfg: &RunConfig) -> CliResult<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.backend.parallelism)
        .build()
        .map_err(|e| CliError::validation(format!("backend.parallelism: {e}")))
}
