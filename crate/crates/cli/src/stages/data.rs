//! `gen` and `render`.

use std::collections::BTreeSet;

use mulprobe_core::dataset::{
    build_hds, build_multimodal_suite, build_perturbation_pairs, build_traps, exclusion_set, DatasetManifest, HdsItem,
    PerturbationPair, Split, SuiteItem, TrapItem,
};
use mulprobe_core::render::audio::DEFAULT_SAMPLE_RATE;
use mulprobe_core::render::{audio_tokens, render, ClipLibrary, Payload, RenderedInstance, Representation};
use mulprobe_core::trace::{build_trace_dataset, gen_contrastive_pair, ContrastivePair, TraceDataset, TraceRecord};
use mulprobe_core::{HeuristicKind, SeededRng};
use serde_json::Value;

use super::{writer, StageOutcome, MANIFEST_FILE};
use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::output::{jsonl_body, read_jsonl, MediaIndex, Stamp, Writer};

const TRACE_KINDS: [HeuristicKind; 4] = [HeuristicKind::Rc, HeuristicKind::Dd, HeuristicKind::Ot, HeuristicKind::Style];

pub struct Dataset {
    pub suite: Vec<SuiteItem>,
    pub hds: Vec<HdsItem>,
    pub traps: Vec<TrapItem>,
    pub perturbations: Vec<PerturbationPair>,
    pub contrastive: Vec<ContrastivePair>,
    pub traces: Vec<TraceDataset>,
    pub exclusions: Vec<String>,
}

pub fn build_dataset(cfg: &RunConfig) -> CliResult<Dataset> {
    let d = &cfg.dataset;
    let params = &cfg.cost_params;
    let templates = d.parsed_templates()?;
    let suite = build_multimodal_suite(d.suite_count, &templates, cfg.seed, &d.representations)?;
    let hds = build_hds(d.hds_count, cfg.seed, params)?;
    let traps = build_traps(d.trap_count, cfg.seed, &hds, params)?;
    let perturbations = build_perturbation_pairs(d.perturbation_count, cfg.seed, params)?;
    let ex = exclusion_set(&hds, &traps, suite.iter().map(|s| &s.problem));
    let traces = TRACE_KINDS
        .iter()
        .map(|&h| build_trace_dataset(h, d.trace_count, cfg.seed, &ex))
        .collect::<Result<Vec<_>, _>>()?;
    let mut rng = SeededRng::new(cfg.seed).fork("contrastive");
    let mut contrastive = Vec::new();
    for item in hds.iter().filter(|i| i.split == Split::Test) {
        match gen_contrastive_pair(&item.problem, item.target, &mut rng) {
            Ok(p) => contrastive.push(p),
            Err(e) => log::warn!("{}: no contrastive pair: {e}", item.id),
        }
    }
    Ok(Dataset {
        suite,
        hds,
        traps,
        perturbations,
        contrastive,
        traces,
        exclusions: ex.keys().map(str::to_string).collect(),
    })
}

pub enum Body {
    Lines(String),
    Json(Value),
}

impl Body {
    fn hashed_bytes(&self) -> Vec<u8> {
        match self {
            Self::Lines(s) => s.as_bytes().to_vec(),
            Self::Json(v) => v.to_string().into_bytes(),
        }
    }
}

pub type DatasetFile = (String, &'static str, Body);

/// Every dataset file as (path under the output dir, kind, body), plus
/// the manifest describing them.
pub fn dataset_files(cfg: &RunConfig, ds: &Dataset) -> CliResult<(Vec<DatasetFile>, DatasetManifest)> {
    let mut files = vec![
        ("dataset/suite.jsonl".to_string(), "suite", Body::Lines(jsonl_body(&ds.suite)?)),
        ("dataset/hds.jsonl".to_string(), "hds", Body::Lines(jsonl_body(&ds.hds)?)),
        ("dataset/traps.jsonl".to_string(), "traps", Body::Lines(jsonl_body(&ds.traps)?)),
        ("dataset/perturbations.jsonl".to_string(), "perturbations", Body::Lines(jsonl_body(&ds.perturbations)?)),
        ("dataset/contrastive.jsonl".to_string(), "contrastive_pairs", Body::Lines(jsonl_body(&ds.contrastive)?)),
        ("dataset/exclusion.json".to_string(), "exclusions", Body::Json(Value::from(ds.exclusions.clone()))),
    ];
    for t in &ds.traces {
        let tag = t.heuristic.as_str().to_ascii_lowercase();
        for (split, traces) in [("train", &t.train), ("val", &t.val)] {
            let recs: Vec<TraceRecord> = traces.iter().map(TraceRecord::from).collect();
            files.push((format!("dataset/traces/{tag}_{split}.jsonl"), "traces", Body::Lines(jsonl_body(&recs)?)));
        }
    }
    let mut m = DatasetManifest::new(cfg.seed, cfg.cost_params.clone());
    for s in &ds.suite {
        m.count("suite", "items");
        for r in &s.representations {
            m.count("representation", r.as_str());
        }
    }
    for i in &ds.hds {
        m.count("split", i.split.as_str());
        m.count("target", i.target.as_str());
        m.count("family", i.family.to_string());
    }
    for t in &ds.traps {
        m.count("trap", serde_json::to_value(t.kind).expect("kind").as_str().unwrap_or("?").to_string());
    }
    m.counts.entry("perturbation_pairs".into()).or_default().insert("pairs".into(), ds.perturbations.len());
    for p in &ds.contrastive {
        m.count("contrastive", p.heuristic.as_str());
    }
    for t in &ds.traces {
        let tag = t.heuristic.as_str().to_ascii_lowercase();
        let c = m.counts.entry("traces".into()).or_default();
        c.insert(format!("{tag}_train"), t.train.len());
        c.insert(format!("{tag}_val"), t.val.len());
    }
    for (name, _, body) in &files {
        m.add_file(name.trim_start_matches("dataset/"), &body.hashed_bytes());
    }
    Ok((files, m))
}

pub fn cmd_gen(cfg: &RunConfig) -> CliResult<StageOutcome> {
    let ds = build_dataset(cfg)?;
    let (files, manifest) = dataset_files(cfg, &ds)?;
    let w =
        Writer::new(&cfg.output_dir, Stamp { config_hash: cfg.hash(), manifest_hash: manifest.content_hash.clone() });
    let mut out = StageOutcome::default();
    for (rel, kind, body) in &files {
        let path = match body {
            Body::Lines(s) => w.text(rel, kind, s)?,
            Body::Json(v) => w.json(rel, kind, v)?,
        };
        out.files.push(path);
    }
    out.files.push(w.json(MANIFEST_FILE, "dataset_manifest", &manifest)?);
    let splits = manifest.counts.get("split").cloned().unwrap_or_default();
    out.note(format!(
        "suite {} items; HDS {} (train {}, val {}, test {}); traps {}; perturbation pairs {}; contrastive pairs {}",
        ds.suite.len(),
        ds.hds.len(),
        splits.get("train").copied().unwrap_or(0),
        splits.get("val").copied().unwrap_or(0),
        splits.get("test").copied().unwrap_or(0),
        ds.traps.len(),
        ds.perturbations.len(),
        ds.contrastive.len(),
    ));
    out.note(format!("manifest {}", manifest.content_hash));
    Ok(out)
}

/// HDS test items used for probing, in id order, capped by
/// `probe.max_items`.
pub fn probe_items<'a>(cfg: &RunConfig, hds: &'a [HdsItem]) -> Vec<&'a HdsItem> {
    let mut items: Vec<&HdsItem> = hds.iter().filter(|i| i.split == Split::Test).collect();
    items.sort_by(|a, b| a.id.cmp(&b.id));
    if let Some(n) = cfg.probe.max_items {
        items.truncate(n);
    }
    items
}

fn clip_library(cfg: &RunConfig, problems: &[&mulprobe_core::Problem]) -> CliResult<Option<ClipLibrary>> {
    if let Some(dir) = &cfg.render.clip_dir {
        return Ok(Some(ClipLibrary::load(dir)?));
    }
    if !cfg.render.synthetic_audio {
        return Ok(None);
    }
    let mut vocab = BTreeSet::new();
    for p in problems {
        vocab.extend(audio_tokens(p)?);
    }
    Ok(Some(ClipLibrary::synthetic(vocab.iter().map(String::as_str), DEFAULT_SAMPLE_RATE)))
}

fn media_ext(media_type: &str) -> &str {
    match media_type {
        "image/png" => "png",
        "image/svg+xml" => "svg",
        "audio/wav" => "wav",
        _ => "bin",
    }
}

fn export_media(w: &Writer, dir: &str, instances: &[RenderedInstance]) -> CliResult<()> {
    let mut idx = MediaIndex { files: Default::default() };
    for inst in instances {
        if let Payload::Bytes { media_type, bytes } = &inst.payload {
            let name = format!("{}_{}.{}", inst.problem_id, inst.representation, media_ext(media_type));
            let hash = w.raw(&format!("{dir}/{name}"), bytes)?;
            idx.files.insert(name, hash);
        }
    }
    w.json(&format!("{dir}/index.json"), "media_index", &idx)?;
    Ok(())
}

pub fn cmd_render(cfg: &RunConfig) -> CliResult<StageOutcome> {
    let w = writer(cfg, true)?;
    let suite: Vec<SuiteItem> = read_jsonl(&cfg.out("dataset/suite.jsonl"))?;
    let hds: Vec<HdsItem> = read_jsonl(&cfg.out("dataset/hds.jsonl"))?;
    let probe = probe_items(cfg, &hds);
    let needs_audio = suite.iter().any(|s| s.representations.contains(&Representation::Audio));
    let problems: Vec<_> = suite.iter().map(|s| &s.problem).collect();
    let clips = if needs_audio { clip_library(cfg, &problems)? } else { None };
    if needs_audio && clips.is_none() {
        return Err(CliError::validation(
            "render.clip_dir: the suite includes audio but no clip library is configured",
        ));
    }
    let opts = &cfg.render.options;
    let mut suite_out = Vec::new();
    for s in &suite {
        for &r in &s.representations {
            suite_out.push(render(&s.problem, r, opts, clips.as_ref())?);
        }
    }
    let mut probe_out = Vec::new();
    for item in &probe {
        for &r in &cfg.probe.representations {
            probe_out.push(render(&item.problem, r, opts, None)?);
        }
    }
    let mut out = StageOutcome::default();
    out.files.push(w.jsonl("renders/suite.jsonl", "rendered_suite", &suite_out)?);
    out.files.push(w.jsonl("renders/probe.jsonl", "rendered_probe", &probe_out)?);
    if cfg.render.export_media {
        export_media(&w, "renders/media", &suite_out)?;
        export_media(&w, "renders/probe_media", &probe_out)?;
    }
    out.note(format!("rendered {} suite instances and {} probe instances", suite_out.len(), probe_out.len()));
    Ok(out)
}
