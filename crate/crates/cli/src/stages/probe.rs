//! `probe`, `contrast` and `ablate`.

use std::collections::{BTreeMap, BTreeSet};

use mulprobe_core::backend::{BackendError, ScoringBackend, ScoringContext};
use mulprobe_core::dataset::HdsItem;
use mulprobe_core::probe::{
    aggregate_contrastive, aggregate_probes, contrastive_probe, probe_problem, sort_results, style_shift_ablation,
    BankProfile, ContrastiveResult, ProbeResult, TemplateBank,
};
use mulprobe_core::render::{RenderedInstance, Representation};
use mulprobe_core::stats::AccuracyRecord;
use mulprobe_core::trace::ContrastivePair;
use mulprobe_core::{Error, HeuristicKind};
use rayon::prelude::*;

use super::{build_backend, pool, writer, StageOutcome};
use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::output::read_jsonl;

fn is_capability(e: &Error) -> bool {
    matches!(e, Error::Backend(BackendError::Capability { .. }))
}

fn require_scoring(backend: &dyn ScoringBackend) -> CliResult<()> {
    if backend.supports_scoring() {
        return Ok(());
    }
    Err(CliError::Capability(format!(
        "backend {} cannot score continuations; probes need per-token losses",
        backend.name()
    )))
}

/// Splits per-item results into successes and a failure count. A
/// capability error on any item aborts the stage.
fn collect<T>(results: Vec<(String, mulprobe_core::Result<T>)>, out: &mut StageOutcome) -> CliResult<Vec<T>> {
    let mut ok = Vec::new();
    for (id, r) in results {
        out.total += 1;
        match r {
            Ok(v) => ok.push(v),
            Err(e) if is_capability(&e) => return Err(e.into()),
            Err(e) => {
                log::warn!("{id}: {e}");
                out.failed += 1;
            }
        }
    }
    Ok(ok)
}

/// The probe instances actually used: rendered probe items restricted to
/// the configured representations.
fn probe_instances(cfg: &RunConfig) -> CliResult<Vec<RenderedInstance>> {
    let all: Vec<RenderedInstance> = read_jsonl(&cfg.out("renders/probe.jsonl"))?;
    Ok(all.into_iter().filter(|i| cfg.probe.representations.contains(&i.representation)).collect())
}

fn load_hds(cfg: &RunConfig) -> CliResult<Vec<HdsItem>> {
    read_jsonl(&cfg.out("dataset/hds.jsonl"))
}

/// Scores every instance under `profile`'s bank, sorted by problem id and
/// representation.
pub fn run_probe(
    cfg: &RunConfig,
    backend: &dyn ScoringBackend,
    profile: BankProfile,
    instances: &[RenderedInstance],
    out: &mut StageOutcome,
) -> CliResult<Vec<ProbeResult<f64>>> {
    require_scoring(backend)?;
    let bank = TemplateBank::for_profile(profile);
    bank.validate()?;
    let raw: Vec<_> = pool(cfg)?.install(|| {
        instances
            .par_iter()
            .map(|inst| {
                let ctx = ScoringContext::from_rendered(inst);
                let key = format!("{} {}", inst.problem_id, inst.representation);
                (key, probe_problem::<f64>(&ctx, &bank, backend, &inst.problem_id, inst.representation))
            })
            .collect()
    });
    let mut results = collect(raw, out)?;
    sort_results(&mut results);
    Ok(results)
}

fn targets(hds: &[HdsItem]) -> BTreeMap<String, HeuristicKind> {
    hds.iter().map(|i| (i.problem.id.clone(), i.target)).collect()
}

fn families(hds: &[HdsItem]) -> BTreeMap<String, HeuristicKind> {
    hds.iter().map(|i| (i.problem.id.clone(), i.family.intended())).collect()
}

pub fn cmd_probe(cfg: &RunConfig) -> CliResult<StageOutcome> {
    let w = writer(cfg, true)?;
    let backend = build_backend(cfg)?;
    let hds = load_hds(cfg)?;
    let instances = probe_instances(cfg)?;
    let profile = cfg.probe.bank;
    let mut out = StageOutcome::default();
    let results = run_probe(cfg, backend.as_ref(), profile, &instances, &mut out)?;
    let agg = aggregate_probes(&results, &targets(&hds));
    let tag = profile.as_str();
    out.files.push(w.jsonl(&format!("probe/results_{tag}.jsonl"), "probe_results", &results)?);
    out.files.push(w.text(&format!("probe/aggregate_{tag}.csv"), "probe_aggregate", &agg.to_csv())?);
    out.files.push(w.json(&format!("probe/aggregate_{tag}.json"), "probe_aggregate", &agg)?);
    out.note(format!("probed {} instances with the {tag} bank ({} failed)", results.len(), out.failed));
    Ok(out)
}

pub fn cmd_contrast(cfg: &RunConfig) -> CliResult<StageOutcome> {
    let w = writer(cfg, true)?;
    let backend = build_backend(cfg)?;
    require_scoring(backend.as_ref())?;
    let pairs: Vec<ContrastivePair> = read_jsonl(&cfg.out("dataset/contrastive.jsonl"))?;
    let pairs: BTreeMap<&str, &ContrastivePair> = pairs.iter().map(|p| (p.problem_id.as_str(), p)).collect();
    let instances = probe_instances(cfg)?;
    let jobs: Vec<(&RenderedInstance, &ContrastivePair)> =
        instances.iter().filter_map(|i| pairs.get(i.problem_id.as_str()).map(|&p| (i, p))).collect();
    let raw: Vec<(String, mulprobe_core::Result<ContrastiveResult<f64>>)> = pool(cfg)?.install(|| {
        jobs.par_iter()
            .map(|(inst, pair)| {
                let ctx = ScoringContext::from_rendered(inst);
                let key = format!("{} {}", inst.problem_id, inst.representation);
                (key, contrastive_probe::<f64>(pair, &ctx, backend.as_ref(), inst.representation))
            })
            .collect()
    });
    let mut out = StageOutcome::default();
    let results = collect(raw, &mut out)?;
    let agg = aggregate_contrastive(&results);
    out.files.push(w.jsonl("probe/contrastive.jsonl", "contrastive_results", &results)?);
    out.files.push(w.text("probe/contrastive_aggregate.csv", "contrastive_aggregate", &agg.to_csv())?);
    out.files.push(w.json("probe/contrastive_aggregate.json", "contrastive_aggregate", &agg)?);
    let preferred = results.iter().filter(|r| r.preference).count();
    out.note(format!("correct step preferred in {preferred} of {} pairs", results.len()));
    Ok(out)
}

/// Greedy answers on the probe instances, keyed for the ablation's
/// accuracy column. Failed generations are left out.
fn probe_correctness(
    cfg: &RunConfig,
    backend: &dyn ScoringBackend,
    hds: &[HdsItem],
    instances: &[RenderedInstance],
    out: &mut StageOutcome,
) -> CliResult<BTreeMap<(String, Representation), bool>> {
    let by_id: BTreeMap<&str, &HdsItem> = hds.iter().map(|i| (i.problem.id.as_str(), i)).collect();
    let budget = cfg.eval.budget;
    let graded: Vec<Option<AccuracyRecord>> = pool(cfg)?.install(|| {
        instances
            .par_iter()
            .map(|inst| {
                let p = &by_id.get(inst.problem_id.as_str())?.problem;
                let rec = match backend.generate(&ScoringContext::from_rendered(inst), budget) {
                    Ok(g) => AccuracyRecord::grade(p, inst.representation, &g.text),
                    Err(e) => AccuracyRecord::failed(p, inst.representation, e.to_string()),
                };
                Some(rec)
            })
            .collect()
    });
    let mut map = BTreeMap::new();
    for rec in graded.into_iter().flatten() {
        out.total += 1;
        if rec.error.is_some() {
            out.failed += 1;
            continue;
        }
        map.insert((rec.problem_id.clone(), rec.representation), rec.correct);
    }
    Ok(map)
}

pub fn cmd_ablate(cfg: &RunConfig) -> CliResult<StageOutcome> {
    let w = writer(cfg, true)?;
    let backend = build_backend(cfg)?;
    let hds = load_hds(cfg)?;
    let instances = probe_instances(cfg)?;
    let mut out = StageOutcome::default();
    let balanced = run_probe(cfg, backend.as_ref(), BankProfile::Balanced, &instances, &mut out)?;
    let mismatch = run_probe(cfg, backend.as_ref(), BankProfile::StyleMismatch, &instances, &mut out)?;
    let correct = probe_correctness(cfg, backend.as_ref(), &hds, &instances, &mut out)?;
    // both conditions must cover the same items
    let keys = |rs: &[ProbeResult<f64>]| -> BTreeSet<(String, Representation)> {
        rs.iter().map(|r| (r.problem_id.clone(), r.representation)).collect()
    };
    let common: BTreeSet<_> = keys(&balanced).intersection(&keys(&mismatch)).cloned().collect();
    let keep = |rs: Vec<ProbeResult<f64>>| -> Vec<ProbeResult<f64>> {
        rs.into_iter().filter(|r| common.contains(&(r.problem_id.clone(), r.representation))).collect()
    };
    let (balanced, mismatch) = (keep(balanced), keep(mismatch));
    let report = style_shift_ablation(&balanced, &mismatch, &families(&hds), Some(&correct))?;
    out.files.push(w.text("probe/ablation.csv", "style_shift_ablation", &report.to_csv())?);
    out.files.push(w.json("probe/ablation.json", "style_shift_ablation", &report)?);
    for d in &report.deltas {
        out.note(format!("{}: mean within-problem std shift {:+.4}", d.modality, d.mean_std));
    }
    Ok(out)
}
