//! `eval` and `stats`.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;

use mulprobe_core::backend::{OpsProxy, ScoringBackend, ScoringContext};
use mulprobe_core::dataset::SuiteItem;
use mulprobe_core::render::{RenderedInstance, Representation};
use mulprobe_core::scalar::fmt4;
use mulprobe_core::stats::{
    fit_by_representation, fit_error_rate, perception_context, perception_rates, plot_data, summarize_accuracy,
    transcription_correct, AccuracyRecord, ErrorRateFit, FitSummary,
};
use mulprobe_core::Problem;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{build_backend, pool, writer, StageOutcome};
use crate::config::RunConfig;
use crate::error::CliResult;
use crate::output::read_jsonl;

fn opt4(v: Option<f64>) -> String {
    v.map(fmt4).unwrap_or_default()
}

enum Outcome {
    Graded(AccuracyRecord),
    Perceived(Representation, Result<bool, String>),
}

pub fn cmd_eval(cfg: &RunConfig) -> CliResult<StageOutcome> {
    let w = writer(cfg, true)?;
    let suite: Vec<SuiteItem> = read_jsonl(&cfg.out("dataset/suite.jsonl"))?;
    let keep: usize = cfg.eval.max_items.unwrap_or(suite.len());
    let problems: BTreeMap<&str, &Problem> =
        suite.iter().take(keep).map(|s| (s.problem.id.as_str(), &s.problem)).collect();
    let instances: Vec<RenderedInstance> = read_jsonl::<RenderedInstance>(&cfg.out("renders/suite.jsonl"))?
        .into_iter()
        .filter(|i| problems.contains_key(i.problem_id.as_str()))
        .collect();
    let backend = build_backend(cfg)?;
    let budget = cfg.eval.budget;
    let perception = cfg.eval.perception;
    let jobs: Vec<(&RenderedInstance, bool)> = instances
        .iter()
        .flat_map(|i| {
            let check = perception && !i.representation.is_text();
            std::iter::once((i, false)).chain(check.then_some((i, true)))
        })
        .collect();
    let run = |(inst, transcribe): &(&RenderedInstance, bool)| {
        let p = problems[inst.problem_id.as_str()];
        if *transcribe {
            let r = backend
                .generate(&perception_context(inst), budget)
                .map(|g| transcription_correct(p, &g.text))
                .map_err(|e| e.to_string());
            return Outcome::Perceived(inst.representation, r);
        }
        match backend.generate(&ScoringContext::from_rendered(inst), budget) {
            Ok(g) => Outcome::Graded(AccuracyRecord::grade(p, inst.representation, &g.text)),
            Err(e) => Outcome::Graded(AccuracyRecord::failed(p, inst.representation, e.to_string())),
        }
    };
    let results: Vec<Outcome> = pool(cfg)?.install(|| jobs.par_iter().map(run).collect());

    let mut records = Vec::new();
    let mut perceived = Vec::new();
    let mut out = StageOutcome::default();
    for r in results {
        out.total += 1;
        match r {
            Outcome::Graded(rec) => {
                if let Some(e) = &rec.error {
                    log::warn!("{} {}: {e}", rec.problem_id, rec.representation);
                    out.failed += 1;
                }
                records.push(rec);
            }
            Outcome::Perceived(rep, Ok(ok)) => perceived.push((rep, ok)),
            Outcome::Perceived(rep, Err(e)) => {
                log::warn!("perception check {rep}: {e}");
                out.failed += 1;
            }
        }
    }
    out.files.push(w.jsonl("eval/records.jsonl", "accuracy_records", &records)?);
    if perception {
        let mut csv = String::from("representation,n,transcription_rate\n");
        for (rep, n, rate) in perception_rates::<f64>(&perceived) {
            let _ = writeln!(csv, "{rep},{n},{}", fmt4(rate));
        }
        out.files.push(w.text("eval/perception.csv", "perception", &csv)?);
    }
    out.note(format!("graded {} responses ({} backend failures)", records.len(), out.failed));
    let stats = cmd_stats(cfg)?;
    out.files.extend(stats.files);
    out.notes.extend(stats.notes);
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorRateRow {
    pub representation: Representation,
    pub fit: Option<ErrorRateFit<f64>>,
    pub skipped: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    /// Correlation-based R² is primary; McFadden's is reported alongside.
    pub r2_definition: String,
    pub fits: Vec<FitSummary<f64>>,
    pub error_rate: Vec<ErrorRateRow>,
}

pub fn cmd_stats(cfg: &RunConfig) -> CliResult<StageOutcome> {
    let w = writer(cfg, true)?;
    let all: Vec<AccuracyRecord> = read_jsonl(&cfg.out("eval/records.jsonl"))?;
    let graded: Vec<AccuracyRecord> = all.iter().filter(|r| r.error.is_none()).cloned().collect();
    let mut failed: BTreeMap<Representation, usize> = BTreeMap::new();
    for r in all.iter().filter(|r| r.error.is_some()) {
        *failed.entry(r.representation).or_default() += 1;
    }
    let mut out = StageOutcome::default();

    let mut csv = String::from("representation,n,correct,accuracy,se,failed\n");
    for s in summarize_accuracy::<f64>(&graded) {
        let f = failed.get(&s.representation).copied().unwrap_or(0);
        let _ = writeln!(csv, "{},{},{},{},{},{f}", s.representation, s.n, s.correct, fmt4(s.accuracy), fmt4(s.se));
    }
    out.files.push(w.text("stats/accuracy.csv", "accuracy", &csv)?);

    let fits = fit_by_representation::<f64>(&graded);
    let mut csv = String::from("representation,n,intercept,slope,c50,r2,mcfadden_r2,converged,separation,note\n");
    for f in &fits {
        match &f.fit {
            Some(x) => {
                let _ = writeln!(
                    csv,
                    "{},{},{},{},{},{},{},{},{},",
                    f.representation,
                    x.n,
                    fmt4(x.beta0),
                    fmt4(x.beta1),
                    opt4(x.c50),
                    fmt4(x.r2),
                    fmt4(x.mcfadden_r2),
                    x.converged,
                    x.separation
                );
                let c50 = x.c50.map(fmt4).unwrap_or_else(|| "n/a".into());
                out.note(format!("{}: slope {} c50 {c50} R² {}", f.representation, fmt4(x.beta1), fmt4(x.r2)));
            }
            None => {
                let note = f.skipped.clone().unwrap_or_default().replace(',', ";");
                let _ = writeln!(csv, "{},,,,,,,,,{note}", f.representation);
            }
        }
    }
    out.files.push(w.text("stats/fits.csv", "logistic_fits", &csv)?);

    let reps: Vec<Representation> = {
        let seen: HashSet<Representation> = graded.iter().map(|r| r.representation).collect();
        Representation::ALL.into_iter().filter(|r| seen.contains(r)).collect()
    };
    let mut error_rate = Vec::new();
    let mut csv = String::from("representation,proxy,p,slope,buckets_used,buckets_excluded\n");
    for rep in reps {
        let rs: Vec<AccuracyRecord> = graded.iter().filter(|r| r.representation == rep).cloned().collect();
        for proxy in [OpsProxy::Load, OpsProxy::CarryAware] {
            let name = serde_json::to_value(proxy).expect("proxy").as_str().unwrap_or("?").to_string();
            match fit_error_rate::<f64>(&rs, proxy) {
                Ok(f) => {
                    let _ = writeln!(
                        csv,
                        "{rep},{name},{},{},{},{}",
                        fmt4(f.p),
                        fmt4(f.slope),
                        f.buckets_used,
                        f.buckets_excluded
                    );
                    error_rate.push(ErrorRateRow { representation: rep, fit: Some(f), skipped: None });
                }
                Err(e) => {
                    let _ = writeln!(csv, "{rep},{name},,,,");
                    error_rate.push(ErrorRateRow { representation: rep, fit: None, skipped: Some(e.to_string()) });
                }
            }
        }
    }
    out.files.push(w.text("stats/error_rate.csv", "error_rate", &csv)?);

    let mut csv = String::from("representation,load,predicted,bucket_n,empirical,se\n");
    for r in plot_data(&graded, &fits) {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{}",
            r.representation,
            r.load,
            opt4(r.predicted),
            r.bucket_n,
            opt4(r.empirical),
            opt4(r.se)
        );
    }
    out.files.push(w.text("stats/plot.csv", "plot_data", &csv)?);

    let report = StatsReport {
        r2_definition: "squared Pearson correlation of predicted probability and outcome".into(),
        fits,
        error_rate,
    };
    out.files.push(w.json("stats/fits.json", "stats_report", &report)?);
    Ok(out)
}
