//! `geometry`, `report` and `verify`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use mulprobe_core::dataset::DatasetManifest;
use mulprobe_core::geometry::{group_gap, load_adapter, LowRankUpdate};
use mulprobe_core::hash::sha256_hex;
use mulprobe_core::scalar::fmt4;
use serde_json::{Map, Value};

use super::{build_dataset, dataset_files, StageOutcome, MANIFEST_FILE};
use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::output::{parse_file, read_json, verify_tree, Stamp, Writer, NO_MANIFEST};

/// Stamp for stages that may run without a dataset.
fn loose_stamp(cfg: &RunConfig) -> CliResult<Stamp> {
    let manifest_hash = if cfg.out(MANIFEST_FILE).exists() {
        read_json::<DatasetManifest>(&cfg.out(MANIFEST_FILE))?.content_hash
    } else {
        NO_MANIFEST.to_string()
    };
    Ok(Stamp { config_hash: cfg.hash(), manifest_hash })
}

pub fn cmd_geometry(cfg: &RunConfig, extra: &[PathBuf]) -> CliResult<StageOutcome> {
    let dirs: Vec<&Path> = cfg.geometry.adapters.iter().chain(extra).map(PathBuf::as_path).collect();
    if dirs.len() < 2 {
        return Err(CliError::validation(format!(
            "geometry.adapters: need at least two adapter directories, got {}",
            dirs.len()
        )));
    }
    let adapters = dirs.iter().map(|d| load_adapter::<f64>(d)).collect::<Result<Vec<LowRankUpdate<f64>>, _>>()?;
    let report = group_gap(&adapters)?;
    let w = Writer::new(&cfg.output_dir, Stamp { config_hash: cfg.hash(), manifest_hash: NO_MANIFEST.into() });
    let mut out = StageOutcome::default();
    out.files.push(w.text("geometry/similarity.csv", "similarity_matrix", &report.matrix_csv())?);
    out.files.push(w.json("geometry/report.json", "similarity_report", &report)?);
    match (report.same_mean, report.cross_mean, report.gap) {
        (Some(s), Some(c), Some(g)) => out.note(format!(
            "same-heuristic mean {} ({} pairs) vs. cross-heuristic mean {} ({} pairs), gap {}",
            fmt4(s),
            report.same_pairs,
            fmt4(c),
            report.cross_pairs,
            fmt4(g)
        )),
        _ => out.note(format!(
            "no same-heuristic pairs; cross-heuristic mean {} over {} pairs (partial report)",
            report.cross_mean.map(fmt4).unwrap_or_else(|| "n/a".into()),
            report.cross_pairs
        )),
    }
    Ok(out)
}

/// A CSV body as a markdown table.
fn md_table(csv: &str) -> String {
    let mut out = String::new();
    for (i, line) in csv.lines().filter(|l| !l.is_empty()).enumerate() {
        let cells: Vec<&str> = line.split(',').collect();
        let _ = writeln!(out, "| {} |", cells.join(" | "));
        if i == 0 {
            let _ = writeln!(out, "|{}", "---|".repeat(cells.len()));
        }
    }
    out
}

fn body_text(path: &Path) -> CliResult<String> {
    let p = parse_file(path)?;
    String::from_utf8(p.body).map_err(|e| CliError::validation(format!("{}: {e}", path.display())))
}

/// Sections in report order: (title, csv file, json file).
const SECTIONS: [(&str, &str, &str); 10] = [
    ("Accuracy", "stats/accuracy.csv", ""),
    ("Perception", "eval/perception.csv", ""),
    ("Logistic fits", "stats/fits.csv", "stats/fits.json"),
    ("Error-rate fits", "stats/error_rate.csv", ""),
    ("Probe: balanced bank", "probe/aggregate_balanced.csv", "probe/aggregate_balanced.json"),
    ("Probe: style-mismatch bank", "probe/aggregate_style_mismatch.csv", "probe/aggregate_style_mismatch.json"),
    ("Contrastive steps", "probe/contrastive_aggregate.csv", "probe/contrastive_aggregate.json"),
    ("Style-shift ablation", "probe/ablation.csv", "probe/ablation.json"),
    ("Adapter similarity", "geometry/similarity.csv", "geometry/report.json"),
    ("Plot data", "", ""),
];

pub fn cmd_report(cfg: &RunConfig) -> CliResult<StageOutcome> {
    let stamp = loose_stamp(cfg)?;
    let w = Writer::new(&cfg.output_dir, stamp.clone());
    let mut md = String::from("# Run report\n\n");
    let _ = writeln!(md, "- config: `{}`", stamp.config_hash);
    let _ = writeln!(md, "- dataset manifest: `{}`", stamp.manifest_hash);
    let _ = writeln!(md, "- version: {}", mulprobe_core::VERSION);
    let mut summary = Map::new();
    if cfg.out(MANIFEST_FILE).exists() {
        let m: DatasetManifest = read_json(&cfg.out(MANIFEST_FILE))?;
        md.push_str("\n## Dataset\n\n");
        for (dim, counts) in &m.counts {
            let parts: Vec<String> = counts.iter().map(|(k, v)| format!("{k} {v}")).collect();
            let _ = writeln!(md, "- {dim}: {}", parts.join(", "));
        }
        summary.insert("dataset_counts".into(), serde_json::to_value(&m.counts).expect("counts"));
    }
    let mut sections = 0;
    for (title, csv, json) in SECTIONS {
        if !csv.is_empty() && cfg.out(csv).exists() {
            let _ = write!(md, "\n## {title}\n\n{}", md_table(&body_text(&cfg.out(csv))?));
            sections += 1;
        }
        if !json.is_empty() && cfg.out(json).exists() {
            let body: Value = read_json(&cfg.out(json))?;
            summary.insert(json.to_string(), body);
        }
    }
    if cfg.out("stats/plot.csv").exists() {
        md.push_str("\n## Plot data\n\nPer-representation rows in `stats/plot.csv`: load, predicted probability, bucket size, empirical bucket mean and its SE.\n");
    }
    let mut out = StageOutcome::default();
    out.files.push(w.text("report/report.md", "report", &md)?);
    out.files.push(w.json("report/summary.json", "summary", &Value::Object(summary))?);
    out.note(format!("report with {sections} sections"));
    Ok(out)
}

/// Re-checks every output header and body hash, the dataset files against
/// the manifest and, with `regenerate`, the manifest against a fresh
/// build of the dataset.
pub fn cmd_verify(cfg: &RunConfig, regenerate: bool) -> CliResult<StageOutcome> {
    let stamp = loose_stamp(cfg)?;
    let mut problems: Vec<String> = Vec::new();
    let checks = verify_tree(&cfg.output_dir, &stamp)?;
    for c in &checks {
        for p in &c.problems {
            problems.push(format!("{}: {p}", c.path.display()));
        }
    }
    if stamp.manifest_hash != NO_MANIFEST {
        let m: DatasetManifest = read_json(&cfg.out(MANIFEST_FILE))?;
        for (name, hash) in &m.files {
            let path = cfg.out(Path::new("dataset").join(name));
            match parse_file(&path) {
                Ok(p) if sha256_hex(&p.body) == *hash => {}
                Ok(_) => problems.push(format!("dataset/{name}: body does not match the manifest")),
                Err(e) => problems.push(e.to_string()),
            }
        }
        if regenerate {
            let (_, fresh) = dataset_files(cfg, &build_dataset(cfg)?)?;
            if fresh.content_hash != m.content_hash {
                problems.push(format!(
                    "{MANIFEST_FILE}: regenerated dataset hash {} differs from {}",
                    fresh.content_hash, m.content_hash
                ));
            }
        }
    } else if regenerate {
        problems.push(format!("{MANIFEST_FILE}: missing, nothing to regenerate against"));
    }
    if !problems.is_empty() {
        for p in &problems {
            log::error!("{p}");
        }
        return Err(CliError::validation(format!(
            "verification failed with {} problem(s); first: {}",
            problems.len(),
            problems[0]
        )));
    }
    let mut out = StageOutcome::default();
    out.note(format!("verified {} files", checks.len()));
    Ok(out)
}
