//! Aggregate probe tables. Values keep full precision; the CSV forms round
//! to four decimals.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{ContrastiveResult, ProbeClass, ProbeResult};
use crate::cost::HeuristicKind;
use crate::error::{Error, Result};
use crate::render::Representation;
use crate::scalar::{fmt4, mean, Scalar};
use crate::stats::{binomial_se, mean_se};

const MODALITIES: [&str; 3] = ["text", "image", "audio"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValueSe<F> {
    pub value: F,
    pub se: F,
    pub n: usize,
}

impl<F: Scalar> ValueSe<F> {
    fn of_values(values: &[F]) -> Option<Self> {
        Some(Self { value: mean(values)?, se: mean_se(values).ok()?, n: values.len() })
    }

    fn of_hits(hits: usize, n: usize) -> Option<Self> {
        if n == 0 {
            return None;
        }
        let p = F::of_usize(hits) / F::of_usize(n);
        Some(Self { value: p, se: binomial_se(p, n).ok()?, n })
    }
}

fn by_modality<T>(items: &[T], rep: impl Fn(&T) -> Representation) -> Vec<(&'static str, Vec<&T>)> {
    MODALITIES
        .iter()
        .map(|&m| (m, items.iter().filter(|x| rep(x).modality() == m).collect::<Vec<_>>()))
        .filter(|(_, v)| !v.is_empty())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeAggregateRow<F> {
    pub metric: String,
    pub class: String,
    pub modality: String,
    pub stat: ValueSe<F>,
}

/// Per-modality probe summary: neutral and raw losses, Δloss per
/// heuristic, winner shares, family match rate and target support on
/// resolved items (winner is a heuristic).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeAggregate<F> {
    pub rows: Vec<ProbeAggregateRow<F>>,
}

pub fn aggregate_probes<F: Scalar>(
    results: &[ProbeResult<F>],
    targets: &BTreeMap<String, HeuristicKind>,
) -> ProbeAggregate<F> {
    let mut rows = Vec::new();
    let mut push = |metric: &str, class: &str, modality: &str, stat: Option<ValueSe<F>>| {
        if let Some(stat) = stat {
            rows.push(ProbeAggregateRow {
                metric: metric.into(),
                class: class.into(),
                modality: modality.into(),
                stat,
            });
        }
    };
    for (modality, rs) in by_modality(results, |r| r.representation) {
        for class in ProbeClass::ALL {
            let v: Vec<F> = rs.iter().map(|r| *r.loss.get(class)).collect();
            push("loss", class.as_str(), modality, ValueSe::of_values(&v));
        }
        for class in ProbeClass::HEURISTICS {
            let v: Vec<F> = rs.iter().map(|r| *r.delta.get(class)).collect();
            push("delta_loss", class.as_str(), modality, ValueSe::of_values(&v));
        }
        for class in ProbeClass::ALL {
            let hits = rs.iter().filter(|r| r.winner == class).count();
            push("winner_share", class.as_str(), modality, ValueSe::of_hits(hits, rs.len()));
        }
        let labeled: Vec<(&&ProbeResult<F>, HeuristicKind)> =
            rs.iter().filter_map(|r| targets.get(&r.problem_id).map(|&t| (r, t))).collect();
        let matches = labeled.iter().filter(|(r, t)| r.winner.heuristic() == Some(*t)).count();
        push("family_match_rate", "all", modality, ValueSe::of_hits(matches, labeled.len()));
        for class in ProbeClass::HEURISTICS {
            let h = class.heuristic().expect("heuristic class");
            let v: Vec<F> = labeled
                .iter()
                .filter(|(r, t)| *t == h && r.winner != ProbeClass::Neutral)
                .map(|(r, _)| *r.support.get(class))
                .collect();
            push("target_support", class.as_str(), modality, ValueSe::of_values(&v));
        }
    }
    ProbeAggregate { rows }
}

impl<F: Scalar> ProbeAggregate<F> {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("metric,class,modality,n,value,se\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                r.metric,
                r.class,
                r.modality,
                r.stat.n,
                fmt4(r.stat.value),
                fmt4(r.stat.se)
            );
        }
        out
    }

    pub fn get(&self, metric: &str, class: &str, modality: &str) -> Option<&ValueSe<F>> {
        self.rows.iter().find(|r| r.metric == metric && r.class == class && r.modality == modality).map(|r| &r.stat)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContrastiveRow<F> {
    pub modality: String,
    /// `overall` or the target heuristic.
    pub scope: String,
    pub preference_rate: ValueSe<F>,
    pub loss_gap: ValueSe<F>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContrastiveAggregate<F> {
    pub rows: Vec<ContrastiveRow<F>>,
}

/// Preference rates (binomial SE) and mean loss gaps (SE of the mean),
/// overall and per heuristic, for each modality.
pub fn aggregate_contrastive<F: Scalar>(results: &[ContrastiveResult<F>]) -> ContrastiveAggregate<F> {
    let mut rows = Vec::new();
    for (modality, rs) in by_modality(results, |r| r.representation) {
        let mut scopes: Vec<(String, Vec<&&ContrastiveResult<F>>)> = vec![("overall".into(), rs.iter().collect())];
        for h in [HeuristicKind::Dd, HeuristicKind::Rc, HeuristicKind::Ot] {
            scopes.push((h.as_str().into(), rs.iter().filter(|r| r.heuristic == h).collect()));
        }
        for (scope, items) in scopes {
            let gaps: Vec<F> = items.iter().map(|r| r.loss_gap).collect();
            let hits = items.iter().filter(|r| r.preference).count();
            if let (Some(p), Some(g)) = (ValueSe::of_hits(hits, items.len()), ValueSe::of_values(&gaps)) {
                rows.push(ContrastiveRow { modality: modality.into(), scope, preference_rate: p, loss_gap: g });
            }
        }
    }
    ContrastiveAggregate { rows }
}

impl<F: Scalar> ContrastiveAggregate<F> {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("modality,scope,n,preference_rate,preference_se,loss_gap,loss_gap_se\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.modality,
                r.scope,
                r.preference_rate.n,
                fmt4(r.preference_rate.value),
                fmt4(r.preference_rate.se),
                fmt4(r.loss_gap.value),
                fmt4(r.loss_gap.se)
            );
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow<F> {
    pub condition: String,
    pub modality: String,
    pub n: usize,
    pub dd_std: F,
    pub ot_std: F,
    pub rc_std: F,
    pub mean_std: F,
    pub family_match_rate: Option<F>,
    pub accuracy: Option<F>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport<F> {
    /// Balanced then style-mismatch row per modality.
    pub rows: Vec<AblationRow<F>>,
    /// Mismatch minus balanced, per modality.
    pub deltas: Vec<AblationRow<F>>,
}

fn ablation_row<F: Scalar>(
    condition: &str,
    modality: &str,
    rs: &[&ProbeResult<F>],
    families: &BTreeMap<String, HeuristicKind>,
    correct: Option<&BTreeMap<(String, Representation), bool>>,
) -> AblationRow<F> {
    let col = |c: ProbeClass| {
        let v: Vec<F> = rs.iter().map(|r| *r.within_problem_std.get(c)).collect();
        mean(&v).unwrap_or_else(F::zero)
    };
    let (dd, ot, rc) = (col(ProbeClass::Dd), col(ProbeClass::Ot), col(ProbeClass::Rc));
    let labeled: Vec<_> = rs.iter().filter_map(|r| families.get(&r.problem_id).map(|&f| (r, f))).collect();
    let family_match_rate = (!labeled.is_empty()).then(|| {
        let hits = labeled.iter().filter(|(r, f)| r.winner.heuristic() == Some(*f)).count();
        F::of_usize(hits) / F::of_usize(labeled.len())
    });
    let accuracy = correct.and_then(|m| {
        let graded: Vec<bool> =
            rs.iter().filter_map(|r| m.get(&(r.problem_id.clone(), r.representation)).copied()).collect();
        (!graded.is_empty()).then(|| F::of_usize(graded.iter().filter(|&&c| c).count()) / F::of_usize(graded.len()))
    });
    AblationRow {
        condition: condition.into(),
        modality: modality.into(),
        n: rs.len(),
        dd_std: dd,
        ot_std: ot,
        rc_std: rc,
        mean_std: mean(&[dd, ot, rc]).expect("three values"),
        family_match_rate,
        accuracy,
    }
}

/// Side-by-side template variability, design-family match rate and
/// accuracy under two template banks on the same problems.
pub fn style_shift_ablation<F: Scalar>(
    balanced: &[ProbeResult<F>],
    mismatch: &[ProbeResult<F>],
    families: &BTreeMap<String, HeuristicKind>,
    correct: Option<&BTreeMap<(String, Representation), bool>>,
) -> Result<AblationReport<F>> {
    let keys = |rs: &[ProbeResult<F>]| -> BTreeSet<(String, &'static str)> {
        rs.iter().map(|r| (r.problem_id.clone(), r.representation.as_str())).collect()
    };
    let (kb, km) = (keys(balanced), keys(mismatch));
    if kb != km || balanced.len() != kb.len() || mismatch.len() != km.len() {
        let missing = kb.symmetric_difference(&km).next();
        return Err(Error::invalid(format!(
            "ablation conditions cover different items ({} vs {}; first difference {missing:?})",
            balanced.len(),
            mismatch.len()
        )));
    }
    let mut rows = Vec::new();
    let mut deltas = Vec::new();
    let b = by_modality(balanced, |r| r.representation);
    let m = by_modality(mismatch, |r| r.representation);
    for ((modality, bs), (_, ms)) in b.iter().zip(&m) {
        let rb = ablation_row("balanced", modality, bs, families, correct);
        let rm = ablation_row("style_mismatch", modality, ms, families, correct);
        let diff = |x: Option<F>, y: Option<F>| x.zip(y).map(|(a, b)| b - a);
        deltas.push(AblationRow {
            condition: "delta".into(),
            modality: (*modality).into(),
            n: rb.n,
            dd_std: rm.dd_std - rb.dd_std,
            ot_std: rm.ot_std - rb.ot_std,
            rc_std: rm.rc_std - rb.rc_std,
            mean_std: rm.mean_std - rb.mean_std,
            family_match_rate: diff(rb.family_match_rate, rm.family_match_rate),
            accuracy: diff(rb.accuracy, rm.accuracy),
        });
        rows.push(rb);
        rows.push(rm);
    }
    Ok(AblationReport { rows, deltas })
}

impl<F: Scalar> AblationReport<F> {
    pub fn to_csv(&self) -> String {
        let opt = |v: Option<F>| v.map(fmt4).unwrap_or_default();
        let mut out = String::from("condition,modality,n,dd_std,ot_std,rc_std,mean_std,family_match_rate,accuracy\n");
        for r in self.rows.iter().chain(&self.deltas) {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                r.condition,
                r.modality,
                r.n,
                fmt4(r.dd_std),
                fmt4(r.ot_std),
                fmt4(r.rc_std),
                fmt4(r.mean_std),
                opt(r.family_match_rate),
                opt(r.accuracy)
            );
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::probe::{BankProfile, ByClass};

    fn result(id: &str, rep: Representation, losses: [f64; 4], stds: [f64; 3]) -> ProbeResult<f64> {
        let loss = ByClass { dd: losses[0], rc: losses[1], ot: losses[2], neutral: losses[3] };
        let s = crate::probe::support(losses);
        let (winner, tie) = crate::probe::winner(losses);
        ProbeResult {
            problem_id: id.into(),
            representation: rep,
            profile: BankProfile::Balanced,
            delta: ByClass::from_fn(|c| *loss.get(c) - losses[3]),
            loss,
            winner,
            tie,
            support: ByClass::from_fn(|c| s[c.index()]),
            within_problem_std: ByClass { dd: stds[0], rc: stds[2], ot: stds[1], neutral: 0.0 },
            template_losses: ByClass::default(),
            token_counts: ByClass::default(),
            length_matched: true,
        }
    }

    #[test]
    fn probe_aggregate_rows() {
        let rs = vec![
            result("a", Representation::NumeralText, [1.0, 2.0, 3.0, 2.5], [0.1, 0.2, 0.3]),
            result("b", Representation::NumeralText, [3.0, 2.0, 3.0, 1.0], [0.1, 0.2, 0.3]),
            result("a", Representation::NumeralImage, [2.0, 2.0, 2.0, 2.0], [0.1, 0.2, 0.3]),
        ];
        let targets = BTreeMap::from([("a".to_string(), HeuristicKind::Dd), ("b".to_string(), HeuristicKind::Rc)]);
        let agg = aggregate_probes(&rs, &targets);
        let d = agg.get("delta_loss", "DD", "text").unwrap();
        assert_eq!((d.value, d.n), (0.25, 2));
        assert_eq!(agg.get("family_match_rate", "all", "text").unwrap().value, 0.5);
        // only "a" is resolved among DD targets in text; "b" is neutral
        assert_eq!(agg.get("target_support", "DD", "text").unwrap().n, 1);
        assert!(agg.get("target_support", "RC", "text").is_none());
        assert_eq!(agg.get("winner_share", "neutral", "image").unwrap().value, 1.0);
        let csv = agg.to_csv();
        assert!(csv.starts_with("metric,class,modality,n,value,se\n"));
        assert!(csv.contains("delta_loss,DD,text,2,0.2500,1.7500\n"), "{csv}");
    }

    #[test]
    fn ablation_self_comparison_has_zero_deltas() {
        let rs = vec![
            result("a", Representation::NumeralText, [1.0, 2.0, 3.0, 2.5], [0.4402, 0.4631, 0.2750]),
            result("b", Representation::NumeralText, [3.0, 2.0, 3.0, 1.0], [0.4402, 0.4631, 0.2750]),
        ];
        let fam = BTreeMap::from([("a".to_string(), HeuristicKind::Dd)]);
        let rep = style_shift_ablation(&rs, &rs, &fam, None).unwrap();
        assert_eq!(rep.rows.len(), 2);
        assert!((rep.rows[0].mean_std - 0.3928).abs() < 1e-4);
        let d = &rep.deltas[0];
        assert_eq!((d.dd_std, d.ot_std, d.rc_std, d.mean_std), (0.0, 0.0, 0.0, 0.0));
        assert_eq!(d.family_match_rate, Some(0.0));
        assert!(style_shift_ablation(&rs, &rs[..1], &fam, None).is_err());
    }

    #[test]
    fn contrastive_rows() {
        let mk = |h, gap: f64| ContrastiveResult {
            problem_id: "x".into(),
            representation: Representation::NumeralText,
            heuristic: h,
            l_correct: 1.0,
            l_incorrect: 1.0 + gap,
            preference: gap > 0.0,
            loss_gap: gap,
        };
        let rs = vec![mk(HeuristicKind::Dd, 0.5), mk(HeuristicKind::Dd, 0.25), mk(HeuristicKind::Ot, -0.25)];
        let agg = aggregate_contrastive(&rs);
        assert_eq!(agg.rows.len(), 3);
        assert_eq!(agg.rows[0].scope, "overall");
        assert!((agg.rows[0].preference_rate.value - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(agg.rows[1].loss_gap.value, 0.375);
        assert!(agg.to_csv().contains("text,OT,1,0.0000,0.0000,-0.2500,0.0000\n"));
    }
}
