use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::{gen_trace, verify_trace, ReasoningTrace, TRACE_BASES};
use crate::arith::{schoolbook_carries, ExclusionSet, Operand, Problem};
use crate::cost::HeuristicKind;
use crate::error::{Error, Result};
use crate::rng::SeededRng;

/// Fine-tuning record: question as prompt, worked solution as completion.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub prompt: String,
    pub completion: String,
    pub heuristic: HeuristicKind,
    pub problem_id: String,
}

impl From<&ReasoningTrace> for TraceRecord {
    fn from(t: &ReasoningTrace) -> Self {
        Self {
            prompt: t.prompt().to_string(),
            completion: t.completion(),
            heuristic: t.heuristic,
            problem_id: t.problem_id.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceDataset {
    pub heuristic: HeuristicKind,
    pub seed: u64,
    pub train: Vec<ReasoningTrace>,
    pub val: Vec<ReasoningTrace>,
}

const TRAIN_FRACTION: f64 = 0.85;

fn signed_offset(rng: &mut SeededRng) -> i64 {
    let k = rng.range_inclusive(1, 5);
    if rng.below(2) == 0 {
        k
    } else {
        -k
    }
}

fn digits_between(rng: &mut SeededRng, n: usize, lo: i64, hi: i64) -> u64 {
    (0..n).fold(0, |acc, _| acc * 10 + rng.range_inclusive(lo, hi) as u64)
}

fn random_with_digits(rng: &mut SeededRng, n: usize) -> u64 {
    let lead = rng.range_inclusive(1, 9) as u64;
    (1..n).fold(lead, |acc, _| acc * 10 + rng.below(10))
}

/// Operand pair typical of the heuristic's training problems.
pub fn sample_trace_problem(h: HeuristicKind, rng: &mut SeededRng) -> (u64, u64) {
    match h {
        HeuristicKind::Rc => {
            let base = *rng.pick(&TRACE_BASES) as i64;
            let da = signed_offset(rng);
            let a = base + da;
            let b = match rng.below(3) {
                0 => base - da,
                1 => loop {
                    let db = signed_offset(rng);
                    if db != -da {
                        break base + db;
                    }
                },
                _ => *rng.pick(&TRACE_BASES) as i64 + signed_offset(rng),
            };
            (a as u64, b as u64)
        }
        HeuristicKind::Dd => match rng.below(3) {
            0 => {
                let x = loop {
                    let x = rng.range_inclusive(11, 99) as u64;
                    if !x.is_multiple_of(10) {
                        break x;
                    }
                };
                let d = rng.range_inclusive(1, 9) as u64;
                (x, if rng.below(2) == 0 { d * 10 } else { d * 100 })
            }
            1 => (rng.range_inclusive(11, 99) as u64, rng.range_inclusive(2, 9) as u64),
            _ => (digits_between(rng, 2, 1, 9), digits_between(rng, 2, 1, 9)),
        },
        HeuristicKind::Ot => {
            if rng.below(2) == 0 {
                loop {
                    let na = rng.range_inclusive(2, 3) as usize;
                    let nb = rng.range_inclusive(2, 3) as usize;
                    let (a, b) = (digits_between(rng, na, 5, 9), digits_between(rng, nb, 5, 9));
                    if schoolbook_carries(&Operand::from_u64(a), &Operand::from_u64(b)).total() >= 3 {
                        break (a, b);
                    }
                }
            } else {
                let na = rng.range_inclusive(3, 4) as usize;
                let nb = rng.range_inclusive(2, 3) as usize;
                (random_with_digits(rng, na), random_with_digits(rng, nb))
            }
        }
        HeuristicKind::Style => {
            let h = *rng.pick(&HeuristicKind::SCORED);
            sample_trace_problem(h, rng)
        }
    }
}

/// Generates `count` verified traces on distinct problems outside
/// `exclusions`, split 85/15 into train and validation.
pub fn build_trace_dataset(
    heuristic: HeuristicKind,
    count: usize,
    seed: u64,
    exclusions: &ExclusionSet,
) -> Result<TraceDataset> {
    if count == 0 {
        return Err(Error::invalid("trace count must be positive"));
    }
    let tag = heuristic.as_str().to_ascii_lowercase();
    let mut rng = SeededRng::new(seed).fork(&format!("traces/{tag}"));
    let mut seen = HashSet::new();
    let mut traces = Vec::with_capacity(count);
    let (mut excluded, mut duplicates) = (0usize, 0usize);
    // give up once this many consecutive draws add nothing new
    const STALL_LIMIT: usize = 20_000;
    let mut stalled = 0;
    let mut draws = 0usize;
    while traces.len() < count && stalled < STALL_LIMIT {
        draws += 1;
        stalled += 1;
        let (a, b) = sample_trace_problem(heuristic, &mut rng);
        let (a, b) = (Operand::from_u64(a), Operand::from_u64(b));
        if exclusions.contains(&a, &b) {
            excluded += 1;
            continue;
        }
        let p = Problem::new(format!("{tag}_{:05}", traces.len()), a, b);
        if !seen.insert(p.canonical_key()) {
            duplicates += 1;
            continue;
        }
        let t = gen_trace(&p, heuristic);
        verify_trace(&t).map_err(|e| Error::Internal(format!("{}: {e}", p.canonical_key())))?;
        traces.push(t);
        stalled = 0;
    }
    if traces.len() < count {
        return Err(Error::Exhausted(format!(
            "{heuristic} traces: found {} of {count} after {draws} draws ({excluded} excluded, {duplicates} duplicates)",
            traces.len()
        )));
    }
    let n_train = (count as f64 * TRAIN_FRACTION).round() as usize;
    let val = traces.split_off(n_train.min(count));
    Ok(TraceDataset { heuristic, seed, train: traces, val })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rc_corpus_split_and_exclusions() {
        let first = build_trace_dataset(HeuristicKind::Rc, 200, 9, &ExclusionSet::new()).unwrap();
        assert_eq!((first.train.len(), first.val.len()), (170, 30));
        let parse = |t: &ReasoningTrace| {
            let (a, b) = t.prompt().trim_start_matches("What is ").trim_end_matches('?').split_once(" × ").unwrap();
            Problem::new("x", Operand::from_u64(a.parse().unwrap()), Operand::from_u64(b.parse().unwrap()))
        };
        let ex = ExclusionSet::from_problems(&first.train.iter().take(50).map(parse).collect::<Vec<_>>());
        let second = build_trace_dataset(HeuristicKind::Rc, 200, 9, &ex).unwrap();
        assert!(second.train.iter().chain(&second.val).all(|t| !ex.contains_problem(&parse(t))));
        assert_ne!(first.train[0].prompt(), second.train[0].prompt());
    }

    #[test]
    fn deterministic() {
        let a = build_trace_dataset(HeuristicKind::Ot, 50, 1, &ExclusionSet::new()).unwrap();
        let b = build_trace_dataset(HeuristicKind::Ot, 50, 1, &ExclusionSet::new()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn exhaustion_is_reported() {
        // the decomposition sampler has fewer than 8000 distinct problems
        let err = build_trace_dataset(HeuristicKind::Dd, 8_000, 1, &ExclusionSet::new()).unwrap_err();
        assert!(matches!(err, Error::Exhausted(_)), "{err}");
    }
}
