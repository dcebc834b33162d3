//! Accuracy records, answer extraction, standard errors and the two
//! accuracy-versus-load models.

mod error_rate;
mod logistic;

use std::collections::BTreeMap;
use std::sync::LazyLock;

use num_bigint::BigUint;
use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::arith::Problem;
use crate::backend::ScoringContext;
use crate::error::{Error, Result};
use crate::render::words::{parse_words, ONES, SCALES, TENS};
use crate::render::{Payload, RenderedInstance, Representation};
use crate::scalar::{sample_std, stable_sum, Scalar};

pub use error_rate::{fit_error_rate, ErrorRateFit};
pub use logistic::{
    fit_logistic, is_separated, r_squared, sigmoid, LogisticFit, COEFFICIENT_CAP, LOG_LIKELIHOOD_TOL, MAX_ITERATIONS,
    MIN_RECORDS,
};

/// One graded completion.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AccuracyRecord {
    pub problem_id: String,
    pub representation: Representation,
    pub load_c: u64,
    /// Non-zero digit products plus carries.
    pub carry_ops: u64,
    pub correct: bool,
    #[serde(default, with = "opt_decimal")]
    pub extracted_answer: Option<BigUint>,
    /// Backend failure for this item; such records are never correct.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl AccuracyRecord {
    /// Grades `completion` against the exact product of `p`.
    pub fn grade(p: &Problem, representation: Representation, completion: &str) -> Self {
        let load = p.load();
        let extracted_answer = extract_answer(completion);
        Self {
            problem_id: p.id.clone(),
            representation,
            load_c: load.load_c,
            carry_ops: load.carry_aware_ops(),
            correct: extracted_answer.as_ref() == Some(&p.product),
            extracted_answer,
            error: None,
        }
    }

    pub fn failed(p: &Problem, representation: Representation, error: impl Into<String>) -> Self {
        let load = p.load();
        Self {
            problem_id: p.id.clone(),
            representation,
            load_c: load.load_c,
            carry_ops: load.carry_aware_ops(),
            correct: false,
            extracted_answer: None,
            error: Some(error.into()),
        }
    }
}

mod opt_decimal {
    use num_bigint::BigUint;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &Option<BigUint>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(v) => s.serialize_str(&v.to_str_radix(10)),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<BigUint>, D::Error> {
        match Option::<String>::deserialize(d)? {
            None => Ok(None),
            Some(s) => BigUint::parse_bytes(s.as_bytes(), 10)
                .map(Some)
                .ok_or_else(|| serde::de::Error::custom(format!("not a decimal integer: {s:?}"))),
        }
    }
}

static NUMERAL: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\d{1,3}(?:,\d{3})+\b|\d+").expect("regex"));

static NUMBER_WORDS: LazyLock<Regex> = LazyLock::new(|| {
    let mut words: Vec<&str> = ONES
        .iter()
        .chain(TENS.iter().filter(|w| !w.is_empty()))
        .chain(SCALES.iter())
        .copied()
        .chain(["hundred"])
        .collect();
    // longest first so "fourteen" is not read as "four"
    words.sort_by_key(|w| std::cmp::Reverse(w.len()));
    let w = format!(r"(?:{})", words.join("|"));
    Regex::new(&format!(r"(?i)\b{w}(?:(?:\s+|-)(?:and\s+)?{w})*\b")).expect("regex")
});

/// All integers in `text` with their end offsets, in order of appearance.
fn integer_candidates(text: &str) -> Vec<(usize, BigUint)> {
    let mut out = Vec::new();
    for m in NUMERAL.find_iter(text) {
        let rest = &text[m.end()..];
        let before = &text[..m.start()];
        // skip decimals such as 3.5 and the fractional part after the point
        let decimal_tail = rest.starts_with('.') && rest[1..].starts_with(|c: char| c.is_ascii_digit());
        let decimal_head = before.ends_with('.') && before[..before.len() - 1].ends_with(|c: char| c.is_ascii_digit());
        if decimal_tail || decimal_head {
            continue;
        }
        let digits: String = m.as_str().chars().filter(char::is_ascii_digit).collect();
        if let Some(v) = BigUint::parse_bytes(digits.as_bytes(), 10) {
            out.push((m.end(), v));
        }
    }
    for m in NUMBER_WORDS.find_iter(text) {
        if let Some(v) = parse_words(m.as_str()) {
            out.push((m.end(), BigUint::from(v)));
        }
    }
    out.sort_by_key(|(end, _)| *end);
    out
}

/// The last well-formed integer in a completion: plain or comma-grouped
/// numerals, or a spelled-out cardinal.
pub fn extract_answer(completion: &str) -> Option<BigUint> {
    integer_candidates(completion).pop().map(|(_, v)| v)
}

/// Instruction for the operand transcription check.
pub const TRANSCRIBE_INSTRUCTION: &str =
    "Transcribe the two numbers being multiplied as digits, in the form A × B. Do not compute the product.";

/// Context asking the model to read back the operands of `inst`.
pub fn perception_context(inst: &RenderedInstance) -> ScoringContext {
    let mut ctx = ScoringContext::from_rendered(inst);
    ctx.prompt = match &inst.payload {
        Payload::Text { text } => format!("{TRANSCRIBE_INSTRUCTION}\n{text}"),
        Payload::Bytes { .. } => TRANSCRIBE_INSTRUCTION.to_string(),
    };
    ctx
}

/// Whether a transcription completion names both operands, in order, as
/// its last two integers.
pub fn transcription_correct(p: &Problem, completion: &str) -> bool {
    let c = integer_candidates(completion);
    match c.as_slice() {
        [.., (_, a), (_, b)] => a == p.a.value() && b == p.b.value(),
        _ => false,
    }
}

/// `sqrt(p (1 - p) / n)`.
pub fn binomial_se<F: Scalar>(p: F, n: usize) -> Result<F> {
    if n == 0 {
        return Err(Error::invalid("binomial standard error needs n >= 1"));
    }
    if !(p >= F::zero() && p <= F::one()) {
        return Err(Error::invalid(format!("proportion {p} outside [0, 1]")));
    }
    Ok((p * (F::one() - p) / F::of_usize(n)).sqrt())
}

/// Sample standard deviation over `sqrt(n)`.
pub fn mean_se<F: Scalar>(values: &[F]) -> Result<F> {
    if values.is_empty() {
        return Err(Error::invalid("standard error of a mean needs n >= 1"));
    }
    Ok(sample_std(values) / F::of_usize(values.len()).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracySummary<F> {
    pub representation: Representation,
    pub n: usize,
    pub correct: usize,
    pub failed: usize,
    pub accuracy: F,
    pub se: F,
}

fn by_representation(records: &[AccuracyRecord]) -> BTreeMap<usize, Vec<&AccuracyRecord>> {
    let mut groups: BTreeMap<usize, Vec<&AccuracyRecord>> = BTreeMap::new();
    for r in records {
        let idx = Representation::ALL.iter().position(|x| *x == r.representation).expect("known representation");
        groups.entry(idx).or_default().push(r);
    }
    groups
}

/// Accuracy and binomial SE per representation, in canonical order.
pub fn summarize_accuracy<F: Scalar>(records: &[AccuracyRecord]) -> Vec<AccuracySummary<F>> {
    by_representation(records)
        .into_iter()
        .map(|(idx, rs)| {
            let correct = rs.iter().filter(|r| r.correct).count();
            let acc = F::of_usize(correct) / F::of_usize(rs.len());
            AccuracySummary {
                representation: Representation::ALL[idx],
                n: rs.len(),
                correct,
                failed: rs.iter().filter(|r| r.error.is_some()).count(),
                accuracy: acc,
                se: binomial_se(acc, rs.len()).expect("non-empty group"),
            }
        })
        .collect()
}

/// Per-item logistic fit of correctness on load.
pub fn fit_records<F: Scalar>(records: &[AccuracyRecord]) -> Result<LogisticFit<F>> {
    let x: Vec<F> = records.iter().map(|r| F::of(r.load_c as f64)).collect();
    let y: Vec<bool> = records.iter().map(|r| r.correct).collect();
    fit_logistic(&x, &y)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSummary<F> {
    pub representation: Representation,
    pub fit: Option<LogisticFit<F>>,
    /// Why no fit was produced.
    pub skipped: Option<String>,
}

/// One logistic fit per representation present in `records`.
pub fn fit_by_representation<F: Scalar>(records: &[AccuracyRecord]) -> Vec<FitSummary<F>> {
    by_representation(records)
        .into_iter()
        .map(|(idx, rs)| {
            let owned: Vec<AccuracyRecord> = rs.into_iter().cloned().collect();
            let (fit, skipped) = match fit_records(&owned) {
                Ok(f) => (Some(f), None),
                Err(e) => (None, Some(e.to_string())),
            };
            FitSummary { representation: Representation::ALL[idx], fit, skipped }
        })
        .collect()
}

/// One row of plot data: the fitted curve at `load`, plus the empirical
/// bucket mean and its SE where items with exactly that load exist.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotRow<F> {
    pub representation: Representation,
    pub load: u64,
    pub predicted: Option<F>,
    pub bucket_n: usize,
    pub empirical: Option<F>,
    pub se: Option<F>,
}

/// Plot rows over the integer load grid spanning each representation's
/// observed loads.
pub fn plot_data<F: Scalar>(records: &[AccuracyRecord], fits: &[FitSummary<F>]) -> Vec<PlotRow<F>> {
    let mut rows = Vec::new();
    for (idx, rs) in by_representation(records) {
        let rep = Representation::ALL[idx];
        let fit = fits.iter().find(|f| f.representation == rep).and_then(|f| f.fit.as_ref());
        let mut buckets: BTreeMap<u64, (usize, usize)> = BTreeMap::new();
        for r in &rs {
            let e = buckets.entry(r.load_c).or_default();
            e.0 += 1;
            e.1 += usize::from(r.correct);
        }
        let (lo, hi) = match (buckets.keys().next(), buckets.keys().next_back()) {
            (Some(&lo), Some(&hi)) => (lo, hi),
            _ => continue,
        };
        for load in lo..=hi {
            let bucket = buckets.get(&load);
            let empirical = bucket.map(|&(n, c)| F::of_usize(c) / F::of_usize(n));
            rows.push(PlotRow {
                representation: rep,
                load,
                predicted: fit.map(|f| f.predict(F::of(load as f64))),
                bucket_n: bucket.map_or(0, |b| b.0),
                empirical,
                se: bucket.zip(empirical).map(|(&(n, _), p)| binomial_se(p, n).expect("n >= 1")),
            });
        }
    }
    rows
}

/// Fraction of items whose transcription matched, per representation.
pub fn perception_rates<F: Scalar>(outcomes: &[(Representation, bool)]) -> Vec<(Representation, usize, F)> {
    Representation::ALL
        .iter()
        .filter_map(|&rep| {
            let hits: Vec<bool> = outcomes.iter().filter(|(r, _)| *r == rep).map(|(_, ok)| *ok).collect();
            (!hits.is_empty()).then(|| {
                let ok = stable_sum(hits.iter().map(|&h| if h { F::one() } else { F::zero() }));
                (rep, hits.len(), ok / F::of_usize(hits.len()))
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::Operand;
    use crate::backend::{MockBackend, MockSpec, ScoringBackend};
    use crate::render::{render, RenderOptions};

    fn big(v: u64) -> BigUint {
        BigUint::from(v)
    }

    #[test]
    fn extraction() {
        assert_eq!(extract_answer("Step 3: ...\nAnswer: 159201"), Some(big(159201)));
        assert_eq!(extract_answer("no idea"), None);
        assert_eq!(extract_answer("maybe 1,692 or so"), Some(big(1692)));
        assert_eq!(extract_answer("12 × 34 = 408."), Some(big(408)));
        assert_eq!(extract_answer("about 3.5 thousand"), None);
        assert_eq!(extract_answer("roughly 3.5"), None);
        assert_eq!(extract_answer("12, 34"), Some(big(34)));
        assert_eq!(extract_answer("The answer is one thousand six hundred ninety-two."), Some(big(1692)));
        assert_eq!(extract_answer("It is 1692, or in words sixteen hundred"), Some(big(1692)));
        assert_eq!(extract_answer("forty-seven times thirty-six is 1692"), Some(big(1692)));
        assert_eq!(extract_answer("1692 which is one thousand six hundred ninety-two"), Some(big(1692)));
        assert_eq!(extract_answer("Fourteen"), Some(big(14)));
    }

    #[test]
    fn grading() {
        let p = Problem::new("p", Operand::from_u64(47), Operand::from_u64(36));
        let r = AccuracyRecord::grade(&p, Representation::NumeralText, "The answer is 1,692.");
        assert!(r.correct);
        assert_eq!(r.load_c, 16);
        let r = AccuracyRecord::grade(&p, Representation::NumeralText, "The answer is 1693.");
        assert!(!r.correct);
        let json = serde_json::to_string(&r).unwrap();
        assert!(json.contains("\"1693\""));
        assert_eq!(serde_json::from_str::<AccuracyRecord>(&json).unwrap(), r);
        assert!(transcription_correct(&p, "47 × 36"));
        assert!(transcription_correct(&p, "forty-seven × thirty-six"));
        assert!(!transcription_correct(&p, "36 × 47"));
        assert!(!transcription_correct(&p, "1692"));
        let mock = MockBackend::new(MockSpec::default());
        for rep in [Representation::NumeralText, Representation::WordText, Representation::NumeralImage] {
            let inst = render(&p, rep, &RenderOptions::default(), None).unwrap();
            let out = mock.generate(&perception_context(&inst), 64).unwrap();
            assert!(transcription_correct(&p, &out.text), "{rep}: {}", out.text);
        }
    }

    #[test]
    fn standard_errors() {
        assert!((binomial_se(0.5, 100).unwrap() - 0.05f64).abs() < 1e-15);
        assert_eq!(binomial_se(0.0f64, 10).unwrap(), 0.0);
        assert_eq!(binomial_se(1.0f64, 10).unwrap(), 0.0);
        assert!(binomial_se(0.5f64, 0).is_err());
        // std({1,2,3}) = 1
        assert!((mean_se(&[1.0, 2.0, 3.0]).unwrap() - 1.0 / 3f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn summaries_and_plot_rows() {
        let mk = |i: usize, rep, load, correct| AccuracyRecord {
            problem_id: format!("p{i}"),
            representation: rep,
            load_c: load,
            carry_ops: 0,
            correct,
            extracted_answer: None,
            error: None,
        };
        let mut recs = Vec::new();
        for i in 0..40 {
            recs.push(mk(i, Representation::NumeralImage, 10 + (i as u64 % 4), i % 3 != 0));
            recs.push(mk(i, Representation::NumeralText, 10 + (i as u64 % 4), i % 5 != 0));
        }
        let s = summarize_accuracy::<f64>(&recs);
        assert_eq!(s[0].representation, Representation::NumeralText);
        assert_eq!((s[0].n, s[0].correct), (40, 32));
        let fits = fit_by_representation::<f64>(&recs);
        assert_eq!(fits.len(), 2);
        let rows = plot_data(&recs, &fits);
        assert_eq!(rows.len(), 8);
        let recount = recs
            .iter()
            .filter(|r| r.representation == Representation::NumeralText && r.load_c == 10)
            .collect::<Vec<_>>();
        let row = &rows[0];
        assert_eq!(row.bucket_n, recount.len());
        assert_eq!(row.empirical.unwrap(), recount.iter().filter(|r| r.correct).count() as f64 / recount.len() as f64);
    }
}
