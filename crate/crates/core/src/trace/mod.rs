//! Heuristic-specific worked solutions, matched step pairs, and an exact
//! checker for both.
//!
//! The line grammar is frozen under [`TRACE_GRAMMAR_VERSION`]; any change to
//! wording changes forced-completion losses downstream.

mod contrast;
mod corpus;
pub mod expr;
mod verify;

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::arith::{biguint_decimal, Operand, Problem};
use crate::cost::HeuristicKind;

pub use contrast::{gen_contrastive_pair, verify_step, ContrastivePair, Corruption};
pub use corpus::{build_trace_dataset, sample_trace_problem, TraceDataset, TraceRecord};
pub use verify::{extract_assertions, verify_trace, Extracted, VerifyFailure};

pub const TRACE_GRAMMAR_VERSION: &str = "1";

/// Round bases used by rounding traces.
pub const TRACE_BASES: [u64; 12] = [25, 50, 75, 100, 125, 150, 175, 200, 250, 300, 400, 500];

/// One arithmetic equality stated in a trace.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assertion {
    /// 1-based line number.
    pub line: usize,
    pub lhs: String,
    pub rhs: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReasoningTrace {
    pub problem_id: String,
    pub heuristic: HeuristicKind,
    /// First line is the question.
    pub lines: Vec<String>,
    #[serde(with = "biguint_decimal")]
    pub claimed_answer: BigUint,
    pub assertions: Vec<Assertion>,
}

impl ReasoningTrace {
    fn build(p: &Problem, heuristic: HeuristicKind, lines: Vec<String>) -> Self {
        let assertions = match extract_assertions(&lines) {
            Ok(x) => x.assertions,
            Err(e) => panic!("generated {heuristic} trace for {} does not parse: {e}", p.canonical_key()),
        };
        Self { problem_id: p.id.clone(), heuristic, lines, claimed_answer: p.product.clone(), assertions }
    }

    pub fn prompt(&self) -> &str {
        &self.lines[0]
    }

    /// Everything after the question.
    pub fn completion(&self) -> String {
        self.lines[1..].join("\n")
    }

    pub fn text(&self) -> String {
        self.lines.join("\n")
    }
}

pub fn gen_trace(p: &Problem, h: HeuristicKind) -> ReasoningTrace {
    match h {
        HeuristicKind::Rc => gen_rc_trace(p),
        HeuristicKind::Dd => gen_dd_trace(p),
        HeuristicKind::Ot => gen_ot_trace(p),
        HeuristicKind::Style => gen_style_trace(p),
    }
}

fn header(p: &Problem) -> String {
    format!("What is {} × {}?", p.a, p.b)
}

fn int(o: &Operand) -> BigInt {
    BigInt::from(o.value().clone())
}

/// Nearest trace base; ties go to the smaller base.
pub fn nearest_trace_base(x: &BigUint) -> u64 {
    let x = BigInt::from(x.clone());
    *TRACE_BASES.iter().min_by_key(|&&b| ((&x - BigInt::from(b)).abs(), b)).expect("non-empty base list")
}

/// `+3`, `-1`, `+0`.
fn signed(v: &BigInt) -> String {
    if v.is_negative() {
        v.to_string()
    } else {
        format!("+{v}")
    }
}

/// Midpoint base when `a = B + k` and `b = B - k` with `k != 0`.
pub fn symmetric_base(a: &Operand, b: &Operand) -> Option<(u64, BigInt)> {
    if a == b {
        return None;
    }
    let sum = a.value() + b.value();
    if sum.is_odd() {
        return None;
    }
    let mid: BigUint = sum / 2u32;
    let base = TRACE_BASES.iter().copied().find(|&t| mid == BigUint::from(t))?;
    Some((base, int(a) - BigInt::from(base)))
}

/// Terms of the general rounding expansion, in presentation order:
/// base product, adjustment for `a`, adjustment for `b`, cross term.
/// Zero terms are dropped, except the base product.
pub(crate) struct RcExpansion {
    pub base_a: u64,
    pub base_b: u64,
    pub delta_a: BigInt,
    pub delta_b: BigInt,
    pub terms: Vec<BigInt>,
}

pub(crate) fn rc_expansion(a: &Operand, b: &Operand) -> RcExpansion {
    let base_a = nearest_trace_base(a.value());
    let base_b = nearest_trace_base(b.value());
    let delta_a = int(a) - BigInt::from(base_a);
    let delta_b = int(b) - BigInt::from(base_b);
    let mut terms = vec![BigInt::from(base_a) * BigInt::from(base_b)];
    if !delta_a.is_zero() {
        terms.push(BigInt::from(base_b) * &delta_a);
    }
    if !delta_b.is_zero() {
        terms.push(&delta_b * BigInt::from(base_a));
    }
    if !delta_a.is_zero() && !delta_b.is_zero() {
        terms.push(&delta_a * &delta_b);
    }
    RcExpansion { base_a, base_b, delta_a, delta_b, terms }
}

pub fn gen_rc_trace(p: &Problem) -> ReasoningTrace {
    let mut lines = vec![header(p), "Let me round to convenient bases and adjust.".to_string()];
    if let Some((base, k)) = symmetric_base(&p.a, &p.b) {
        let mag = k.abs();
        let (sa, sb) = if k.is_positive() { ('+', '-') } else { ('-', '+') };
        lines.push(format!("{} is close to {base} (difference: {}).", p.a, signed(&k)));
        lines.push(format!("{} is close to {base} (difference: {}).", p.b, signed(&-&k)));
        lines.push(format!(
            "Use the difference of squares: ({base} {sa} {mag}) × ({base} {sb} {mag}) = {base}² - {mag}²."
        ));
        let sq = BigInt::from(base) * BigInt::from(base);
        let ksq = &mag * &mag;
        lines.push(format!("{base}² = {sq} and {mag}² = {ksq}."));
        lines.push(format!("{sq} - {ksq} = {}.", p.product));
    } else {
        let ex = rc_expansion(&p.a, &p.b);
        for (x, base, d) in [(&p.a, ex.base_a, &ex.delta_a), (&p.b, ex.base_b, &ex.delta_b)] {
            if d.is_zero() {
                lines.push(format!("{x} is already a round base."));
            } else {
                lines.push(format!("{x} is close to {base} (difference: {}).", signed(d)));
            }
        }
        lines.push(format!("Start with {} × {} = {}.", ex.base_a, ex.base_b, ex.terms[0]));
        if !ex.delta_a.is_zero() {
            let v = BigInt::from(ex.base_b) * &ex.delta_a;
            lines.push(format!("Adjustment for {}: {} × {} = {}.", p.a, ex.base_b, ex.delta_a, signed(&v)));
        }
        if !ex.delta_b.is_zero() {
            let v = &ex.delta_b * BigInt::from(ex.base_a);
            lines.push(format!("Adjustment for {}: {} × {} = {}.", p.b, ex.delta_b, ex.base_a, signed(&v)));
        }
        if !ex.delta_a.is_zero() && !ex.delta_b.is_zero() {
            let v = &ex.delta_a * &ex.delta_b;
            lines.push(format!("Cross term: {} × {} = {}.", ex.delta_a, ex.delta_b, signed(&v)));
        }
        if ex.terms.len() > 1 {
            lines.push(format!("Total: {} = {}.", rc_total_expr(&ex.terms), p.product));
        }
    }
    lines.push(format!("Answer: {}", p.product));
    ReasoningTrace::build(p, HeuristicKind::Rc, lines)
}

pub(crate) fn rc_total_expr(terms: &[BigInt]) -> String {
    let mut s = terms[0].to_string();
    for t in &terms[1..] {
        s.push_str(&format!(" + ({})", signed(t)));
    }
    s
}

/// Which operand a decomposition trace splits, or `None` when no split
/// produces two non-zero parts.
///
/// The larger operand is split (ties: the first), unless it ends in zero
/// while the other does not; then the other is split instead.
pub fn dd_split(a: &Operand, b: &Operand) -> Option<bool> {
    let split_a = a.value() >= b.value();
    let (big, small) = if split_a { (a, b) } else { (b, a) };
    let has_ones = |x: &Operand| x.n_digits() >= 2 && x.digits().last() != Some(&0);
    if has_ones(big) {
        Some(split_a)
    } else if has_ones(small) {
        Some(!split_a)
    } else {
        None
    }
}

/// `(tens part, ones digit, other operand)` for a split operand.
pub(crate) fn dd_parts(p: &Problem) -> Option<(BigUint, BigUint, &Operand, &Operand)> {
    let split_a = dd_split(&p.a, &p.b)?;
    let (x, y) = if split_a { (&p.a, &p.b) } else { (&p.b, &p.a) };
    let (tens, ones) = x.value().div_rem(&BigUint::from(10u32));
    Some((tens * 10u32, ones, x, y))
}

pub fn gen_dd_trace(p: &Problem) -> ReasoningTrace {
    let mut lines = vec![header(p)];
    match dd_parts(p) {
        None => lines.push(format!("{} × {} = {}.", p.a, p.b, p.product)),
        Some((hi, lo, x, y)) => {
            let y = y.value();
            let (p1, p2) = (&hi * y, &lo * y);
            lines.push(format!("Let me decompose {x} into {hi} + {lo}."));
            lines.push(format!("First compute {hi} × {y}:"));
            lines.push(format!("{hi} × {y} = {p1}."));
            lines.push(format!("Then compute {lo} × {y}:"));
            lines.push(format!("{lo} × {y} = {p2}."));
            lines.push("Now sum the partial products:".to_string());
            lines.push(format!("{p1} + {p2} = {}.", p.product));
        }
    }
    lines.push(format!("Answer: {}", p.product));
    ReasoningTrace::build(p, HeuristicKind::Dd, lines)
}

const PLACE_NAMES: [&str; 12] = [
    "ones",
    "tens",
    "hundreds",
    "thousands",
    "ten-thousands",
    "hundred-thousands",
    "millions",
    "ten-millions",
    "hundred-millions",
    "billions",
    "ten-billions",
    "hundred-billions",
];

pub(crate) fn place_name(k: usize) -> String {
    PLACE_NAMES.get(k).map(|s| s.to_string()).unwrap_or_else(|| format!("10^{k}"))
}

pub(crate) fn place_index(name: &str) -> Option<usize> {
    PLACE_NAMES.iter().position(|&n| n == name).or_else(|| name.strip_prefix("10^").and_then(|k| k.parse().ok()))
}

const ORDINALS: [&str; 20] = [
    "First",
    "Second",
    "Third",
    "Fourth",
    "Fifth",
    "Sixth",
    "Seventh",
    "Eighth",
    "Ninth",
    "Tenth",
    "Eleventh",
    "Twelfth",
    "Thirteenth",
    "Fourteenth",
    "Fifteenth",
    "Sixteenth",
    "Seventeenth",
    "Eighteenth",
    "Nineteenth",
    "Twentieth",
];

fn ordinal(k: usize) -> String {
    ORDINALS.get(k).map(|s| s.to_string()).unwrap_or_else(|| format!("Number {}", k + 1))
}

pub(crate) fn ordinal_index(word: &str) -> Option<usize> {
    ORDINALS
        .iter()
        .position(|&o| o == word)
        .or_else(|| word.strip_prefix("Number ")?.parse::<usize>().ok()?.checked_sub(1))
}

/// Column layout: the operand with more digits on top (ties: the first).
pub(crate) fn ot_layout(p: &Problem) -> (&Operand, &Operand) {
    if p.b.n_digits() > p.a.n_digits() {
        (&p.b, &p.a)
    } else {
        (&p.a, &p.b)
    }
}

/// Unshifted partial products, ones row first.
pub(crate) fn ot_rows(p: &Problem) -> Vec<BigUint> {
    let (top, mult) = ot_layout(p);
    mult.digits().iter().rev().map(|&d| top.value() * BigUint::from(d)).collect()
}

pub fn gen_ot_trace(p: &Problem) -> ReasoningTrace {
    let (top, mult) = ot_layout(p);
    let mut lines = vec![header(p), "Let me use column multiplication step by step.".to_string()];
    let top_digits: Vec<u32> = top.digits().iter().rev().map(|&d| d as u32).collect();
    let mut shifted = Vec::new();
    for (k, &d) in mult.digits().iter().rev().enumerate() {
        let d = d as u32;
        lines.push(format!("Step {}: Multiply {top} by {} digit {d}:", k + 1, place_name(k)));
        if d != 0 {
            let mut carry = 0u32;
            for (i, &t) in top_digits.iter().enumerate() {
                let prod = t * d;
                let mut line = format!("  {t} × {d} = {prod}");
                let total = prod + carry;
                if carry > 0 {
                    line.push_str(&format!(", plus carry = {total}"));
                }
                if i + 1 < top_digits.len() {
                    line.push_str(&format!(", write {}", total % 10));
                    carry = total / 10;
                    if carry > 0 {
                        line.push_str(&format!(", carry {carry}"));
                    }
                }
                line.push('.');
                lines.push(line);
            }
        }
        let row = top.value() * BigUint::from(d);
        let scale = num_traits::pow(BigUint::from(10u32), k);
        let name = ordinal(k);
        if k == 0 {
            lines.push(format!("  {name} partial product: {row}."));
        } else {
            let s = &row * &scale;
            lines.push(format!("  {name} partial product: {row} (shifted by {scale} = {s})."));
        }
        shifted.push(&row * &scale);
    }
    if shifted.len() > 1 {
        lines.push(format!("Step {}: Add partial products:", shifted.len() + 1));
        let terms: Vec<String> = shifted.iter().map(ToString::to_string).collect();
        lines.push(format!("  {} = {}.", terms.join(" + "), p.product));
    }
    lines.push(format!("Answer: {}", p.product));
    ReasoningTrace::build(p, HeuristicKind::Ot, lines)
}

pub fn gen_style_trace(p: &Problem) -> ReasoningTrace {
    let lines = vec![
        header(p),
        "Let me work through this step by step.".to_string(),
        "Step 1: Read the two numbers in the problem.".to_string(),
        "Step 2: Carry out the multiplication.".to_string(),
        "Step 3: State the final result.".to_string(),
        format!("Answer: {}", p.product),
    ];
    ReasoningTrace::build(p, HeuristicKind::Style, lines)
}
