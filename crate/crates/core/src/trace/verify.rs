use std::fmt;
use std::sync::LazyLock;

use num_bigint::{BigInt, BigUint};
use regex::Regex;
use serde::{Deserialize, Serialize};

use super::expr::eval;
use super::{ordinal_index, place_index, Assertion, ReasoningTrace};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerifyFailure {
    /// 1-based; 0 when the failure concerns the trace as a whole.
    pub line: usize,
    pub text: String,
    pub reason: String,
}

impl fmt::Display for VerifyFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.line == 0 {
            write!(f, "{}", self.reason)
        } else {
            write!(f, "line {} ({:?}): {}", self.line, self.text, self.reason)
        }
    }
}

impl std::error::Error for VerifyFailure {}

/// Everything a trace states, recovered from its text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Extracted {
    pub operands: Option<(BigUint, BigUint)>,
    pub answer: Option<BigInt>,
    pub assertions: Vec<Assertion>,
}

static HEADER: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^What is (\d+) × (\d+)\?$").unwrap());
static ANSWER: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^Answer: (-?\d+)$").unwrap());
static DECOMPOSE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^Let me decompose (\d+) into (\d+) \+ (\d+)\.$").unwrap());
static CLOSE_TO: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^(\d+) is close to (\d+) \(difference: ([+-]\d+)\)\.$").unwrap());
static STEP_MULTIPLY: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^Step \d+: Multiply (\d+) by (\S+) digit (\d):$").unwrap());
static PARTIAL: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^(\w+(?: \d+)?) partial product: (\d+)(?: \(shifted by (\d+) = (\d+)\))?\.$").unwrap()
});

struct Column {
    top: String,
    digit: u32,
    place: usize,
}

#[derive(Default)]
struct State {
    operands: Option<(BigUint, BigUint)>,
    answer: Option<BigInt>,
    column: Option<Column>,
    current: Option<String>,
    carry: Option<String>,
    out: Vec<Assertion>,
}

impl State {
    fn push(&mut self, line: usize, lhs: impl Into<String>, rhs: impl Into<String>) {
        self.out.push(Assertion { line, lhs: lhs.into(), rhs: rhs.into() });
    }
}

/// The trailing run of a clause made only of expression characters.
fn expression_suffix(clause: &str) -> &str {
    let is_expr = |c: char| c.is_ascii_digit() || " +-−×*/%²()=".contains(c);
    match clause.char_indices().rev().find(|&(_, c)| !is_expr(c)) {
        Some((i, c)) => &clause[i + c.len_utf8()..],
        None => clause,
    }
}

/// Splits `e1 = e2 = ...` into sides; `None` unless every side is non-empty.
fn equation_sides(clause: &str) -> Option<Vec<&str>> {
    let expr = expression_suffix(clause.trim().trim_end_matches('.'));
    let sides: Vec<&str> = expr.split('=').map(str::trim).collect();
    if sides.len() < 2 || sides.iter().any(|s| s.is_empty()) {
        return None;
    }
    Some(sides)
}

fn unparseable(n: usize, text: &str, why: &str) -> VerifyFailure {
    VerifyFailure { line: n, text: text.to_string(), reason: format!("unparseable: {why}") }
}

/// Clauses of one line, handling column-method bookkeeping (`write`,
/// `carry`, `plus carry`).
fn equation_line(st: &mut State, n: usize, raw: &str, line: &str) -> Result<(), VerifyFailure> {
    let body = line.trim_end_matches('.');
    let mut wrote = None;
    let mut carried = false;
    for clause in body.split(", ").flat_map(|c| c.split(" and ")) {
        if let Some(v) = clause.strip_prefix("plus carry = ") {
            let cur = st.current.clone().ok_or_else(|| unparseable(n, raw, "carry with no running value"))?;
            let c = st.carry.take().ok_or_else(|| unparseable(n, raw, "no pending carry"))?;
            st.push(n, format!("{cur} + {c}"), v);
            st.current = Some(v.to_string());
        } else if let Some(w) = clause.strip_prefix("write ") {
            let cur = st.current.clone().ok_or_else(|| unparseable(n, raw, "write with no running value"))?;
            st.push(n, format!("{cur} % 10"), w);
            wrote = Some((cur, w.to_string()));
        } else if let Some(c) = clause.strip_prefix("carry ") {
            let (cur, w) = wrote.clone().ok_or_else(|| unparseable(n, raw, "carry before write"))?;
            st.push(n, format!("({cur} - {w}) / 10"), c);
            st.carry = Some(c.to_string());
            carried = true;
        } else {
            let sides = equation_sides(clause).ok_or_else(|| unparseable(n, raw, "expected an equation"))?;
            for pair in sides.windows(2) {
                st.push(n, pair[0], pair[1]);
            }
            st.current = Some(sides[sides.len() - 1].to_string());
        }
    }
    if let Some((cur, w)) = wrote {
        if !carried {
            st.push(n, format!("({cur} - {w}) / 10"), "0");
            st.carry = None;
        }
    }
    Ok(())
}

/// Recover operands, the stated answer, and every arithmetic claim.
pub fn extract_assertions(lines: &[String]) -> Result<Extracted, VerifyFailure> {
    let mut st = State::default();
    for (i, raw) in lines.iter().enumerate() {
        let n = i + 1;
        let line = raw.trim();
        if let Some(c) = HEADER.captures(line) {
            st.operands = Some((c[1].parse().unwrap(), c[2].parse().unwrap()));
        } else if let Some(c) = ANSWER.captures(line) {
            let (a, b) = st.operands.clone().ok_or_else(|| unparseable(n, raw, "answer before question"))?;
            st.answer = Some(c[1].parse().unwrap());
            st.push(n, format!("{a} × {b}"), &c[1]);
        } else if let Some(c) = DECOMPOSE.captures(line) {
            st.push(n, format!("{} + {}", &c[2], &c[3]), &c[1]);
        } else if let Some(c) = CLOSE_TO.captures(line) {
            st.push(n, format!("{} - {}", &c[1], &c[2]), &c[3]);
        } else if let Some(c) = STEP_MULTIPLY.captures(line) {
            let place = place_index(&c[2]).ok_or_else(|| unparseable(n, raw, "unknown place name"))?;
            let (a, b) = st.operands.clone().ok_or_else(|| unparseable(n, raw, "step before question"))?;
            let top: BigUint = c[1].parse().unwrap();
            let mult = if top == a {
                b
            } else if top == b {
                a
            } else {
                return Err(VerifyFailure { line: n, text: raw.clone(), reason: format!("{top} is not an operand") });
            };
            let lo = num_traits::pow(BigUint::from(10u32), place);
            let hi = &lo * 10u32;
            st.push(n, format!("{mult} % {hi} - {mult} % {lo}"), format!("{} × {lo}", &c[3]));
            st.column = Some(Column { top: c[1].to_string(), digit: c[3].parse().unwrap(), place });
            st.carry = None;
            st.current = None;
        } else if let Some(c) = PARTIAL.captures(line) {
            let col = st.column.as_ref().ok_or_else(|| unparseable(n, raw, "partial product outside a step"))?;
            let ord = ordinal_index(&c[1]).ok_or_else(|| unparseable(n, raw, "unknown ordinal"))?;
            if ord != col.place {
                return Err(VerifyFailure {
                    line: n,
                    text: raw.clone(),
                    reason: format!("partial product {} in step for place {}", ord + 1, col.place),
                });
            }
            let (top, digit, place) = (col.top.clone(), col.digit, col.place);
            st.push(n, format!("{top} × {digit}"), &c[2]);
            match (c.get(3), c.get(4)) {
                (Some(s), Some(q)) => {
                    st.push(n, s.as_str(), num_traits::pow(BigUint::from(10u32), place).to_string());
                    st.push(n, format!("{} × {}", &c[2], s.as_str()), q.as_str());
                }
                _ if place > 0 => return Err(unparseable(n, raw, "shifted partial product without its shift")),
                _ => {}
            }
        } else if line.contains('=') {
            equation_line(&mut st, n, raw, line)?;
        }
    }
    Ok(Extracted { operands: st.operands, answer: st.answer, assertions: st.out })
}

fn check(a: &Assertion, lines: &[String]) -> Result<(), VerifyFailure> {
    let text = lines.get(a.line.wrapping_sub(1)).cloned().unwrap_or_default();
    let l = eval(&a.lhs).map_err(|e| VerifyFailure { line: a.line, text: text.clone(), reason: e })?;
    let r = eval(&a.rhs).map_err(|e| VerifyFailure { line: a.line, text: text.clone(), reason: e })?;
    if l != r {
        return Err(VerifyFailure {
            line: a.line,
            text,
            reason: format!("{} = {l}, but the line states {} = {r}", a.lhs, a.rhs),
        });
    }
    Ok(())
}

pub(crate) fn check_all(assertions: &[Assertion], lines: &[String]) -> Result<(), VerifyFailure> {
    assertions.iter().try_for_each(|a| check(a, lines))
}

/// Checks every stated equality against exact arithmetic, and the final
/// answer against the exact product of the question's operands.
pub fn verify_trace(t: &ReasoningTrace) -> Result<(), VerifyFailure> {
    let whole = |reason: String| VerifyFailure { line: 0, text: String::new(), reason };
    let ex = extract_assertions(&t.lines)?;
    let (a, b) = ex.operands.ok_or_else(|| whole("trace has no question line".into()))?;
    let stated = ex.answer.ok_or_else(|| whole("trace has no answer line".into()))?;
    check_all(&ex.assertions, &t.lines)?;
    let exact = BigInt::from(a * b);
    if BigInt::from(t.claimed_answer.clone()) != exact {
        return Err(whole(format!("claimed answer {} differs from the exact product {exact}", t.claimed_answer)));
    }
    if stated != exact {
        return Err(whole(format!("answer line {stated} differs from the exact product {exact}")));
    }
    Ok(())
}
