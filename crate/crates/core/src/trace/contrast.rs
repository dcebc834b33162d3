use num_bigint::BigInt;
use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};

use super::verify::{check_all, VerifyFailure};
use super::{dd_parts, ot_rows, rc_expansion, rc_total_expr, symmetric_base, Assertion};
use crate::arith::Problem;
use crate::cost::HeuristicKind;
use crate::error::{Error, Result};
use crate::rng::SeededRng;

/// The single value edit separating the two steps.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Corruption {
    /// Index of the edited value among the step's numeric slots.
    pub slot: usize,
    pub original: String,
    pub edited: String,
    pub delta: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContrastivePair {
    pub problem_id: String,
    pub heuristic: HeuristicKind,
    pub correct_step: String,
    pub incorrect_step: String,
    pub corruption: Corruption,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Style {
    Plain,
    /// `(+1)`, `(-400)`
    SignedParen,
}

enum Seg {
    Lit(String),
    Val(BigInt, Style),
}

fn render(segs: &[Seg], edit: Option<(usize, &BigInt)>) -> String {
    let mut out = String::new();
    let mut slot = 0;
    for s in segs {
        match s {
            Seg::Lit(t) => out.push_str(t),
            Seg::Val(v, style) => {
                let v = match edit {
                    Some((i, new)) if i == slot => new,
                    _ => v,
                };
                match style {
                    Style::Plain => out.push_str(&v.to_string()),
                    Style::SignedParen if v.is_negative() => out.push_str(&format!("({v})")),
                    Style::SignedParen => out.push_str(&format!("(+{v})")),
                }
                slot += 1;
            }
        }
    }
    out
}

fn lit(s: impl Into<String>) -> Seg {
    Seg::Lit(s.into())
}

fn val(v: impl Into<BigInt>) -> Seg {
    Seg::Val(v.into(), Style::Plain)
}

/// The canonical step for `h`, with only intermediate values as slots.
fn step_segments(p: &Problem, h: HeuristicKind) -> Result<Vec<Seg>> {
    let product = BigInt::from(p.product.clone());
    Ok(match h {
        HeuristicKind::Dd => match dd_parts(p) {
            Some((hi, lo, _, y)) => {
                let y = y.value();
                vec![lit(format!("{hi} × {y} + {lo} × {y} = ")), val(&hi * y), lit(" + "), val(&lo * y)]
            }
            None => vec![lit(format!("{} × {} = ", p.a, p.b)), val(product)],
        },
        HeuristicKind::Rc => match symmetric_base(&p.a, &p.b) {
            Some((base, k)) => {
                let k = k.abs();
                vec![val(base * base), lit(" - "), val(&k * &k), lit(" = "), val(product)]
            }
            None => {
                let ex = rc_expansion(&p.a, &p.b);
                if ex.terms.len() == 1 {
                    vec![lit(format!("{} × {} = ", ex.base_a, ex.base_b)), val(ex.terms[0].clone())]
                } else {
                    let mut segs = vec![lit("Total: "), val(ex.terms[0].clone())];
                    for t in &ex.terms[1..] {
                        segs.push(lit(" + "));
                        segs.push(Seg::Val(t.clone(), Style::SignedParen));
                    }
                    debug_assert_eq!(render(&segs, None), format!("Total: {}", rc_total_expr(&ex.terms)));
                    segs.push(lit(" = "));
                    segs.push(val(product));
                    segs
                }
            }
        },
        HeuristicKind::Ot => {
            let rows = ot_rows(p);
            if rows.len() == 1 {
                let (top, mult) = super::ot_layout(p);
                vec![lit(format!("{top} × {mult} = ")), val(product)]
            } else {
                let mut segs = Vec::new();
                let mut scale = BigInt::from(1u32);
                for (k, r) in rows.iter().enumerate() {
                    if k > 0 {
                        segs.push(lit(" + "));
                    }
                    segs.push(val(BigInt::from(r.clone()) * &scale));
                    scale *= 10;
                }
                segs.push(lit(" = "));
                segs.push(val(product));
                segs
            }
        }
        HeuristicKind::Style => {
            return Err(Error::invalid("matched step pairs need a scored heuristic (OT, DD or RC)"))
        }
    })
}

fn digit_count(v: &BigInt) -> usize {
    v.magnitude().to_string().len()
}

/// Edits of `v` by ±5, ±10 or ±10^j that keep sign and digit count.
fn deltas_for(v: &BigInt) -> Vec<BigInt> {
    let mag = BigInt::from(v.magnitude().clone());
    let n = digit_count(v);
    let mut steps = vec![BigInt::from(5), BigInt::from(10)];
    let mut pow = BigInt::from(100);
    for _ in 2..n {
        steps.push(pow.clone());
        pow *= 10;
    }
    let mut out = Vec::new();
    for s in steps {
        for d in [s.clone(), -s] {
            let m = &mag + &d;
            if m.is_negative() || m.is_zero() && !mag.is_zero() {
                continue;
            }
            if digit_count(&m) == n && m != mag {
                out.push(d);
            }
        }
    }
    out
}

/// Builds a correct step and a single-value corruption of it.
pub fn gen_contrastive_pair(p: &Problem, h: HeuristicKind, rng: &mut SeededRng) -> Result<ContrastivePair> {
    let segs = step_segments(p, h)?;
    let values: Vec<&BigInt> = segs
        .iter()
        .filter_map(|s| match s {
            Seg::Val(v, _) => Some(v),
            Seg::Lit(_) => None,
        })
        .collect();
    let editable: Vec<(usize, Vec<BigInt>)> =
        values.iter().enumerate().map(|(i, v)| (i, deltas_for(v))).filter(|(_, d)| !d.is_empty()).collect();
    if editable.is_empty() {
        return Err(Error::Internal(format!("no digit-preserving edit for {}", p.canonical_key())));
    }
    let (slot, deltas) = rng.pick(&editable);
    let delta = rng.pick(deltas).clone();
    let original = values[*slot].clone();
    // the edit moves the magnitude, never the sign
    let edited = if original.is_negative() { &original - &delta } else { &original + &delta };
    let correct_step = render(&segs, None);
    let incorrect_step = render(&segs, Some((*slot, &edited)));
    Ok(ContrastivePair {
        problem_id: p.id.clone(),
        heuristic: h,
        correct_step,
        incorrect_step,
        corruption: Corruption {
            slot: *slot,
            original: original.to_string(),
            edited: edited.to_string(),
            delta: if delta.is_negative() { delta.to_string() } else { format!("+{delta}") },
        },
    })
}

/// Checks a standalone step such as `40 × 36 + 7 × 36 = 1440 + 252`.
pub fn verify_step(step: &str) -> std::result::Result<(), VerifyFailure> {
    let lines = vec![step.to_string()];
    let ex = super::extract_assertions(&lines)?;
    let eqs: Vec<Assertion> = ex.assertions;
    if eqs.is_empty() {
        return Err(VerifyFailure { line: 1, text: step.into(), reason: "step states no equality".into() });
    }
    check_all(&eqs, &lines)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::tests::prob;

    #[test]
    fn table_pair_shape() {
        let mut rng = SeededRng::new(3);
        let pair = gen_contrastive_pair(&prob(47, 36), HeuristicKind::Dd, &mut rng).unwrap();
        assert_eq!(pair.correct_step, "40 × 36 + 7 × 36 = 1440 + 252");
        assert!(pair.incorrect_step.starts_with("40 × 36 + 7 × 36 = "));
        assert!(verify_step(&pair.correct_step).is_ok());
        assert!(verify_step(&pair.incorrect_step).is_err());
        assert!(verify_step("40 × 36 + 7 × 36 = 1440 + 262").is_err());
    }

    #[test]
    fn rc_pair() {
        let mut rng = SeededRng::new(0);
        for _ in 0..20 {
            let pair = gen_contrastive_pair(&prob(49, 51), HeuristicKind::Rc, &mut rng).unwrap();
            assert_eq!(pair.correct_step, "2500 - 1 = 2499");
            assert!(verify_step(&pair.incorrect_step).is_err(), "{}", pair.incorrect_step);
        }
        let pair = gen_contrastive_pair(&prob(399, 399), HeuristicKind::Rc, &mut rng).unwrap();
        assert_eq!(pair.correct_step, "Total: 160000 + (-400) + (-400) + (+1) = 159201");
        assert!(verify_step(&pair.incorrect_step).is_err());
    }

    #[test]
    fn ot_pair() {
        let mut rng = SeededRng::new(1);
        let pair = gen_contrastive_pair(&prob(79, 78), HeuristicKind::Ot, &mut rng).unwrap();
        assert_eq!(pair.correct_step, "632 + 5530 = 6162");
        let pair = gen_contrastive_pair(&prob(79, 8), HeuristicKind::Ot, &mut rng).unwrap();
        assert_eq!(pair.correct_step, "79 × 8 = 632");
        assert!(gen_contrastive_pair(&prob(7, 8), HeuristicKind::Style, &mut rng).is_err());
    }

    #[test]
    fn deltas_keep_digit_count() {
        let d = |v: i64| deltas_for(&BigInt::from(v)).iter().map(|x| x.to_string()).collect::<Vec<_>>();
        assert_eq!(d(252), ["5", "-5", "10", "-10", "100", "-100"]);
        assert_eq!(d(1), ["5"]);
        assert_eq!(d(-400), ["5", "-5", "10", "-10", "100", "-100"]);
        assert!(d(0).contains(&"5".to_string()));
        assert_eq!(d(99), ["-5", "-10"]);
    }
}
