//! Integer expression evaluator used by the trace verifier.
//!
//! Grammar: `+ -` < `× * / %` < unary `+ -` < postfix `²` < literals and
//! parentheses. Division is exact-or-error; `%` is the Euclidean remainder.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{Signed, Zero};

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Num(BigInt),
    Op(char),
    LParen,
    RParen,
    Square,
}

fn lex(s: &str) -> Result<Vec<Tok>, String> {
    let mut out = Vec::new();
    let mut chars = s.chars().peekable();
    while let Some(&c) = chars.peek() {
        match c {
            ' ' | '\t' => {
                chars.next();
            }
            '0'..='9' => {
                let mut lit = String::new();
                while let Some(&d) = chars.peek() {
                    if d.is_ascii_digit() {
                        lit.push(d);
                        chars.next();
                    } else {
                        break;
                    }
                }
                out.push(Tok::Num(lit.parse().expect("digits")));
            }
            '+' | '-' | '×' | '*' | '/' | '%' => {
                out.push(Tok::Op(if c == '*' { '×' } else { c }));
                chars.next();
            }
            '−' => {
                out.push(Tok::Op('-'));
                chars.next();
            }
            '(' => {
                out.push(Tok::LParen);
                chars.next();
            }
            ')' => {
                out.push(Tok::RParen);
                chars.next();
            }
            '²' => {
                out.push(Tok::Square);
                chars.next();
            }
            other => return Err(format!("unexpected character {other:?}")),
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<Tok>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos)
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn sum(&mut self) -> Result<BigInt, String> {
        let mut v = self.product()?;
        while let Some(Tok::Op(op @ ('+' | '-'))) = self.peek().cloned() {
            self.pos += 1;
            let r = self.product()?;
            if op == '+' {
                v += r;
            } else {
                v -= r;
            }
        }
        Ok(v)
    }

    fn product(&mut self) -> Result<BigInt, String> {
        let mut v = self.unary()?;
        while let Some(Tok::Op(op @ ('×' | '/' | '%'))) = self.peek().cloned() {
            self.pos += 1;
            let r = self.unary()?;
            v = match op {
                '×' => v * r,
                _ if r.is_zero() => return Err("division by zero".into()),
                '/' => {
                    let (q, rem) = v.div_rem(&r);
                    if !rem.is_zero() {
                        return Err(format!("{v} / {r} is not exact"));
                    }
                    q
                }
                _ => v.mod_floor(&r.abs()),
            };
        }
        Ok(v)
    }

    fn unary(&mut self) -> Result<BigInt, String> {
        match self.peek() {
            Some(Tok::Op('-')) => {
                self.pos += 1;
                Ok(-self.unary()?)
            }
            Some(Tok::Op('+')) => {
                self.pos += 1;
                self.unary()
            }
            _ => self.postfix(),
        }
    }

    fn postfix(&mut self) -> Result<BigInt, String> {
        let mut v = self.atom()?;
        while let Some(Tok::Square) = self.peek() {
            self.pos += 1;
            v = &v * &v;
        }
        Ok(v)
    }

    fn atom(&mut self) -> Result<BigInt, String> {
        match self.next() {
            Some(Tok::Num(n)) => Ok(n),
            Some(Tok::LParen) => {
                let v = self.sum()?;
                match self.next() {
                    Some(Tok::RParen) => Ok(v),
                    _ => Err("unbalanced parenthesis".into()),
                }
            }
            Some(t) => Err(format!("unexpected token {t:?}")),
            None => Err("unexpected end of expression".into()),
        }
    }
}

pub fn eval(expr: &str) -> Result<BigInt, String> {
    let toks = lex(expr)?;
    if toks.is_empty() {
        return Err("empty expression".into());
    }
    let mut p = Parser { toks, pos: 0 };
    let v = p.sum()?;
    if p.pos != p.toks.len() {
        return Err(format!("trailing input in {expr:?}"));
    }
    Ok(v)
}

/// Euclidean floor division, for carry checks.
pub fn floor_div(a: &BigInt, b: &BigInt) -> BigInt {
    a.div_floor(b)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e(s: &str) -> i64 {
        eval(s).unwrap().try_into().unwrap()
    }

    #[test]
    fn precedence_and_signs() {
        assert_eq!(e("160000 + (-400) + (-400) + (+1)"), 159201);
        assert_eq!(e("400 × -1"), -400);
        assert_eq!(e("-1 × -1"), 1);
        assert_eq!(e("40 × 36 + 7 × 36"), 1692);
        assert_eq!(e("(50 + 1) × (50 - 1)"), 2499);
        assert_eq!(e("50² - 1²"), 2499);
        assert_eq!(e("72 % 10"), 2);
        assert_eq!(e("72 / 8"), 9);
        assert_eq!(e("2 * 3"), 6);
    }

    #[test]
    fn rejects_garbage() {
        for bad in ["", "1 +", "(1", "1 ) 2", "abc", "7 / 2", "1 / 0"] {
            assert!(eval(bad).is_err(), "{bad}");
        }
    }
}
