use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::Operand;
use crate::error::{Error, Result};
use crate::rng::SeededRng;

/// Digit template families sampled by the benchmark in standard mode.
pub const STANDARD_TEMPLATES: [&str; 7] = ["V", "VV", "VVV", "V0", "V00", "VV0", "V0V"];

/// Longest operand accepted in standard mode.
pub const MAX_STANDARD_DIGITS: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Slot {
    /// Random digit 1-9.
    Nonzero,
    /// Literal 0.
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateMode {
    /// Only the seven published families.
    #[default]
    Standard,
    /// Any well-formed pattern, no length cap.
    Extended,
}

/// A pattern over `{V, 0}` whose first symbol is `V`.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct DigitTemplate {
    slots: Vec<Slot>,
}

impl DigitTemplate {
    pub fn parse_with_mode(pattern: &str, mode: TemplateMode) -> Result<Self> {
        let slots = pattern
            .chars()
            .enumerate()
            .map(|(i, c)| match c {
                'V' | 'v' => Ok(Slot::Nonzero),
                '0' => Ok(Slot::Zero),
                other => {
                    Err(Error::invalid(format!("template {pattern:?}: symbol {other:?} at position {i} is not V or 0")))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        if slots.is_empty() {
            return Err(Error::invalid("template pattern is empty"));
        }
        if slots[0] != Slot::Nonzero {
            return Err(Error::invalid(format!("template {pattern:?} must start with V")));
        }
        let t = Self { slots };
        if mode == TemplateMode::Standard {
            let canonical = t.to_string();
            if !STANDARD_TEMPLATES.contains(&canonical.as_str()) {
                return Err(Error::invalid(format!(
                    "template {pattern:?} is not one of the standard families {STANDARD_TEMPLATES:?}; use extended mode"
                )));
            }
            if t.slots.len() > MAX_STANDARD_DIGITS {
                return Err(Error::invalid("standard-mode operands are capped at 32 digits"));
            }
        }
        Ok(t)
    }

    /// Dense template of `n` random non-zero digits.
    pub fn dense(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("template pattern is empty"));
        }
        Ok(Self { slots: vec![Slot::Nonzero; n] })
    }

    pub fn standard_family() -> Vec<DigitTemplate> {
        STANDARD_TEMPLATES
            .iter()
            .map(|p| Self::parse_with_mode(p, TemplateMode::Standard).expect("standard template"))
            .collect()
    }

    pub fn slots(&self) -> &[Slot] {
        &self.slots
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }
}

impl FromStr for DigitTemplate {
    type Err = Error;

    /// Parses in extended mode; use [`DigitTemplate::parse_with_mode`] to
    /// enforce the standard family.
    fn from_str(s: &str) -> Result<Self> {
        Self::parse_with_mode(s, TemplateMode::Extended)
    }
}

impl fmt::Display for DigitTemplate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.slots {
            f.write_str(match s {
                Slot::Nonzero => "V",
                Slot::Zero => "0",
            })?;
        }
        Ok(())
    }
}

impl fmt::Debug for DigitTemplate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "DigitTemplate({self})")
    }
}

impl Serialize for DigitTemplate {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for DigitTemplate {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Fill a template: each `V` gets a uniform digit in 1..=9, each `0` stays 0.
pub fn sample_operand(template: &DigitTemplate, rng: &mut SeededRng) -> Operand {
    let digits: Vec<u8> = template
        .slots
        .iter()
        .map(|s| match s {
            Slot::Nonzero => 1 + rng.below(9) as u8,
            Slot::Zero => 0,
        })
        .collect();
    Operand::from_digits(&digits).expect("template starts with a non-zero digit")
}

/// Uniform operand with exactly `n_digits` digits (zeros allowed after the
/// leading digit).
pub fn sample_with_length(n_digits: usize, rng: &mut SeededRng) -> Operand {
    assert!(n_digits >= 1);
    let mut digits = Vec::with_capacity(n_digits);
    digits.push(1 + rng.below(9) as u8);
    for _ in 1..n_digits {
        digits.push(rng.below(10) as u8);
    }
    Operand::from_digits(&digits).expect("leading digit is non-zero")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(p: &str) -> DigitTemplate {
        DigitTemplate::parse_with_mode(p, TemplateMode::Standard).unwrap()
    }

    #[test]
    fn single_v_in_one_to_nine() {
        let mut rng = SeededRng::new(11);
        for _ in 0..200 {
            let v = sample_operand(&t("V"), &mut rng).to_u128().unwrap();
            assert!((1..=9).contains(&v));
        }
    }

    #[test]
    fn v00_is_multiple_of_hundred() {
        let mut rng = SeededRng::new(12);
        for _ in 0..200 {
            let v = sample_operand(&t("V00"), &mut rng).to_u128().unwrap();
            assert!(v.is_multiple_of(100) && (100..=900).contains(&v));
        }
    }

    #[test]
    fn v0v_has_zero_middle() {
        let mut rng = SeededRng::new(13);
        for _ in 0..200 {
            let op = sample_operand(&t("V0V"), &mut rng);
            let d = op.digits();
            assert_eq!(d.len(), 3);
            assert!(d[0] != 0 && d[1] == 0 && d[2] != 0);
        }
    }

    #[test]
    fn invalid_patterns_rejected() {
        assert!(DigitTemplate::parse_with_mode("0V", TemplateMode::Extended).is_err());
        assert!(DigitTemplate::parse_with_mode("", TemplateMode::Extended).is_err());
        assert!(DigitTemplate::parse_with_mode("VX", TemplateMode::Extended).is_err());
        let err = DigitTemplate::parse_with_mode("VVVV", TemplateMode::Standard).unwrap_err();
        assert!(err.to_string().contains("extended"));
        assert!(DigitTemplate::parse_with_mode("VVVV0V", TemplateMode::Extended).is_ok());
    }

    #[test]
    fn deterministic_given_seed() {
        let tpl: DigitTemplate = "VVVVVVVV".parse().unwrap();
        let a: Vec<_> = {
            let mut r = SeededRng::new(99);
            (0..20).map(|_| sample_operand(&tpl, &mut r)).collect()
        };
        let b: Vec<_> = {
            let mut r = SeededRng::new(99);
            (0..20).map(|_| sample_operand(&tpl, &mut r)).collect()
        };
        assert_eq!(a, b);
    }
}
