use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::cost::HeuristicKind;
use crate::error::Error;

/// Operand pattern an item was drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum DesignFamily {
    Near50Sym,
    Near100Sym,
    NearBaseSym(u64),
    NearBaseMixed(u64),
    ZeroFactor,
    HundredFactor,
    QuarterHundred,
    CleanTens,
    CarryHeavy,
    Generic,
}

impl DesignFamily {
    /// Symmetric near-base family for base `b`.
    pub fn symmetric(b: u64) -> Self {
        match b {
            50 => Self::Near50Sym,
            100 => Self::Near100Sym,
            _ => Self::NearBaseSym(b),
        }
    }

    /// The heuristic a family is designed to favour.
    pub fn intended(&self) -> HeuristicKind {
        match self {
            Self::Near50Sym | Self::Near100Sym | Self::NearBaseSym(_) | Self::NearBaseMixed(_) => HeuristicKind::Rc,
            Self::ZeroFactor | Self::HundredFactor | Self::QuarterHundred | Self::CleanTens => HeuristicKind::Dd,
            Self::CarryHeavy | Self::Generic => HeuristicKind::Ot,
        }
    }
}

impl fmt::Display for DesignFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Near50Sym => f.write_str("near_50_sym"),
            Self::Near100Sym => f.write_str("near_100_sym"),
            Self::NearBaseSym(b) => write!(f, "near_base_sym({b})"),
            Self::NearBaseMixed(b) => write!(f, "near_base_mixed({b})"),
            Self::ZeroFactor => f.write_str("zero_factor"),
            Self::HundredFactor => f.write_str("hundred_factor"),
            Self::QuarterHundred => f.write_str("quarter_hundred"),
            Self::CleanTens => f.write_str("clean_tens"),
            Self::CarryHeavy => f.write_str("carry_heavy"),
            Self::Generic => f.write_str("generic"),
        }
    }
}

impl FromStr for DesignFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        let base = |inner: &str| -> Result<u64, Error> {
            inner
                .strip_suffix(')')
                .and_then(|n| n.parse().ok())
                .ok_or_else(|| Error::invalid(format!("bad design family {s:?}")))
        };
        Ok(match s {
            "near_50_sym" => Self::Near50Sym,
            "near_100_sym" => Self::Near100Sym,
            "zero_factor" => Self::ZeroFactor,
            "hundred_factor" => Self::HundredFactor,
            "quarter_hundred" => Self::QuarterHundred,
            "clean_tens" => Self::CleanTens,
            "carry_heavy" => Self::CarryHeavy,
            "generic" => Self::Generic,
            _ => {
                if let Some(rest) = s.strip_prefix("near_base_sym(") {
                    Self::NearBaseSym(base(rest)?)
                } else if let Some(rest) = s.strip_prefix("near_base_mixed(") {
                    Self::NearBaseMixed(base(rest)?)
                } else {
                    return Err(Error::invalid(format!("unknown design family {s:?}")));
                }
            }
        })
    }
}

impl From<DesignFamily> for String {
    fn from(f: DesignFamily) -> String {
        f.to_string()
    }
}

impl TryFrom<String> for DesignFamily {
    type Error = Error;

    fn try_from(s: String) -> Result<Self, Error> {
        s.parse()
    }
}
