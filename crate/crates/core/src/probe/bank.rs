use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::ProbeClass;
use crate::error::{Error, Result};
use crate::hash::sha256_hex;

pub const BANK_VERSION: &str = "1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BankProfile {
    Balanced,
    StyleMismatch,
}

impl BankProfile {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Balanced => "balanced",
            Self::StyleMismatch => "style_mismatch",
        }
    }
}

impl fmt::Display for BankProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BankProfile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "balanced" => Ok(Self::Balanced),
            "style_mismatch" => Ok(Self::StyleMismatch),
            _ => Err(Error::invalid(format!("unknown bank profile {s:?}"))),
        }
    }
}

const NEUTRAL: &str = "Let me solve this multiplication problem step by step.";

const BALANCED_DD: [&str; 3] = [
    "Decomposition: split one factor into place-value parts, multiply each part, and add the results.",
    "Decomposition: break one factor into tens and ones, multiply each piece, then sum the partial products.",
    "Decomposition: write one factor as a sum of place values, multiply each term, and combine them.",
];

const BALANCED_RC: [&str; 3] = [
    "Round and adjust: use a nearby round base, then compensate for the difference.",
    "Round and adjust: move each factor to a close round number, multiply, then correct the offset.",
    "Round and adjust: multiply by an easy nearby base, then add or subtract the adjustment.",
];

const BALANCED_OT: [&str; 3] = [
    "Column method: start with the ones digits, multiply, and carry into the next column.",
    "Column method: multiply digit by digit from the right, writing each carry above the next column.",
    "Column method: work right to left through the digits, keeping track of every carry.",
];

const MISMATCH_DD: [&str; 3] = [
    "easiest is probably to chop one number up into its tens and ones and do those bits separately",
    "Let's break it apart! Hundreds, tens, units, each times the other number, then add it all up.",
    "I'd split it by place value and add the little products together afterwards, nothing fancy",
];

const MISMATCH_RC: [&str; 3] = [
    "hmm, that's close to a nice round number, so I'll use that and fix the difference after",
    "Trick: bump it to the nearest round number, multiply, then undo the bump.",
    "Rounding makes this quick; I'll round, multiply, and patch up the error at the end",
];

const MISMATCH_OT: [&str; 3] = [
    "ok so I'll just line the numbers up and do it the old school way, digit by digit with carries",
    "Gonna stack these and grind through each column, carrying as I go!",
    "Long multiplication time. Stack them, multiply every digit pair, carry, then add the rows.",
];

/// Forced-completion continuations per class. Frozen per version.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TemplateBank {
    pub profile: BankProfile,
    pub version: String,
    pub dd: Vec<String>,
    pub rc: Vec<String>,
    pub ot: Vec<String>,
    pub neutral: Vec<String>,
}

fn owned(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

impl TemplateBank {
    pub fn balanced() -> Self {
        Self {
            profile: BankProfile::Balanced,
            version: BANK_VERSION.into(),
            dd: owned(&BALANCED_DD),
            rc: owned(&BALANCED_RC),
            ot: owned(&BALANCED_OT),
            neutral: vec![NEUTRAL.into()],
        }
    }

    pub fn style_mismatch() -> Self {
        Self {
            profile: BankProfile::StyleMismatch,
            version: BANK_VERSION.into(),
            dd: owned(&MISMATCH_DD),
            rc: owned(&MISMATCH_RC),
            ot: owned(&MISMATCH_OT),
            neutral: vec![NEUTRAL.into()],
        }
    }

    pub fn for_profile(profile: BankProfile) -> Self {
        match profile {
            BankProfile::Balanced => Self::balanced(),
            BankProfile::StyleMismatch => Self::style_mismatch(),
        }
    }

    pub fn templates(&self, class: ProbeClass) -> &[String] {
        match class {
            ProbeClass::Dd => &self.dd,
            ProbeClass::Rc => &self.rc,
            ProbeClass::Ot => &self.ot,
            ProbeClass::Neutral => &self.neutral,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for class in ProbeClass::ALL {
            let t = self.templates(class);
            if t.is_empty() {
                return Err(Error::config(format!("template bank has no {class} templates")));
            }
            if t.iter().any(|s| s.trim().is_empty()) {
                return Err(Error::config(format!("template bank has an empty {class} template")));
            }
        }
        Ok(())
    }

    /// Hash of the canonical JSON form, recorded with every probe run.
    pub fn content_hash(&self) -> String {
        sha256_hex(serde_json::to_string(self).expect("bank serializes").as_bytes())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_banks_are_valid() {
        for b in [TemplateBank::balanced(), TemplateBank::style_mismatch()] {
            b.validate().unwrap();
            for c in [ProbeClass::Dd, ProbeClass::Rc, ProbeClass::Ot] {
                assert_eq!(b.templates(c).len(), 3);
            }
            assert_eq!(b.neutral, [NEUTRAL]);
        }
        assert_ne!(TemplateBank::balanced().content_hash(), TemplateBank::style_mismatch().content_hash());
        assert!(BALANCED_OT[0].starts_with("Column method: start with the ones digits"));
        let mut b = TemplateBank::balanced();
        b.rc.clear();
        assert!(b.validate().is_err());
        assert_eq!("style_mismatch".parse::<BankProfile>().unwrap(), BankProfile::StyleMismatch);
    }
}
