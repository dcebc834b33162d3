//! Forced-completion loss probes.
//!
//! Each class (three heuristics and a neutral preamble) is scored by the
//! mean per-token loss of its continuations under the problem context.
//! Lower loss means the continuation is more compatible with the model.

mod bank;
mod contrastive;
mod report;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::backend::{BackendError, ScoringBackend, ScoringContext, TokenLosses};
use crate::cost::HeuristicKind;
use crate::error::{Error, Result};
use crate::render::Representation;
use crate::scalar::{mean, sample_std, stable_sum, Scalar};

pub use bank::{BankProfile, TemplateBank, BANK_VERSION};
pub use contrastive::{contrastive_probe, ContrastiveResult};
pub use report::{
    aggregate_contrastive, aggregate_probes, style_shift_ablation, AblationReport, AblationRow, ContrastiveAggregate,
    ContrastiveRow, ProbeAggregate, ProbeAggregateRow, ValueSe,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ProbeClass {
    #[serde(rename = "DD")]
    Dd,
    #[serde(rename = "RC")]
    Rc,
    #[serde(rename = "OT")]
    Ot,
    #[serde(rename = "neutral")]
    Neutral,
}

impl ProbeClass {
    /// Order of support vectors and loss arrays.
    pub const ALL: [ProbeClass; 4] = [Self::Dd, Self::Rc, Self::Ot, Self::Neutral];
    pub const HEURISTICS: [ProbeClass; 3] = [Self::Dd, Self::Rc, Self::Ot];
    /// Winner on exactly equal loss: earlier entries win.
    pub const TIE_PRIORITY: [ProbeClass; 4] = [Self::Neutral, Self::Dd, Self::Rc, Self::Ot];

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Dd => "DD",
            Self::Rc => "RC",
            Self::Ot => "OT",
            Self::Neutral => "neutral",
        }
    }

    pub fn index(&self) -> usize {
        match self {
            Self::Dd => 0,
            Self::Rc => 1,
            Self::Ot => 2,
            Self::Neutral => 3,
        }
    }

    pub fn heuristic(&self) -> Option<HeuristicKind> {
        match self {
            Self::Dd => Some(HeuristicKind::Dd),
            Self::Rc => Some(HeuristicKind::Rc),
            Self::Ot => Some(HeuristicKind::Ot),
            Self::Neutral => None,
        }
    }

    pub fn from_heuristic(h: HeuristicKind) -> Option<Self> {
        match h {
            HeuristicKind::Dd => Some(Self::Dd),
            HeuristicKind::Rc => Some(Self::Rc),
            HeuristicKind::Ot => Some(Self::Ot),
            HeuristicKind::Style => None,
        }
    }
}

impl fmt::Display for ProbeClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One value per class.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ByClass<T> {
    #[serde(rename = "DD")]
    pub dd: T,
    #[serde(rename = "RC")]
    pub rc: T,
    #[serde(rename = "OT")]
    pub ot: T,
    pub neutral: T,
}

impl<T> ByClass<T> {
    pub fn from_fn(mut f: impl FnMut(ProbeClass) -> T) -> Self {
        Self { dd: f(ProbeClass::Dd), rc: f(ProbeClass::Rc), ot: f(ProbeClass::Ot), neutral: f(ProbeClass::Neutral) }
    }

    pub fn get(&self, c: ProbeClass) -> &T {
        match c {
            ProbeClass::Dd => &self.dd,
            ProbeClass::Rc => &self.rc,
            ProbeClass::Ot => &self.ot,
            ProbeClass::Neutral => &self.neutral,
        }
    }
}

impl<T: Copy> ByClass<T> {
    pub fn to_array(&self) -> [T; 4] {
        [self.dd, self.rc, self.ot, self.neutral]
    }
}

/// Mean per-token loss of one continuation.
pub fn length_normalized_loss<F: Scalar>(losses: &TokenLosses) -> Result<F> {
    if losses.is_empty() {
        return Err(Error::invalid("length-normalized loss needs at least one token"));
    }
    let total = stable_sum(losses.values.iter().map(|&v| F::of(v)));
    Ok(total / F::of_usize(losses.len()))
}

/// Normalized `exp(-loss)` mass over the four classes, in
/// [`ProbeClass::ALL`] order.
pub fn support<F: Scalar>(losses: [F; 4]) -> [F; 4] {
    let lo = losses.iter().copied().fold(F::infinity(), F::min);
    let w = losses.map(|l| (lo - l).exp());
    let z = stable_sum(w.iter().copied());
    w.map(|x| x / z)
}

/// Argmin over the four classes with the fixed tie priority. The flag is
/// set when more than one class attains the minimum.
pub fn winner<F: Scalar>(losses: [F; 4]) -> (ProbeClass, bool) {
    let lo = losses.iter().copied().fold(F::infinity(), F::min);
    let tied: Vec<ProbeClass> = ProbeClass::TIE_PRIORITY.into_iter().filter(|c| losses[c.index()] == lo).collect();
    if tied.len() > 1 {
        log::debug!("probe tie between {tied:?} at loss {lo}");
    }
    (tied[0], tied.len() > 1)
}

/// `-T (l_h - l_0)`: the log-likelihood ratio of two continuations of `T`
/// tokens each. For unequal lengths this is only a naturalness score.
pub fn llr<F: Scalar>(l_h: F, l_0: F, tokens: usize) -> F {
    -F::of_usize(tokens) * (l_h - l_0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeResult<F> {
    pub problem_id: String,
    pub representation: Representation,
    pub profile: BankProfile,
    /// Class loss: mean over the class's templates of each template's
    /// length-normalized loss.
    pub loss: ByClass<F>,
    /// `loss(h) - loss(neutral)`; zero for neutral.
    pub delta: ByClass<F>,
    pub winner: ProbeClass,
    pub tie: bool,
    pub support: ByClass<F>,
    /// Sample standard deviation of the class's template losses.
    pub within_problem_std: ByClass<F>,
    pub template_losses: ByClass<Vec<F>>,
    pub token_counts: ByClass<Vec<usize>>,
    /// Every template has the same token count, so `llr` is exact.
    pub length_matched: bool,
}

impl<F: Scalar> ProbeResult<F> {
    /// Mean of the three heuristic within-problem standard deviations.
    pub fn mean_heuristic_std(&self) -> F {
        let s = [self.within_problem_std.dd, self.within_problem_std.rc, self.within_problem_std.ot];
        mean(&s).expect("three values")
    }

    /// Support of the given heuristic.
    pub fn support_of(&self, h: HeuristicKind) -> Option<F> {
        ProbeClass::from_heuristic(h).map(|c| *self.support.get(c))
    }
}

fn require_scoring(backend: &dyn ScoringBackend) -> Result<()> {
    if !backend.supports_scoring() {
        return Err(Error::Backend(BackendError::Capability {
            backend: backend.name().to_string(),
            reason: "forced-completion probes need per-token continuation losses".into(),
        }));
    }
    Ok(())
}

/// Scores every template of `bank` under `ctx`.
pub fn probe_problem<F: Scalar>(
    ctx: &ScoringContext,
    bank: &TemplateBank,
    backend: &dyn ScoringBackend,
    problem_id: &str,
    representation: Representation,
) -> Result<ProbeResult<F>> {
    require_scoring(backend)?;
    bank.validate()?;
    let mut template_losses: ByClass<Vec<F>> = ByClass::default();
    let mut token_counts: ByClass<Vec<usize>> = ByClass::default();
    for class in ProbeClass::ALL {
        let (ls, ts) = match class {
            ProbeClass::Dd => (&mut template_losses.dd, &mut token_counts.dd),
            ProbeClass::Rc => (&mut template_losses.rc, &mut token_counts.rc),
            ProbeClass::Ot => (&mut template_losses.ot, &mut token_counts.ot),
            ProbeClass::Neutral => (&mut template_losses.neutral, &mut token_counts.neutral),
        };
        for t in bank.templates(class) {
            let scored = backend.score_continuation(ctx, t)?;
            ts.push(scored.len());
            ls.push(length_normalized_loss(&scored)?);
        }
    }
    let loss = ByClass::from_fn(|c| mean(template_losses.get(c)).expect("bank validated"));
    let l0 = loss.neutral;
    let delta = ByClass::from_fn(|c| *loss.get(c) - l0);
    let (win, tie) = winner(loss.to_array());
    let s = support(loss.to_array());
    let support = ByClass::from_fn(|c| s[c.index()]);
    let within_problem_std = ByClass::from_fn(|c| sample_std(template_losses.get(c)));
    let first = token_counts.dd[0];
    let length_matched = ProbeClass::ALL.iter().all(|&c| token_counts.get(c).iter().all(|&n| n == first));
    Ok(ProbeResult {
        problem_id: problem_id.to_string(),
        representation,
        profile: bank.profile,
        loss,
        delta,
        winner: win,
        tie,
        support,
        within_problem_std,
        template_losses,
        token_counts,
        length_matched,
    })
}

/// Sorts results by problem id, then representation order.
pub fn sort_results<F>(results: &mut [ProbeResult<F>]) {
    results.sort_by(|a, b| {
        a.problem_id.cmp(&b.problem_id).then_with(|| {
            let ia = Representation::ALL.iter().position(|r| *r == a.representation);
            let ib = Representation::ALL.iter().position(|r| *r == b.representation);
            ia.cmp(&ib)
        })
    });
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::{LossRule, MockBackend, MockSpec, TableEntry, TableLosses};

    fn table(entries: Vec<(&str, TableLosses)>, fallback: Option<LossRule>) -> MockBackend {
        MockBackend::new(MockSpec {
            scoring: Some(LossRule::Table {
                entries: entries
                    .into_iter()
                    .map(|(c, l)| TableEntry { context: None, continuation: c.into(), losses: l })
                    .collect(),
                fallback: fallback.map(Box::new),
            }),
            ..MockSpec::default()
        })
    }

    #[test]
    fn normalized_loss() {
        let l = TokenLosses::new(vec![2.0, 4.0]).unwrap();
        assert_eq!(length_normalized_loss::<f64>(&l).unwrap(), 3.0);
        assert_eq!(length_normalized_loss::<f32>(&TokenLosses::new(vec![1.5]).unwrap()).unwrap(), 1.5);
        assert!(length_normalized_loss::<f64>(&TokenLosses { values: vec![] }).is_err());
    }

    #[test]
    fn support_and_winner() {
        assert_eq!(support([2.0f64; 4]), [0.25; 4]);
        assert_eq!(winner([2.0f64; 4]), (ProbeClass::Neutral, true));
        assert_eq!(winner([1.0f64, 1.0, 3.0, 2.0]), (ProbeClass::Dd, true));
        assert_eq!(winner([3.0f64, 1.0, 1.0, 2.0]), (ProbeClass::Rc, true));
        assert_eq!(winner([3.0f64, 2.0, 1.0, 2.0]), (ProbeClass::Ot, false));
        let s = support([0.0f64, 1.0, 2.0, 800.0]);
        assert!((s.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(s[0] > s[1] && s[1] > s[2] && s[3] >= 0.0);
        assert_eq!(llr(2.0f64, 2.0, 7), 0.0);
        assert_eq!(llr(1.0f64, 2.0, 10), 10.0);
    }

    #[test]
    fn dd_lowest_wins() {
        let bank = TemplateBank::balanced();
        let mut entries: Vec<(&str, TableLosses)> =
            bank.dd.iter().map(|t| (t.as_str(), TableLosses::Uniform(1.0))).collect();
        entries.push((bank.neutral[0].as_str(), TableLosses::Uniform(2.0)));
        let m = table(entries, Some(LossRule::Constant { value: 3.0 }));
        let ctx = ScoringContext::text("What is 47 × 60?");
        let r: ProbeResult<f64> = probe_problem(&ctx, &bank, &m, "p", Representation::NumeralText).unwrap();
        assert_eq!(r.winner, ProbeClass::Dd);
        assert_eq!(r.delta.dd, -1.0);
        assert_eq!(r.delta.neutral, 0.0);
        assert_eq!(r.within_problem_std.dd, 0.0);
        assert!((r.support.to_array().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(!r.length_matched);
    }

    #[test]
    fn class_loss_averages_template_means() {
        // pooled tokens would give (1*2 + 3*6) / 8 = 2.5; the mean of means is 2
        let bank = TemplateBank {
            profile: BankProfile::Balanced,
            version: "t".into(),
            dd: vec!["ab".into(), "cdefgh".into()],
            rc: vec!["r".into()],
            ot: vec!["o".into()],
            neutral: vec!["n".into()],
        };
        let m = table(
            vec![("ab", TableLosses::Uniform(1.0)), ("cdefgh", TableLosses::Uniform(3.0))],
            Some(LossRule::Constant { value: 5.0 }),
        );
        let r: ProbeResult<f64> =
            probe_problem(&ScoringContext::text("q"), &bank, &m, "p", Representation::NumeralText).unwrap();
        assert_eq!(r.loss.dd, 2.0);
        assert_eq!(r.token_counts.dd, [2, 6]);
        assert!((r.within_problem_std.dd - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn incapable_backend_is_refused() {
        let m = MockBackend::new(MockSpec::default());
        let err = probe_problem::<f64>(
            &ScoringContext::text("q"),
            &TemplateBank::balanced(),
            &m,
            "p",
            Representation::NumeralText,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Backend(BackendError::Capability { .. })));
    }
}
