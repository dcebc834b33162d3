use serde::{Deserialize, Serialize};

use super::{length_normalized_loss, require_scoring};
use crate::backend::{ScoringBackend, ScoringContext};
use crate::cost::HeuristicKind;
use crate::error::{Error, Result};
use crate::render::Representation;
use crate::scalar::Scalar;
use crate::trace::ContrastivePair;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContrastiveResult<F> {
    pub problem_id: String,
    pub representation: Representation,
    pub heuristic: HeuristicKind,
    pub l_correct: F,
    pub l_incorrect: F,
    /// `l_correct < l_incorrect`.
    pub preference: bool,
    /// `l_incorrect - l_correct`.
    pub loss_gap: F,
}

/// Scores both steps of `pair` as continuations of the same context.
pub fn contrastive_probe<F: Scalar>(
    pair: &ContrastivePair,
    ctx: &ScoringContext,
    backend: &dyn ScoringBackend,
    representation: Representation,
) -> Result<ContrastiveResult<F>> {
    if pair.correct_step == pair.incorrect_step {
        return Err(Error::invalid(format!("{}: correct and incorrect steps are identical", pair.problem_id)));
    }
    require_scoring(backend)?;
    let l_correct: F = length_normalized_loss(&backend.score_continuation(ctx, &pair.correct_step)?)?;
    let l_incorrect: F = length_normalized_loss(&backend.score_continuation(ctx, &pair.incorrect_step)?)?;
    let loss_gap = l_incorrect - l_correct;
    Ok(ContrastiveResult {
        problem_id: pair.problem_id.clone(),
        representation,
        heuristic: pair.heuristic,
        l_correct,
        l_incorrect,
        preference: loss_gap > F::zero(),
        loss_gap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::{LossRule, MockBackend, MockSpec, TableEntry, TableLosses};
    use crate::trace::Corruption;

    fn pair(correct: &str, incorrect: &str) -> ContrastivePair {
        ContrastivePair {
            problem_id: "hds_000".into(),
            heuristic: HeuristicKind::Dd,
            correct_step: correct.into(),
            incorrect_step: incorrect.into(),
            corruption: Corruption { slot: 1, original: "252".into(), edited: "262".into(), delta: "+10".into() },
        }
    }

    #[test]
    fn lower_correct_loss_is_a_preference() {
        let p = pair("40 × 36 + 7 × 36 = 1440 + 252", "40 × 36 + 7 × 36 = 1440 + 262");
        let m = MockBackend::new(MockSpec {
            scoring: Some(LossRule::Table {
                entries: vec![
                    TableEntry {
                        context: None,
                        continuation: p.correct_step.clone(),
                        losses: TableLosses::Uniform(0.5),
                    },
                    TableEntry {
                        context: None,
                        continuation: p.incorrect_step.clone(),
                        losses: TableLosses::Uniform(0.75),
                    },
                ],
                fallback: None,
            }),
            ..MockSpec::default()
        });
        let ctx = ScoringContext::text("What is 47 × 36?");
        let r: ContrastiveResult<f64> = contrastive_probe(&p, &ctx, &m, Representation::NumeralText).unwrap();
        assert!(r.preference);
        assert_eq!(r.loss_gap, 0.25);
        let same = pair("a = 1", "a = 1");
        assert!(matches!(
            contrastive_probe::<f64>(&same, &ctx, &m, Representation::NumeralText),
            Err(Error::Invalid(_))
        ));
    }
}
