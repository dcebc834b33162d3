//! Independent per-operation failure model: `accuracy = (1 - p)^N`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::AccuracyRecord;
use crate::backend::OpsProxy;
use crate::error::{Error, Result};
use crate::scalar::{CompensatedSum, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorRateFit<F> {
    /// Per-operation failure probability, `1 - exp(slope)`, in `[0, 1]`.
    pub p: F,
    /// Fitted slope of log-accuracy against operation count.
    pub slope: F,
    pub proxy: OpsProxy,
    pub buckets_used: usize,
    /// Buckets with zero accuracy, whose log is undefined.
    pub buckets_excluded: usize,
}

/// Weighted least squares through the origin of log bucket accuracy on
/// the operation count, one bucket per distinct count, weighted by bucket
/// size.
pub fn fit_error_rate<F: Scalar>(records: &[AccuracyRecord], proxy: OpsProxy) -> Result<ErrorRateFit<F>> {
    let mut buckets: BTreeMap<u64, (usize, usize)> = BTreeMap::new();
    for r in records {
        let ops = match proxy {
            OpsProxy::Load => r.load_c,
            OpsProxy::CarryAware => r.carry_ops,
        };
        let e = buckets.entry(ops).or_default();
        e.0 += 1;
        e.1 += usize::from(r.correct);
    }
    let (mut sxy, mut sxx) = (CompensatedSum::<F>::new(), CompensatedSum::<F>::new());
    let (mut used, mut excluded) = (0, 0);
    for (&ops, &(n, correct)) in &buckets {
        if correct == 0 {
            log::info!("ops bucket {ops} has zero accuracy over {n} items; excluded from the error-rate fit");
            excluded += 1;
            continue;
        }
        let acc = F::of_usize(correct) / F::of_usize(n);
        let (x, w) = (F::of(ops as f64), F::of_usize(n));
        sxy.add(w * x * acc.ln());
        sxx.add(w * x * x);
        used += 1;
    }
    if sxx.value() <= F::zero() {
        return Err(Error::invalid(
            "error-rate fit needs at least one non-empty bucket with a positive operation count",
        ));
    }
    let slope = (sxy.value() / sxx.value()).min(F::zero());
    let p = (F::one() - slope.exp()).max(F::zero()).min(F::one());
    Ok(ErrorRateFit { p, slope, proxy, buckets_used: used, buckets_excluded: excluded })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::render::Representation;
    use crate::rng::SeededRng;

    fn simulate(p: f64, n: usize, seed: u64) -> Vec<AccuracyRecord> {
        let mut rng = SeededRng::new(seed);
        (0..n)
            .map(|i| {
                let ops = rng.range_inclusive(4, 150) as u64;
                AccuracyRecord {
                    problem_id: format!("s{i}"),
                    representation: Representation::NumeralText,
                    load_c: ops,
                    carry_ops: ops / 2,
                    correct: rng.unit() < (1.0 - p).powf(ops as f64),
                    extracted_answer: None,
                    error: None,
                }
            })
            .collect()
    }

    #[test]
    fn recovers_rate() {
        let recs = simulate(0.01, 5000, 21);
        let fit: ErrorRateFit<f64> = fit_error_rate(&recs, OpsProxy::Load).unwrap();
        assert!((fit.p - 0.01).abs() < 0.0015, "{fit:?}");
        assert_eq!(fit.buckets_excluded, 0);
        // a different proxy yields a different but valid fit
        let alt: ErrorRateFit<f32> = fit_error_rate(&recs, OpsProxy::CarryAware).unwrap();
        assert!(alt.p > 0.0 && alt.p <= 1.0);
    }

    #[test]
    fn perfect_accuracy_gives_zero() {
        let recs = simulate(0.0, 300, 2);
        let fit: ErrorRateFit<f64> = fit_error_rate(&recs, OpsProxy::Load).unwrap();
        assert_eq!(fit.p, 0.0);
    }

    #[test]
    fn zero_buckets_are_excluded() {
        let mut recs = simulate(0.01, 200, 4);
        for r in &mut recs {
            if r.load_c == 100 {
                r.correct = false;
            }
        }
        let fit: ErrorRateFit<f64> = fit_error_rate(&recs, OpsProxy::Load).unwrap();
        assert!(fit.buckets_excluded >= 1);
        assert!(fit_error_rate::<f64>(&[], OpsProxy::Load).is_err());
    }
}
