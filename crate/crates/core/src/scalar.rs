//! Scalar abstraction shared by the statistics, probe and geometry code.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating point scalar: `f32` or `f64`.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Debug + Display + Default + Sum + Send + Sync + 'static
{
    /// Lossy conversion from `f64`, used for constants.
    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("f64 constant representable in scalar type")
    }

    /// Conversion from a count.
    fn of_usize(v: usize) -> Self {
        Self::from_usize(v).expect("count representable in scalar type")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Neumaier-compensated running sum. Summation order is the call order, so
/// results are reproducible run to run.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum<F: Scalar> {
    sum: F,
    compensation: F,
}

impl<F: Scalar> CompensatedSum<F> {
    pub fn new() -> Self {
        Self { sum: F::zero(), compensation: F::zero() }
    }

    pub fn add(&mut self, value: F) {
        let t = self.sum + value;
        if self.sum.abs() >= value.abs() {
            self.compensation = self.compensation + ((self.sum - t) + value);
        } else {
            self.compensation = self.compensation + ((value - t) + self.sum);
        }
        self.sum = t;
    }

    pub fn value(&self) -> F {
        self.sum + self.compensation
    }
}

/// Compensated sum of an iterator.
pub fn stable_sum<F: Scalar, I: IntoIterator<Item = F>>(values: I) -> F {
    let mut acc = CompensatedSum::new();
    for v in values {
        acc.add(v);
    }
    acc.value()
}

/// Arithmetic mean; `None` for an empty slice.
pub fn mean<F: Scalar>(values: &[F]) -> Option<F> {
    if values.is_empty() {
        return None;
    }
    Some(stable_sum(values.iter().copied()) / F::of_usize(values.len()))
}

/// Sample standard deviation (n - 1 denominator). Zero for fewer than two values.
pub fn sample_std<F: Scalar>(values: &[F]) -> F {
    if values.len() < 2 {
        return F::zero();
    }
    let m = mean(values).unwrap_or_else(F::zero);
    let ss = stable_sum(values.iter().map(|&v| (v - m) * (v - m)));
    (ss / F::of_usize(values.len() - 1)).sqrt()
}

/// Four decimals, the precision of report tables.
pub fn fmt4<F: Scalar>(v: F) -> String {
    let s = format!("{:.4}", v.as_f64());
    // avoid a signed zero in reports
    if s == "-0.0000" {
        "0.0000".into()
    } else {
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let mut values = vec![1.0e16_f64];
        values.extend(std::iter::repeat_n(1.0, 1000));
        values.push(-1.0e16);
        assert_eq!(stable_sum(values), 1000.0);
    }

    #[test]
    fn std_of_one_two_three() {
        assert!((sample_std(&[1.0_f64, 2.0, 3.0]) - 1.0).abs() < 1e-15);
        assert_eq!(sample_std(&[4.0_f32]), 0.0);
    }
}
