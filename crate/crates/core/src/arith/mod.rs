//! Exact arithmetic, operand sampling and arithmetic-load metrics.

mod exclusion;
mod operand;
mod template;

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};

pub use exclusion::ExclusionSet;
pub use operand::{biguint_decimal, Operand};
pub use template::{
    sample_operand, sample_with_length, DigitTemplate, Slot, TemplateMode, MAX_STANDARD_DIGITS, STANDARD_TEMPLATES,
};

/// One multiplication instance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Problem {
    pub id: String,
    pub a: Operand,
    pub b: Operand,
    #[serde(with = "biguint_decimal")]
    pub product: BigUint,
}

impl Problem {
    pub fn new(id: impl Into<String>, a: Operand, b: Operand) -> Self {
        let product = exact_multiply(&a, &b);
        Self { id: id.into(), a, b, product }
    }

    /// Order-free identity, `"min×max"`.
    pub fn canonical_key(&self) -> String {
        canonical_key(&self.a, &self.b)
    }

    pub fn load(&self) -> LoadMetrics {
        compute_load(&self.a, &self.b)
    }
}

/// Canonical unordered key `"a×b"` with `a <= b`.
pub fn canonical_key(a: &Operand, b: &Operand) -> String {
    let (lo, hi) = if a.value() <= b.value() { (a, b) } else { (b, a) };
    format!("{lo}×{hi}")
}

/// Schoolbook product over decimal digits.
pub fn exact_multiply(a: &Operand, b: &Operand) -> BigUint {
    let x: Vec<u64> = a.digits().iter().rev().map(|&d| d as u64).collect();
    let y: Vec<u64> = b.digits().iter().rev().map(|&d| d as u64).collect();
    let mut acc = vec![0u64; x.len() + y.len()];
    for (j, &dy) in y.iter().enumerate() {
        if dy == 0 {
            continue;
        }
        for (i, &dx) in x.iter().enumerate() {
            acc[i + j] += dx * dy;
        }
    }
    let mut carry = 0u64;
    let mut digits = Vec::with_capacity(acc.len() + 1);
    for v in acc {
        let t = v + carry;
        digits.push((t % 10) as u8);
        carry = t / 10;
    }
    while carry > 0 {
        digits.push((carry % 10) as u8);
        carry /= 10;
    }
    while digits.len() > 1 && *digits.last().unwrap() == 0 {
        digits.pop();
    }
    digits.reverse();
    BigUint::from_radix_be(&digits, 10).expect("decimal digits")
}

/// Carry events in a column multiplication, split by stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CarryCounts {
    /// Carries handed to the next column while forming one row
    /// (`9 × 8 = 72, write 2, carry 7`). The leading product of a row is
    /// written in full and does not count.
    pub multiplication: u64,
    /// Column carries while accumulating the shifted rows, ones row first.
    pub addition: u64,
}

impl CarryCounts {
    pub fn total(&self) -> u64 {
        self.multiplication + self.addition
    }
}

/// Simulate column multiplication with `top` written above `multiplier`
/// and count carry events.
pub fn count_carries(top: &Operand, multiplier: &Operand) -> CarryCounts {
    let x: Vec<u8> = top.digits().iter().rev().copied().collect();
    let mut counts = CarryCounts::default();
    let mut sum: Vec<u8> = Vec::new();
    for (shift, &d) in multiplier.digits().iter().rev().enumerate() {
        if d == 0 {
            continue;
        }
        let mut row = vec![0u8; shift];
        let mut carry = 0u8;
        for (i, &dx) in x.iter().enumerate() {
            let p = dx * d + carry;
            if i + 1 < x.len() {
                row.push(p % 10);
                carry = p / 10;
                if carry > 0 {
                    counts.multiplication += 1;
                }
            } else {
                row.push(p % 10);
                if p >= 10 {
                    row.push(p / 10);
                }
            }
        }
        if row.iter().all(|&v| v == 0) {
            continue;
        }
        counts.addition += add_digits_into(&mut sum, &row);
    }
    counts
}

/// Carries of the cheaper layout (`a` on top or `b` on top). Order-free, so
/// every cost built on it is commutative.
pub fn schoolbook_carries(a: &Operand, b: &Operand) -> CarryCounts {
    let ab = count_carries(a, b);
    let ba = count_carries(b, a);
    if ba.total() < ab.total() {
        ba
    } else {
        ab
    }
}

// Little-endian in-place addition; returns the number of column carries.
fn add_digits_into(sum: &mut Vec<u8>, addend: &[u8]) -> u64 {
    let mut carries = 0;
    let mut carry = 0u8;
    let len = sum.len().max(addend.len());
    sum.resize(len, 0);
    for (k, d) in sum.iter_mut().enumerate() {
        let v = *d + addend.get(k).copied().unwrap_or(0) + carry;
        *d = v % 10;
        carry = v / 10;
        if carry > 0 {
            carries += 1;
        }
    }
    if carry > 0 {
        sum.push(carry);
    }
    carries
}

/// Digit statistics and operation-count proxies for one operand pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoadMetrics {
    pub d_total: u64,
    pub d_nonzero: u64,
    /// `d_total × d_nonzero`.
    pub load_c: u64,
    /// `n · m` digit products of the full schoolbook grid.
    pub ot_ops: u64,
    /// `min(m · s, n · t)`.
    pub dd_one_sided: u64,
    /// `s · t`.
    pub nonzero_products: u64,
    /// Total carry events of the cheaper column layout.
    pub carry_count: u64,
    pub carries: CarryCounts,
}

impl LoadMetrics {
    /// Carry-aware operation count: non-zero digit products plus carries.
    pub fn carry_aware_ops(&self) -> u64 {
        self.nonzero_products + self.carry_count
    }
}

pub fn compute_load(a: &Operand, b: &Operand) -> LoadMetrics {
    let (n, m) = (a.n_digits() as u64, b.n_digits() as u64);
    let (s, t) = (a.n_nonzero() as u64, b.n_nonzero() as u64);
    let carries = schoolbook_carries(a, b);
    LoadMetrics {
        d_total: n + m,
        d_nonzero: s + t,
        load_c: (n + m) * (s + t),
        ot_ops: n * m,
        dd_one_sided: (m * s).min(n * t),
        nonzero_products: s * t,
        carry_count: carries.total(),
        carries,
    }
}
