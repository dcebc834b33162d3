//! OT / DD / RC cost models and target labeling.
//!
//! Every cost is measured in primitive digit operations scaled by the
//! weights in [`CostParams`]. All three costs are symmetric in their
//! arguments.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_bigint::{BigInt, BigUint};
use num_traits::{Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::arith::{schoolbook_carries, Operand};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum HeuristicKind {
    #[serde(rename = "OT")]
    Ot,
    #[serde(rename = "DD")]
    Dd,
    #[serde(rename = "RC")]
    Rc,
    /// Formatting-only control; never a cost-model target.
    #[serde(rename = "STYLE")]
    Style,
}

impl HeuristicKind {
    /// The three cost-model heuristics.
    pub const SCORED: [HeuristicKind; 3] = [Self::Ot, Self::Dd, Self::Rc];

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Ot => "OT",
            Self::Dd => "DD",
            Self::Rc => "RC",
            Self::Style => "STYLE",
        }
    }
}

impl fmt::Display for HeuristicKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for HeuristicKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "OT" => Ok(Self::Ot),
            "DD" => Ok(Self::Dd),
            "RC" => Ok(Self::Rc),
            "STYLE" => Ok(Self::Style),
            _ => Err(Error::invalid(format!("unknown heuristic {s:?}"))),
        }
    }
}

pub const DEFAULT_BASES: [u64; 6] = [25, 50, 100, 200, 250, 500];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CostParams {
    /// Unit cost of one digit product.
    pub lambda_mul: f64,
    pub lambda_carry: f64,
    /// Per-column cost of combining partial products.
    pub lambda_add: f64,
    pub lambda_base: f64,
    pub lambda_off: f64,
    pub margin_min: f64,
    pub base_set: Vec<u64>,
}

impl Default for CostParams {
    fn default() -> Self {
        Self {
            lambda_mul: 1.0,
            lambda_carry: 0.25,
            lambda_add: 0.5,
            lambda_base: 1.0,
            lambda_off: 1.0,
            margin_min: 1.0,
            base_set: DEFAULT_BASES.to_vec(),
        }
    }
}

impl CostParams {
    pub fn validate(&self) -> Result<()> {
        let lambdas = [
            ("lambda_mul", self.lambda_mul),
            ("lambda_carry", self.lambda_carry),
            ("lambda_add", self.lambda_add),
            ("lambda_base", self.lambda_base),
            ("lambda_off", self.lambda_off),
        ];
        for (name, v) in lambdas {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::config(format!("cost_params.{name} must be finite and >= 0, got {v}")));
            }
        }
        if !(self.margin_min.is_finite() && self.margin_min > 0.0) {
            return Err(Error::config("cost_params.margin_min must be > 0"));
        }
        if self.base_set.is_empty() {
            return Err(Error::config("cost_params.base_set is empty"));
        }
        if self.base_set.contains(&0) {
            return Err(Error::config("cost_params.base_set must not contain 0"));
        }
        Ok(())
    }

    /// Multiply every weight (and the margin) by `k`.
    pub fn scaled(&self, k: f64) -> Self {
        Self {
            lambda_mul: self.lambda_mul * k,
            lambda_carry: self.lambda_carry * k,
            lambda_add: self.lambda_add * k,
            lambda_base: self.lambda_base * k,
            lambda_off: self.lambda_off * k,
            margin_min: self.margin_min * k,
            base_set: self.base_set.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub ot_cost: f64,
    pub dd_cost: f64,
    pub rc_cost: f64,
    pub rc_base: u64,
    pub components: BTreeMap<String, f64>,
}

impl CostBreakdown {
    pub fn cost(&self, h: HeuristicKind) -> Option<f64> {
        match h {
            HeuristicKind::Ot => Some(self.ot_cost),
            HeuristicKind::Dd => Some(self.dd_cost),
            HeuristicKind::Rc => Some(self.rc_cost),
            HeuristicKind::Style => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetLabel {
    pub target: HeuristicKind,
    pub margin: f64,
    pub runner_up: HeuristicKind,
}

fn decimal_len(v: &BigUint) -> u64 {
    if v.is_zero() {
        1
    } else {
        v.to_str_radix(10).len() as u64
    }
}

fn offset_len(v: &BigInt) -> u64 {
    if v.is_zero() {
        0
    } else {
        decimal_len(v.magnitude())
    }
}

pub fn ot_cost(a: &Operand, b: &Operand, params: &CostParams) -> f64 {
    let products = (a.n_digits() * b.n_digits()) as f64;
    let carries = schoolbook_carries(a, b).total() as f64;
    params.lambda_mul * products + params.lambda_carry * carries
}

// Expand the non-zero place-value parts of `x` (most significant first)
// against all of `y`, then add the partial products in sequence. Each
// addition is charged by the column count of the running sum.
fn expansion_cost(x: &BigUint, y: &BigUint, params: &CostParams) -> f64 {
    let digits = x.to_str_radix(10);
    let len_y = decimal_len(y);
    let n = digits.len();
    let mut running = BigUint::zero();
    let mut parts = 0u64;
    let mut columns = 0u64;
    for (i, c) in digits.bytes().enumerate() {
        let d = (c - b'0') as u32;
        if d == 0 {
            continue;
        }
        let part = BigUint::from(d) * BigUint::from(10u32).pow((n - 1 - i) as u32);
        running += part * y;
        if parts > 0 {
            columns += decimal_len(&running);
        }
        parts += 1;
    }
    params.lambda_mul * (parts * len_y) as f64 + params.lambda_add * columns as f64
}

// x × y with y a multiple of 25 but not of 100: x × (y/25), then a
// quarter-hundred shift.
fn quarter_cost(x: &BigUint, y: &BigUint, params: &CostParams) -> Option<f64> {
    let q25 = BigUint::from(25u32);
    let q100 = BigUint::from(100u32);
    if y.is_zero() || !(y % &q25).is_zero() || (y % &q100).is_zero() {
        return None;
    }
    let q = y / &q25;
    let inner =
        if q == BigUint::from(1u32) { 0.0 } else { expansion_cost(x, &q, params).min(expansion_cost(&q, x, params)) };
    Some(inner + params.lambda_add * decimal_len(&(x * &q)) as f64)
}

/// Route names reported by [`dd_cost_detail`], indexed by `dd.route`.
pub const DD_ROUTES: [&str; 5] = ["expand_a", "expand_b", "place_shift", "quarter_a", "quarter_b"];

/// Decomposition cost and the route that achieved it.
pub fn dd_cost_detail(a: &Operand, b: &Operand, params: &CostParams) -> (f64, &'static str) {
    let (x, y) = (a.value(), b.value());
    let mut best = (expansion_cost(x, y, params), "expand_a");
    let mut consider = |c: f64, route: &'static str| {
        if c < best.0 {
            best = (c, route);
        }
    };
    consider(expansion_cost(y, x, params), "expand_b");
    if a.is_power_of_ten() || b.is_power_of_ten() {
        consider(0.0, "place_shift");
    }
    if let Some(c) = quarter_cost(x, y, params) {
        consider(c, "quarter_b");
    }
    if let Some(c) = quarter_cost(y, x, params) {
        consider(c, "quarter_a");
    }
    best
}

pub fn dd_cost(a: &Operand, b: &Operand, params: &CostParams) -> f64 {
    dd_cost_detail(a, b, params).0
}

fn rc_cost_at(da: &BigInt, db: &BigInt, params: &CostParams) -> f64 {
    let (la, lb) = (offset_len(da), offset_len(db));
    if !da.is_zero() && *da == -db {
        // (B + k)(B - k) = B² - k²
        return params.lambda_base + params.lambda_off * (la * la) as f64;
    }
    let cross = if la > 0 && lb > 0 { la * lb } else { 0 };
    params.lambda_base + params.lambda_off * (la + lb + cross) as f64
}

/// Nearest-base cost. Returns `(cost, base)`.
pub fn rc_cost(a: &Operand, b: &Operand, params: &CostParams) -> Result<(f64, u64)> {
    if params.base_set.is_empty() {
        return Err(Error::config("cost_params.base_set is empty"));
    }
    let x = BigInt::from(a.value().clone());
    let y = BigInt::from(b.value().clone());
    let mut best: Option<(BigInt, f64, u64)> = None;
    for &base in &params.base_set {
        let bb = BigInt::from(base);
        let da = &x - &bb;
        let db = &y - &bb;
        let dist = da.abs() + db.abs();
        let cost = rc_cost_at(&da, &db, params);
        let better = match &best {
            None => true,
            Some((bd, bc, bbase)) => dist < *bd || (dist == *bd && (cost < *bc || (cost == *bc && base < *bbase))),
        };
        if better {
            best = Some((dist, cost, base));
        }
    }
    let (_, cost, base) = best.expect("non-empty base set");
    Ok((cost, base))
}

pub fn cost_breakdown(a: &Operand, b: &Operand, params: &CostParams) -> Result<CostBreakdown> {
    let (rc, base) = rc_cost(a, b, params)?;
    let carries = schoolbook_carries(a, b);
    let load = crate::arith::compute_load(a, b);
    let (dd, route) = dd_cost_detail(a, b, params);
    let route_id = DD_ROUTES.iter().position(|r| *r == route).unwrap_or(0);
    let bb = BigInt::from(base);
    let da = BigInt::from(a.value().clone()) - &bb;
    let db = BigInt::from(b.value().clone()) - &bb;
    let mut components = BTreeMap::new();
    components.insert("ot.digit_products".into(), load.ot_ops as f64);
    components.insert("ot.carries".into(), carries.total() as f64);
    components.insert("dd.one_sided".into(), load.dd_one_sided as f64);
    components.insert("dd.route".into(), route_id as f64);
    components.insert("rc.offset_a".into(), da.to_f64().unwrap_or(f64::NAN));
    components.insert("rc.offset_b".into(), db.to_f64().unwrap_or(f64::NAN));
    components.insert("rc.symmetric".into(), if !da.is_zero() && da == -db.clone() { 1.0 } else { 0.0 });
    Ok(CostBreakdown { ot_cost: ot_cost(a, b, params), dd_cost: dd, rc_cost: rc, rc_base: base, components })
}

/// Rank the three heuristics by cost. Equal costs keep OT, DD, RC order.
pub fn ranked(costs: &CostBreakdown) -> [(HeuristicKind, f64); 3] {
    let mut r =
        [(HeuristicKind::Ot, costs.ot_cost), (HeuristicKind::Dd, costs.dd_cost), (HeuristicKind::Rc, costs.rc_cost)];
    r.sort_by(|x, y| x.1.total_cmp(&y.1));
    r
}

/// Label from precomputed costs. The winner must beat the runner-up by
/// strictly more than `margin_min`.
pub fn label_from_costs(costs: &CostBreakdown, margin_min: f64) -> Option<TargetLabel> {
    let r = ranked(costs);
    let margin = r[1].1 - r[0].1;
    (margin > margin_min).then_some(TargetLabel { target: r[0].0, margin, runner_up: r[1].0 })
}

pub fn label_target(a: &Operand, b: &Operand, margin_min: f64, params: &CostParams) -> Result<Option<TargetLabel>> {
    if margin_min.is_nan() || margin_min <= 0.0 {
        return Err(Error::invalid("margin_min must be > 0"));
    }
    let costs = cost_breakdown(a, b, params)?;
    Ok(label_from_costs(&costs, margin_min))
}
