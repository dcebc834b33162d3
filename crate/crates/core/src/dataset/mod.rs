//! Benchmark sets: the paired multimodal suite, the heuristic-disagreement
//! set (HDS) with its traps and single-cue perturbation pairs.

mod family;
mod jsonl;

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::arith::{canonical_key, sample_operand, schoolbook_carries, DigitTemplate, ExclusionSet, Operand, Problem};
use crate::cost::{cost_breakdown, label_from_costs, CostBreakdown, CostParams, HeuristicKind};
use crate::error::{Error, Result};
use crate::render::Representation;
use crate::rng::SeededRng;

pub use family::DesignFamily;
pub use jsonl::{read_jsonl, to_jsonl, write_jsonl};

/// Bumped whenever sampling or labeling changes the emitted bytes.
pub const GENERATOR_VERSION: &str = "1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Train => "train",
            Self::Val => "val",
            Self::Test => "test",
        }
    }
}

/// One item of the paired suite. Every representation renders the same
/// operands.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuiteItem {
    pub problem: Problem,
    pub template_a: DigitTemplate,
    pub template_b: DigitTemplate,
    pub representations: Vec<Representation>,
}

pub fn build_multimodal_suite(
    count: usize,
    templates: &[DigitTemplate],
    seed: u64,
    representations: &[Representation],
) -> Result<Vec<SuiteItem>> {
    if count == 0 {
        return Err(Error::invalid("suite count must be positive"));
    }
    if templates.is_empty() {
        return Err(Error::invalid("at least one digit template is required"));
    }
    let mut rng = SeededRng::new(seed).fork("suite");
    Ok((0..count)
        .map(|i| {
            let ta = rng.pick(templates).clone();
            let tb = rng.pick(templates).clone();
            let a = sample_operand(&ta, &mut rng);
            let b = sample_operand(&tb, &mut rng);
            SuiteItem {
                problem: Problem::new(format!("mm_{i:05}"), a, b),
                template_a: ta,
                template_b: tb,
                representations: representations.to_vec(),
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HdsItem {
    pub id: String,
    pub problem: Problem,
    pub target: HeuristicKind,
    pub runner_up: HeuristicKind,
    pub family: DesignFamily,
    pub split: Split,
    pub costs: CostBreakdown,
    pub margin: f64,
}

/// Hand-picked seed items; ids are their positions.
pub const CURATED_POOL: [(u64, u64, DesignFamily); 20] = [
    (49, 51, DesignFamily::Near50Sym),
    (48, 52, DesignFamily::Near50Sym),
    (99, 101, DesignFamily::Near100Sym),
    (97, 103, DesignFamily::Near100Sym),
    (198, 202, DesignFamily::NearBaseSym(200)),
    (247, 253, DesignFamily::NearBaseSym(250)),
    (503, 497, DesignFamily::NearBaseSym(500)),
    (204, 207, DesignFamily::NearBaseMixed(200)),
    (23, 27, DesignFamily::NearBaseSym(25)),
    (47, 60, DesignFamily::ZeroFactor),
    (83, 40, DesignFamily::ZeroFactor),
    (32, 125, DesignFamily::QuarterHundred),
    (36, 25, DesignFamily::QuarterHundred),
    (30, 480, DesignFamily::CleanTens),
    (37, 100, DesignFamily::HundredFactor),
    (58, 300, DesignFamily::HundredFactor),
    (78, 89, DesignFamily::CarryHeavy),
    (643, 87, DesignFamily::Generic),
    (87, 96, DesignFamily::CarryHeavy),
    (79, 68, DesignFamily::CarryHeavy),
];

/// Minimum carries for a carry-heavy item.
pub const CARRY_HEAVY_MIN: u64 = 3;

fn offset(rng: &mut SeededRng, max: i64) -> i64 {
    rng.range_inclusive(-max, max)
}

fn nonzero_offset(rng: &mut SeededRng, max: i64) -> i64 {
    let k = rng.range_inclusive(1, max);
    if rng.below(2) == 0 {
        k
    } else {
        -k
    }
}

fn digits_from(rng: &mut SeededRng, n: usize, lo: i64, hi: i64) -> u64 {
    (0..n).fold(0, |acc, _| acc * 10 + rng.range_inclusive(lo, hi) as u64)
}

fn near_any_base(x: u64, bases: &[u64]) -> bool {
    bases.iter().any(|&b| x.abs_diff(b) <= 10)
}

/// One candidate from a bucket, before labeling.
fn sample_candidate(bucket: HeuristicKind, params: &CostParams, rng: &mut SeededRng) -> (u64, u64, DesignFamily) {
    let (a, b, fam) = match bucket {
        HeuristicKind::Rc => {
            let base = *rng.pick(&params.base_set);
            if rng.below(2) == 0 {
                let k = nonzero_offset(rng, 10.min(base as i64 - 1));
                ((base as i64 + k) as u64, (base as i64 - k) as u64, DesignFamily::symmetric(base))
            } else {
                loop {
                    let (da, db) = (offset(rng, 10), offset(rng, 10));
                    let (x, y) = (base as i64 + da, base as i64 + db);
                    if da != -db && x >= 1 && y >= 1 {
                        break (x as u64, y as u64, DesignFamily::NearBaseMixed(base));
                    }
                }
            }
        }
        HeuristicKind::Dd => match rng.below(4) {
            0 => {
                let x = loop {
                    let x = rng.range_inclusive(11, 999) as u64;
                    if !x.is_multiple_of(10) {
                        break x;
                    }
                };
                (x, rng.range_inclusive(1, 9) as u64 * 10, DesignFamily::ZeroFactor)
            }
            1 => {
                let y = match rng.below(3) {
                    0 => 100,
                    1 => 1000,
                    _ => rng.range_inclusive(2, 9) as u64 * 100,
                };
                (rng.range_inclusive(11, 999) as u64, y, DesignFamily::HundredFactor)
            }
            2 => {
                let q = loop {
                    let q = rng.range_inclusive(1, 39) as u64;
                    if !q.is_multiple_of(4) {
                        break q;
                    }
                };
                (rng.range_inclusive(11, 99) as u64, 25 * q, DesignFamily::QuarterHundred)
            }
            _ => (
                rng.range_inclusive(1, 9) as u64 * 10,
                rng.range_inclusive(11, 99) as u64 * 10,
                DesignFamily::CleanTens,
            ),
        },
        HeuristicKind::Ot => {
            if rng.below(2) == 0 {
                loop {
                    let na = rng.range_inclusive(2, 3) as usize;
                    let (x, y) = (digits_from(rng, na, 5, 9), digits_from(rng, 2, 5, 9));
                    let c = schoolbook_carries(&Operand::from_u64(x), &Operand::from_u64(y)).total();
                    if c >= CARRY_HEAVY_MIN {
                        break (x, y, DesignFamily::CarryHeavy);
                    }
                }
            } else {
                loop {
                    let na = rng.range_inclusive(2, 3) as usize;
                    let (x, y) = (digits_from(rng, na, 1, 9), digits_from(rng, 2, 1, 9));
                    let cue = |v: u64| near_any_base(v, &params.base_set) || v.is_multiple_of(25);
                    if !cue(x) && !cue(y) {
                        break (x, y, DesignFamily::Generic);
                    }
                }
            }
        }
        HeuristicKind::Style => unreachable!("no style bucket"),
    };
    if rng.below(2) == 0 {
        (a, b, fam)
    } else {
        (b, a, fam)
    }
}

struct Labeled {
    problem: Problem,
    family: DesignFamily,
    target: HeuristicKind,
    runner_up: HeuristicKind,
    costs: CostBreakdown,
    margin: f64,
}

fn label(id: String, a: u64, b: u64, family: DesignFamily, params: &CostParams) -> Result<Option<Labeled>> {
    let problem = Problem::new(id, Operand::from_u64(a), Operand::from_u64(b));
    let costs = cost_breakdown(&problem.a, &problem.b, params)?;
    Ok(label_from_costs(&costs, params.margin_min).map(|l| Labeled {
        problem,
        family,
        target: l.target,
        runner_up: l.runner_up,
        costs,
        margin: l.margin,
    }))
}

/// Per-bucket targets: `count / 3` each, remainder to RC, then DD, then OT.
pub fn bucket_targets(count: usize) -> [(HeuristicKind, usize); 3] {
    let base = count / 3;
    let rem = count % 3;
    [
        (HeuristicKind::Rc, base + usize::from(rem >= 1)),
        (HeuristicKind::Dd, base + usize::from(rem >= 2)),
        (HeuristicKind::Ot, base),
    ]
}

/// Index boundaries for a 70/15/15 split of `n` items.
pub fn split_sizes(n: usize) -> (usize, usize, usize) {
    let train = (n as f64 * 0.70).round() as usize;
    let val = ((n as f64 * 0.15).round() as usize).min(n - train);
    (train, val, n - train - val)
}

/// Draws that add nothing new before a bucket is declared exhausted.
const STALL_LIMIT: usize = 50_000;

pub fn build_hds(count: usize, seed: u64, params: &CostParams) -> Result<Vec<HdsItem>> {
    if count < 3 {
        return Err(Error::invalid(format!("HDS needs at least 3 items, got {count}")));
    }
    params.validate()?;
    let targets = bucket_targets(count);
    let want = |h: HeuristicKind| targets.iter().find(|t| t.0 == h).map(|t| t.1).unwrap_or(0);
    let mut have: BTreeMap<HeuristicKind, usize> = BTreeMap::new();
    let mut seen = HashSet::new();
    let mut items: Vec<Labeled> = Vec::with_capacity(count);

    for &(a, b, family) in CURATED_POOL.iter() {
        let id = format!("hds_{:03}", items.len());
        let Some(l) = label(id, a, b, family, params)? else { continue };
        if *have.get(&l.target).unwrap_or(&0) >= want(l.target) || !seen.insert(l.problem.canonical_key()) {
            continue;
        }
        *have.entry(l.target).or_default() += 1;
        items.push(l);
    }

    let root = SeededRng::new(seed);
    let mut rngs: BTreeMap<HeuristicKind, SeededRng> =
        targets.iter().map(|(h, _)| (*h, root.fork(&format!("hds/{}", h.as_str())))).collect();
    let mut stalls: BTreeMap<HeuristicKind, usize> = BTreeMap::new();
    let mut rejected: BTreeMap<HeuristicKind, usize> = BTreeMap::new();
    loop {
        let open: Vec<HeuristicKind> =
            targets.iter().filter(|(h, n)| have.get(h).copied().unwrap_or(0) < *n).map(|(h, _)| *h).collect();
        if open.is_empty() {
            break;
        }
        for h in open {
            let rng = rngs.get_mut(&h).expect("bucket rng");
            let stall = stalls.entry(h).or_default();
            if *stall >= STALL_LIMIT {
                let summary: Vec<String> =
                    targets.iter().map(|(k, n)| format!("{k} {}/{n}", have.get(k).copied().unwrap_or(0))).collect();
                return Err(Error::Exhausted(format!(
                    "HDS bucket {h} stalled after {STALL_LIMIT} draws without a new margin-separated item \
                     ({} rejected); buckets: {}",
                    rejected.get(&h).copied().unwrap_or(0),
                    summary.join(", ")
                )));
            }
            *stall += 1;
            let (a, b, family) = sample_candidate(h, params, rng);
            let key = canonical_key(&Operand::from_u64(a), &Operand::from_u64(b));
            if seen.contains(&key) {
                continue;
            }
            let id = format!("hds_{:03}", items.len());
            match label(id, a, b, family, params)? {
                Some(l) if l.target == h => {
                    seen.insert(key);
                    *have.entry(h).or_default() += 1;
                    *stall = 0;
                    items.push(l);
                }
                _ => *rejected.entry(h).or_default() += 1,
            }
        }
    }

    // stratified split within each target class
    let mut split_of = vec![Split::Train; items.len()];
    let mut split_rng = root.fork("hds/split");
    for h in HeuristicKind::SCORED {
        let mut idx: Vec<usize> = (0..items.len()).filter(|&i| items[i].target == h).collect();
        split_rng.shuffle(&mut idx);
        let (train, val, _) = split_sizes(idx.len());
        for (pos, &i) in idx.iter().enumerate() {
            split_of[i] = if pos < train {
                Split::Train
            } else if pos < train + val {
                Split::Val
            } else {
                Split::Test
            };
        }
    }
    Ok(items
        .into_iter()
        .zip(split_of)
        .map(|(l, split)| HdsItem {
            id: l.problem.id.clone(),
            problem: l.problem,
            target: l.target,
            runner_up: l.runner_up,
            family: l.family,
            split,
            costs: l.costs,
            margin: l.margin,
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrapKind {
    AntiRounding,
    MissingTerm,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrapItem {
    pub id: String,
    pub problem: Problem,
    pub kind: TrapKind,
    pub tempting_heuristic: HeuristicKind,
    pub note: String,
}

/// Offsets from the base the rounding cost model picks.
pub fn base_offsets(a: u64, b: u64, params: &CostParams) -> Result<(u64, i64, i64)> {
    let (_, base) = crate::cost::rc_cost(&Operand::from_u64(a), &Operand::from_u64(b), params)?;
    Ok((base, a as i64 - base as i64, b as i64 - base as i64))
}

/// Traps alternate between the two kinds and never reuse an HDS problem.
pub fn build_traps(count: usize, seed: u64, hds: &[HdsItem], params: &CostParams) -> Result<Vec<TrapItem>> {
    if count == 0 {
        return Err(Error::invalid("trap count must be positive"));
    }
    let mut seen: HashSet<String> = hds.iter().map(|i| i.problem.canonical_key()).collect();
    let mut rng = SeededRng::new(seed).fork("traps");
    let mut out = Vec::with_capacity(count);
    let mut draws = 0usize;
    while out.len() < count {
        draws += 1;
        if draws > count * STALL_LIMIT {
            return Err(Error::Exhausted(format!("traps: found {} of {count}", out.len())));
        }
        let kind = if out.len() % 2 == 0 { TrapKind::AntiRounding } else { TrapKind::MissingTerm };
        let (a, b, note) = match kind {
            TrapKind::AntiRounding => {
                let base = *rng.pick(&params.base_set);
                let da = nonzero_offset(&mut rng, 10);
                let db = nonzero_offset(&mut rng, 10);
                let (a, b) = (base as i64 + da, base as i64 + db);
                if a < 1 || b < 1 || da == -db || da.abs() == db.abs() {
                    continue;
                }
                let (_, oa, ob) = base_offsets(a as u64, b as u64, params)?;
                if oa == -ob {
                    continue;
                }
                let note = format!("near {base} with offsets {oa:+} and {ob:+}; no symmetric shortcut");
                (a as u64, b as u64, note)
            }
            TrapKind::MissingTerm => {
                let n = rng.range_inclusive(3, 4) as usize;
                let a = digits_from(&mut rng, n, 1, 9);
                let b = digits_from(&mut rng, 2, 1, 9);
                let note = format!("{a} expands into {n} non-zero place-value parts");
                (a, b, note)
            }
        };
        let p = Problem::new(format!("trap_{:03}", out.len()), Operand::from_u64(a), Operand::from_u64(b));
        if !seen.insert(p.canonical_key()) {
            continue;
        }
        let tempting_heuristic = match kind {
            TrapKind::AntiRounding => HeuristicKind::Rc,
            TrapKind::MissingTerm => HeuristicKind::Dd,
        };
        out.push(TrapItem { id: p.id.clone(), problem: p, kind, tempting_heuristic, note });
    }
    let hds_keys: HashSet<String> = hds.iter().map(|i| i.problem.canonical_key()).collect();
    if let Some(t) = out.iter().find(|t| hds_keys.contains(&t.problem.canonical_key())) {
        return Err(Error::Internal(format!("trap {} duplicates an HDS problem", t.id)));
    }
    Ok(out)
}

/// Whether a problem has at least three non-zero parts when its larger
/// operand is expanded by place value.
pub fn has_missing_term_shape(p: &Problem) -> bool {
    let big = if p.a.value() >= p.b.value() { &p.a } else { &p.b };
    big.n_nonzero() >= 3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationPair {
    pub id: String,
    pub original: Problem,
    pub perturbed: Problem,
    /// Which operand was edited: `a` or `b`.
    pub edited: String,
    pub delta: i64,
    pub cue: String,
    pub original_target: Option<HeuristicKind>,
    pub perturbed_target: Option<HeuristicKind>,
}

fn target_of(a: &Operand, b: &Operand, params: &CostParams) -> Result<Option<HeuristicKind>> {
    let costs = cost_breakdown(a, b, params)?;
    Ok(label_from_costs(&costs, params.margin_min).map(|l| l.target))
}

/// Smallest single-operand edit that changes the label of `(a, b)`.
/// Offsets are tried by magnitude, positive first.
pub fn minimal_flip(a: u64, b: u64, edit_b: bool, params: &CostParams) -> Result<Option<(u64, u64, i64)>> {
    let (oa, ob) = (Operand::from_u64(a), Operand::from_u64(b));
    let before = target_of(&oa, &ob, params)?;
    for k in 1..=10i64 {
        for d in [k, -k] {
            let v = if edit_b { b as i64 + d } else { a as i64 + d };
            if v < 1 {
                continue;
            }
            let (x, y) = if edit_b { (a, v as u64) } else { (v as u64, b) };
            if target_of(&Operand::from_u64(x), &Operand::from_u64(y), params)? != before {
                return Ok(Some((x, y, d)));
            }
        }
    }
    Ok(None)
}

pub fn build_perturbation_pairs(count: usize, seed: u64, params: &CostParams) -> Result<Vec<PerturbationPair>> {
    let mut rng = SeededRng::new(seed).fork("perturbations");
    let mut out = Vec::with_capacity(count);
    let mut seen = HashSet::new();
    let mut draws = 0usize;
    while out.len() < count {
        draws += 1;
        if draws > count.max(1) * STALL_LIMIT {
            return Err(Error::Exhausted(format!("perturbation pairs: found {} of {count}", out.len())));
        }
        // alternate the cue kind: near-base symmetry, then a trailing zero
        let (a, b, cue) = if out.len() % 2 == 0 {
            let base = *rng.pick(&params.base_set) as i64;
            let k = rng.range_inclusive(1, (base / 10).max(5));
            if base - k < 1 {
                continue;
            }
            ((base - k) as u64, (base + k) as u64, "near_base_symmetry")
        } else {
            let x = rng.range_inclusive(11, 99) as u64;
            if x.is_multiple_of(10) {
                continue;
            }
            (x, rng.range_inclusive(1, 9) as u64 * 10, "trailing_zero")
        };
        if !seen.insert(canonical_key(&Operand::from_u64(a), &Operand::from_u64(b))) {
            continue;
        }
        let Some((x, y, d)) = minimal_flip(a, b, true, params)? else { continue };
        let id = format!("pert_{:03}", out.len());
        let original = Problem::new(format!("{id}_a"), Operand::from_u64(a), Operand::from_u64(b));
        let perturbed = Problem::new(format!("{id}_b"), Operand::from_u64(x), Operand::from_u64(y));
        out.push(PerturbationPair {
            original_target: target_of(&original.a, &original.b, params)?,
            perturbed_target: target_of(&perturbed.a, &perturbed.b, params)?,
            id,
            original,
            perturbed,
            edited: "b".into(),
            delta: d,
            cue: cue.into(),
        });
    }
    Ok(out)
}

/// Problems kept out of trace generation: HDS validation and test items,
/// all traps, and any extra held-out problems.
pub fn exclusion_set<'a>(
    hds: &[HdsItem],
    traps: &[TrapItem],
    held_out: impl IntoIterator<Item = &'a Problem>,
) -> ExclusionSet {
    let mut ex = ExclusionSet::new();
    for i in hds.iter().filter(|i| i.split != Split::Train) {
        ex.insert(&i.problem);
    }
    for t in traps {
        ex.insert(&t.problem);
    }
    for p in held_out {
        ex.insert(p);
    }
    ex
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub generator_version: String,
    pub seed: u64,
    pub cost_params: CostParams,
    /// `dimension -> value -> count`, e.g. `split -> test -> 150`.
    pub counts: BTreeMap<String, BTreeMap<String, usize>>,
    /// sha256 of each emitted file, by file name.
    pub files: BTreeMap<String, String>,
    /// sha256 over the sorted `files` entries.
    pub content_hash: String,
}

impl DatasetManifest {
    pub fn new(seed: u64, cost_params: CostParams) -> Self {
        Self {
            generator_version: GENERATOR_VERSION.to_string(),
            seed,
            cost_params,
            counts: BTreeMap::new(),
            files: BTreeMap::new(),
            content_hash: String::new(),
        }
    }

    pub fn count(&mut self, dimension: &str, value: impl Into<String>) {
        *self.counts.entry(dimension.to_string()).or_default().entry(value.into()).or_default() += 1;
    }

    pub fn add_file(&mut self, name: &str, bytes: &[u8]) {
        self.files.insert(name.to_string(), crate::hash::sha256_hex(bytes));
        let fields: Vec<&[u8]> = self.files.iter().flat_map(|(k, v)| [k.as_bytes(), v.as_bytes()]).collect();
        self.content_hash = crate::hash::sha256_fields(fields);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn defaults() -> CostParams {
        CostParams::default()
    }

    #[test]
    fn curated_pool_labels_hold() {
        let params = defaults();
        for (i, &(a, b, fam)) in CURATED_POOL.iter().enumerate() {
            let l = label(format!("hds_{i:03}"), a, b, fam, &params).unwrap();
            let l = l.unwrap_or_else(|| panic!("{a}×{b} has no margin"));
            assert_eq!(l.target, fam.intended(), "{a}×{b}");
        }
    }

    #[test]
    fn table_rows_keep_their_ids() {
        let hds = build_hds(60, 1, &defaults()).unwrap();
        for (id, a, b, t) in [
            ("hds_000", 49, 51, HeuristicKind::Rc),
            ("hds_002", 99, 101, HeuristicKind::Rc),
            ("hds_009", 47, 60, HeuristicKind::Dd),
            ("hds_014", 37, 100, HeuristicKind::Dd),
            ("hds_018", 87, 96, HeuristicKind::Ot),
            ("hds_019", 79, 68, HeuristicKind::Ot),
        ] {
            let item = hds.iter().find(|i| i.id == id).unwrap();
            assert_eq!((item.problem.a.to_u128(), item.problem.b.to_u128()), (Some(a), Some(b)));
            assert_eq!(item.target, t);
        }
    }

    #[test]
    fn full_size_split_and_buckets() {
        let params = defaults();
        let hds = build_hds(1000, 7, &params).unwrap();
        assert_eq!(hds.len(), 1000);
        let n = |s: Split| hds.iter().filter(|i| i.split == s).count();
        assert_eq!((n(Split::Train), n(Split::Val), n(Split::Test)), (700, 150, 150));
        let keys: HashSet<_> = hds.iter().map(|i| i.problem.canonical_key()).collect();
        assert_eq!(keys.len(), 1000);
        for (h, want) in bucket_targets(1000) {
            assert_eq!(hds.iter().filter(|i| i.target == h).count(), want);
        }
        for i in hds.iter().take(200) {
            let c = cost_breakdown(&i.problem.a, &i.problem.b, &params).unwrap();
            let l = label_from_costs(&c, params.margin_min).unwrap();
            assert_eq!((l.target, l.margin), (i.target, i.margin));
            assert!(i.margin > params.margin_min);
        }
    }

    #[test]
    fn hds_is_deterministic_and_validates() {
        assert_eq!(build_hds(30, 3, &defaults()).unwrap(), build_hds(30, 3, &defaults()).unwrap());
        assert!(build_hds(2, 3, &defaults()).is_err());
        let mut p = defaults();
        p.margin_min = 50.0;
        assert!(matches!(build_hds(30, 3, &p), Err(Error::Exhausted(_))));
    }

    #[test]
    fn traps_are_disjoint_and_shaped() {
        let params = defaults();
        let hds = build_hds(90, 2, &params).unwrap();
        let traps = build_traps(30, 2, &hds, &params).unwrap();
        assert_eq!(traps.len(), 30);
        let keys: HashSet<_> = hds.iter().map(|i| i.problem.canonical_key()).collect();
        for t in &traps {
            assert!(!keys.contains(&t.problem.canonical_key()));
            match t.kind {
                TrapKind::AntiRounding => {
                    let (a, b) = (t.problem.a.to_u128().unwrap() as u64, t.problem.b.to_u128().unwrap() as u64);
                    let (_, da, db) = base_offsets(a, b, &params).unwrap();
                    assert_ne!(da, -db);
                }
                TrapKind::MissingTerm => assert!(has_missing_term_shape(&t.problem)),
            }
        }
    }

    #[test]
    fn perturbation_examples_flip() {
        let params = defaults();
        let t = |a: u64, b: u64| target_of(&Operand::from_u64(a), &Operand::from_u64(b), &params).unwrap();
        assert_eq!(t(49, 51), Some(HeuristicKind::Rc));
        assert_ne!(t(49, 53), Some(HeuristicKind::Rc));
        assert_eq!(t(47, 60), Some(HeuristicKind::Dd));
        assert_ne!(t(47, 61), Some(HeuristicKind::Dd));

        let pairs = build_perturbation_pairs(20, 5, &params).unwrap();
        assert_eq!(pairs.len(), 20);
        for p in &pairs {
            assert_eq!(p.original.a, p.perturbed.a);
            assert_ne!(p.original.b, p.perturbed.b);
            assert_ne!(p.original_target, p.perturbed_target);
        }
    }

    #[test]
    fn suite_pairs_share_operands() {
        let t = DigitTemplate::standard_family();
        let s = build_multimodal_suite(50, &t, 4, &Representation::ALL).unwrap();
        assert_eq!(s.len(), 50);
        assert_eq!(s[7].problem.id, "mm_00007");
        assert_eq!(s, build_multimodal_suite(50, &t, 4, &Representation::ALL).unwrap());
        assert!(build_multimodal_suite(0, &t, 4, &Representation::ALL).is_err());
    }

    #[test]
    fn split_sizes_round() {
        assert_eq!(split_sizes(333), (233, 50, 50));
        assert_eq!(split_sizes(334), (234, 50, 50));
        assert_eq!(split_sizes(1), (1, 0, 0));
        assert_eq!(split_sizes(3), (2, 0, 1));
    }
}
