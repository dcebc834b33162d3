//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.
//!
//! Set `MULPROBE_BLESS=1` to rewrite the golden probe aggregate.

use std::collections::{BTreeMap, HashSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use mulprobe_cli::config::RunConfig;
use mulprobe_cli::output::parse_file;
use mulprobe_cli::{run, Command};
use mulprobe_core::arith::{compute_load, ExclusionSet};
use mulprobe_core::backend::{
    GenerationRule, LossRule, MockBackend, MockSpec, OpsProxy, ScoringBackend, ScoringContext, TableEntry, TableLosses,
};
use mulprobe_core::cost::{label_target, HeuristicKind};
use mulprobe_core::geometry::{
    cosine_similarity, cosine_streamed, effective_update, LoraModule, LowRankUpdate, Matrix,
};
use mulprobe_core::probe::{probe_problem, BankProfile, ProbeClass, ProbeResult, TemplateBank};
use mulprobe_core::render::words::{parse_words, to_words};
use mulprobe_core::render::Representation;
use mulprobe_core::stats::{fit_error_rate, fit_logistic, sigmoid, AccuracyRecord};
use mulprobe_core::trace::{
    build_trace_dataset, gen_contrastive_pair, gen_trace, sample_trace_problem, verify_step, verify_trace,
};
use mulprobe_core::{CostParams, Operand, Problem, SeededRng};
use nalgebra::DMatrix;
use num_bigint::BigUint;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn op(v: u64) -> Operand {
    Operand::from_u64(v)
}

fn problem(a: u64, b: u64) -> Problem {
    Problem::new(format!("{a}x{b}"), op(a), op(b))
}

// 1. load metric

fn load_metric() -> Outcome {
    let cases = [(47u64, 36u64, 16u64), (1_632_178_320, 5_683_473_970, 360)];
    let mut worst = Duration::ZERO;
    for (a, b, want) in cases {
        let (oa, ob) = (op(a), op(b));
        let start = Instant::now();
        let got = compute_load(&oa, &ob).load_c;
        worst = worst.max(start.elapsed());
        ensure!(got == want, "load({a}, {b}) = {got}, want {want}");
    }
    ensure!(worst < Duration::from_millis(1), "slowest call took {worst:?}");
    Ok(format!("16 and 360 exact, slowest call {worst:?}"))
}

// 2. load identities against a string-based digit count

fn random_operand(rng: &mut SeededRng) -> String {
    let n = rng.range_inclusive(1, 12) as usize;
    let mut s = String::with_capacity(n);
    for i in 0..n {
        // zeros are over-weighted so sparse operands are common
        let d = if i == 0 {
            rng.range_inclusive(1, 9)
        } else if rng.unit() < 0.3 {
            0
        } else {
            rng.range_inclusive(1, 9)
        };
        s.push(char::from(b'0' + d as u8));
    }
    s
}

fn load_identities() -> Outcome {
    let mut rng = SeededRng::new(2);
    let mut violations = 0;
    for _ in 0..10_000 {
        let (x, y) = (random_operand(&mut rng), random_operand(&mut rng));
        let (n, m) = (x.len() as u64, y.len() as u64);
        let nz = |s: &str| s.bytes().filter(|&b| b != b'0').count() as u64;
        let (s, t) = (nz(&x), nz(&y));
        let l = compute_load(&op(x.parse().unwrap()), &op(y.parse().unwrap()));
        let c = n * s + n * t + m * s + m * t;
        if l.load_c != c || l.nonzero_products != s * t || 4 * s * t > l.load_c {
            violations += 1;
        }
    }
    ensure!(violations == 0, "{violations} violations");
    Ok("10000 pairs, 0 violations".into())
}

// 3. labels of the reference rows

fn hds_labels() -> Outcome {
    let params = CostParams::default();
    let rows = [
        (49, 51, HeuristicKind::Rc),
        (99, 101, HeuristicKind::Rc),
        (47, 60, HeuristicKind::Dd),
        (37, 100, HeuristicKind::Dd),
        (87, 96, HeuristicKind::Ot),
        (79, 68, HeuristicKind::Ot),
    ];
    let mut ok = 0;
    let mut bad = Vec::new();
    for (a, b, want) in rows {
        match label_target(&op(a), &op(b), params.margin_min, &params).map_err(|e| e.to_string())? {
            Some(l) if l.target == want && l.margin > 0.0 => ok += 1,
            other => bad.push(format!("{a}×{b}: {other:?}")),
        }
    }
    ensure!(ok == 6, "{ok}/6; {}", bad.join("; "));
    Ok("6/6 rows labeled with positive margin".into())
}

// 4. trace oracle

const LISTING_RC: &str = "What is 399 × 399?
Let me round to convenient bases and adjust.
399 is close to 400 (difference: -1).
399 is close to 400 (difference: -1).
Start with 400 × 400 = 160000.
Adjustment for 399: 400 × -1 = -400.
Adjustment for 399: -1 × 400 = -400.
Cross term: -1 × -1 = +1.
Total: 160000 + (-400) + (-400) + (+1) = 159201.
Answer: 159201";

const LISTING_DD: &str = "What is 99 × 40?
Let me decompose 99 into 90 + 9.
First compute 90 × 40:
90 × 40 = 3600.
Then compute 9 × 40:
9 × 40 = 360.
Now sum the partial products:
3600 + 360 = 3960.
Answer: 3960";

const LISTING_OT: &str = "What is 79 × 78?
Let me use column multiplication step by step.
Step 1: Multiply 79 by ones digit 8:
  9 × 8 = 72, write 2, carry 7.
  7 × 8 = 56, plus carry = 63.
  First partial product: 632.
Step 2: Multiply 79 by tens digit 7:
  9 × 7 = 63, write 3, carry 6.
  7 × 7 = 49, plus carry = 55.
  Second partial product: 553 (shifted by 10 = 5530).
Step 3: Add partial products:
  632 + 5530 = 6162.
Answer: 6162";

fn squash(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Operands from the question line and the final answer, checked with
/// num-bigint.
fn answer_matches(lines: &[String]) -> bool {
    let q = lines[0].trim_start_matches("What is ").trim_end_matches('?');
    let Some((a, b)) = q.split_once(" × ") else { return false };
    let (Ok(a), Ok(b)) = (a.parse::<BigUint>(), b.parse::<BigUint>()) else { return false };
    let last = lines.last().map(String::as_str).unwrap_or("");
    last.trim_start_matches("Answer: ").parse::<BigUint>().ok() == Some(a * b)
}

fn trace_oracle() -> Outcome {
    let none = ExclusionSet::new();
    for h in [HeuristicKind::Rc, HeuristicKind::Dd, HeuristicKind::Ot, HeuristicKind::Style] {
        let ds = build_trace_dataset(h, 1000, 4, &none).map_err(|e| e.to_string())?;
        let all: Vec<_> = ds.train.iter().chain(&ds.val).collect();
        ensure!(all.len() == 1000, "{h}: {} traces", all.len());
        let failed = all.iter().filter(|t| verify_trace(t).is_err() || !answer_matches(&t.lines)).count();
        ensure!(failed == 0, "{h}: {failed} traces fail");
    }
    let listings = [
        (399, 399, HeuristicKind::Rc, LISTING_RC),
        (99, 40, HeuristicKind::Dd, LISTING_DD),
        (79, 78, HeuristicKind::Ot, LISTING_OT),
    ];
    for (a, b, h, want) in listings {
        let t = gen_trace(&problem(a, b), h);
        ensure!(squash(&t.text()) == squash(want), "{a}×{b} listing differs:\n{}", t.text());
        verify_trace(&t).map_err(|e| format!("{a}×{b}: {e}"))?;
    }
    Ok("4000 traces verified; three listings reproduced".into())
}

// 5. contrastive pairs

/// Minimal integer expression evaluator for step text: `+ - × *`,
/// parentheses, unary signs and a postfix `²`.
struct Expr<'a> {
    s: &'a [u8],
    i: usize,
}

impl Expr<'_> {
    fn peek(&mut self) -> Option<u8> {
        while self.i < self.s.len() && self.s[self.i] == b' ' {
            self.i += 1;
        }
        self.s.get(self.i).copied()
    }

    fn eat(&mut self, pat: &str) -> bool {
        self.peek();
        if self.s[self.i..].starts_with(pat.as_bytes()) {
            self.i += pat.len();
            return true;
        }
        false
    }

    fn sum(&mut self) -> Option<i128> {
        let mut v = self.product()?;
        loop {
            if self.eat("+") {
                v += self.product()?;
            } else if self.eat("-") {
                v -= self.product()?;
            } else {
                return Some(v);
            }
        }
    }

    fn product(&mut self) -> Option<i128> {
        let mut v = self.atom()?;
        while self.eat("×") || self.eat("*") {
            v *= self.atom()?;
        }
        Some(v)
    }

    fn atom(&mut self) -> Option<i128> {
        let v = if self.eat("-") {
            -self.atom()?
        } else if self.eat("+") {
            self.atom()?
        } else if self.eat("(") {
            let v = self.sum()?;
            self.eat(")").then_some(v)?
        } else {
            self.peek();
            let start = self.i;
            while self.i < self.s.len() && self.s[self.i].is_ascii_digit() {
                self.i += 1;
            }
            std::str::from_utf8(&self.s[start..self.i]).ok()?.parse().ok()?
        };
        Some(if self.eat("²") { v * v } else { v })
    }
}

fn eval(side: &str) -> Option<i128> {
    let mut e = Expr { s: side.as_bytes(), i: 0 };
    let v = e.sum()?;
    (e.peek().is_none()).then_some(v)
}

/// Whether every `=`-separated side of a step has the same value.
fn step_holds(step: &str) -> Option<bool> {
    let body = step.rsplit_once(": ").map_or(step, |(_, rest)| rest);
    let vals: Option<Vec<i128>> = body.split(" = ").map(eval).collect();
    let vals = vals?;
    Some(vals.windows(2).all(|w| w[0] == w[1]))
}

fn contrastive_pairs() -> Outcome {
    let mut rng = SeededRng::new(5);
    let kinds = [HeuristicKind::Dd, HeuristicKind::Rc, HeuristicKind::Ot];
    let (mut made, mut draws, mut bad) = (0, 0, Vec::new());
    while made < 500 && draws < 5000 {
        let h = kinds[draws % 3];
        draws += 1;
        let (a, b) = sample_trace_problem(h, &mut rng);
        let Ok(pair) = gen_contrastive_pair(&problem(a, b), h, &mut rng) else { continue };
        made += 1;
        let core_ok = verify_step(&pair.correct_step).is_ok() && verify_step(&pair.incorrect_step).is_err();
        let oracle_ok = step_holds(&pair.correct_step) == Some(true) && step_holds(&pair.incorrect_step) == Some(false);
        if !(core_ok && oracle_ok) {
            bad.push(format!("{} / {}", pair.correct_step, pair.incorrect_step));
        }
    }
    ensure!(made == 500, "only {made} pairs from {draws} draws");
    ensure!(bad.is_empty(), "{} bad pairs, first {}", bad.len(), bad[0]);
    let target = "40 × 36 + 7 × 36 = 1440 + 262";
    let p = problem(47, 36);
    let hit = (0..1000u64).find(|&s| {
        gen_contrastive_pair(&p, HeuristicKind::Dd, &mut SeededRng::new(s))
            .is_ok_and(|x| x.correct_step == "40 × 36 + 7 × 36 = 1440 + 252" && x.incorrect_step == target)
    });
    ensure!(hit.is_some(), "reference pair not produced in 1000 seeds");
    Ok(format!("500 pairs checked; reference pair at seed {}", hit.unwrap()))
}

// 6. logistic recovery

fn logistic_recovery() -> Outcome {
    let mut rng = SeededRng::new(6);
    let (b0, b1) = (4.0, -0.08);
    let loads: Vec<f64> = (0..5000).map(|_| rng.range_inclusive(4, 120) as f64).collect();
    let ys: Vec<bool> = loads.iter().map(|&x| rng.unit() < sigmoid(b0 + b1 * x)).collect();
    let start = Instant::now();
    let fit = fit_logistic::<f64>(&loads, &ys).map_err(|e| e.to_string())?;
    let took = start.elapsed();
    let c50 = fit.c50.ok_or("no c50")?;
    ensure!((fit.beta0 - b0).abs() <= 0.1 * b0.abs(), "beta0 {}", fit.beta0);
    ensure!((fit.beta1 - b1).abs() <= 0.1 * b1.abs(), "beta1 {}", fit.beta1);
    ensure!((c50 - 50.0).abs() <= 5.0, "c50 {c50}");
    ensure!(took < Duration::from_secs(5), "fit took {took:?}");
    Ok(format!("beta0 {:.4}, beta1 {:.5}, c50 {c50:.2} in {took:?}", fit.beta0, fit.beta1))
}

// 7. error-rate recovery

fn error_rate_recovery() -> Outcome {
    let mut rng = SeededRng::new(7);
    let p: f64 = 0.01;
    let records: Vec<AccuracyRecord> = (0..20_000)
        .map(|i| {
            let a = rng.range_inclusive(1, 999_999) as u64;
            let b = rng.range_inclusive(1, 999_999) as u64;
            let pr = problem(a, b);
            let l = pr.load();
            AccuracyRecord {
                problem_id: format!("e{i}"),
                representation: Representation::NumeralText,
                load_c: l.load_c,
                carry_ops: l.carry_aware_ops(),
                correct: rng.unit() < (1.0 - p).powf(l.load_c as f64),
                extracted_answer: None,
                error: None,
            }
        })
        .collect();
    let fit = fit_error_rate::<f64>(&records, OpsProxy::Load).map_err(|e| e.to_string())?;
    ensure!((fit.p - p).abs() <= 0.15 * p, "p {}", fit.p);
    Ok(format!("p {:.5} from {} buckets", fit.p, fit.buckets_used))
}

// 8. probe and likelihood-ratio equivalence

fn random_text(rng: &mut SeededRng, len: usize) -> String {
    (0..len).map(|_| char::from(b'a' + rng.range_inclusive(0, 25) as u8)).collect()
}

fn probe_equivalence() -> Outcome {
    let mut rng = SeededRng::new(8);
    let mut agree = 0;
    let mut max_sum_err: f64 = 0.0;
    for case in 0..100 {
        let len = rng.range_inclusive(8, 40) as usize;
        let mut class = || vec![random_text(&mut rng, len), random_text(&mut rng, len)];
        let bank = TemplateBank {
            profile: BankProfile::Balanced,
            version: "test".into(),
            dd: class(),
            rc: class(),
            ot: class(),
            neutral: class(),
        };
        let backend = MockBackend::new(MockSpec {
            scoring: Some(LossRule::Hash { seed: case, min: 0.1, max: 5.0 }),
            ..MockSpec::default()
        });
        let (a, b) = (rng.range_inclusive(10, 9999) as u64, rng.range_inclusive(10, 9999) as u64);
        let ctx = ScoringContext::text(format!("What is {a} × {b}?"));
        let r: ProbeResult<f64> =
            probe_problem(&ctx, &bank, &backend, "p", Representation::NumeralText).map_err(|e| e.to_string())?;
        ensure!(r.length_matched, "case {case}: bank not length matched");
        // total log-likelihood of each class, straight from the backend
        let mut best = (ProbeClass::Neutral, f64::NEG_INFINITY);
        for c in ProbeClass::ALL {
            let ll: f64 = bank.templates(c).iter().map(|t| -backend.score_continuation(&ctx, t).unwrap().total()).sum();
            if ll > best.1 {
                best = (c, ll);
            }
        }
        if best.0 == r.winner {
            agree += 1;
        }
        let s: f64 = r.support.to_array().iter().sum();
        max_sum_err = max_sum_err.max((s - 1.0).abs());
    }
    ensure!(agree == 100, "{agree}/100 agree");
    ensure!(max_sum_err <= 1e-9, "support sums off by {max_sum_err:e}");
    let uniform =
        MockBackend::new(MockSpec { scoring: Some(LossRule::Constant { value: 1.7 }), ..MockSpec::default() });
    let ctx = ScoringContext::text("What is 12 × 34?");
    let r: ProbeResult<f64> =
        probe_problem(&ctx, &TemplateBank::balanced(), &uniform, "u", Representation::NumeralText)
            .map_err(|e| e.to_string())?;
    let s = r.support.to_array();
    ensure!(s.iter().all(|v| (v - 0.25).abs() < 1e-12), "uniform supports {s:?}");
    ensure!(r.winner == ProbeClass::Neutral, "uniform winner {:?}", r.winner);
    Ok(format!("100/100 agree; support sum error {max_sum_err:.1e}; uniform case 0.25 each"))
}

// 9. adapter geometry

fn random_matrix(rng: &mut SeededRng, rows: usize, cols: usize) -> Matrix<f64> {
    Matrix::new(rows, cols, (0..rows * cols).map(|_| rng.unit() * 2.0 - 1.0).collect()).unwrap()
}

fn to_na(m: &Matrix<f64>) -> DMatrix<f64> {
    DMatrix::from_row_slice(m.rows, m.cols, &m.data)
}

fn from_na(m: &DMatrix<f64>) -> Matrix<f64> {
    let data = (0..m.nrows()).flat_map(|i| (0..m.ncols()).map(move |j| (i, j))).map(|ij| m[ij]).collect();
    Matrix::new(m.nrows(), m.ncols(), data).unwrap()
}

fn adapter(id: &str, modules: Vec<LoraModule<f64>>) -> LowRankUpdate<f64> {
    LowRankUpdate { adapter_id: id.into(), heuristic: "OT".into(), seed: None, modules }
}

fn random_adapter(rng: &mut SeededRng, id: &str) -> LowRankUpdate<f64> {
    let modules = ["mlp.down_proj", "self_attn.q_proj", "self_attn.v_proj"]
        .iter()
        .map(|&n| LoraModule { name: n.into(), a: random_matrix(rng, 4, 7), b: random_matrix(rng, 6, 4) })
        .collect();
    adapter(id, modules)
}

/// Cosine over `B·A` computed by nalgebra.
fn oracle_cosine(u: &LowRankUpdate<f64>, v: &LowRankUpdate<f64>) -> f64 {
    let flat = |x: &LowRankUpdate<f64>| {
        let mut ms: Vec<_> = x.modules.iter().collect();
        ms.sort_by(|p, q| p.name.cmp(&q.name));
        ms.iter().flat_map(|m| from_na(&(to_na(&m.b) * to_na(&m.a))).data).collect::<Vec<f64>>()
    };
    let (p, q) = (flat(u), flat(v));
    let dot: f64 = p.iter().zip(&q).map(|(x, y)| x * y).sum();
    dot / (p.iter().map(|x| x * x).sum::<f64>().sqrt() * q.iter().map(|x| x * x).sum::<f64>().sqrt())
}

fn geometry() -> Outcome {
    let mut rng = SeededRng::new(9);
    let cos = |u: &LowRankUpdate<f64>, v: &LowRankUpdate<f64>| cosine_streamed(u, v).map_err(|e| e.to_string());
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let u = random_adapter(&mut rng, "u");
        let v = random_adapter(&mut rng, "v");
        ensure!((cos(&u, &u.clone())? - 1.0).abs() <= 1e-9, "identical adapters");
        let mut neg = u.clone();
        for m in &mut neg.modules {
            m.b.data.iter_mut().for_each(|x| *x = -*x);
        }
        ensure!((cos(&u, &neg)? + 1.0).abs() <= 1e-9, "negated adapter");
        // streamed, materialized and nalgebra paths
        let streamed = cos(&u, &v)?;
        let dense = cosine_similarity(&effective_update(&u).unwrap(), &effective_update(&v).unwrap())
            .map_err(|e| e.to_string())?;
        let oracle = oracle_cosine(&u, &v);
        worst = worst.max((streamed - dense).abs()).max((streamed - oracle).abs());
        // invertible r×r mixing leaves B·A unchanged
        let mut mixed = u.clone();
        for m in &mut mixed.modules {
            let mix = loop {
                let c = to_na(&random_matrix(&mut rng, 4, 4));
                if c.determinant().abs() > 0.05 {
                    break c;
                }
            };
            let inv = mix.clone().try_inverse().ok_or("singular mixing matrix")?;
            m.b = from_na(&(to_na(&m.b) * &mix));
            m.a = from_na(&(inv * to_na(&m.a)));
        }
        let (x, y) = (effective_update(&u).unwrap(), effective_update(&mixed).unwrap());
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let err = x.iter().zip(&y).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt() / norm;
        ensure!(err <= 1e-9, "mixing changed the update by {err:e}");
    }
    ensure!(worst <= 1e-9, "paths disagree by {worst:e}");
    // disjoint support: nonzeros of B·A in different rows
    let one_row = |row: usize| {
        let mut b = Matrix::zeros(4, 1);
        b.data[row] = 1.0;
        LoraModule { name: "m".into(), a: Matrix::new(1, 3, vec![0.5, -2.0, 1.0]).unwrap(), b }
    };
    let c = cos(&adapter("x", vec![one_row(0)]), &adapter("y", vec![one_row(2)]))?;
    ensure!(c.abs() <= 1e-9, "disjoint support cosine {c}");
    Ok(format!("identity, negation, disjoint support and mixing hold; paths agree to {worst:.1e}"))
}

// 10 and 12. pipeline runs

fn table_mock(seed: u64) -> MockSpec {
    let bank = TemplateBank::balanced();
    let mut entries = Vec::new();
    for (c, v) in [(ProbeClass::Dd, 1.0), (ProbeClass::Rc, 1.02), (ProbeClass::Ot, 1.01), (ProbeClass::Neutral, 1.015)]
    {
        for t in bank.templates(c) {
            entries.push(TableEntry { context: None, continuation: t.clone(), losses: TableLosses::Uniform(v) });
        }
    }
    MockSpec {
        scoring: Some(LossRule::Sum {
            rules: vec![
                LossRule::Table { entries, fallback: Some(Box::new(LossRule::Constant { value: 1.0 })) },
                LossRule::Hash { seed, min: 0.0, max: 0.8 },
            ],
        }),
        generation: GenerationRule::Accuracy { p: 0.02, seed, proxy: OpsProxy::Load, per_modality: Default::default() },
        max_budget: 2048,
    }
}

fn pipeline_config(out: &Path) -> RunConfig {
    let mut cfg = RunConfig { output_dir: out.to_path_buf(), ..Default::default() };
    cfg.dataset.suite_count = 200;
    cfg.dataset.trace_count = 200;
    cfg.dataset.representations = vec![Representation::NumeralText, Representation::NumeralImage];
    cfg.probe.max_items = Some(144);
    cfg.backend.mock = table_mock(11);
    cfg
}

fn run_all(cfg: &RunConfig, commands: &[Command]) -> Result<(), String> {
    for c in commands {
        run(cfg, c).map_err(|e| format!("{c:?}: {e}"))?;
    }
    Ok(())
}

fn tree(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for e in std::fs::read_dir(&dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn determinism() -> Outcome {
    let full = [
        Command::Gen,
        Command::Render,
        Command::Eval,
        Command::Probe,
        Command::Contrast,
        Command::Ablate,
        Command::Report,
        Command::Verify { regenerate: true },
    ];
    let mut trees = Vec::new();
    let mut times = Vec::new();
    for _ in 0..2 {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let start = Instant::now();
        run_all(&pipeline_config(dir.path()), &full)?;
        times.push(start.elapsed());
        trees.push(tree(dir.path()));
    }
    ensure!(trees[0].len() > 20, "only {} files written", trees[0].len());
    let diff: Vec<_> =
        trees[0].iter().filter(|(k, v)| trees[1].get(*k) != Some(*v)).map(|(k, _)| k.display().to_string()).collect();
    ensure!(diff.is_empty() && trees[0].len() == trees[1].len(), "differing files: {diff:?}");
    let slowest = times.iter().max().unwrap();
    ensure!(*slowest < Duration::from_secs(120), "run took {slowest:?}");
    Ok(format!("{} files byte-identical; slowest run {slowest:.2?}", trees[0].len()))
}

// 11. number words

fn number_words() -> Outcome {
    let mut seen = HashSet::new();
    let mut failures = 0;
    let mut check = |n: u128, seen: &mut HashSet<String>| match to_words(n) {
        Ok(w) => {
            if parse_words(&w) != Some(n) || !seen.insert(w) {
                failures += 1;
            }
        }
        Err(_) => failures += 1,
    };
    for n in 0..=99_999u128 {
        check(n, &mut seen);
    }
    let mut rng = SeededRng::new(11);
    let mut drawn = HashSet::new();
    while drawn.len() < 10_000 {
        drawn.insert(rng.range_inclusive(1_000_000_000, 9_999_999_999) as u128);
    }
    for n in drawn {
        check(n, &mut seen);
    }
    ensure!(to_words(47).ok().as_deref() == Some("forty-seven"), "47 spelled {:?}", to_words(47));
    ensure!(failures == 0, "{failures} failures");
    Ok("109999 values round-trip with distinct spellings".into())
}

// 12. golden probe aggregate

const GOLDEN: &str = "tests/golden/probe_aggregate_balanced.csv";

fn golden_aggregate() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut cfg = pipeline_config(dir.path());
    cfg.dataset.suite_count = 20;
    run_all(&cfg, &[Command::Gen, Command::Render, Command::Probe])?;
    let agg = parse_file(&cfg.out("probe/aggregate_balanced.csv")).map_err(|e| e.to_string())?;
    let body = String::from_utf8(agg.body).map_err(|e| e.to_string())?;

    // arithmetic: recompute a few cells from the per-item results
    let results: Vec<ProbeResult<f64>> =
        mulprobe_cli::output::read_jsonl(&cfg.out("probe/results_balanced.jsonl")).map_err(|e| e.to_string())?;
    let cell = |metric: &str, class: &str, modality: &str| -> Option<(usize, f64, f64)> {
        body.lines().find_map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0] == metric && f[1] == class && f[2] == modality)
                .then(|| (f[3].parse().unwrap(), f[4].parse().unwrap(), f[5].parse().unwrap()))
        })
    };
    for (modality, rep) in [("text", Representation::NumeralText), ("image", Representation::NumeralImage)] {
        let rs: Vec<&ProbeResult<f64>> = results.iter().filter(|r| r.representation == rep).collect();
        ensure!(rs.len() == 144, "{modality}: {} items, want 144", rs.len());
        for c in ProbeClass::HEURISTICS {
            let v: Vec<f64> = rs.iter().map(|r| r.loss.to_array()[c.index()] - r.loss.neutral).collect();
            let n = v.len() as f64;
            let m = v.iter().sum::<f64>() / n;
            let se = (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt() / n.sqrt();
            let (cn, cm, cse) = cell("delta_loss", c.as_str(), modality).ok_or("missing delta_loss row")?;
            ensure!(
                cn == 144 && (cm - m).abs() <= 5e-5 && (cse - se).abs() <= 5e-5,
                "{modality} {c:?}: {cm} {cse} vs {m} {se}"
            );
        }
        for c in ProbeClass::ALL {
            let share = rs.iter().filter(|r| r.winner == c).count() as f64 / rs.len() as f64;
            let (_, cm, cse) = cell("winner_share", c.as_str(), modality).ok_or("missing winner_share row")?;
            let se = (share * (1.0 - share) / rs.len() as f64).sqrt();
            ensure!((cm - share).abs() <= 5e-5 && (cse - se).abs() <= 5e-5, "{modality} winner {c:?}");
        }
    }

    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join(GOLDEN);
    if std::env::var_os("MULPROBE_BLESS").is_some() {
        std::fs::create_dir_all(path.parent().unwrap()).map_err(|e| e.to_string())?;
        std::fs::write(&path, &body).map_err(|e| e.to_string())?;
    }
    let golden = std::fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
    ensure!(golden == body, "aggregate differs from {GOLDEN}:\n{body}");
    Ok(format!("{} rows match the golden file; cells recomputed", body.lines().count() - 1))
}

fn main() {
    let criteria: [Criterion; 12] = [
        ("load metric", load_metric),
        ("load identities", load_identities),
        ("HDS labels", hds_labels),
        ("trace oracle", trace_oracle),
        ("contrastive pairs", contrastive_pairs),
        ("logistic fit recovery", logistic_recovery),
        ("error-rate recovery", error_rate_recovery),
        ("probe and likelihood-ratio equivalence", probe_equivalence),
        ("adapter geometry", geometry),
        ("pipeline determinism", determinism),
        ("number words", number_words),
        ("golden probe aggregate", golden_aggregate),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        if !filter.is_empty() && !filter.iter().any(|p| name.contains(p.as_str())) {
            continue;
        }
        let result = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        match result {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {why}", i + 1);
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
