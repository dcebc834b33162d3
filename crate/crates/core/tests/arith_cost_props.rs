use mulprobe_core::arith::{compute_load, exact_multiply, sample_operand, DigitTemplate, TemplateMode};
use mulprobe_core::cost::{cost_breakdown, label_target, HeuristicKind, DEFAULT_BASES};
use mulprobe_core::{CostParams, Operand, SeededRng};
use num_bigint::BigUint;
use proptest::prelude::*;

fn operand() -> impl Strategy<Value = Operand> {
    (1usize..=12).prop_flat_map(|n| (1u8..=9, proptest::collection::vec(0u8..=9, n - 1))).prop_map(|(lead, rest)| {
        let mut d = vec![lead];
        d.extend(rest);
        Operand::from_digits(&d).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn load_identities(a in operand(), b in operand()) {
        let l = compute_load(&a, &b);
        let (n, m) = (a.n_digits() as u64, b.n_digits() as u64);
        let (s, t) = (a.n_nonzero() as u64, b.n_nonzero() as u64);
        prop_assert_eq!(l.load_c, (n + m) * (s + t));
        prop_assert_eq!(l.load_c, n * s + n * t + m * s + m * t);
        prop_assert!(4 * s * t <= l.load_c);
    }

    #[test]
    fn multiply_commutes_and_matches_bigint(a in operand(), b in operand()) {
        let p = exact_multiply(&a, &b);
        prop_assert_eq!(&p, &exact_multiply(&b, &a));
        prop_assert_eq!(p, a.value() * b.value());
    }

    #[test]
    fn labels_commute(a in 2u64..5000, b in 2u64..5000) {
        let p = CostParams::default();
        let (oa, ob) = (Operand::from_u64(a), Operand::from_u64(b));
        let x = label_target(&oa, &ob, p.margin_min, &p).unwrap();
        let y = label_target(&ob, &oa, p.margin_min, &p).unwrap();
        prop_assert_eq!(x.map(|l| (l.target, l.margin)), y.map(|l| (l.target, l.margin)));
    }

    #[test]
    fn scaling_weights_keeps_labels(a in 2u64..3000, b in 2u64..3000, k in prop::sample::select(vec![0.5, 2.0, 4.0, 8.0])) {
        // powers of two keep every cost exactly proportional
        let p = CostParams::default();
        let q = p.scaled(k);
        let (oa, ob) = (Operand::from_u64(a), Operand::from_u64(b));
        let x = label_target(&oa, &ob, p.margin_min, &p).unwrap();
        let y = label_target(&oa, &ob, q.margin_min, &q).unwrap();
        prop_assert_eq!(x.as_ref().map(|l| l.target), y.as_ref().map(|l| l.target));
        if let (Some(x), Some(y)) = (x, y) {
            prop_assert_eq!(x.margin * k, y.margin);
        }
    }
}

#[test]
fn multiply_matches_repeated_addition_below_1000() {
    let mut rng = SeededRng::new(17);
    for _ in 0..2000 {
        let (a, b) = (1 + rng.below(999), 1 + rng.below(999));
        let mut acc = BigUint::from(0u32);
        for _ in 0..b {
            acc += a;
        }
        assert_eq!(exact_multiply(&Operand::from_u64(a), &Operand::from_u64(b)), acc, "{a} × {b}");
    }
}

#[test]
fn am_gm_bound_is_tight() {
    for v in [7u64, 46, 999, 123456] {
        let o = Operand::from_u64(v);
        let l = compute_load(&o, &o);
        assert_eq!(4 * (o.n_nonzero() * o.n_nonzero()) as u64, l.load_c, "{v}");
    }
}

#[test]
fn template_sampling_is_seed_deterministic() {
    let t = DigitTemplate::parse_with_mode("VV0V", TemplateMode::Extended).unwrap();
    let draw = |seed| {
        let mut rng = SeededRng::new(seed);
        (0..50).map(|_| sample_operand(&t, &mut rng)).collect::<Vec<_>>()
    };
    assert_eq!(draw(5), draw(5));
    assert_ne!(draw(5), draw(6));
}

#[test]
fn near_base_symmetric_pairs_favour_rc() {
    let p = CostParams::default();
    for base in DEFAULT_BASES {
        for k in 1..=5 {
            let (a, b) = (Operand::from_u64(base - k), Operand::from_u64(base + k));
            let c = cost_breakdown(&a, &b, &p).unwrap();
            let rc = c.cost(HeuristicKind::Rc).unwrap();
            for h in [HeuristicKind::Ot, HeuristicKind::Dd] {
                assert!(rc <= c.cost(h).unwrap(), "{base}±{k}: RC {rc} vs {h} {:?}", c.cost(h));
            }
        }
    }
}
