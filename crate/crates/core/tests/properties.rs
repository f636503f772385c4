use countersmt::continuous;
use countersmt::discrete::{self, binarize, replicate, BruteBackend, CountOptions, EstimateKind};
use countersmt::hashing::pick_hash;
use countersmt::ppl::{self, Mode, ValueOptions};
use countersmt::reference::{self, grid, OracleBudget};
use countersmt::{rat, Rat};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use countersmt_validation::{random_ia, random_ra};

fn brute() -> BruteBackend {
    BruteBackend(OracleBudget::default())
}

fn small_program() -> impl Strategy<Value = String> {
    let pred = prop_oneof![
        Just("x < y"),
        Just("x + y >= 3"),
        Just("x = 2"),
        Just("y != 1"),
        Just("2 * x - y <= 1"),
    ];
    let tail = prop_oneof![Just("accept;"), Just("reject;"), Just("skip;")];
    (pred.clone(), pred, tail.clone(), tail.clone(), tail, any::<bool>()).prop_map(|(p, q, t1, t2, t3, choose)| {
        let split = if choose {
            format!("choice {{ {t1} }} or {{ if ({q}) {{ {t2} }} else {{ {t3} }} }}")
        } else {
            format!("if ({q}) {{ {t1} }} else {{ {t2} }}")
        };
        format!("x ~ uniform(0, 3); y ~ uniform(0, 2); if ({p}) {{ {split} }} else {{ {t3} }}")
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn exact_mode_matches_oracle(seed in any::<u64>()) {
        let f = random_ia(&mut ChaCha8Rng::seed_from_u64(seed), 10);
        let want = reference::exact_count_int(&f, &OracleBudget::default()).unwrap();
        let opts = CountOptions { a: 5000, ..CountOptions::default() };
        let got = discrete::approx_count_int(&f, &opts, &brute()).unwrap();
        prop_assert_eq!(got.kind, EstimateKind::Exact);
        prop_assert_eq!(got.value, want as f64);
    }

    #[test]
    fn enumeration_order_is_irrelevant(seed in any::<u64>()) {
        let f = random_ia(&mut ChaCha8Rng::seed_from_u64(seed), 10);
        let b = OracleBudget::default();
        prop_assert_eq!(reference::exact_count(&f, &b, false).unwrap(), reference::exact_count(&f, &b, true).unwrap());
    }

    #[test]
    fn binarization_preserves_count(seed in any::<u64>()) {
        let f = random_ia(&mut ChaCha8Rng::seed_from_u64(seed), 8);
        let b = OracleBudget::default();
        let bz = binarize(&f).unwrap();
        prop_assert_eq!(reference::exact_count(&bz.psi, &b, false).unwrap(), reference::exact_count_int(&f, &b).unwrap());
    }

    #[test]
    fn squaring_law(seed in any::<u64>()) {
        let f = random_ia(&mut ChaCha8Rng::seed_from_u64(seed), 5);
        let b = OracleBudget::default();
        let n = reference::exact_count_int(&f, &b).unwrap();
        let (psi2, bits) = replicate(&binarize(&f).unwrap(), 2).unwrap();
        prop_assert_eq!(bits.len() as u64, psi2.free.len() as u64);
        prop_assert_eq!(reference::exact_count(&psi2, &b, false).unwrap(), n * n);
    }

    #[test]
    fn presolved_hash_accepts_the_same_points(k in 1usize..10, m in 1usize..6, seed in any::<u64>(), point in any::<u16>()) {
        let m = m.min(k);
        let h = pick_hash(k, m, &mut ChaCha8Rng::seed_from_u64(seed));
        let names: Vec<String> = (0..k).map(|i| format!("b{i}")).collect();
        let bits: Vec<bool> = (0..k).map(|i| point >> i & 1 == 1).collect();
        let asg = names.iter().zip(&bits).map(|(n, b)| (n.clone(), rat::int(*b as i64))).collect();
        let direct = h.apply(&bits).unwrap().iter().all(|b| !b);
        prop_assert_eq!(h.constraint(&names).eval(&asg).unwrap(), direct);
        prop_assert_eq!(h.constraint_presolved(&names).eval(&asg).unwrap(), direct);
    }

    #[test]
    fn formal_grid_error_within_half_gamma(seed in any::<u64>(), k in 1usize..=2) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = random_ra(&mut rng, k, 3);
        let gamma = rat::frac(1, 2);
        let scaled = continuous::scale(&f).unwrap();
        let g = continuous::grid_params(&scaled, &gamma, None, 1, u64::MAX).unwrap();
        let sf = &scaled.f;
        let (st, truth) = if k == 1 {
            (grid::cells_1d(&sf.body, &sf.free[0], &[], g.s).unwrap(), reference::geometry::length_1d(&f.body, &f.free[0], &[]).unwrap())
        } else {
            (grid::cells_2d(&sf.body, &sf.free[0], &sf.free[1], g.s).unwrap(), reference::geometry::area_2d(&f.body, &f.free[0], &f.free[1]).unwrap())
        };
        let cell = g.delta.clone().pow(k as i32) * &scaled.jacobian;
        let inner = Rat::from_integer((st.meets - st.cut).into()) * &cell;
        let outer = Rat::from_integer(st.meets.into()) * &cell;
        prop_assert!(inner <= truth && truth <= outer);
        prop_assert!(&outer - &inner <= &gamma / rat::int(2));
    }

    #[test]
    fn program_values_agree(src in small_program()) {
        let p = ppl::parse_program(&src).unwrap();
        let b = OracleBudget::default();
        let m = reference::exact_measures(&p, &b).unwrap();
        let at = ppl::acc_term_formulas(&p).unwrap();
        // Formula counts equal scenario counts.
        prop_assert_eq!(Rat::from_integer(reference::exact_count(&at.acc, &b, false).unwrap().into()), m.acc.clone());
        prop_assert_eq!(Rat::from_integer(reference::exact_count(&at.term, &b, false).unwrap().into()), m.term.clone());
        if m.term > Rat::from_integer(0.into()) {
            let upper = reference::exact_value(&p, &b).unwrap();
            let lower = reference::exact_lower_value(&p, &b).unwrap();
            prop_assert_eq!(&lower, &(rat::int(1) - reference::exact_value(&p.dualize(), &b).unwrap()));
            prop_assert!(lower <= upper);
            // A large a keeps both counts on the exact path.
            let opts = ValueOptions { count: CountOptions { a: 5000, ..CountOptions::default() }, ..ValueOptions::default() };
            let r = ppl::estimate_value(&p, Mode::Upper, &opts, &brute()).unwrap();
            prop_assert_eq!(r.value, rat::to_f64(&upper));
            let l = ppl::estimate_value(&p, Mode::Lower, &opts, &brute()).unwrap();
            prop_assert!((l.value - rat::to_f64(&lower)).abs() < 1e-12);
        }
    }
}
