use cesaro_core::magnitude::{LeveledMagnitude as Lm, SignedMagnitude as Sm};
use cesaro_core::moduli::ModulusSpec;
use cesaro_core::spaces::LpSpace;
use cesaro_core::verify;
use proptest::prelude::*;

fn stacked(level: u32, tiny: bool, m: f64) -> Lm {
    let mut x = Lm::from_f64(m).unwrap();
    if level == 0 {
        return x;
    }
    for _ in 1..level {
        x = Lm::exp10(Sm::positive(x));
    }
    let e = Sm::positive(x);
    Lm::exp10(if tiny { e.neg() } else { e })
}

fn any_lm() -> impl Strategy<Value = Lm> {
    prop_oneof![
        (-15.0..15.0f64).prop_map(|e| Lm::from_f64(10f64.powf(e)).unwrap()),
        (1..4u32, any::<bool>(), 16.0..1e12f64).prop_map(|(l, t, m)| stacked(l, t, m)),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 2000, rng_seed: proptest::test_runner::RngSeed::Fixed(7), ..ProptestConfig::default() })]

    #[test]
    fn text_round_trip(x in any_lm()) {
        let back: Lm = format!("{x:#}").parse().unwrap();
        prop_assert!(back.mantissa_rel_diff(&x) <= 1e-12, "{x:#} -> {back:#}");
    }

    #[test]
    fn mul_commutes_and_recip_inverts(a in any_lm(), b in any_lm()) {
        if let (Ok(ab), Ok(ba)) = (a.mul(&b), b.mul(&a)) {
            prop_assert_eq!(ab, ba);
        }
        let r = a.recip().unwrap().recip().unwrap();
        prop_assert!(r.mantissa_rel_diff(&a) <= 1e-12);
    }

    #[test]
    fn order_is_monotone_under_exp10(a in -1e6..1e6f64, b in -1e6..1e6f64) {
        let (x, y) = (Lm::exp10(Sm::from_f64(a)), Lm::exp10(Sm::from_f64(b)));
        prop_assert_eq!(x.cmp(&y), a.partial_cmp(&b).unwrap());
    }

    #[test]
    fn rademacher_witness_replays(p in 1.0..1.2f64, c in 1.0..1.3f64, seed in 0..1000u64) {
        let s = LpSpace::new(2, p).unwrap();
        let pts = verify::random_batch(&s, 6, seed, 1);
        let v = verify::rademacher_check(&s, &pts, 2.0, c).unwrap();
        if !v.passed {
            let w = v.witness.unwrap();
            prop_assert!(!verify::rademacher_check(&s, &w.points, 2.0, c).unwrap().passed);
        }
    }

    #[test]
    fn modulus_witness_replays(seed in 0..1000u64, p in 1.05..1.5f64) {
        let s = LpSpace::new(3, p).unwrap();
        let v = verify::modulus_check(&s, &ModulusSpec::Hilbert, 50, seed).unwrap();
        if let Some(w) = v.witness.filter(|_| !v.passed) {
            let (x, y) = (&w.points[0], &w.points[1]);
            let eps = s.dist(x, y);
            let mid: Vec<f64> = x.iter().zip(y).map(|(a, b)| 0.5 * (a + b)).collect();
            prop_assert!(s.norm_of(&mid) > 1.0 - ModulusSpec::Hilbert.eval(eps));
        }
    }
}
