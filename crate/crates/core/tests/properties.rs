use mbump_core::dyadic::Lattice;
use mbump_core::reducing::MveeOptions;
use mbump_core::verify::{estimate_norm, OperatorSpec, WeightedOperator};
use mbump_core::weights::gen_random_field;
use mbump_core::young::{luxemburg_norm, YoungFn};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn holder_with_associate(r in 1.2f64..5.0, f in prop::collection::vec(0.01f64..100.0, 1..40), seed in any::<u64>()) {
        let phi = YoungFn::power(r).unwrap();
        let phi_bar = phi.associate().unwrap();
        let g: Vec<f64> = f.iter().enumerate().map(|(i, x)| (seed.rotate_left(i as u32) % 1000) as f64 / 10.0 + 1.0 / x).collect();
        let lhs = f.iter().zip(&g).map(|(a, b)| a * b).sum::<f64>() / f.len() as f64;
        let rhs = 2.0 * luxemburg_norm(&f, &phi).unwrap() * luxemburg_norm(&g, &phi_bar).unwrap();
        prop_assert!(lhs <= rhs * (1.0 + 1e-12), "{lhs} > {rhs}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn estimates_never_decrease_with_budget(seed in any::<u64>(), n in 1usize..=2, extra in 1usize..6) {
        let lat = Lattice::new(1, 4).unwrap();
        let u = gen_random_field(lat, n, seed, 8.0, 0.7).unwrap();
        let v = gen_random_field(lat, n, seed ^ 1, 8.0, 0.7).unwrap();
        let op = WeightedOperator::new(OperatorSpec::FracIntegral { alpha: 0.5 }, &u, &v, 2.0, 2.0, &MveeOptions::default()).unwrap();
        let small = estimate_norm(&op, 2.0, 2.0, 2, seed).unwrap().value;
        let large = estimate_norm(&op, 2.0, 2.0, 2 + extra, seed).unwrap().value;
        prop_assert!(large >= small);
    }
}
