mod common;

use common::*;
use forge_core::enlarge::{compute_u, drift, gauge_drift, solve_phi, verify_g_compensator};
use forge_core::fixtures;
use forge_core::mrp::Driver;
use forge_core::random;
use forge_core::space::{build_initial_enlargement, build_progressive_enlargement, check_refinement};
use forge_core::{EnlargementPair, Process, RandomTime, Rational};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn builders_refine_the_base(keys in proptest::collection::vec(0u8..3, 8), times in proptest::collection::vec(proptest::option::of(0usize..=2), 8)) {
        let fx = fixtures::b2n::<Rational>();
        let f = &fx.filtration;
        let initial = build_initial_enlargement(f, &keys);
        let pair = EnlargementPair::new(fx.space.clone(), f.clone(), initial.clone()).unwrap();
        prop_assert!(check_refinement(&pair).unwrap());
        // G_0 separates exactly the key classes inside F_0.
        for a in 0..8 {
            for b in 0..8 {
                prop_assert_eq!(initial.at(0).atom_of(a) == initial.at(0).atom_of(b), keys[a] == keys[b]);
            }
        }
        let tau = RandomTime::new(times);
        let progressive = build_progressive_enlargement(f, &tau);
        let pair = EnlargementPair::new(fx.space.clone(), f.clone(), progressive.clone()).unwrap();
        prop_assert!(check_refinement(&pair).unwrap());
        prop_assert!(tau.is_stopping_time(&progressive));
    }

    #[test]
    fn gauge_reproduces_the_drift(seed in any::<u64>()) {
        let fx = fixtures::b2n::<Rational>();
        let pair = fx.pair();
        let w = Driver::new(fx.driver.clone(), &fx.filtration, &fx.space).unwrap();
        let gauge = solve_phi(&pair, w.process(), &w).unwrap();
        let x = random::martingale(&mut random::rng(seed), &fx.filtration, &w);
        let gamma = drift(&x, &pair).unwrap();
        prop_assert_eq!(&gamma, &compensator_brute(&x, &fx.expanded, &fx.space));
        prop_assert_eq!(&gamma, &gauge_drift(&gauge, &x, &fx.filtration, &fx.space).unwrap());
        prop_assert!(is_martingale_brute(&x.sub(&gamma).unwrap(), &fx.expanded, &fx.space));
    }

    #[test]
    fn g_compensator_of_adapted_processes(seed in any::<u64>()) {
        let fx = fixtures::b2n::<Rational>();
        let pair = fx.pair();
        let w = Driver::new(fx.driver.clone(), &fx.filtration, &fx.space).unwrap();
        let gauge = solve_phi(&pair, w.process(), &w).unwrap();
        let a: Process<Rational> = random::adapted_process(&mut random::rng(seed), &fx.filtration);
        prop_assert!(verify_g_compensator(&a, &pair, &gauge).unwrap().is_ok());
        prop_assert_eq!(compute_u(&pair, &gauge), gauge.u.clone());
    }

    #[test]
    fn independent_noise_leaves_the_gauge_trivial(seed in any::<u64>(), p1 in 1i64..=9) {
        let fx = random::viable_market::<Rational>(&mut random::rng(seed), 2);
        let noisy = with_noise(&fx, q(p1, 10));
        let w = Driver::new(noisy.driver.clone(), &noisy.filtration, &noisy.space).unwrap();
        let gauge = solve_phi(&noisy.pair(), w.process(), &w).unwrap();
        prop_assert!(gauge.phi.values().iter().all(|v| *v == q(0, 1)));
        prop_assert!(gauge.u.values().iter().all(|v| *v == q(1, 1)));
        prop_assert!(gauge.support_ok && gauge.u_positive);
    }
}
