use forge_core::jumpkernel::{analyze_site, gram_f, gram_g_accessible, gram_g_inaccessible, JumpSite, SiteChild};
use forge_core::linalg::is_psd;
use forge_core::random;
use forge_core::scalar::Scalar;
use forge_core::Rational;
use proptest::prelude::*;

fn site(seed: u64, accessible: bool) -> JumpSite<Rational> {
    let mut g = random::rng(seed);
    if accessible {
        JumpSite::Accessible(random::accessible_site(&mut g, 4))
    } else {
        JumpSite::Inaccessible(random::inaccessible_site(&mut g, 4))
    }
}

fn to_float(c: &SiteChild<Rational>) -> SiteChild<f64> {
    SiteChild { prob: c.prob.to_f64(), w: c.w.iter().map(Scalar::to_f64).collect(), nu: c.nu.to_f64(), delta: c.delta.to_f64() }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn gram_matrices_are_symmetric_psd(seed in any::<u64>(), accessible in any::<bool>()) {
        let s = site(seed, accessible);
        let gf = gram_f(&s);
        let gg = match &s {
            JumpSite::Accessible(a) => gram_g_accessible(a).unwrap(),
            JumpSite::Inaccessible(i) => gram_g_inaccessible(i).unwrap(),
        };
        for m in [gf, gg] {
            prop_assert!(m.is_symmetric());
            prop_assert!(is_psd(&m));
        }
    }

    #[test]
    fn generated_sites_pass_every_check(seed in any::<u64>(), accessible in any::<bool>()) {
        let r = analyze_site(&site(seed, accessible));
        prop_assert!(r.all_ok(), "{:?}", r.xi);
        prop_assert_eq!(r.density.total, Rational::from_int(1));
    }

    #[test]
    fn float_backend_tracks_exact(seed in any::<u64>(), accessible in any::<bool>()) {
        let s = site(seed, accessible);
        let kids: Vec<SiteChild<f64>> = s.children().iter().map(to_float).collect();
        let f = match &s {
            JumpSite::Accessible(_) => JumpSite::Accessible(forge_core::jumpkernel::AccessibleSite::new(s.d(), kids).unwrap()),
            JumpSite::Inaccessible(_) => JumpSite::Inaccessible(forge_core::jumpkernel::InaccessibleSite::new(s.d(), kids).unwrap()),
        };
        let exact = analyze_site(&s).xi.unwrap().solution;
        let float = analyze_site(&f).xi.unwrap().solution;
        for (a, b) in exact.iter().zip(&float) {
            prop_assert!((a.to_f64() - b).abs() <= 1e-9 * a.to_f64().abs().max(1.0), "{} vs {}", a, b);
        }
    }
}
