//! Invariants checked on generated inputs.

use navsto::dynamics::{chi_r, chi_r_derivative, Mode, Scheme, SimConfig, Stepper};
use navsto::nonlinearity::{b_direct, PseudoSpectral};
use navsto::selection::{argmax_set, enumerate_funnel, flow_from, Sign};
use navsto::spectral::io::{read_snapshot, snapshot_bytes};
use navsto::spectral::{
    from_physical, leray_project, mode_count, random_divfree_field, to_physical, Profile, RawField,
    SpectralField,
};
use navsto::verifier::Verdict;
use navsto::Complex64;
use proptest::prelude::*;

fn field() -> impl Strategy<Value = SpectralField> {
    (2usize..=4, 0.1f64..10.0, 1.0f64..4.0, any::<u64>())
        .prop_map(|(n, amp, exp, seed)| random_divfree_field(n, &Profile::power_law(amp, exp), seed))
}

fn field_pair() -> impl Strategy<Value = (SpectralField, SpectralField)> {
    (2usize..=4, 0.1f64..10.0, 1.0f64..4.0, any::<u64>()).prop_map(|(n, amp, exp, seed)| {
        let p = Profile::power_law(amp, exp);
        (random_divfree_field(n, &p, seed), random_divfree_field(n, &p, seed ^ 0x9e37_79b9))
    })
}

fn raw_field() -> impl Strategy<Value = RawField> {
    (1usize..=3).prop_flat_map(|n| {
        prop::collection::vec(-1.0f64..1.0, 6 * mode_count(n)).prop_map(move |xs| {
            let mut i = 0;
            RawField::from_fn(n, |_| {
                let c = |j: usize| Complex64::new(xs[j], xs[j + 1]);
                let v = [c(i), c(i + 2), c(i + 4)];
                i += 6;
                v
            })
        })
    })
}

fn max_diff(a: &SpectralField, b: &SpectralField) -> f64 {
    a.coeffs()
        .iter()
        .zip(b.coeffs())
        .flat_map(|(x, y)| x.iter().zip(y).map(|(p, q)| (p - q).norm()))
        .fold(0.0, f64::max)
}

fn verdict() -> impl Strategy<Value = Verdict> {
    prop_oneof![Just(Verdict::Pass), Just(Verdict::Fail), Just(Verdict::Inconclusive)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn nonlinearity_is_skew_in_its_second_slot((u, v) in field_pair()) {
        let mut ps = PseudoSpectral::new(u.resolution(), 1.5).unwrap();
        let b = ps.b_uv(&u, &v);
        let scale = b.norm_h() * v.norm_h();
        prop_assert!(b.inner(&v).abs() <= 1e-12 * scale.max(f64::MIN_POSITIVE));
        prop_assert!(b.divergence_residual() <= 1e-12 * b.norm_h().max(1.0));
    }

    #[test]
    fn pseudo_spectral_matches_the_direct_sum((u, v) in field_pair()) {
        prop_assume!(u.resolution() <= 3);
        let mut ps = PseudoSpectral::new(u.resolution(), 1.5).unwrap();
        let fast = ps.b_uv(&u, &v);
        let slow = b_direct(&u, &v).unwrap();
        prop_assert!(max_diff(&fast, &slow) <= 1e-10 * slow.norm_h().max(1e-300));
    }

    #[test]
    fn leray_projection_is_idempotent(raw in raw_field()) {
        let once = leray_project(raw);
        prop_assert!(once.divergence_residual() <= 1e-14 * once.norm_h().max(1.0));
        let twice = leray_project(once.clone().into_raw());
        prop_assert!(max_diff(&once, &twice) <= 1e-15 * once.norm_h().max(1.0));
    }

    #[test]
    fn physical_roundtrip(u in field()) {
        let n = u.resolution();
        let back = from_physical(&to_physical(&u, 2 * n + 2).unwrap(), n).unwrap();
        prop_assert!(max_diff(&u, &back) <= 1e-12 * u.norm_h().max(1.0));
    }

    #[test]
    fn snapshot_roundtrip_is_bitwise(u in field()) {
        let back = read_snapshot(snapshot_bytes(&u).as_slice()).unwrap();
        prop_assert_eq!(back, u);
    }

    #[test]
    fn config_text_roundtrip(
        n in 1usize..10,
        nu in 0.05f64..5.0,
        dt in prop::sample::select(vec![5e-4, 1e-3, 2e-3, 0.02]),
        steps in 0usize..200,
        mode in prop::sample::select(vec![Mode::Full, Mode::Cutoff, Mode::Deterministic, Mode::Auxiliary, Mode::Linearized]),
        cutoff in 1.0f64..1e6,
        alpha0 in 0.17f64..2.0,
        q0 in 1e-3f64..1e4,
        seed in any::<u64>(),
        stride in 0usize..10,
        n_max in 1usize..4,
        nonlinear in any::<bool>(),
        noise_scale in 0.0f64..3.0,
        init_amplitude in 0.0f64..5.0,
    ) {
        let cfg = SimConfig {
            n, nu, dt, horizon: steps as f64 * dt, scheme: Scheme::ExpoEm, mode, cutoff, alpha0, q0, seed,
            snapshot_stride: stride, n_max, nonlinear, noise_scale, init_amplitude,
            ..SimConfig::default()
        };
        prop_assume!(cfg.validate().is_ok());
        let back = SimConfig::from_text(&cfg.to_text()).unwrap();
        prop_assert_eq!(&back, &cfg);
        prop_assert_eq!(back.to_text(), cfg.to_text());
    }

    #[test]
    fn cutoff_weight_is_a_monotone_bump(r in 0.0f64..200.0, dr in 0.0f64..5.0, big_r in 1.0f64..100.0) {
        let (a, b) = (chi_r(r, big_r), chi_r(r + dr, big_r));
        prop_assert!((0.0..=1.0).contains(&a));
        prop_assert!(b <= a);
        let d = chi_r_derivative(r, big_r);
        prop_assert!((-1.5..=0.0).contains(&d));
        if r <= big_r + 1.0 { prop_assert_eq!(a, 1.0); }
        if r >= big_r + 2.0 { prop_assert_eq!(a, 0.0); }
    }

    #[test]
    fn cutoff_derivative_matches_difference_quotient(x in 0.01f64..0.99, big_r in 1.0f64..100.0) {
        let r = big_r + 1.0 + x;
        let h = 1e-6;
        let fd = (chi_r(r + h, big_r) - chi_r(r - h, big_r)) / (2.0 * h);
        prop_assert!((fd - chi_r_derivative(r, big_r)).abs() <= 1e-6);
    }

    #[test]
    fn noise_is_a_function_of_its_key(n in 2usize..=4, path in any::<u64>(), step in 0usize..1000) {
        let st = Stepper::new(&SimConfig { n, ..SimConfig::default() }).unwrap();
        let a = st.noise(path, step).unwrap();
        prop_assert_eq!(&a, &st.noise(path, step).unwrap());
        prop_assert_ne!(&a, &st.noise(path.wrapping_add(1), step).unwrap());
        prop_assert_ne!(&a, &st.noise(path, step + 1).unwrap());
        prop_assert!(a.divergence_residual() <= 1e-12 * a.norm_h());
    }

    #[test]
    fn argmax_set_is_scale_invariant(
        values in prop::collection::vec(-1e3f64..1e3, 1..20),
        ties in prop::collection::vec(any::<bool>(), 20),
        c in prop::sample::select(vec![0.125, 0.5, 1.0, 2.0, 1024.0]),
    ) {
        let best = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        // force some exact ties with the maximum
        let vs: Vec<(usize, f64)> = values.iter().enumerate()
            .map(|(i, &v)| (i, if ties[i] { best } else { v }))
            .collect();
        let scaled: Vec<(usize, f64)> = vs.iter().map(|&(i, v)| (i, c * v)).collect();
        let set = argmax_set(&vs);
        prop_assert!(!set.is_empty());
        prop_assert_eq!(&set, &argmax_set(&scaled));
        for (i, v) in &vs {
            if *v == best { prop_assert!(set.contains(i)); }
        }
    }

    #[test]
    fn funnel_is_closed_under_later_branching(ks in 0usize..100, kd in 0usize..100, plus in any::<bool>()) {
        let (h, dt) = (2.0, 0.01);
        let s = ks as f64 * dt;
        let delta = kd as f64 * dt;
        let sign = if plus { Sign::Plus } else { Sign::Minus };
        let funnel = enumerate_funnel(0.0, h, &[s], dt).unwrap();
        let p = funnel.paths.iter().find(|p| p.sign == sign).unwrap();
        let later = enumerate_funnel(0.0, h, &[s + delta], dt).unwrap();
        prop_assert!(later.find(&p.shifted(delta), 0.0).is_some());
    }

    #[test]
    fn nonzero_flow_is_a_semigroup_on_the_grid(a in -5.0f64..5.0, k in 1usize..150, j in 1usize..150) {
        prop_assume!(a.abs() > 1e-6);
        let dt = 0.01;
        let full = flow_from(a, 3.0, dt).unwrap();
        let restarted = flow_from(full[k], 3.0, dt).unwrap();
        prop_assert!((full[k + j] - restarted[j]).abs() <= 1e-12 * full[k + j].abs());
        // the flow moves away from zero and keeps its sign
        prop_assert!(full[k].abs() >= a.abs() && full[k].signum() == a.signum());
    }

    #[test]
    fn verdicts_combine_as_a_semilattice(a in verdict(), b in verdict(), c in verdict()) {
        prop_assert_eq!(a.combine(b), b.combine(a));
        prop_assert_eq!(a.combine(b).combine(c), a.combine(b.combine(c)));
        prop_assert_eq!(a.combine(a), a);
        prop_assert_eq!(a.combine(Verdict::Pass), a);
        prop_assert_eq!(a.combine(Verdict::Fail), Verdict::Fail);
    }
}
