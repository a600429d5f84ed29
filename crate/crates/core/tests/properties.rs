use disorder_lab::chaos::{chaos_oracle, continuum_kernel_psi, ChaosCoefficients, ContinuumKernel};
use disorder_lab::disorder::{DisorderSpec, EtaField, SiteSet};
use disorder_lab::marginal::limit_lognormal_params;
use disorder_lab::partition::{Endpoint, PinningPlan};
use disorder_lab::renewal::{build_renewal_law, overlap_prefix, renewal_mass, SlowlyVarying};
use disorder_lab::scaling::free_energy_estimate;
use disorder_lab::stats::{ks_two_sample, MomentAccumulator};
use proptest::prelude::*;

fn eta(values: Vec<f64>) -> EtaField {
    EtaField { sites: SiteSet::line(values.len()), values, beta: 0.0, h: 0.0 }
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1e-300)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn kernel_is_symmetric(
        mut times in prop::collection::vec(0.01f64..5.0, 1..6),
        alpha in 0.05f64..0.95,
        seed in any::<u64>(),
    ) {
        let kernel = ContinuumKernel::Alpha { alpha };
        let Ok(v) = continuum_kernel_psi(&kernel, &times) else { return Ok(()) };
        // a deterministic shuffle
        let len = times.len();
        for i in (1..len).rev() {
            times.swap(i, (seed.rotate_left(i as u32) % (i as u64 + 1)) as usize);
        }
        prop_assert_eq!(v, continuum_kernel_psi(&kernel, &times).unwrap());
    }

    #[test]
    fn oracle_is_affine_in_each_site(
        values in prop::collection::vec(-0.9f64..2.0, 1..9),
        site in 0usize..8,
        a in -0.9f64..2.0,
        b in -0.9f64..2.0,
        alpha in 0.2f64..1.5,
        constrained in any::<bool>(),
    ) {
        let n = values.len();
        let site = site % n;
        let law = build_renewal_law(alpha, SlowlyVarying::Constant, n.max(2)).unwrap();
        let endpoint = if constrained { Endpoint::Constrained } else { Endpoint::Free };
        let psi = ChaosCoefficients::pinning(&law, n, endpoint).unwrap();
        let at = |x: f64| {
            let mut v = values.clone();
            v[site] = x;
            chaos_oracle(&psi, &eta(v)).unwrap()
        };
        let mid = at(0.5 * (a + b));
        prop_assert!(close(mid, 0.5 * (at(a) + at(b)), 1e-10), "{} vs {}", mid, 0.5 * (at(a) + at(b)));
    }

    #[test]
    fn oracle_agrees_with_recursion(
        omega in prop::collection::vec(-2.0f64..2.0, 1..11),
        beta in 0.0f64..1.0,
        h in -0.5f64..0.5,
    ) {
        let n = omega.len();
        let law = build_renewal_law(0.6, SlowlyVarying::Constant, n.max(2)).unwrap();
        let values: Vec<f64> = omega.iter().map(|w| (beta * w + h).exp_m1()).collect();
        for endpoint in [Endpoint::Free, Endpoint::Constrained] {
            let psi = ChaosCoefficients::pinning(&law, n, endpoint).unwrap();
            let z = PinningPlan::new(&law, n).unwrap().log_partition(&omega, beta, h, endpoint).unwrap().exp();
            prop_assert!(close(chaos_oracle(&psi, &eta(values.clone())).unwrap(), z, 1e-10));
        }
    }

    #[test]
    fn moment_merge_matches_single_pass(
        a in prop::collection::vec(-50.0f64..50.0, 0..40),
        b in prop::collection::vec(-50.0f64..50.0, 0..40),
    ) {
        let joined: Vec<f64> = a.iter().chain(&b).copied().collect();
        let merged = MomentAccumulator::from_slice(&a).merge(&MomentAccumulator::from_slice(&b));
        let direct = MomentAccumulator::from_slice(&joined);
        prop_assert_eq!(merged.count, direct.count);
        let scale = 1.0 + joined.iter().map(|x| x.abs()).fold(0.0, f64::max);
        prop_assert!((merged.mean - direct.mean).abs() <= 1e-12 * scale);
        prop_assert!((merged.m2 - direct.m2).abs() <= 1e-9 * scale.powi(2) * (1 + joined.len()) as f64);
        prop_assert!((merged.m3 - direct.m3).abs() <= 1e-9 * scale.powi(3) * (1 + joined.len()) as f64);
        prop_assert!((merged.m4 - direct.m4).abs() <= 1e-9 * scale.powi(4) * (1 + joined.len()) as f64);
    }

    #[test]
    fn ks_is_invariant_under_increasing_maps(
        a in prop::collection::vec(-3.0f64..3.0, 2..60),
        b in prop::collection::vec(-3.0f64..3.0, 2..60),
        slope in 0.1f64..10.0,
        offset in -5.0f64..5.0,
    ) {
        let d = ks_two_sample(&a, &b).unwrap();
        let f = |x: &f64| (slope * x + offset).exp();
        let fa: Vec<f64> = a.iter().map(f).collect();
        let fb: Vec<f64> = b.iter().map(f).collect();
        prop_assert_eq!(d, ks_two_sample(&fa, &fb).unwrap());
        prop_assert!((0.0..=1.0).contains(&d));
    }

    #[test]
    fn limit_variance_increases(x in 0.0f64..0.99, y in 0.0f64..0.99) {
        let (lo, hi) = if x < y { (x, y) } else { (y, x) };
        prop_assume!(lo < hi);
        prop_assert!(limit_lognormal_params(lo).unwrap().sigma_sq < limit_lognormal_params(hi).unwrap().sigma_sq);
    }

    #[test]
    fn renewal_mass_is_a_probability(alpha in 0.05f64..2.0, n in 2usize..300) {
        let law = build_renewal_law(alpha, SlowlyVarying::Constant, n.max(2)).unwrap();
        let u = renewal_mass(&law, n).unwrap();
        prop_assert_eq!(u[0], 1.0);
        prop_assert!(u.iter().all(|&p| (0.0..=1.0 + 1e-12).contains(&p)));
        let r = overlap_prefix(&u);
        prop_assert!(r.windows(2).all(|w| w[1] >= w[0]));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn free_energy_is_pathwise_monotone_in_h(
        beta in 0.0f64..1.0,
        h1 in -0.5f64..0.5,
        dh in 0.001f64..0.5,
        seed in any::<u64>(),
    ) {
        let law = build_renewal_law(0.75, SlowlyVarying::Constant, 256).unwrap();
        let spec = DisorderSpec::gaussian();
        let lo = free_energy_estimate(&law, &spec, beta, h1, 256, 3, seed).unwrap();
        let hi = free_energy_estimate(&law, &spec, beta, h1 + dh, 256, 3, seed).unwrap();
        prop_assert!(lo.f_raw <= hi.f_raw + 1e-12);
        prop_assert!(lo.f_hat <= hi.f_hat + 1e-12);
        prop_assert!(lo.f_hat >= 0.0);
    }
}
