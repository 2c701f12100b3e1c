use feshbach_core::engine::efficiency_and_power;
use feshbach_core::stochastic::{quench_variance, simulate_ou, EnsembleConfig};
use feshbach_core::units::{to_normalized, to_si, QuantityKind, HBAR_SI, LITHIUM7_MASS};
use feshbach_core::{Execution, PhysicalParams};
use proptest::prelude::*;

const KINDS: [QuantityKind; 8] = [
    QuantityKind::Length,
    QuantityKind::Time,
    QuantityKind::Variance,
    QuantityKind::Stiffness,
    QuantityKind::Coupling,
    QuantityKind::Energy,
    QuantityKind::Power,
    QuantityKind::Frequency,
];

proptest! {
    #[test]
    fn si_round_trip(f in 1.0f64..500.0, v in -1e3f64..1e3, k in 0usize..8) {
        let w0 = 2.0 * std::f64::consts::PI * f;
        let p = PhysicalParams::new(LITHIUM7_MASS, HBAR_SI, LITHIUM7_MASS * w0, 1.0, w0).unwrap();
        let u = p.units();
        let back = to_normalized(to_si(v, KINDS[k], &u), KINDS[k], &u);
        prop_assert!((back - v).abs() <= 1e-12 * v.abs().max(1.0));
    }

    #[test]
    fn efficiency_is_net_work_over_heat(ab in -5.0f64..5.0, bc in 0.1f64..5.0, cd in -5.0f64..5.0, tau in 0.1f64..50.0) {
        let r = efficiency_and_power(ab, bc, cd, tau).unwrap();
        let eta = r.eta.unwrap();
        prop_assert!((eta * bc + ab + cd).abs() < 1e-12);
        prop_assert!((r.power * tau + ab + cd).abs() < 1e-12);
    }

    #[test]
    fn quench_relaxes_monotonically(s0 in 0.05f64..5.0, kbar in 0.05f64..5.0, t1 in 0.0f64..10.0, dt in 0.0f64..10.0) {
        let p = PhysicalParams::normalized(1.0).unwrap();
        let s_eq = p.diffusion() * p.gamma / kbar;
        let a = quench_variance(&p, kbar, s0, t1);
        let b = quench_variance(&p, kbar, s0, t1 + dt);
        prop_assert!((b - s_eq).abs() <= (a - s_eq).abs() + 1e-12);
        prop_assert!(a > 0.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn ensemble_is_independent_of_execution(seed in any::<u64>(), kbar in 0.2f64..2.0) {
        let p = PhysicalParams::normalized(1.0).unwrap();
        let cfg = EnsembleConfig::new(1000, 0.01, seed, 1.0).unwrap();
        let t = [0.0, 0.5, 1.0];
        let a = simulate_ou(&p, |_| kbar, &cfg, &t, Execution::Parallel).unwrap();
        let b = simulate_ou(&p, |_| kbar, &cfg, &t, Execution::Sequential).unwrap();
        prop_assert_eq!(a.variance, b.variance);
        prop_assert_eq!(a.mean, b.mean);
    }
}
