use magflow_core::flow::{
    flow_exact, flow_numeric, generator, lyapunov_exponent, period, trajectory_exact,
    variation_coeffs, write_trajectory_csv,
};
use magflow_core::verify::{random_subcritical, shell_state, state_residual};
use magflow_core::oracle::UniformStream;
use magflow_core::{HTangent, MagneticConfig};
use proptest::prelude::*;

fn subcritical() -> impl Strategy<Value = MagneticConfig> {
    (0.5..3.0f64, 0.02..0.98f64).prop_map(|(b, f)| MagneticConfig::new(b, f * 0.5 * b * b).unwrap())
}

fn any_config() -> impl Strategy<Value = MagneticConfig> {
    (0.5..3.0f64, 0.0..3.0f64).prop_map(|(b, f)| MagneticConfig::new(b, f * 0.5 * b * b).unwrap())
}

fn state(cfg: &MagneticConfig, r: f64, psi: f64, a: f64) -> HTangent {
    shell_state(cfg, r, psi, a)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn generator_determinant(cfg in any_config()) {
        let g = generator(&cfg);
        prop_assert!((g.det() - cfg.kappa() / 4.0).abs() < 1e-14 * cfg.b().powi(2).max(1.0));
        prop_assert_eq!(g.trace(), 0.0);
    }

    // Times are scaled by 1/λ so that supercritical orbits stay within a
    // few units of the center, where half-plane coordinates keep precision.
    #[test]
    fn group_law(cfg in any_config(), r in 0.0..2.0f64, psi in 0.0..6.3f64, a in 0.0..6.3f64,
                 t in -3.0..3.0f64, s in -3.0..3.0f64) {
        prop_assume!(cfg.e() > 0.0);
        let (t, s) = (t / cfg.lambda().max(1.0), s / cfg.lambda().max(1.0));
        let p = state(&cfg, r, psi, a);
        let direct = flow_exact(&cfg, &p, t + s).unwrap();
        let composed = flow_exact(&cfg, &flow_exact(&cfg, &p, s).unwrap(), t).unwrap();
        prop_assert!(state_residual(&direct, &composed) < 1e-10);
    }

    #[test]
    fn exact_flow_stays_on_shell(cfg in any_config(), t in -20.0..20.0f64, a in 0.0..6.3f64) {
        prop_assume!(cfg.e() > 0.0);
        let t = if cfg.kappa() < 0.0 { t / (4.0 * cfg.lambda()) } else { t };
        let q = flow_exact(&cfg, &state(&cfg, 0.5, 1.0, a), t).unwrap();
        prop_assert!((q.norm() - cfg.lambda()).abs() < 1e-8);
    }

    #[test]
    fn variation_is_continuous_across_critical_energy(b in 0.5..3.0f64, t in 0.0..10.0f64) {
        let ec = 0.5 * b * b;
        let at = variation_coeffs(&MagneticConfig::new(b, ec).unwrap(), t);
        for e in [ec * (1.0 - 1e-10), ec * (1.0 + 1e-10)] {
            let near = variation_coeffs(&MagneticConfig::new(b, e).unwrap(), t);
            prop_assert!((near.a - at.a).abs() < 1e-6 * (1.0 + at.a.abs()));
            prop_assert!((near.b - at.b).abs() < 1e-6 * (1.0 + at.b.abs()));
            prop_assert!((near.c - at.c).abs() < 1e-6 * (1.0 + at.c.abs()));
        }
        prop_assert_eq!(at.b, t);
    }

    #[test]
    fn variation_derivatives(cfg in subcritical(), t in 0.1..10.0f64) {
        // a' = −B b, c' = 2E b by central differences.
        let h = 1e-5;
        let (lo, hi) = (variation_coeffs(&cfg, t - h), variation_coeffs(&cfg, t + h));
        let mid = variation_coeffs(&cfg, t);
        prop_assert!(((hi.a - lo.a) / (2.0 * h) + cfg.b() * mid.b).abs() < 1e-6);
        prop_assert!(((hi.c - lo.c) / (2.0 * h) - 2.0 * cfg.e() * mid.b).abs() < 1e-6);
    }
}

#[test]
fn full_period_returns_for_many_initial_conditions() {
    let mut stream = UniformStream::new(3);
    for _ in 0..50 {
        let cfg = random_subcritical(&mut stream);
        let t = period(&cfg).unwrap();
        for _ in 0..20 {
            let p = state(&cfg, stream.range(0.0, 3.0), stream.range(0.0, 6.3), stream.range(0.0, 6.3));
            let q = flow_exact(&cfg, &p, t).unwrap();
            assert!(state_residual(&p, &q) < 1e-9);
        }
    }
}

#[test]
fn exact_and_numeric_agree_over_two_periods() {
    let cfg = MagneticConfig::new(1.0, 0.25).unwrap();
    let p = HTangent::reference().scaled(cfg.lambda());
    let horizon = 2.0 * period(&cfg).unwrap();
    let stride = horizon / 40.0;
    let mut numeric = p;
    for j in 1..=40 {
        numeric = flow_numeric(&cfg, &numeric, stride, 1e-4).unwrap().state;
        let exact = flow_exact(&cfg, &p, j as f64 * stride).unwrap();
        assert!(magflow_core::hyperbolic::hyp_dist(&exact.base, &numeric.base) < 1e-8);
        assert!((numeric.norm() - cfg.lambda()).abs() < 1e-8);
    }
}

#[test]
fn numeric_error_is_fourth_order() {
    let cfg = MagneticConfig::new(1.0, 0.25).unwrap();
    let p = HTangent::reference().scaled(cfg.lambda());
    let exact = flow_exact(&cfg, &p, 3.0).unwrap();
    let err = |dt| {
        let q = flow_numeric(&cfg, &p, 3.0, dt).unwrap().state;
        magflow_core::hyperbolic::hyp_dist(&exact.base, &q.base)
    };
    let ratio = err(0.04) / err(0.02);
    assert!((ratio.log2() - 4.0).abs() < 0.3, "ratio {ratio}");
}

#[test]
fn lyapunov_matches_eigenvalues() {
    for (b, e) in [(1.0, 1.0), (0.7, 1.3), (2.0, 2.5)] {
        let cfg = MagneticConfig::new(b, e).unwrap();
        let expected = 0.5 * (2.0f64 * e - b * b).sqrt();
        assert!((lyapunov_exponent(&cfg, 1e4).unwrap() - expected).abs() < 1e-3);
    }
}

#[test]
fn trajectory_csv_layout() {
    let cfg = MagneticConfig::new(1.0, 0.25).unwrap();
    let samples = trajectory_exact(&cfg, &HTangent::reference().scaled(cfg.lambda()), 1.0, 0.25).unwrap();
    assert_eq!(samples.len(), 5);
    let mut buf = Vec::new();
    write_trajectory_csv(&mut buf, &samples).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,re_z,im_z,re_v,im_v"));
    let first: Vec<f64> = lines.next().unwrap().split(',').map(|x| x.parse().unwrap()).collect();
    assert_eq!(first, vec![0.0, 0.0, 1.0, 0.0, cfg.lambda()]);
}
