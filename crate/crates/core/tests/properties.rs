use kinklab::closedforms::{predictors, separatrix, torus_point, SeparatrixParam};
use kinklab::config::RunConfig;
use kinklab::criticality::linear_fit;
use kinklab::dd::DoubleDouble;
use kinklab::integrator::{integrate_for, integrate_to_section, Direction, IntegratorConfig};
use kinklab::manifolds::{point_curve_relation, winding_number, CurveSample, SectionCurve, Side};
use kinklab::melnikov::{melnikov_quadrature, melnikov_residue};
use kinklab::model::{energy_split, hamiltonian, make_params, vector_field, Params, PhaseState};
use kinklab::real::Real;
use proptest::prelude::*;
use std::f64::consts::PI;

fn circle(r: f64, n: usize) -> SectionCurve {
    let samples = (0..n)
        .map(|k| {
            let t = 2.0 * PI * k as f64 / n as f64;
            CurveSample {
                tau: t,
                b: r * t.sin(),
                b_mom: r * t.cos(),
                z: 1.0,
            }
        })
        .collect();
    SectionCurve {
        samples,
        side: Side::Stable,
        kappa1: 0.0,
        kappa2: 0.0,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn field_anticommutes_with_reversal(eps in 0.02f64..0.5, x in -6.0f64..6.0, z in -3.0f64..3.0,
                                        b in -1.0f64..1.0, bm in -1.0f64..1.0) {
        let p = make_params(eps).unwrap();
        let s = PhaseState::new(x, z, b, bm);
        let f = vector_field(&s, &p);
        let g = vector_field(&s.reflect(), &p);
        // S = diag(-1, 1, -1, 1) and f(S y) = -S f(y)
        let want = [f[0], -f[1], f[2], -f[3]];
        for k in 0..4 {
            prop_assert!((g[k] - want[k]).abs() <= 1e-15 * (1.0 + f[k].abs()));
        }
        prop_assert!((hamiltonian(&s, &p) - hamiltonian(&s.reflect(), &p)).abs() < 1e-15);
    }

    #[test]
    fn energy_drift_within_budget(eps in 0.05f64..0.3, x in -3.0f64..3.0, z in 0.1f64..2.0,
                                  b in -0.3f64..0.3, bm in -0.3f64..0.3, span in 1.0f64..40.0) {
        let p = make_params(eps).unwrap();
        let cfg = IntegratorConfig::default();
        let s = PhaseState::new(x, z, b, bm);
        let e = integrate_for(&s, &p, &cfg, span).unwrap();
        let drift = (e.energy(&p) - s.energy(&p)).abs();
        prop_assert!(drift <= 10.0 * cfg.rtol * (1.0 + span), "drift {drift:e} over {span}");
    }

    #[test]
    fn section_landing_is_exact_and_reversible(eps in 0.05f64..0.3, z in 1.0f64..3.0,
                                               b in -0.1f64..0.1, bm in -0.1f64..0.1) {
        let p = make_params(eps).unwrap();
        let cfg = IntegratorConfig::default();
        let s = PhaseState::new(-4.0, z, b, bm);
        let fwd = integrate_to_section(&s, &p, &cfg, 0.0, Direction::Forward).unwrap();
        prop_assert_eq!(fwd.state.x, 0.0);
        // S y(t_land - t) is an orbit: from the mirrored landing point it
        // reaches the mirror image of the start
        let back = integrate_to_section(&fwd.state.reflect(), &p, &cfg, 4.0, Direction::Forward).unwrap();
        prop_assert!((back.t - fwd.t).abs() < 1e-9 * fwd.t);
        let back = back.state.reflect();
        prop_assert!((back.z - s.z).abs() < 1e-9 && (back.b - s.b).abs() < 1e-9 && (back.b_mom - s.b_mom).abs() < 1e-9);
    }

    #[test]
    fn separatrix_lies_on_its_level(k in 0.0f64..2.0, v in -30.0f64..30.0) {
        let (x, z) = separatrix(v, k).unwrap();
        let p = make_params(0.1).unwrap().with_coupling_scale(0.0);
        let h = energy_split(&PhaseState::new(x, z, 0.0, 0.0), &p).h_p;
        prop_assert!((h - k).abs() < 1e-12 * (1.0 + k), "H_p {h} vs {k}");
        let sp = SeparatrixParam::new(k).unwrap();
        prop_assert!((sp.v_of_x(x) - v).abs() < 1e-8 * (1.0 + v.abs()));
    }

    #[test]
    fn torus_points_lie_on_the_energy_circle(eps in 0.02f64..0.5, k2 in 0.0f64..1.0, tau in 0.0f64..6.3) {
        let p = make_params(eps).unwrap();
        let (b, bm) = torus_point(tau, k2, &p).unwrap();
        prop_assert!((0.5 * p.omega * (b * b + bm * bm) - k2).abs() < 1e-14 * (1.0 + k2));
    }

    #[test]
    fn melnikov_methods_agree(eps in 0.04f64..0.4) {
        let p = make_params(eps).unwrap();
        let r = melnikov_residue(&p);
        let q = melnikov_quadrature(&p, 1e-13).unwrap();
        prop_assert!((q.c1 - r.c1).norm() <= 1e-8 * r.c1.norm());
        prop_assert!(q.c1.re.abs() <= q.error_estimate);
        prop_assert!((r.c1.norm() - predictors(&p).d0).abs() < 1e-14);
    }

    #[test]
    fn circle_membership_and_distance(r in 0.1f64..2.0, qx in -3.0f64..3.0, qy in -3.0f64..3.0) {
        let c = circle(r, 512);
        let rho = qx.hypot(qy);
        prop_assume!((rho - r).abs() > 1e-3 * r);
        let rel = point_curve_relation([qx, qy], &c).unwrap();
        prop_assert_eq!(rel.inside, rho < r);
        prop_assert_eq!(winding_number(&c.points(), [qx, qy]) != 0, rho < r);
        // chords sag by r (1 - cos(pi/n)) at most
        prop_assert!((rel.signed_distance.abs() - (rho - r).abs()).abs() < 2e-5 * r);
    }

    #[test]
    fn fit_recovers_lines(a in -5.0f64..5.0, m in -5.0f64..5.0, n in 4usize..20) {
        let x: Vec<f64> = (0..n).map(|k| k as f64 * 0.3 - 1.0).collect();
        let y: Vec<f64> = x.iter().map(|v| a + m * v).collect();
        let f = linear_fit(&x, &y).unwrap();
        prop_assert!((f.slope - m).abs() < 1e-12 && (f.intercept - a).abs() < 1e-12);
    }

    #[test]
    fn dd_arithmetic_is_twice_as_precise(a in -1e3f64..1e3, b in 1e-3f64..1e3) {
        let (x, y) = (DoubleDouble::from_f64(a), DoubleDouble::from_f64(b));
        let back = (x / y) * y - x;
        prop_assert!(back.abs().to_f64() <= 1e-29 * a.abs().max(1e-300));
        let s = (x + y) - y - x;
        prop_assert!(s.abs().to_f64() <= 1e-29 * a.abs().max(b));
        let r = y.sqrt() * y.sqrt() - y;
        prop_assert!(r.abs().to_f64() <= 1e-30 * b);
    }

    #[test]
    fn config_echo_round_trips(eps in 0.01f64..0.5, n_tau in 16usize..256, rel in 1e-8f64..0.1) {
        let mut c = RunConfig::default();
        c.set("eps", &eps.to_string()).unwrap();
        c.set("n_tau", &n_tau.to_string()).unwrap();
        c.set("rel_width", &rel.to_string()).unwrap();
        let back: RunConfig = serde_json::from_str(&c.to_json()).unwrap();
        prop_assert_eq!(back.hash(), c.hash());
        prop_assert_eq!(back, c);
    }
}

#[test]
fn dd_and_f64_shots_agree_to_f64_tolerance() {
    let pd = Params::<DoubleDouble>::new(0.2).unwrap();
    let pf = make_params(0.2).unwrap();
    let s = PhaseState::new(-3.0, 1.0, 0.01, -0.02);
    let sd = PhaseState::new(
        DoubleDouble::from_f64(-3.0),
        DoubleDouble::from_f64(1.0),
        DoubleDouble::from_f64(0.01),
        DoubleDouble::from_f64(-0.02),
    );
    let a = integrate_for(&s, &pf, &IntegratorConfig::default(), 20.0).unwrap();
    let b = integrate_for(&sd, &pd, &IntegratorConfig::for_precision::<DoubleDouble>(), 20.0).unwrap();
    let bf = b.to_f64();
    for (u, v) in a.to_array().iter().zip(bf.to_array()) {
        assert!((u - v).abs() < 1e-9, "{u} vs {v}");
    }
    let drift = (b.energy(&pd) - sd.energy(&pd)).abs().to_f64();
    assert!(drift < 1e-22, "dd drift {drift:e}");
}
