use std::sync::Arc;

use approx::assert_relative_eq;
use dtcbf::certificates::{
    acc_barrier, adaptive_cbc_margin, safe_input_halfspace, worst_case_cbc_margin, AdaptiveTerms, Barrier, BarrierSpec,
    Certificate, SafeInputSet,
};
use dtcbf::dynamics::{acc_model, AccParams, AffineDynamics, SystemModel};
use dtcbf::filter::filter_solve;
use dtcbf::geometry::{max_norm_distance, NormOrder, Polytope};
use dtcbf::harness::{estimation_report, run_seeds, RunConfig};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn v(xs: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(xs)
}

fn acc() -> (AccParams, SystemModel, BarrierSpec) {
    let p = AccParams::default();
    let model = acc_model(&p).unwrap();
    let spec = BarrierSpec::isotropic(acc_barrier(1.8, 0.0), 0.2, 100.0, 2).unwrap();
    (p, model, spec)
}

fn state() -> impl Strategy<Value = DVector<f64>> {
    (0.0..40.0f64, 0.0..150.0f64).prop_map(|(a, b)| v(&[a, b]))
}

fn theta() -> impl Strategy<Value = DVector<f64>> {
    (0.0..0.5f64, 10.0..20.0f64).prop_map(|(a, b)| v(&[a, b]))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn dynamics_affine_in_theta(x in state(), t1 in theta(), t2 in theta(), u in -3000.0..3000.0f64, l in 0.0..1.0f64) {
        let (_, m, _) = acc();
        let u = v(&[u]);
        let mix = &t1 * l + &t2 * (1.0 - l);
        let lhs = m.predict(&x, &u, &mix).unwrap();
        let rhs = m.predict(&x, &u, &t1).unwrap() * l + m.predict(&x, &u, &t2).unwrap() * (1.0 - l);
        prop_assert!((lhs - rhs).amax() < 1e-9);
    }

    #[test]
    fn dynamics_affine_in_input(x in state(), th in theta(), u1 in -3000.0..3000.0f64, u2 in -3000.0..3000.0f64, l in -1.0..2.0f64) {
        let (_, m, _) = acc();
        let mix = v(&[l * u1 + (1.0 - l) * u2]);
        let lhs = m.predict(&x, &mix, &th).unwrap();
        let rhs = m.predict(&x, &v(&[u1]), &th).unwrap() * l + m.predict(&x, &v(&[u2]), &th).unwrap() * (1.0 - l);
        prop_assert!((lhs - rhs).amax() < 1e-9);
    }

    #[test]
    fn norm_one_margin_is_more_conservative(x in state(), th in theta(), u in -3000.0..3000.0f64, d in theta()) {
        let (p, m, spec) = acc();
        let set = p.theta_box();
        let delta = (&d - &th) * 0.01;
        let b1 = max_norm_distance(&set, &th, NormOrder::One).unwrap();
        let b2 = max_norm_distance(&set, &th, NormOrder::Two).unwrap();
        let u = v(&[u]);
        let m1 = adaptive_cbc_margin(&spec, &m, &x, &u, &AdaptiveTerms { theta_hat: th.clone(), beta: b1, delta: delta.clone() }).unwrap();
        let m2 = adaptive_cbc_margin(&spec, &m, &x, &u, &AdaptiveTerms { theta_hat: th, beta: b2, delta }).unwrap();
        prop_assert!(m1 <= m2 + 1e-9);
    }

    #[test]
    fn worst_case_below_adaptive(x in state(), u in -3000.0..3000.0f64, shrink in 0.0..1.0f64) {
        let (p, m, spec) = acc();
        let full = p.theta_box();
        let wc = AdaptiveTerms::worst_case(&v(&[0.25, 15.0]), &full, NormOrder::Two).unwrap();
        let sub = Polytope::from_box(&[0.25 - 0.25 * shrink, 15.0 - 5.0 * shrink], &[0.25 + 0.25 * shrink, 15.0 + 5.0 * shrink]).unwrap();
        let beta = max_norm_distance(&sub, &wc.theta_hat, NormOrder::Two).unwrap();
        let ad = AdaptiveTerms { beta, ..wc.clone() };
        let u = v(&[u]);
        let a = worst_case_cbc_margin(&spec, &m, &x, &u, &wc.theta_hat, &full, NormOrder::Two).unwrap();
        let b = adaptive_cbc_margin(&spec, &m, &x, &u, &ad).unwrap();
        prop_assert!(a <= b + 1e-9);
    }

    #[test]
    fn halfspace_agrees_with_margin(x in state(), th in theta(), u in prop::collection::vec(-3000.0..3000.0f64, 100)) {
        let (p, m, spec) = acc();
        let beta = max_norm_distance(&p.theta_box(), &th, NormOrder::Two).unwrap();
        let cert = Certificate::Adaptive(AdaptiveTerms { theta_hat: th, beta, delta: v(&[-0.001, 0.02]) });
        let h = safe_input_halfspace(&spec, &m, &x, &cert).unwrap();
        for u in u {
            let u = v(&[u]);
            let direct = cert.margin(&spec, &m, &x, &u).unwrap();
            prop_assert!((h.margin(&u) - direct).abs() <= 1e-9 * (1.0 + direct.abs()));
        }
    }

    #[test]
    fn filter_is_idempotent(a in -3.0..3.0f64, a0 in -5.0..5.0f64, un in -20.0..20.0f64) {
        let set = SafeInputSet { a_u: v(&[a]), a_0: a0, input_set: Polytope::from_box(&[-10.0], &[10.0]).unwrap() };
        if let Ok(once) = filter_solve(&set, &v(&[un])) {
            let twice = filter_solve(&set, &once.u_safe).unwrap();
            prop_assert!(!twice.modified);
            prop_assert!((twice.u_safe - once.u_safe).amax() < 1e-12);
        }
    }

    #[test]
    fn filter_is_idempotent_in_two_inputs(a in prop::array::uniform2(-3.0..3.0f64), a0 in -2.0..5.0f64, un in prop::array::uniform2(-20.0..20.0f64)) {
        let set = SafeInputSet { a_u: v(&a), a_0: a0, input_set: Polytope::from_box(&[-10.0, -10.0], &[10.0, 10.0]).unwrap() };
        if let Ok(once) = filter_solve(&set, &v(&un)) {
            let twice = filter_solve(&set, &once.u_safe).unwrap();
            prop_assert!((twice.u_safe - once.u_safe).amax() < 1e-7);
        }
    }

    #[test]
    fn barrier_lipschitz_bound_holds(x in state(), y in state(), h in 0.5..3.0f64) {
        let b = acc_barrier(h, 0.0);
        prop_assert!((b.eval(&x) - b.eval(&y)).abs() <= b.lipschitz() * (&x - &y).norm() + 1e-9);
    }

    #[test]
    fn lambda_min_of_rotated_gain(l1 in 0.1..100.0f64, l2 in 0.1..100.0f64, ang in 0.0..6.3f64) {
        let q = DMatrix::from_row_slice(2, 2, &[ang.cos(), -ang.sin(), ang.sin(), ang.cos()]);
        let gain = &q * DMatrix::from_diagonal(&v(&[l1, l2])) * q.transpose();
        let spec = BarrierSpec::new(acc_barrier(1.8, 0.0), 0.2, gain).unwrap();
        prop_assert!((spec.lambda_min() - l1.min(l2)).abs() < 1e-10 * (1.0 + l1.max(l2)));
    }

    #[test]
    fn scalar_dynamics_residual_consistency(a in 0.5..1.5f64, c in -1.0..1.0f64, k0 in -1.0..1.0f64, k1 in -1.0..1.0f64, th in -2.0..2.0f64, x in -5.0..5.0f64, u in -5.0..5.0f64, w in -0.1..0.1f64) {
        let m = SystemModel::new(
            Arc::new(AffineDynamics::scalar(a, c, k0, k1, 1.0)),
            Polytope::from_box(&[-10.0], &[10.0]).unwrap(),
            Polytope::from_box(&[-0.1], &[0.1]).unwrap(),
        ).unwrap();
        let (x, u, th) = (v(&[x]), v(&[u]), v(&[th]));
        let x1 = m.step(&x, &u, &v(&[w]), &th).unwrap();
        let r = m.residual(&x, &u, &x1).unwrap();
        let wr = r + m.kernel(&x).transpose() * &th;
        prop_assert!((wr[0] - w).abs() < 1e-12);
    }
}

#[test]
fn acc_residual_recovers_disturbance_along_run() {
    let cfg = RunConfig { seeds: vec![0], horizon: 100, ..RunConfig::default() };
    let sc = cfg.scenario().unwrap();
    let log = &run_seeds(&sc, &[0]).unwrap()[0];
    for w in log.steps.windows(2) {
        let (x0, x1) = (v(&w[0].x), v(&w[1].x));
        let u = v(w[0].u_safe.as_ref().unwrap());
        let r = sc.model.residual(&x0, &u, &x1).unwrap();
        let recovered = r + sc.model.kernel(&x0).transpose() * &sc.theta_true;
        let applied = v(w[0].w.as_ref().unwrap());
        assert!((recovered - applied).amax() < 1e-9);
    }
}

#[test]
fn estimator_consistent_and_eta_monotone_over_100_seeds() {
    let cfg = RunConfig { horizon: 100, seeds: (0..100).collect(), ..RunConfig::default() };
    let logs = run_seeds(&cfg.scenario().unwrap(), &cfg.seeds).unwrap();
    assert!(estimation_report(&logs).all_consistent);
    for log in &logs {
        for w in log.steps.windows(2) {
            for (a, b) in w[0].eta.iter().zip(&w[1].eta) {
                assert!(*b <= a + 1e-9, "eta grew at t = {}", w[1].t);
            }
        }
    }
}

#[test]
fn general_barrier_matches_affine_margin() {
    let (p, m, spec) = acc();
    let general = Barrier::General {
        eval: Arc::new(|x: &DVector<f64>| x[1] - 1.8 * x[0]),
        lipschitz: (1.0f64 + 1.8 * 1.8).sqrt(),
    };
    let gspec = BarrierSpec::isotropic(general, 0.2, 100.0, 2).unwrap();
    let th = v(&[0.2, 14.5]);
    let beta = max_norm_distance(&p.theta_box(), &th, NormOrder::Two).unwrap();
    let terms = AdaptiveTerms { theta_hat: th, beta, delta: v(&[0.0, 0.0]) };
    for (x, u) in [([20.0, 70.0], -500.0), ([10.0, 40.0], 300.0)] {
        let a = adaptive_cbc_margin(&spec, &m, &v(&x), &v(&[u]), &terms).unwrap();
        let g = adaptive_cbc_margin(&gspec, &m, &v(&x), &v(&[u]), &terms).unwrap();
        assert_relative_eq!(a, g, epsilon = 1e-9);
    }
}
