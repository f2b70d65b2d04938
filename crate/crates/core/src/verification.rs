//! Numerical checks of the safety and convergence guarantees.
//!
//! Every check returns a [`CheckReport`] whose `worst_slack` follows the sign
//! of the checked inequality: non-negative means satisfied.

use std::sync::Arc;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::certificates::{
    adaptive_cbc_margin, error_bound_cbc_margin, robust_cbc_margin, safe_input_halfspace, AdaptiveTerms, Barrier,
    BarrierSpec, Certificate, ErrorBoundTerms,
};
use crate::dynamics::{AccParams, AffineDynamics, SystemModel};
use crate::estimation::{estimator_step, EstimatorState, Transition};
use crate::filter::filter_solve;
use crate::geometry::{enumerate_vertices, lp_solve, max_norm_distance, NormOrder, Polytope, Sense};
use crate::harness::{Controller, ModelConfig, RunConfig, TrajectoryLog, SAFETY_TOL};
use crate::Result;

/// Terminal energy threshold for the convergence checks.
pub const TOL_CONV: f64 = 1e-3;
/// Required decrease of the energy per step outside the safe set.
pub const TOL_STRICT: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub name: String,
    pub passed: bool,
    pub worst_slack: f64,
    /// First offending step or sample.
    pub offending: Option<usize>,
    pub samples: usize,
    pub detail: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub counterexamples: Vec<serde_json::Value>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub children: Vec<CheckReport>,
}

impl CheckReport {
    fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed: true,
            worst_slack: f64::INFINITY,
            offending: None,
            samples: 0,
            detail: String::new(),
            counterexamples: Vec::new(),
            children: Vec::new(),
        }
    }

    /// Record one sample of an inequality `slack >= -tol`.
    fn observe(&mut self, index: usize, slack: f64, tol: f64) {
        self.samples += 1;
        if slack < self.worst_slack {
            self.worst_slack = slack;
        }
        if slack < -tol && self.passed {
            self.passed = false;
            self.offending = Some(index);
        }
    }

    fn fail(&mut self, index: usize) {
        if self.passed {
            self.passed = false;
            self.offending = Some(index);
        }
    }

    fn aggregate(name: impl Into<String>, children: Vec<CheckReport>) -> Self {
        let mut r = Self::new(name);
        r.passed = children.iter().all(|c| c.passed);
        r.worst_slack = children.iter().map(|c| c.worst_slack).fold(f64::INFINITY, f64::min);
        r.samples = children.iter().map(|c| c.samples).sum();
        r.offending = children.iter().position(|c| !c.passed);
        let failing: Vec<&str> = children.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
        r.detail = if children.len() > 5 {
            let mut d = format!("{}/{} pass", children.len() - failing.len(), children.len());
            if !failing.is_empty() {
                d.push_str(&format!("; failing: {}", failing.join(", ")));
            }
            d
        } else {
            children
                .iter()
                .map(|c| format!("{}: {}", c.name, if c.passed { "pass" } else { "FAIL" }))
                .collect::<Vec<_>>()
                .join("; ")
        };
        r.children = children;
        r
    }
}

fn b_rt(spec: &BarrierSpec, x: &[f64], theta_hat: &[f64], theta_star: &DVector<f64>) -> f64 {
    let x = DVector::from_column_slice(x);
    let e = DVector::from_column_slice(theta_hat) - theta_star;
    spec.b(&x) - spec.gain_quadratic(&e)
}

/// Along a log: `B(x_t) >= 0` for every `t`, and for every `t` with
/// `B_rt_t(x_t) >= 0`, `B_rt_{t+1}(x_{t+1}) >= B_rt_t(x_t) - alpha(B_rt_t(x_t))`.
pub fn check_sequential_invariance(log: &TrajectoryLog, spec: &BarrierSpec, theta_star: &DVector<f64>) -> CheckReport {
    let mut r = CheckReport::new(format!("sequential_invariance[seed {}]", log.header.seed));
    for s in &log.steps {
        if s.b < -SAFETY_TOL {
            r.fail(s.t);
            r.detail = format!("B(x_{}) = {:.6e} < 0", s.t, s.b);
            break;
        }
    }
    for w in log.steps.windows(2) {
        let cur = b_rt(spec, &w[0].x, &w[0].theta_hat, theta_star);
        if cur < 0.0 {
            continue;
        }
        let next = b_rt(spec, &w[1].x, &w[1].theta_hat, theta_star);
        let slack = next - (cur - spec.alpha(cur));
        r.observe(w[0].t, slack, SAFETY_TOL * (1.0 + cur.abs()));
    }
    if r.samples == 0 {
        r.worst_slack = 0.0;
    }
    if r.detail.is_empty() {
        r.detail = format!("{} steps inside S_rt checked, min B = {:.6e}", r.samples, log.min_b());
    }
    r
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnergyKind {
    /// `V_t` from `B_rt`, needs the true parameter.
    Oracle,
    /// `V_bar_t` from `B_bar_rt`.
    ErrorBound,
}

/// While outside the safe set (`V_t > 0`):
/// `V_{t+1}(x_{t+1}) - V_t(x_t) <= alpha(B_t) < 0` with at least
/// [`TOL_STRICT`] decrease; and `V_T < TOL_CONV`.
pub fn check_energy_descent(log: &TrajectoryLog, spec: &BarrierSpec, theta_star: &DVector<f64>, kind: EnergyKind) -> CheckReport {
    let mut r = CheckReport::new(format!("energy_descent[{kind:?}, seed {}]", log.header.seed));
    let values: Vec<f64> = log
        .steps
        .iter()
        .map(|s| match kind {
            EnergyKind::Oracle => b_rt(spec, &s.x, &s.theta_hat, theta_star),
            EnergyKind::ErrorBound => s.b_bar_rt,
        })
        .collect();
    let energy: Vec<f64> = values.iter().map(|&b| crate::certificates::energy(b)).collect();
    let mut worst_decrease = f64::NEG_INFINITY;
    for t in 0..energy.len().saturating_sub(1) {
        if energy[t] <= 0.0 {
            continue;
        }
        let diff = energy[t + 1] - energy[t];
        worst_decrease = worst_decrease.max(diff);
        r.observe(t, spec.alpha(values[t]) - diff, SAFETY_TOL * (1.0 + values[t].abs()));
        if diff > -TOL_STRICT {
            r.fail(t);
        }
    }
    if r.samples == 0 {
        r.worst_slack = 0.0;
    }
    let terminal = *energy.last().unwrap_or(&0.0);
    if terminal >= TOL_CONV {
        r.fail(energy.len() - 1);
    }
    r.detail = format!(
        "{} outside steps, largest energy change {:.3e} (needs <= -1e-12), V_0 = {:.4}, V_T = {:.3e} (needs < 1e-3)",
        r.samples,
        worst_decrease,
        energy.first().copied().unwrap_or(0.0),
        terminal
    );
    r
}

/// A random scalar instance for the randomized descent check.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScalarInstance {
    pub a: f64,
    pub c: f64,
    pub k0: f64,
    pub k1: f64,
    pub g: f64,
    pub u_max: f64,
    pub w_lo: f64,
    pub w_hi: f64,
    pub theta_lo: f64,
    pub theta_hi: f64,
    pub barrier_normal: f64,
    pub barrier_offset: f64,
    pub gamma_alpha: f64,
    pub kappa: f64,
}

impl ScalarInstance {
    fn random(rng: &mut ChaCha8Rng) -> Self {
        let theta_lo = rng.gen_range(-2.0..2.0);
        Self {
            a: rng.gen_range(0.5..1.5),
            c: rng.gen_range(-0.5..0.5),
            k0: rng.gen_range(-1.0..1.0),
            k1: rng.gen_range(-0.5..0.5),
            g: if rng.gen_bool(0.5) { 1.0 } else { -1.0 } * rng.gen_range(0.2..2.0),
            u_max: rng.gen_range(2.0..20.0),
            w_lo: -rng.gen_range(0.01..0.5),
            w_hi: rng.gen_range(0.01..0.5),
            theta_lo,
            theta_hi: theta_lo + rng.gen_range(0.1..2.0),
            barrier_normal: if rng.gen_bool(0.5) { 1.0 } else { -1.0 } * rng.gen_range(0.2..2.0),
            barrier_offset: rng.gen_range(0.0..5.0),
            gamma_alpha: rng.gen_range(0.05..0.95),
            kappa: rng.gen_range(0.5..50.0),
        }
    }

    fn build(&self) -> Result<(SystemModel, BarrierSpec)> {
        let model = SystemModel::new(
            Arc::new(AffineDynamics::scalar(self.a, self.c, self.k0, self.k1, self.g)),
            Polytope::from_box(&[-self.u_max], &[self.u_max])?,
            Polytope::from_box(&[self.w_lo], &[self.w_hi])?,
        )?;
        let barrier = Barrier::Affine {
            normal: DVector::from_element(1, self.barrier_normal),
            offset: self.barrier_offset,
        };
        let spec = BarrierSpec::isotropic(barrier, self.gamma_alpha, self.kappa, 1)?;
        Ok((model, spec))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DescentCase {
    pub instance: ScalarInstance,
    pub set_lo: f64,
    pub set_hi: f64,
    pub theta_hat: f64,
    pub theta_hat_next: f64,
    pub x: f64,
    pub u: f64,
    pub w: f64,
    pub theta_star: f64,
    pub b_rt: f64,
    pub b_rt_next: f64,
    pub slack: f64,
}

/// Sample one instance and evaluate the descent inequality at every vertex
/// pair `(w, theta*)`. Returns `None` when no valid sample was found.
fn descent_sample(rng: &mut ChaCha8Rng, mutate: bool) -> Result<Option<Vec<DescentCase>>> {
    let inst = ScalarInstance::random(rng);
    let (model, spec) = inst.build()?;
    let width = inst.theta_hi - inst.theta_lo;
    let set_lo = inst.theta_lo + rng.gen_range(0.0..0.4) * width;
    let set_hi = inst.theta_hi - rng.gen_range(0.0..0.4) * width;
    let theta_set = Polytope::from_box(&[set_lo], &[set_hi])?;
    let theta_hat = rng.gen_range(set_lo..=set_hi);
    let theta_hat_next = rng.gen_range(set_lo..=set_hi);
    let th = DVector::from_element(1, theta_hat);
    let beta = max_norm_distance(&theta_set, &th, NormOrder::Two)?;
    let terms = AdaptiveTerms {
        theta_hat: th.clone(),
        beta,
        delta: DVector::from_element(1, theta_hat_next - theta_hat),
    };
    let lam = spec.lambda_min();
    // x with B_rt >= 0 for every theta* in the set: B(x) >= beta^2 / (2 lambda)
    let need = beta * beta / (2.0 * lam);
    let mut x = None;
    for _ in 0..50 {
        let cand = rng.gen_range(-10.0..10.0);
        if spec.b(&DVector::from_element(1, cand)) >= need {
            x = Some(cand);
            break;
        }
    }
    let Some(x) = x else { return Ok(None) };
    let xv = DVector::from_element(1, x);

    let halfspace = if mutate {
        // corrupted certificate: the estimation penalty E is halved
        let full = adaptive_cbc_margin(&spec, &model, &xv, &DVector::zeros(1), &terms)?;
        let no_beta = AdaptiveTerms { beta: 0.0, delta: DVector::zeros(1), ..terms.clone() };
        let base = adaptive_cbc_margin(&spec, &model, &xv, &DVector::zeros(1), &no_beta)?;
        let tight = spec.alpha(spec.b(&xv) - need) - spec.alpha(spec.b(&xv));
        let penalty = base + tight - full;
        let mut h = safe_input_halfspace(&spec, &model, &xv, &Certificate::Adaptive(terms.clone()))?;
        h.a_0 += 0.5 * penalty;
        h
    } else {
        safe_input_halfspace(&spec, &model, &xv, &Certificate::Adaptive(terms.clone()))?
    };
    // tightest certified input: on the margin boundary when possible
    let (a, a0) = (halfspace.a_u[0], halfspace.a_0);
    let u = if a != 0.0 && (-a0 / a).abs() <= inst.u_max {
        -a0 / a
    } else {
        match filter_solve(&halfspace, &DVector::zeros(1)) {
            Ok(f) => f.u_safe[0],
            Err(_) => return Ok(None),
        }
    };
    let uv = DVector::from_element(1, u);
    if halfspace.margin(&uv) < -1e-9 * (1.0 + a0.abs()) {
        return Ok(None);
    }

    let mut cases = Vec::with_capacity(4);
    for w in [inst.w_lo, inst.w_hi] {
        for theta_star in [set_lo, set_hi] {
            let ts = DVector::from_element(1, theta_star);
            let cur = spec.b(&xv) - spec.gain_quadratic(&(&th - &ts));
            let x_next = model.step(&xv, &uv, &DVector::from_element(1, w), &ts)?;
            let next = spec.b(&x_next) - spec.gain_quadratic(&DVector::from_element(1, theta_hat_next - theta_star));
            cases.push(DescentCase {
                instance: inst.clone(),
                set_lo,
                set_hi,
                theta_hat,
                theta_hat_next,
                x,
                u,
                w,
                theta_star,
                b_rt: cur,
                b_rt_next: next,
                slack: next - (cur - spec.alpha(cur)),
            });
        }
    }
    Ok(Some(cases))
}

/// Randomized descent check on `num_systems` scalar instances with
/// vertex-exhaustive disturbances and parameters. With `mutate` the
/// estimation penalty is halved, which should produce counterexamples.
pub fn check_randomized_descent(num_systems: usize, seed: u64, mutate: bool) -> Result<CheckReport> {
    let name = if mutate { "randomized_descent[mutated]" } else { "randomized_descent" };
    let mut r = CheckReport::new(name);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut accepted = 0;
    let mut attempts = 0;
    while accepted < num_systems {
        attempts += 1;
        if attempts > 100 * num_systems.max(1) {
            break;
        }
        let Some(cases) = descent_sample(&mut rng, mutate)? else { continue };
        for c in &cases {
            let tol = 1e-9 * (1.0 + c.b_rt.abs() + c.b_rt_next.abs());
            r.observe(accepted, c.slack, tol);
            if c.slack < -tol && r.counterexamples.len() < 20 {
                r.counterexamples.push(serde_json::to_value(c)?);
            }
        }
        accepted += 1;
    }
    let found = r.counterexamples.len();
    r.detail = format!("{accepted} systems ({attempts} draws), {} vertex evaluations, {found} counterexamples", r.samples);
    if accepted < num_systems {
        r.passed = false;
        r.detail.push_str("; too few admissible instances");
    }
    Ok(r)
}

/// Geometry, filter and estimator oracle equivalences.
pub fn check_oracles(seed: u64) -> Result<CheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let children = vec![
        check_norm_ordering(&mut rng, 1000)?,
        check_lp_vs_vertices(&mut rng, 1000)?,
        check_filter_grid(&mut rng, 100)?,
        check_rls_monotone(&mut rng, 100, 50)?,
    ];
    Ok(CheckReport::aggregate("oracles", children))
}

fn random_box(rng: &mut ChaCha8Rng, dim: usize) -> Result<Polytope> {
    let lo: Vec<f64> = (0..dim).map(|_| rng.gen_range(-5.0..5.0)).collect();
    let hi: Vec<f64> = lo.iter().map(|l| l + rng.gen_range(0.01..4.0)).collect();
    Ok(Polytope::from_box(&lo, &hi)?)
}

/// Box cut by a few random halfspaces through its interior.
fn random_polygon(rng: &mut ChaCha8Rng) -> Result<(Polytope, DVector<f64>)> {
    let b = random_box(rng, 2)?;
    let (lo, hi) = b.as_box().expect("box");
    let centre = DVector::from_fn(2, |i, _| 0.5 * (lo[i] + hi[i]));
    let mut rows = Vec::new();
    let mut offs = Vec::new();
    for _ in 0..rng.gen_range(0..5) {
        let ang: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
        let n = [ang.cos(), ang.sin()];
        let reach = 0.5 * ((hi[0] - lo[0]) * n[0].abs() + (hi[1] - lo[1]) * n[1].abs());
        rows.push(n.to_vec());
        offs.push(n[0] * centre[0] + n[1] * centre[1] + rng.gen_range(0.1..1.0) * reach);
    }
    let p = if rows.is_empty() { b } else { b.intersect(&Polytope::from_rows(&rows, &offs)?)? };
    Ok((p, centre))
}

fn check_norm_ordering(rng: &mut ChaCha8Rng, n: usize) -> Result<CheckReport> {
    let mut r = CheckReport::new("beta2_le_beta1");
    for k in 0..n {
        let dim = rng.gen_range(1..=3);
        let b = random_box(rng, dim)?;
        let (lo, hi) = b.as_box().expect("box");
        let anchor = DVector::from_fn(dim, |i, _| rng.gen_range(lo[i]..=hi[i]));
        let b1 = max_norm_distance(&b, &anchor, NormOrder::One)?;
        let b2 = max_norm_distance(&b, &anchor, NormOrder::Two)?;
        r.observe(k, b1 - b2, 1e-12);
    }
    r.detail = format!("{n} random boxes, min beta1 - beta2 = {:.3e}", r.worst_slack);
    Ok(r)
}

fn check_lp_vs_vertices(rng: &mut ChaCha8Rng, n: usize) -> Result<CheckReport> {
    let mut r = CheckReport::new("lp_vs_vertex_bruteforce");
    for k in 0..n {
        let (p, anchor) = random_polygon(rng)?;
        let verts = enumerate_vertices(&p)?;
        let brute1 = verts.iter().map(|v| (v - &anchor).lp_norm(1)).fold(0.0, f64::max);
        let lp1 = max_norm_distance(&p, &anchor, NormOrder::One)?;
        let ang: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
        let c = DVector::from_column_slice(&[ang.cos(), ang.sin()]);
        let brute_lin = verts.iter().map(|v| c.dot(v)).fold(f64::NEG_INFINITY, f64::max);
        let lp_lin = lp_solve(&c, &p, Sense::Maximize)?.value;
        let err = (brute1 - lp1).abs().max((brute_lin - lp_lin).abs());
        r.observe(k, -err, 1e-9);
    }
    r.worst_slack = -r.worst_slack.min(0.0).abs();
    r.detail = format!("{n} random polygons, max |LP - vertex| = {:.3e} (tol 1e-9)", -r.worst_slack);
    Ok(r)
}

fn check_filter_grid(rng: &mut ChaCha8Rng, n: usize) -> Result<CheckReport> {
    let mut r = CheckReport::new("filter_vs_grid");
    let u_set = Polytope::from_box(&[-10.0], &[10.0])?;
    let mut k = 0;
    while k < n {
        let a = rng.gen_range(-3.0..3.0);
        let a0 = rng.gen_range(-15.0..15.0);
        let un = rng.gen_range(-10.0..10.0);
        let set = crate::certificates::SafeInputSet {
            a_u: DVector::from_element(1, a),
            a_0: a0,
            input_set: u_set.clone(),
        };
        let grid = (0..=200_000)
            .map(|i| -10.0 + i as f64 * 1e-4)
            .filter(|&u| a * u + a0 >= 0.0)
            .min_by(|x, y| (x - un).abs().total_cmp(&(y - un).abs()));
        let Some(grid) = grid else { continue };
        let got = filter_solve(&set, &DVector::from_element(1, un))?.u_safe[0];
        r.observe(k, 1e-3 - (got - grid).abs(), 0.0);
        k += 1;
    }
    r.detail = format!("{n} scalar filters, worst 1e-3 - |u - u_grid| = {:.3e}", r.worst_slack);
    Ok(r)
}

fn check_rls_monotone(rng: &mut ChaCha8Rng, systems: usize, steps: usize) -> Result<CheckReport> {
    let mut r = CheckReport::new("rls_zero_disturbance_monotone");
    for k in 0..systems {
        let inst = ScalarInstance::random(rng);
        let (model, _) = inst.build()?;
        let theta_star = DVector::from_element(1, rng.gen_range(inst.theta_lo..=inst.theta_hi));
        let theta0 = DVector::from_element(1, rng.gen_range(inst.theta_lo..=inst.theta_hi));
        let mut s = estimator_step(
            &EstimatorState::new(theta0, Polytope::from_box(&[inst.theta_lo], &[inst.theta_hi])?)?,
            &model,
            None,
        )?;
        let mut x = DVector::from_element(1, rng.gen_range(-1.0..1.0));
        let mut err = (&s.theta_hat - &theta_star).norm();
        for t in 0..steps {
            let u = DVector::from_element(1, rng.gen_range(-inst.u_max..inst.u_max) * 0.1 - x[0] * inst.a / inst.g);
            let x1 = model.step(&x, &u, &DVector::zeros(1), &theta_star)?;
            s = estimator_step(&s, &model, Some(Transition { x_prev: &x, u_prev: &u, x: &x1 }))?;
            let e = (&s.theta_hat - &theta_star).norm();
            r.observe(k * steps + t, err - e, 1e-12 * (1.0 + err));
            err = e;
            x = x1;
        }
    }
    r.detail = format!("{systems} systems x {steps} steps, worst error increase {:.3e}", -r.worst_slack.min(0.0));
    Ok(r)
}

/// Disturbance-free DT-CBF margin `B(f(x,u;theta)) - B(x) + alpha(B(x))`.
pub fn nominal_cbc_margin(spec: &BarrierSpec, model: &SystemModel, x: &DVector<f64>, u: &DVector<f64>, theta: &DVector<f64>) -> Result<f64> {
    let next = model.predict(x, u, theta)?;
    Ok(spec.b(&next) - spec.b(x) + spec.alpha(spec.b(x)))
}

/// Perfect-knowledge reductions on `n` random evaluations: with
/// `beta = delta = 0` (and the `L_B w_bar` term removed) the adaptive margin
/// equals the nominal DT-CBF margin; the error-bound margin with `eta = 0`
/// equals the robust margin at `theta_hat`.
pub fn check_reductions(n: usize, seed: u64) -> Result<CheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ad = CheckReport::new("adaptive_perfect_knowledge");
    let mut eb = CheckReport::new("error_bound_eta_zero");
    for k in 0..n {
        let inst = ScalarInstance::random(&mut rng);
        let (model, spec) = inst.build()?;
        let x = DVector::from_element(1, rng.gen_range(-10.0..10.0));
        let u = DVector::from_element(1, rng.gen_range(-inst.u_max..inst.u_max));
        let th = DVector::from_element(1, rng.gen_range(inst.theta_lo..=inst.theta_hi));
        let terms = AdaptiveTerms {
            theta_hat: th.clone(),
            beta: 0.0,
            delta: DVector::zeros(1),
        };
        let adaptive = adaptive_cbc_margin(&spec, &model, &x, &u, &terms)? + spec.lipschitz() * model.w_bar();
        let nominal = nominal_cbc_margin(&spec, &model, &x, &u, &th)?;
        ad.observe(k, -(adaptive - nominal).abs(), 1e-12 * (1.0 + nominal.abs()));
        let zero = ErrorBoundTerms {
            theta_hat: th.clone(),
            eta: DVector::zeros(1),
            eta_next: DVector::zeros(1),
        };
        let e = error_bound_cbc_margin(&spec, &model, &x, &u, &zero)?;
        let robust = robust_cbc_margin(&spec, &model, &x, &u, &th)?;
        eb.observe(k, -(e - robust).abs(), 0.0);
    }
    ad.detail = format!("{n} samples, max deviation {:.3e}", -ad.worst_slack);
    eb.detail = format!("{n} samples, max deviation {:.3e}", -eb.worst_slack);
    Ok(CheckReport::aggregate("reductions", vec![ad, eb]))
}

/// ACC start `(v, d) = (30, 40)` with `B(x0) = -14`. The input bound is
/// widened to `5 M g` so that a certified input exists at the first steps.
pub fn robustness_config(controller: Controller) -> RunConfig {
    RunConfig {
        model: ModelConfig::Acc(AccParams {
            u_max_g: 5.0,
            ..AccParams::default()
        }),
        controller,
        x0: Some(vec![30.0, 40.0]),
        ..RunConfig::default()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    All,
    Invariance,
    Robustness,
    Oracles,
}

/// Safe-start runs of the adaptive filter for both norms, checked for invariance.
pub fn invariance_suite(seed: u64) -> Result<CheckReport> {
    let mut children = Vec::new();
    for p in [NormOrder::One, NormOrder::Two] {
        let cfg = RunConfig { p, ..RunConfig::default() };
        let sc = cfg.scenario()?;
        let logs = crate::harness::run_seeds(&sc, &cfg.seeds)?;
        let runs: Vec<CheckReport> = logs
            .par_iter()
            .map(|l| check_sequential_invariance(l, &sc.spec, &sc.theta_true))
            .collect();
        children.push(CheckReport::aggregate(format!("invariance[p={}]", u8::from(p)), runs));
    }
    children.push(check_randomized_descent(500, seed, false)?);
    let mut mutated = check_randomized_descent(500, seed, true)?;
    // negative control: passes when counterexamples are found
    mutated.passed = !mutated.counterexamples.is_empty();
    mutated.name = "randomized_descent[mutated, expects counterexamples]".into();
    children.push(mutated);
    Ok(CheckReport::aggregate("invariance", children))
}

/// Unsafe-start runs of the adaptive and error-bound filters.
pub fn robustness_suite() -> Result<CheckReport> {
    let mut children = Vec::new();
    for (controller, kind) in [
        (Controller::RacbfAdaptiveNominal, EnergyKind::Oracle),
        (Controller::ErrorBoundAdaptiveNominal, EnergyKind::ErrorBound),
    ] {
        let cfg = robustness_config(controller);
        let sc = cfg.scenario()?;
        let logs = crate::harness::run_seeds(&sc, &cfg.seeds)?;
        let runs: Vec<CheckReport> = logs
            .iter()
            .map(|l| check_energy_descent(l, &sc.spec, &sc.theta_true, kind))
            .collect();
        children.push(CheckReport::aggregate(format!("robustness[{}]", controller.name()), runs));
    }
    Ok(CheckReport::aggregate("robustness", children))
}

pub fn oracles_suite(seed: u64) -> Result<CheckReport> {
    Ok(CheckReport::aggregate(
        "oracles",
        vec![check_oracles(seed)?, check_reductions(10_000, seed)?],
    ))
}

pub fn run_suite(suite: Suite, seed: u64) -> Result<Vec<CheckReport>> {
    Ok(match suite {
        Suite::Invariance => vec![invariance_suite(seed)?],
        Suite::Robustness => vec![robustness_suite()?],
        Suite::Oracles => vec![oracles_suite(seed)?],
        Suite::All => vec![invariance_suite(seed)?, robustness_suite()?, oracles_suite(seed)?],
    })
}
