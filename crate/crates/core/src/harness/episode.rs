//! One closed-loop run of the safe adaptive controller.
//!
//! Per step `t`: read `beta_t(p)` on `(Theta_t, theta_hat_t)`; update the
//! estimator with the newest transition to get `theta_hat_{t+1}` and
//! `delta_t`; build the certified input set; filter the nominal input;
//! apply it with the disturbance `w_t`.

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{Controller, RunConfig, Scenario};
use crate::certificates::{
    barrier_values, eta, safe_input_halfspace, AdaptiveTerms, Certificate, ErrorBoundTerms,
};
use crate::dynamics::{sample_disturbance, DisturbanceMode};
use crate::estimation::{Estimator, EstimatorState, Transition};
use crate::filter::{filter_solve, filter_solve_bisection};
use crate::geometry::{coordinate_range, NormOrder, Polytope};
use crate::{Error, Result};

/// Identifier of the disturbance generator, written to every log header.
pub const RNG_ALGORITHM: &str = "chacha8";

/// A run counts as unsafe once `B(x_t)` drops below `-SAFETY_TOL`.
pub const SAFETY_TOL: f64 = 1e-9;

/// Supplies `w_t`; called exactly once per step, in order.
pub trait DisturbanceSource {
    fn next(&mut self, t: usize, w_set: &Polytope) -> Result<DVector<f64>>;
}

/// Seeded generator in one of the standard modes.
#[derive(Debug, Clone)]
pub struct RngDisturbance {
    rng: ChaCha8Rng,
    mode: DisturbanceMode,
}

impl RngDisturbance {
    pub fn new(seed: u64, mode: DisturbanceMode) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            mode,
        }
    }
}

impl DisturbanceSource for RngDisturbance {
    fn next(&mut self, t: usize, w_set: &Polytope) -> Result<DVector<f64>> {
        sample_disturbance(w_set, &mut self.rng, self.mode, t)
    }
}

/// Replays a fixed sequence, then returns zeros.
#[derive(Debug, Clone)]
pub struct ReplayDisturbance(pub Vec<DVector<f64>>);

impl DisturbanceSource for ReplayDisturbance {
    fn next(&mut self, t: usize, w_set: &Polytope) -> Result<DVector<f64>> {
        Ok(self.0.get(t).cloned().unwrap_or_else(|| DVector::zeros(w_set.dim())))
    }
}

/// Instrumented phases of one loop iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Bound,
    Estimate,
    SafeSet,
    Filter,
    Apply,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogHeader {
    pub rng: String,
    pub seed: u64,
    pub controller: Controller,
    pub p: NormOrder,
    pub horizon: usize,
    pub state_names: Vec<String>,
    pub theta_true: Vec<f64>,
}

/// Everything known at time `t`. Input-side fields are `None` on the final record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: usize,
    pub x: Vec<f64>,
    pub u_nom: Option<Vec<f64>>,
    pub u_safe: Option<Vec<f64>>,
    pub modified: Option<bool>,
    pub w: Option<Vec<f64>>,
    pub theta_hat: Vec<f64>,
    pub beta1: f64,
    pub beta2: Option<f64>,
    pub delta: Option<Vec<f64>>,
    pub eta: Vec<f64>,
    /// Bounding box of `Theta_t`, `(lo, hi)` per coordinate.
    pub theta_range: Vec<(f64, f64)>,
    pub b: f64,
    /// Certificate margin of the applied input.
    pub margin: Option<f64>,
    pub b_rt: f64,
    pub b_bar_rt: f64,
    pub v_t: f64,
    pub v_bar: f64,
    pub set_rows: usize,
    /// Whether the true parameter lies in `Theta_t`.
    pub theta_true_in_set: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryLog {
    pub header: LogHeader,
    pub steps: Vec<StepRecord>,
    #[serde(skip)]
    pub trace: Vec<(usize, Phase)>,
}

impl TrajectoryLog {
    pub fn min_b(&self) -> f64 {
        self.steps.iter().map(|s| s.b).fold(f64::INFINITY, f64::min)
    }

    pub fn first_violation(&self) -> Option<usize> {
        self.steps.iter().find(|s| s.b < -SAFETY_TOL).map(|s| s.t)
    }

    /// First `t + 1` with `B(x_t) >= 0` and `B(x_{t+1}) < 0`. Unlike
    /// [`Self::first_violation`] this ignores an unsafe initial state.
    pub fn first_exit(&self) -> Option<usize> {
        self.steps
            .windows(2)
            .find(|w| w[0].b >= -SAFETY_TOL && w[1].b < -SAFETY_TOL)
            .map(|w| w[1].t)
    }

    /// Smallest applied value of the first input coordinate.
    pub fn min_u(&self) -> f64 {
        self.steps
            .iter()
            .filter_map(|s| s.u_safe.as_ref().map(|u| u[0]))
            .fold(f64::INFINITY, f64::min)
    }

    /// `sum_t ||u_safe - u_nom||^2`.
    pub fn modification_energy(&self) -> f64 {
        self.steps
            .iter()
            .filter_map(|s| match (&s.u_safe, &s.u_nom) {
                (Some(a), Some(b)) => Some(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>()),
                _ => None,
            })
            .sum()
    }

    pub fn inputs(&self) -> Vec<Vec<f64>> {
        self.steps.iter().filter_map(|s| s.u_safe.clone()).collect()
    }

    pub fn disturbances(&self) -> Vec<DVector<f64>> {
        self.steps
            .iter()
            .filter_map(|s| s.w.as_ref().map(|w| DVector::from_column_slice(w)))
            .collect()
    }
}

/// Run one seed of `config`.
pub fn run_episode(config: &RunConfig, seed: u64) -> Result<TrajectoryLog> {
    let scenario = config.scenario()?;
    let mut source = RngDisturbance::new(seed, scenario.disturbance);
    run_scenario(&scenario, seed, &mut source)
}

/// Run a resolved scenario with an explicit disturbance source.
pub fn run_scenario(sc: &Scenario, seed: u64, source: &mut dyn DisturbanceSource) -> Result<TrajectoryLog> {
    let model = &sc.model;
    let spec = &sc.spec;
    let header = LogHeader {
        rng: RNG_ALGORITHM.into(),
        seed,
        controller: sc.controller,
        p: sc.p,
        horizon: sc.horizon,
        state_names: model.dynamics().state_names(),
        theta_true: sc.theta_true.iter().copied().collect(),
    };

    let mut state = EstimatorState::new(sc.theta_hat0.clone(), sc.theta_set.clone())?;
    let beta0 = state.beta(sc.p)?;
    let surrogate = beta0 * beta0 / (2.0 * spec.lambda_min());
    if sc.controller.is_filtered() && spec.b(&sc.x0) < surrogate {
        log::warn!(
            "initial state fails the safe-start surrogate: B(x0) = {:.6} < beta0^2 / (2 lambda_min) = {:.6}",
            spec.b(&sc.x0),
            surrogate
        );
    }
    let worst_case = match sc.controller {
        Controller::RcbfFixedNominal => Some(AdaptiveTerms::worst_case(&sc.theta_hat0, &sc.theta_set, sc.p)?),
        _ => None,
    };

    let mut steps = Vec::with_capacity(sc.horizon + 1);
    let mut trace = Vec::with_capacity(5 * sc.horizon);
    let mut x = sc.x0.clone();
    let mut prev: Option<(DVector<f64>, DVector<f64>)> = None;
    let mut eta_t = eta(&state.set)?;

    for t in 0..sc.horizon {
        trace.push((t, Phase::Bound));
        let beta = state.beta(sc.p)?;

        trace.push((t, Phase::Estimate));
        let transition = prev.as_ref().map(|(xp, up)| Transition { x_prev: xp, u_prev: up, x: &x });
        let next = sc
            .estimator
            .step(&state, model, transition)
            .map_err(|e| e.at_step(t))?;
        let eta_next = eta(&next.set)?;

        trace.push((t, Phase::SafeSet));
        let adaptive = Certificate::Adaptive(AdaptiveTerms {
            theta_hat: state.theta_hat.clone(),
            beta,
            delta: &next.theta_hat - &state.theta_hat,
        });
        let cert = match sc.controller {
            Controller::RacbfAdaptiveNominal | Controller::NominalOnly => adaptive,
            Controller::RcbfFixedNominal => Certificate::WorstCase(worst_case.clone().expect("precomputed")),
            Controller::ErrorBoundAdaptiveNominal => Certificate::ErrorBound(ErrorBoundTerms {
                theta_hat: state.theta_hat.clone(),
                eta: eta_t.clone(),
                eta_next: eta_next.clone(),
            }),
            Controller::OracleRobust => Certificate::RobustOracle {
                theta_star: sc.theta_true.clone(),
            },
        };
        let nominal_theta = match sc.controller {
            Controller::RcbfFixedNominal => &sc.theta_hat0,
            _ => &state.theta_hat,
        };
        let u_nom = sc.nominal.eval(model, &x, nominal_theta)?;

        trace.push((t, Phase::Filter));
        let (u_safe, modified, margin) = if sc.controller.is_filtered() {
            filter(sc, &x, &cert, &u_nom).map_err(|e| e.at_step(t))?
        } else {
            let m = cert.margin(spec, model, &x, &u_nom)?;
            (u_nom.clone(), false, m)
        };

        trace.push((t, Phase::Apply));
        let w = source.next(t, model.disturbance_set())?;
        let x_next = model.step(&x, &u_safe, &w, &sc.theta_true)?;

        steps.push(record(sc, t, &x, &state, &eta_t, Some(StepInputs {
            u_nom: &u_nom,
            u_safe: &u_safe,
            modified,
            w: &w,
            delta: &next.theta_hat - &state.theta_hat,
            margin,
        }))?);
        log::debug!("t={t} x={:?} u={:?} margin={margin:.3e}", x.as_slice(), u_safe.as_slice());

        if !sc.state_bounds.contains(&x_next, 0.0) {
            return Err(Error::StateOutOfBounds {
                step: t + 1,
                state: x_next.iter().copied().collect(),
            });
        }
        prev = Some((x, u_safe));
        x = x_next;
        state = next;
        eta_t = eta_next;
    }
    steps.push(record(sc, sc.horizon, &x, &state, &eta_t, None)?);
    Ok(TrajectoryLog { header, steps, trace })
}

fn filter(sc: &Scenario, x: &DVector<f64>, cert: &Certificate, u_nom: &DVector<f64>) -> Result<(DVector<f64>, bool, f64)> {
    match safe_input_halfspace(&sc.spec, &sc.model, x, cert) {
        Ok(set) => {
            let r = filter_solve(&set, u_nom)?;
            Ok((r.u_safe, r.modified, r.margin_after))
        }
        Err(Error::NonAffineBarrier) if u_nom.len() == 1 => {
            let (lo, hi) = coordinate_range(sc.model.input_set(), 0)?;
            let margin = |u: f64| cert.margin(&sc.spec, &sc.model, x, &DVector::from_element(1, u));
            let u = filter_solve_bisection(margin, lo, hi, u_nom[0])?;
            let u = DVector::from_element(1, u);
            let m = cert.margin(&sc.spec, &sc.model, x, &u)?;
            Ok((u.clone(), (&u - u_nom).norm() > crate::filter::TOL_MARGIN, m))
        }
        Err(e) => Err(e),
    }
}

struct StepInputs<'a> {
    u_nom: &'a DVector<f64>,
    u_safe: &'a DVector<f64>,
    modified: bool,
    w: &'a DVector<f64>,
    delta: DVector<f64>,
    margin: f64,
}

fn record(
    sc: &Scenario,
    t: usize,
    x: &DVector<f64>,
    state: &EstimatorState,
    eta_t: &DVector<f64>,
    inputs: Option<StepInputs<'_>>,
) -> Result<StepRecord> {
    let bv = barrier_values(&sc.spec, x, &state.theta_hat, Some(eta_t), Some(&sc.theta_true));
    let theta_range = (0..state.set.dim())
        .map(|i| coordinate_range(&state.set, i))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let to_vec = |v: &DVector<f64>| v.iter().copied().collect::<Vec<f64>>();
    Ok(StepRecord {
        t,
        x: to_vec(x),
        u_nom: inputs.as_ref().map(|i| to_vec(i.u_nom)),
        u_safe: inputs.as_ref().map(|i| to_vec(i.u_safe)),
        modified: inputs.as_ref().map(|i| i.modified),
        w: inputs.as_ref().map(|i| to_vec(i.w)),
        theta_hat: to_vec(&state.theta_hat),
        beta1: state.beta1,
        beta2: state.beta2,
        delta: inputs.as_ref().map(|i| to_vec(&i.delta)),
        eta: to_vec(eta_t),
        theta_range,
        b: bv.b,
        margin: inputs.as_ref().map(|i| i.margin),
        b_rt: bv.b_rt.expect("oracle supplied"),
        b_bar_rt: bv.b_bar_rt.expect("eta supplied"),
        v_t: bv.v.expect("oracle supplied"),
        v_bar: bv.v_bar.expect("eta supplied"),
        set_rows: state.set.n_rows(),
        theta_true_in_set: state.set.contains(&sc.theta_true, crate::geometry::TOL_FEAS),
    })
}
