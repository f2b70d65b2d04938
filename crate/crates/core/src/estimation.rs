//! Set-membership estimation with an RLS prior and projection.
//!
//! At step `t` the estimator holds `(theta_hat_t, Theta_t)`. Given the newest
//! transition `(x_{t-1}, u_{t-1}, x_t)` it cuts `Theta_t` with the
//! non-falsified set, takes an RLS step from `theta_hat_t` and projects the
//! result onto the cut set, giving `(theta_hat_{t+1}, Theta_{t+1})`.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::dynamics::{check_dim, SystemModel};
use crate::geometry::{
    self, max_norm_distance, spectral_norm, GeometryError, NormOrder, Polytope, MAX_VERTEX_DIM, TOL_FEAS,
};
use crate::{Error, Result};

/// Default RLS step as a fraction of `1 / ||phi||^2`.
pub const DEFAULT_MU_FRACTION: f64 = 0.5;
/// Cap on the RLS step for weakly excited regressors.
pub const DEFAULT_MU_MAX: f64 = 1e3;
/// Redundant rows of `Theta_t` are pruned every this many steps.
pub const DEFAULT_PRUNE_EVERY: usize = 20;

/// One transition `(x_{t-1}, u_{t-1}, x_t)`.
#[derive(Debug, Clone, Copy)]
pub struct Transition<'a> {
    pub x_prev: &'a DVector<f64>,
    pub u_prev: &'a DVector<f64>,
    pub x: &'a DVector<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorState {
    pub t: usize,
    pub theta_hat: DVector<f64>,
    pub set: Polytope,
    /// `theta_hat_t - theta_hat_{t-1}`; zero before the first non-trivial update.
    pub delta: DVector<f64>,
    /// `max_{theta in Theta_t} ||theta - theta_hat_t||_1`.
    pub beta1: f64,
    /// Same with the 2-norm; `None` when the parameter dimension exceeds the
    /// vertex-enumeration limit.
    pub beta2: Option<f64>,
}

impl EstimatorState {
    pub fn new(theta_hat: DVector<f64>, set: Polytope) -> Result<Self> {
        check_dim("initial estimate", set.dim(), theta_hat.len())?;
        if set.is_empty() {
            return Err(GeometryError::EmptySet.into());
        }
        if !set.contains(&theta_hat, TOL_FEAS) {
            return Err(Error::InvalidParams("initial estimate lies outside the parameter set".into()));
        }
        let q = set.dim();
        let mut s = Self {
            t: 0,
            theta_hat,
            set,
            delta: DVector::zeros(q),
            beta1: 0.0,
            beta2: None,
        };
        s.refresh_bounds()?;
        Ok(s)
    }

    /// Cached `beta_t(p)`.
    pub fn beta(&self, p: NormOrder) -> Result<f64> {
        match p {
            NormOrder::One => Ok(self.beta1),
            NormOrder::Two => self.beta2.ok_or(Error::Geometry(GeometryError::DimensionTooLarge(self.set.dim()))),
        }
    }

    fn refresh_bounds(&mut self) -> Result<()> {
        self.beta1 = bounds(self, NormOrder::One)?;
        self.beta2 = if self.set.dim() <= MAX_VERTEX_DIM {
            Some(bounds(self, NormOrder::Two)?)
        } else {
            None
        };
        Ok(())
    }
}

/// `beta_t(p) = max_{theta in Theta_t} ||theta - theta_hat_t||_p`, computed fresh.
pub fn bounds(state: &EstimatorState, p: NormOrder) -> Result<f64> {
    Ok(max_norm_distance(&state.set, &state.theta_hat, p)?)
}

/// Parameters consistent with one transition:
/// `{theta : H_w phi(x_{t-1})^T theta <= 1 - H_w r_t}`, one row per row of `H_w`.
/// Offsets carry `TOL_FEAS` so a disturbance on the boundary of `W` does not
/// falsify the true parameter through rounding in `r_t`.
pub fn non_falsified_set(model: &SystemModel, tr: Transition<'_>) -> Result<Polytope> {
    let hw = model
        .disturbance_set()
        .unit_offset_normals()
        .ok_or_else(|| Error::InvalidParams("disturbance set must contain the origin in its interior".into()))?;
    let r = model.residual(tr.x_prev, tr.u_prev, tr.x)?;
    let phi = model.kernel(tr.x_prev);
    let normals = &hw * phi.transpose();
    let offsets = DVector::from_element(hw.nrows(), 1.0 + geometry::TOL_FEAS) - &hw * r;
    Ok(Polytope::new(normals, offsets)?)
}

/// `Theta_t ∩ Delta`, or `ModelFalsified` if the intersection is empty.
pub fn update_set(set: &Polytope, delta: &Polytope, step: usize) -> Result<Polytope> {
    let next = set.intersect(delta)?;
    if next.is_empty() {
        return Err(Error::ModelFalsified { step });
    }
    Ok(next)
}

/// `theta_hat - mu phi(x_{t-1}) (x_t - f(x_{t-1}, u_{t-1}; theta_hat))`.
pub fn rls_prior(theta_hat: &DVector<f64>, model: &SystemModel, tr: Transition<'_>, mu: f64) -> Result<DVector<f64>> {
    let phi = model.kernel(tr.x_prev);
    let norm = spectral_norm(&phi);
    let upper = if norm > 0.0 { 1.0 / (norm * norm) } else { f64::INFINITY };
    if !(mu > 0.0 && mu < upper) {
        return Err(Error::LearningRateOutOfRange { mu, upper });
    }
    let err = tr.x - model.predict(tr.x_prev, tr.u_prev, theta_hat)?;
    Ok(theta_hat - mu * phi * err)
}

/// An online estimator `(state_t, transition) -> state_{t+1}`.
pub trait Estimator: Send + Sync {
    /// `transition` must be the newest transition `(x_{t-1}, u_{t-1}, x_t)`;
    /// it is ignored (and may be `None`) at `t = 0`.
    fn step(&self, state: &EstimatorState, model: &SystemModel, transition: Option<Transition<'_>>) -> Result<EstimatorState>;
}

/// RLS prior followed by set-membership projection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RlsSetMembership {
    pub mu_fraction: f64,
    pub mu_max: f64,
    /// Zero disables pruning.
    pub prune_every: usize,
}

impl Default for RlsSetMembership {
    fn default() -> Self {
        Self {
            mu_fraction: DEFAULT_MU_FRACTION,
            mu_max: DEFAULT_MU_MAX,
            prune_every: DEFAULT_PRUNE_EVERY,
        }
    }
}

impl RlsSetMembership {
    /// `min(mu_fraction / ||phi||^2, mu_max)`, or 0 for a vanishing regressor.
    pub fn learning_rate(&self, phi_norm: f64) -> f64 {
        if phi_norm == 0.0 {
            0.0
        } else {
            (self.mu_fraction / (phi_norm * phi_norm)).min(self.mu_max)
        }
    }
}

impl Estimator for RlsSetMembership {
    fn step(&self, state: &EstimatorState, model: &SystemModel, transition: Option<Transition<'_>>) -> Result<EstimatorState> {
        let q = state.theta_hat.len();
        if state.t == 0 {
            let mut next = state.clone();
            next.t = 1;
            next.delta = DVector::zeros(q);
            return Ok(next);
        }
        let tr = transition.ok_or(Error::MissingTransition { step: state.t })?;
        let delta_set = non_falsified_set(model, tr)?;
        let mut set = update_set(&state.set, &delta_set, state.t)?;
        if self.prune_every > 0 && (state.t + 1).is_multiple_of(self.prune_every) {
            set = set.remove_redundant();
        }

        let mu = self.learning_rate(spectral_norm(&model.kernel(tr.x_prev)));
        let prior = if mu > 0.0 {
            rls_prior(&state.theta_hat, model, tr, mu)?
        } else {
            state.theta_hat.clone()
        };
        let theta_hat = geometry::project(&set, &prior).map_err(|e| match e {
            GeometryError::EmptySet => Error::ModelFalsified { step: state.t },
            other => other.into(),
        })?;
        let mut next = EstimatorState {
            t: state.t + 1,
            delta: &theta_hat - &state.theta_hat,
            theta_hat,
            set,
            beta1: 0.0,
            beta2: None,
        };
        next.refresh_bounds()?;
        Ok(next)
    }
}

/// `estimator_step` with the default RLS settings.
pub fn estimator_step(state: &EstimatorState, model: &SystemModel, transition: Option<Transition<'_>>) -> Result<EstimatorState> {
    RlsSetMembership::default().step(state, model, transition)
}
