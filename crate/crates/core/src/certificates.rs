//! Barrier certificates: robust, robust adaptive, worst-case and error-bound
//! margins, together with the associated barrier and energy values.
//!
//! Every margin has the form
//! `B(f(x,u;theta)) - B(x) - L_B w_bar - E + alpha(B(x) - tightening)` and an
//! input is certified when the margin is non-negative.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dynamics::{check_dim, SystemModel};
use crate::estimation::EstimatorState;
use crate::geometry::{coordinate_range, max_norm_distance, spectral_norm, NormOrder, Polytope};
use crate::{Error, Result};

type BarrierFn = Arc<dyn Fn(&DVector<f64>) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum Barrier {
    /// `B(x) = c^T x + b`, with `L_B = ||c||_2`.
    Affine { normal: DVector<f64>, offset: f64 },
    /// Arbitrary barrier with a user-supplied Lipschitz constant.
    General { eval: BarrierFn, lipschitz: f64 },
}

impl fmt::Debug for Barrier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Barrier::Affine { normal, offset } => f
                .debug_struct("Affine")
                .field("normal", &normal.as_slice())
                .field("offset", offset)
                .finish(),
            Barrier::General { lipschitz, .. } => {
                f.debug_struct("General").field("lipschitz", lipschitz).finish_non_exhaustive()
            }
        }
    }
}

impl Barrier {
    pub fn eval(&self, x: &DVector<f64>) -> f64 {
        match self {
            Barrier::Affine { normal, offset } => normal.dot(x) + offset,
            Barrier::General { eval, .. } => eval(x),
        }
    }

    pub fn lipschitz(&self) -> f64 {
        match self {
            Barrier::Affine { normal, .. } => normal.norm(),
            Barrier::General { lipschitz, .. } => *lipschitz,
        }
    }
}

/// Headway barrier `B(v, d) = d - headway * v - a`.
pub fn acc_barrier(headway: f64, a: f64) -> Barrier {
    Barrier::Affine {
        normal: DVector::from_column_slice(&[-headway, 1.0]),
        offset: -a,
    }
}

/// Linear class-K rate `alpha(r) = gamma r`, extended to negative arguments.
pub fn alpha_eval(gamma: f64, r: f64) -> Result<f64> {
    check_rate(gamma)?;
    Ok(gamma * r)
}

fn check_rate(gamma: f64) -> Result<()> {
    if gamma > 0.0 && gamma < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidRate(gamma))
    }
}

#[derive(Debug, Clone)]
pub struct BarrierSpec {
    barrier: Barrier,
    gamma_alpha: f64,
    gain: DMatrix<f64>,
    gain_inv: DMatrix<f64>,
    lambda_min: f64,
}

impl BarrierSpec {
    /// `gain` is the adaptation gain `Gamma`; it must be symmetric positive definite.
    pub fn new(barrier: Barrier, gamma_alpha: f64, gain: DMatrix<f64>) -> Result<Self> {
        check_rate(gamma_alpha)?;
        if !gain.is_square() {
            return Err(Error::InvalidParams("adaptation gain must be square".into()));
        }
        let asym = (&gain - gain.transpose()).amax();
        if asym > 1e-12 * (1.0 + gain.amax()) {
            return Err(Error::InvalidParams("adaptation gain must be symmetric".into()));
        }
        let lambda_min = gain.clone().symmetric_eigen().eigenvalues.min();
        if !(lambda_min > 0.0) {
            return Err(Error::InvalidParams("adaptation gain must be positive definite".into()));
        }
        let gain_inv = gain
            .clone()
            .cholesky()
            .ok_or_else(|| Error::InvalidParams("adaptation gain must be positive definite".into()))?
            .inverse();
        let lip = barrier.lipschitz();
        if !(lip >= 0.0 && lip.is_finite()) {
            return Err(Error::InvalidParams(format!("Lipschitz constant must be finite and non-negative, got {lip}")));
        }
        Ok(Self {
            barrier,
            gamma_alpha,
            gain,
            gain_inv,
            lambda_min,
        })
    }

    /// `Gamma = kappa I`.
    pub fn isotropic(barrier: Barrier, gamma_alpha: f64, kappa: f64, q: usize) -> Result<Self> {
        Self::new(barrier, gamma_alpha, DMatrix::identity(q, q) * kappa)
    }

    pub fn barrier(&self) -> &Barrier {
        &self.barrier
    }

    pub fn gamma_alpha(&self) -> f64 {
        self.gamma_alpha
    }

    pub fn gain(&self) -> &DMatrix<f64> {
        &self.gain
    }

    pub fn lambda_min(&self) -> f64 {
        self.lambda_min
    }

    pub fn lipschitz(&self) -> f64 {
        self.barrier.lipschitz()
    }

    pub fn alpha(&self, r: f64) -> f64 {
        self.gamma_alpha * r
    }

    pub fn b(&self, x: &DVector<f64>) -> f64 {
        self.barrier.eval(x)
    }

    /// `1/2 e^T Gamma^{-1} e`.
    pub fn gain_quadratic(&self, e: &DVector<f64>) -> f64 {
        0.5 * e.dot(&(&self.gain_inv * e))
    }
}

/// Data needed by the robust adaptive margin at step `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptiveTerms {
    pub theta_hat: DVector<f64>,
    pub beta: f64,
    pub delta: DVector<f64>,
}

impl AdaptiveTerms {
    /// `theta_hat_t` and `beta_t(p)` from `current`; the increment
    /// `delta_t = theta_hat_{t+1} - theta_hat_t` from `next`.
    pub fn from_step(current: &EstimatorState, next: &EstimatorState, p: NormOrder) -> Result<Self> {
        Ok(Self {
            theta_hat: current.theta_hat.clone(),
            beta: current.beta(p)?,
            delta: &next.theta_hat - &current.theta_hat,
        })
    }

    /// Constant estimate with the bound taken over the full parameter set.
    pub fn worst_case(theta_nom: &DVector<f64>, theta_full: &Polytope, p: NormOrder) -> Result<Self> {
        if !theta_full.contains(theta_nom, crate::geometry::TOL_FEAS) {
            return Err(Error::InvalidParams("nominal parameter outside the parameter set".into()));
        }
        Ok(Self {
            theta_hat: theta_nom.clone(),
            beta: max_norm_distance(theta_full, theta_nom, p)?,
            delta: DVector::zeros(theta_nom.len()),
        })
    }
}

/// Data needed by the error-bound margin at step `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorBoundTerms {
    pub theta_hat: DVector<f64>,
    pub eta: DVector<f64>,
    pub eta_next: DVector<f64>,
}

/// Coordinate widths `eta[i] = max theta[i] - min theta[i]` over the set.
pub fn eta(set: &Polytope) -> Result<DVector<f64>> {
    let mut out = DVector::zeros(set.dim());
    for i in 0..set.dim() {
        let (lo, hi) = coordinate_range(set, i)?;
        out[i] = hi - lo;
    }
    Ok(out)
}

/// `B(f(x,u;theta)) - B(x) - L_B w_bar`, the part shared by every margin.
fn descent_core(spec: &BarrierSpec, model: &SystemModel, x: &DVector<f64>, u: &DVector<f64>, theta: &DVector<f64>) -> Result<f64> {
    let next = model.predict(x, u, theta)?;
    Ok(spec.b(&next) - spec.b(x) - spec.lipschitz() * model.w_bar())
}

pub fn robust_cbc_margin(
    spec: &BarrierSpec,
    model: &SystemModel,
    x: &DVector<f64>,
    u: &DVector<f64>,
    theta_star: &DVector<f64>,
) -> Result<f64> {
    Ok(descent_core(spec, model, x, u, theta_star)? + spec.alpha(spec.b(x)))
}

/// `E = (L_B ||phi(x)|| + ||delta|| / lambda) beta + ||delta||^2 / (2 lambda)`.
fn estimation_penalty(spec: &BarrierSpec, model: &SystemModel, x: &DVector<f64>, beta: f64, delta: &DVector<f64>) -> f64 {
    let lam = spec.lambda_min();
    let phi_norm = spectral_norm(&model.kernel(x));
    let dn = delta.norm();
    (spec.lipschitz() * phi_norm + dn / lam) * beta + dn * dn / (2.0 * lam)
}

pub fn adaptive_cbc_margin(
    spec: &BarrierSpec,
    model: &SystemModel,
    x: &DVector<f64>,
    u: &DVector<f64>,
    terms: &AdaptiveTerms,
) -> Result<f64> {
    check_dim("parameter increment", model.param_dim(), terms.delta.len())?;
    let lam = spec.lambda_min();
    let core = descent_core(spec, model, x, u, &terms.theta_hat)?;
    let e = estimation_penalty(spec, model, x, terms.beta, &terms.delta);
    Ok(core - e + spec.alpha(spec.b(x) - terms.beta * terms.beta / (2.0 * lam)))
}

/// Adaptive margin with a frozen nominal estimate and the bound over `theta_full`.
pub fn worst_case_cbc_margin(
    spec: &BarrierSpec,
    model: &SystemModel,
    x: &DVector<f64>,
    u: &DVector<f64>,
    theta_nom: &DVector<f64>,
    theta_full: &Polytope,
    p: NormOrder,
) -> Result<f64> {
    let terms = AdaptiveTerms::worst_case(theta_nom, theta_full, p)?;
    adaptive_cbc_margin(spec, model, x, u, &terms)
}

/// Error-bound margin. The penalty multiplies its scalar coefficient by `||eta_t||_2`.
pub fn error_bound_cbc_margin(
    spec: &BarrierSpec,
    model: &SystemModel,
    x: &DVector<f64>,
    u: &DVector<f64>,
    terms: &ErrorBoundTerms,
) -> Result<f64> {
    check_dim("eta", model.param_dim(), terms.eta.len())?;
    check_dim("eta", model.param_dim(), terms.eta_next.len())?;
    let lam = spec.lambda_min();
    let eta_norm = terms.eta.norm();
    let d_eta = &terms.eta_next - &terms.eta;
    let core = descent_core(spec, model, x, u, &terms.theta_hat)?;
    let e = estimation_penalty(spec, model, x, eta_norm, &d_eta);
    Ok(core - e + spec.alpha(spec.b(x) - eta_norm * eta_norm / (2.0 * lam)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CertificateVariant {
    Adaptive,
    WorstCase,
    ErrorBound,
    RobustOracle,
}

/// A fully specified certificate at one step.
#[derive(Debug, Clone, PartialEq)]
pub enum Certificate {
    RobustOracle { theta_star: DVector<f64> },
    Adaptive(AdaptiveTerms),
    WorstCase(AdaptiveTerms),
    ErrorBound(ErrorBoundTerms),
}

impl Certificate {
    pub fn variant(&self) -> CertificateVariant {
        match self {
            Certificate::RobustOracle { .. } => CertificateVariant::RobustOracle,
            Certificate::Adaptive(_) => CertificateVariant::Adaptive,
            Certificate::WorstCase(_) => CertificateVariant::WorstCase,
            Certificate::ErrorBound(_) => CertificateVariant::ErrorBound,
        }
    }

    /// Parameter value used inside `f(x, u; .)`.
    pub fn theta_hat(&self) -> &DVector<f64> {
        match self {
            Certificate::RobustOracle { theta_star } => theta_star,
            Certificate::Adaptive(t) | Certificate::WorstCase(t) => &t.theta_hat,
            Certificate::ErrorBound(t) => &t.theta_hat,
        }
    }

    pub fn margin(&self, spec: &BarrierSpec, model: &SystemModel, x: &DVector<f64>, u: &DVector<f64>) -> Result<f64> {
        match self {
            Certificate::RobustOracle { theta_star } => robust_cbc_margin(spec, model, x, u, theta_star),
            Certificate::Adaptive(t) | Certificate::WorstCase(t) => adaptive_cbc_margin(spec, model, x, u, t),
            Certificate::ErrorBound(t) => error_bound_cbc_margin(spec, model, x, u, t),
        }
    }
}

/// Certified inputs `{u in U : a_u^T u + a_0 >= 0}`.
#[derive(Debug, Clone, PartialEq)]
pub struct SafeInputSet {
    pub a_u: DVector<f64>,
    pub a_0: f64,
    pub input_set: Polytope,
}

impl SafeInputSet {
    pub fn margin(&self, u: &DVector<f64>) -> f64 {
        self.a_u.dot(u) + self.a_0
    }

    /// The certified set as one polytope, `U ∩ {-a_u^T u <= a_0}`.
    pub fn as_polytope(&self) -> Result<Polytope> {
        let cut = Polytope::new(
            DMatrix::from_row_slice(1, self.a_u.len(), (-&self.a_u).as_slice()),
            DVector::from_element(1, self.a_0),
        )?;
        Ok(self.input_set.intersect(&cut)?)
    }
}

/// Affine-in-input form of a certificate margin; requires an affine barrier.
pub fn safe_input_halfspace(
    spec: &BarrierSpec,
    model: &SystemModel,
    x: &DVector<f64>,
    cert: &Certificate,
) -> Result<SafeInputSet> {
    let Barrier::Affine { normal, .. } = spec.barrier() else {
        return Err(Error::NonAffineBarrier);
    };
    check_dim("barrier normal", model.state_dim(), normal.len())?;
    let g = model.dynamics().coupling(x);
    let a_u = g.transpose() * normal;
    let a_0 = cert.margin(spec, model, x, &DVector::zeros(model.input_dim()))?;
    Ok(SafeInputSet {
        a_u,
        a_0,
        input_set: model.input_set().clone(),
    })
}

/// Barrier-type values at one state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BarrierValues {
    pub b: f64,
    /// `B - 1/2 eps^T Gamma^{-1} eps`, needs the true parameter.
    pub b_rt: Option<f64>,
    /// `B - 1/2 eta^T Gamma^{-1} eta`.
    pub b_bar_rt: Option<f64>,
    /// `max(0, -B_rt)`.
    pub v: Option<f64>,
    /// `max(0, -B_bar_rt)`.
    pub v_bar: Option<f64>,
}

impl BarrierValues {
    pub fn b_rt(&self) -> Result<f64> {
        self.b_rt.ok_or(Error::OracleUnavailable)
    }

    pub fn v(&self) -> Result<f64> {
        self.v.ok_or(Error::OracleUnavailable)
    }
}

/// Energy `V = 0` on the superlevel set, `-value` outside.
pub fn energy(value: f64) -> f64 {
    if value >= 0.0 {
        0.0
    } else {
        -value
    }
}

pub fn barrier_values(
    spec: &BarrierSpec,
    x: &DVector<f64>,
    theta_hat: &DVector<f64>,
    eta: Option<&DVector<f64>>,
    theta_star: Option<&DVector<f64>>,
) -> BarrierValues {
    let b = spec.b(x);
    let b_rt = theta_star.map(|ts| b - spec.gain_quadratic(&(theta_hat - ts)));
    let b_bar_rt = eta.map(|e| b - spec.gain_quadratic(e));
    BarrierValues {
        b,
        b_rt,
        b_bar_rt,
        v: b_rt.map(energy),
        v_bar: b_bar_rt.map(energy),
    }
}
