//! JSON run configuration and its resolution into a concrete scenario.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::certificates::{acc_barrier, Barrier, BarrierSpec};
use crate::dynamics::{acc_model, AccParams, AffineDynamics, DisturbanceMode, SystemModel};
use crate::estimation::RlsSetMembership;
use crate::geometry::{coordinate_range, project, NormOrder, Polytope};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Controller {
    /// Robust adaptive certificate with the certainty-equivalence nominal.
    #[serde(rename = "raCBF_adaptive_nominal")]
    RacbfAdaptiveNominal,
    /// Worst-case certificate over the full parameter set with a fixed nominal.
    #[serde(rename = "rCBF_fixed_nominal")]
    RcbfFixedNominal,
    /// Unfiltered certainty-equivalence nominal.
    #[serde(rename = "nominal_only")]
    NominalOnly,
    /// Error-bound certificate with the certainty-equivalence nominal.
    #[serde(rename = "ebCBF_adaptive_nominal")]
    ErrorBoundAdaptiveNominal,
    /// Robust certificate evaluated at the true parameter.
    #[serde(rename = "oracle_robust_cbf")]
    OracleRobust,
}

impl Controller {
    pub fn name(self) -> &'static str {
        match self {
            Controller::RacbfAdaptiveNominal => "raCBF_adaptive_nominal",
            Controller::RcbfFixedNominal => "rCBF_fixed_nominal",
            Controller::NominalOnly => "nominal_only",
            Controller::ErrorBoundAdaptiveNominal => "ebCBF_adaptive_nominal",
            Controller::OracleRobust => "oracle_robust_cbf",
        }
    }

    pub fn is_filtered(self) -> bool {
        self != Controller::NominalOnly
    }

    /// The three controllers of the comparison experiment.
    pub const COMPARISON: [Controller; 3] = [
        Controller::RacbfAdaptiveNominal,
        Controller::RcbfFixedNominal,
        Controller::NominalOnly,
    ];
}

/// Input-affine model given by plain row-major arrays.
///
/// The nominal policy is `u = K x + k0` projected onto `U`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AffineConfig {
    pub drift_matrix: Vec<Vec<f64>>,
    #[serde(default)]
    pub drift_offset: Option<Vec<f64>>,
    /// `q x n`.
    pub kernel_const: Vec<Vec<f64>>,
    /// One `q x n` matrix per state coordinate.
    #[serde(default)]
    pub kernel_slopes: Vec<Vec<Vec<f64>>>,
    /// `n x m`.
    pub coupling: Vec<Vec<f64>>,
    pub input_lo: Vec<f64>,
    pub input_hi: Vec<f64>,
    /// `W` is the box `[-half_width, half_width]`.
    pub disturbance_half_width: Vec<f64>,
    pub theta_lo: Vec<f64>,
    pub theta_hi: Vec<f64>,
    pub theta_true: Vec<f64>,
    #[serde(default)]
    pub state_lo: Option<Vec<f64>>,
    #[serde(default)]
    pub state_hi: Option<Vec<f64>>,
    pub barrier_normal: Vec<f64>,
    pub barrier_offset: f64,
    pub x0: Vec<f64>,
    #[serde(default)]
    pub nominal_gain: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub nominal_offset: Option<Vec<f64>>,
}

impl AffineConfig {
    /// `x+ = x + 0.1 - 0.1 (1 + x) theta + 0.1 u + w`, `B = 2 - x`, constant
    /// nominal `u = 1` whose equilibrium `x = 3` is unsafe.
    pub fn scalar_demo() -> Self {
        Self {
            drift_matrix: vec![vec![1.0]],
            drift_offset: Some(vec![0.1]),
            kernel_const: vec![vec![0.1]],
            kernel_slopes: vec![vec![vec![0.1]]],
            coupling: vec![vec![0.1]],
            input_lo: vec![-1.0],
            input_hi: vec![1.0],
            disturbance_half_width: vec![0.01],
            theta_lo: vec![0.0],
            theta_hi: vec![1.0],
            theta_true: vec![0.5],
            state_lo: Some(vec![-10.0]),
            state_hi: Some(vec![10.0]),
            barrier_normal: vec![-1.0],
            barrier_offset: 2.0,
            x0: vec![0.0],
            nominal_gain: None,
            nominal_offset: Some(vec![1.0]),
        }
    }

    fn dynamics(&self) -> Result<AffineDynamics> {
        let n = self.drift_matrix.len();
        let d = AffineDynamics {
            drift_matrix: matrix("drift_matrix", &self.drift_matrix, n)?,
            drift_offset: match &self.drift_offset {
                Some(c) => DVector::from_column_slice(c),
                None => DVector::zeros(n),
            },
            kernel_const: matrix("kernel_const", &self.kernel_const, n)?,
            kernel_slopes: self
                .kernel_slopes
                .iter()
                .map(|k| matrix("kernel_slopes", k, n))
                .collect::<Result<_>>()?,
            coupling: matrix("coupling", &self.coupling, self.coupling.first().map_or(0, Vec::len))?,
        };
        d.validate()?;
        Ok(d)
    }
}

fn matrix(name: &str, rows: &[Vec<f64>], cols: usize) -> Result<DMatrix<f64>> {
    if rows.iter().any(|r| r.len() != cols) {
        return Err(Error::Config(format!("{name}: every row must have {cols} entries")));
    }
    Ok(DMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j]))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelConfig {
    Acc(AccParams),
    ScalarDemo,
    Affine(AffineConfig),
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig::Acc(AccParams::default())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub horizon: usize,
    pub controller: Controller,
    pub p: NormOrder,
    pub gamma_alpha: f64,
    /// `Gamma = kappa I`.
    pub kappa: f64,
    /// Safety margin `a` subtracted from the barrier.
    pub barrier_margin: f64,
    /// ACC headway time in `B = d - headway v - a`.
    pub headway: f64,
    pub seeds: Vec<u64>,
    pub disturbance: DisturbanceMode,
    /// Initial state; defaults to the model's own.
    pub x0: Option<Vec<f64>>,
    /// Initial estimate; defaults to the centre of the parameter box.
    pub theta_hat0: Option<Vec<f64>>,
    /// ACC nominal reference speed, m/s.
    pub v_ref: f64,
    /// ACC nominal tracking gain, 1/s.
    pub gain: f64,
    pub estimator: RlsSetMembership,
    pub output_dir: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            model: ModelConfig::default(),
            horizon: 200,
            controller: Controller::RacbfAdaptiveNominal,
            p: NormOrder::Two,
            gamma_alpha: 0.2,
            kappa: 100.0,
            barrier_margin: 0.0,
            headway: 1.8,
            seeds: (0..20).collect(),
            disturbance: DisturbanceMode::UniformBox,
            x0: None,
            theta_hat0: None,
            v_ref: 30.0,
            gain: 0.08,
            estimator: RlsSetMembership::default(),
            output_dir: None,
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon < 1 {
            return Err(Error::Config("horizon must be at least 1".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("seeds must be non-empty".into()));
        }
        for (name, v) in [("kappa", self.kappa), ("headway", self.headway), ("v_ref", self.v_ref), ("gain", self.gain)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.barrier_margin >= 0.0) {
            return Err(Error::Config("barrier_margin must be non-negative".into()));
        }
        let est = &self.estimator;
        if !(est.mu_fraction > 0.0 && est.mu_fraction < 1.0) || !(est.mu_max > 0.0) {
            return Err(Error::Config("estimator mu_fraction must lie in (0, 1) and mu_max be positive".into()));
        }
        if let ModelConfig::Acc(p) = &self.model {
            p.validate()?;
        }
        Ok(())
    }

    pub fn scenario(&self) -> Result<Scenario> {
        self.validate()?;
        let (model, barrier, theta_true, theta_set, x0, state_bounds, nominal) = match &self.model {
            ModelConfig::Acc(p) => {
                let model = acc_model(p)?;
                let barrier = acc_barrier(self.headway, self.barrier_margin);
                let nominal = Nominal::Acc {
                    params: p.clone(),
                    v_ref: self.v_ref,
                    gain: self.gain,
                };
                (model, barrier, p.theta_true(), p.theta_box(), vec![18.0, 60.0], p.state_box(), nominal)
            }
            ModelConfig::ScalarDemo => affine_parts(&AffineConfig::scalar_demo(), self.barrier_margin)?,
            ModelConfig::Affine(a) => affine_parts(a, self.barrier_margin)?,
        };
        let q = model.param_dim();
        let spec = BarrierSpec::isotropic(barrier, self.gamma_alpha, self.kappa, q)?;
        let x0 = DVector::from_vec(self.x0.clone().unwrap_or(x0));
        if x0.len() != model.state_dim() {
            return Err(Error::Config(format!("x0 must have {} entries", model.state_dim())));
        }
        let theta_hat0 = match &self.theta_hat0 {
            Some(t) => DVector::from_column_slice(t),
            None => box_centre(&theta_set)?,
        };
        if theta_hat0.len() != q {
            return Err(Error::Config(format!("theta_hat0 must have {q} entries")));
        }
        if !theta_set.contains(&theta_true, crate::geometry::TOL_FEAS) {
            return Err(Error::Config("theta_true lies outside the parameter set".into()));
        }
        Ok(Scenario {
            model,
            spec,
            theta_true,
            theta_set,
            theta_hat0,
            x0,
            state_bounds,
            nominal,
            controller: self.controller,
            p: self.p,
            horizon: self.horizon,
            disturbance: self.disturbance,
            estimator: self.estimator,
        })
    }
}

type Parts = (SystemModel, Barrier, DVector<f64>, Polytope, Vec<f64>, Polytope, Nominal);

fn affine_parts(a: &AffineConfig, margin: f64) -> Result<Parts> {
    let dynamics = a.dynamics()?;
    let (n, m) = (dynamics.drift_matrix.nrows(), dynamics.coupling.ncols());
    let input_set = Polytope::from_box(&a.input_lo, &a.input_hi)?;
    let disturbance_set = Polytope::symmetric_box(&a.disturbance_half_width)?;
    let model = SystemModel::new(Arc::new(dynamics), input_set, disturbance_set)?;
    let theta_set = Polytope::from_box(&a.theta_lo, &a.theta_hi)?;
    if a.barrier_normal.len() != n {
        return Err(Error::Config(format!("barrier_normal must have {n} entries")));
    }
    let barrier = Barrier::Affine {
        normal: DVector::from_column_slice(&a.barrier_normal),
        offset: a.barrier_offset - margin,
    };
    let state_bounds = match (&a.state_lo, &a.state_hi) {
        (Some(lo), Some(hi)) => Polytope::from_box(lo, hi)?,
        (None, None) => Polytope::universe(n),
        _ => return Err(Error::Config("state_lo and state_hi must be given together".into())),
    };
    let gain = match &a.nominal_gain {
        Some(k) => matrix("nominal_gain", k, n)?,
        None => DMatrix::zeros(m, n),
    };
    let offset = match &a.nominal_offset {
        Some(k) => DVector::from_column_slice(k),
        None => DVector::zeros(m),
    };
    if gain.nrows() != m || offset.len() != m {
        return Err(Error::Config(format!("nominal gain and offset must have {m} rows")));
    }
    Ok((
        model,
        barrier,
        DVector::from_column_slice(&a.theta_true),
        theta_set,
        a.x0.clone(),
        state_bounds,
        Nominal::Affine { gain, offset },
    ))
}

/// Centre of the bounding box, projected back onto the set.
fn box_centre(set: &Polytope) -> Result<DVector<f64>> {
    let mut c = DVector::zeros(set.dim());
    for i in 0..set.dim() {
        let (lo, hi) = coordinate_range(set, i)?;
        c[i] = 0.5 * (lo + hi);
    }
    Ok(project(set, &c)?)
}

/// Nominal policy of a scenario.
#[derive(Debug, Clone)]
pub enum Nominal {
    Acc { params: AccParams, v_ref: f64, gain: f64 },
    Affine { gain: DMatrix<f64>, offset: DVector<f64> },
}

impl Nominal {
    /// Nominal input with the drag estimate taken from `theta` (ACC) or the
    /// fixed linear law (affine models).
    pub fn eval(&self, model: &SystemModel, x: &DVector<f64>, theta: &DVector<f64>) -> Result<DVector<f64>> {
        match self {
            Nominal::Acc { params, v_ref, gain } => Ok(crate::filter::nominal_ce(params, x, theta, *v_ref, *gain)),
            Nominal::Affine { gain, offset } => {
                let u = gain * x + offset;
                Ok(project(model.input_set(), &u)?)
            }
        }
    }
}

/// A fully resolved experiment.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub model: SystemModel,
    pub spec: BarrierSpec,
    pub theta_true: DVector<f64>,
    pub theta_set: Polytope,
    pub theta_hat0: DVector<f64>,
    pub x0: DVector<f64>,
    pub state_bounds: Polytope,
    pub nominal: Nominal,
    pub controller: Controller,
    pub p: NormOrder,
    pub horizon: usize,
    pub disturbance: DisturbanceMode,
    pub estimator: RlsSetMembership,
}

impl Scenario {
    pub fn with_controller(&self, controller: Controller) -> Self {
        Self {
            controller,
            ..self.clone()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_resolve() {
        let s = RunConfig::default().scenario().unwrap();
        assert_eq!(s.x0.as_slice(), &[18.0, 60.0]);
        assert!((s.theta_hat0[0] - 0.25).abs() < 1e-12 && (s.theta_hat0[1] - 15.0).abs() < 1e-12);
        assert_eq!(s.horizon, 200);
    }

    #[test]
    fn partial_json_overrides() {
        let cfg = RunConfig::from_json(
            r#"{"model": {"kind": "acc", "mass": 1700.0, "u_max_g": 5.0}, "p": 1, "controller": "rCBF_fixed_nominal", "seeds": [3, 4]}"#,
        )
        .unwrap();
        let ModelConfig::Acc(p) = &cfg.model else { panic!() };
        assert_eq!(p.mass, 1700.0);
        assert_eq!(p.dt, 0.1);
        assert_eq!(cfg.p, NormOrder::One);
        assert_eq!(cfg.controller, Controller::RcbfFixedNominal);
        assert_eq!(cfg.seeds, vec![3, 4]);
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(RunConfig::from_json(r#"{"horizon": 0}"#).is_err());
        assert!(RunConfig::from_json(r#"{"seeds": []}"#).is_err());
        assert!(RunConfig::from_json(r#"{"p": 3}"#).is_err());
        assert!(RunConfig::from_json(r#"{"kappa": -1}"#).is_err());
        assert!(RunConfig::from_json(r#"{"no_such_field": 1}"#).is_err());
        assert!(RunConfig::from_json(r#"{"model": {"kind": "acc", "dt": -0.1}}"#).is_err());
    }

    #[test]
    fn scalar_demo_and_affine() {
        let cfg = RunConfig::from_json(r#"{"model": {"kind": "scalar_demo"}}"#).unwrap();
        let s = cfg.scenario().unwrap();
        assert_eq!(s.model.state_dim(), 1);
        let text = serde_json::to_string(&RunConfig {
            model: ModelConfig::Affine(AffineConfig::scalar_demo()),
            ..RunConfig::default()
        })
        .unwrap();
        let back = RunConfig::from_json(&text).unwrap();
        assert!(matches!(back.model, ModelConfig::Affine(_)));
    }
}
