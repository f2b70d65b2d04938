//! Input-affine discrete-time models `x+ = f0(x) - phi(x)^T theta + g(x) u + w`.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::geometry::{max_norm_distance, NormOrder, Polytope};
use crate::{Error, Result};

/// Standard gravity used to scale the ACC input bounds.
pub const GRAVITY: f64 = 9.81;

/// The three maps that define an input-affine model.
pub trait Dynamics: Send + Sync + fmt::Debug {
    fn state_dim(&self) -> usize;
    fn input_dim(&self) -> usize;
    fn param_dim(&self) -> usize;
    /// Nominal drift `f0(x)`.
    fn drift(&self, x: &DVector<f64>) -> DVector<f64>;
    /// Regressor `phi(x)`, shape `q x n`.
    fn kernel(&self, x: &DVector<f64>) -> DMatrix<f64>;
    /// Input coupling `g(x)`, shape `n x m`.
    fn coupling(&self, x: &DVector<f64>) -> DMatrix<f64>;
    /// Display names of the state coordinates.
    fn state_names(&self) -> Vec<String> {
        (1..=self.state_dim()).map(|i| format!("x_{i}")).collect()
    }
}

#[derive(Debug, Clone)]
pub struct SystemModel {
    dynamics: Arc<dyn Dynamics>,
    input_set: Polytope,
    disturbance_set: Polytope,
    w_bar: f64,
}

impl SystemModel {
    pub fn new(
        dynamics: Arc<dyn Dynamics>,
        input_set: Polytope,
        disturbance_set: Polytope,
    ) -> Result<Self> {
        let (n, m) = (dynamics.state_dim(), dynamics.input_dim());
        check_dim("input set", m, input_set.dim())?;
        check_dim("disturbance set", n, disturbance_set.dim())?;
        // origin strictly inside W: every offset positive
        if disturbance_set.unit_offset_normals().is_none() {
            return Err(Error::InvalidParams(
                "disturbance set must contain the origin in its interior".into(),
            ));
        }
        let w_bar = max_norm_distance(&disturbance_set, &DVector::zeros(n), NormOrder::Two)?;
        Ok(Self {
            dynamics,
            input_set,
            disturbance_set,
            w_bar,
        })
    }

    pub fn dynamics(&self) -> &dyn Dynamics {
        self.dynamics.as_ref()
    }

    pub fn state_dim(&self) -> usize {
        self.dynamics.state_dim()
    }

    pub fn input_dim(&self) -> usize {
        self.dynamics.input_dim()
    }

    pub fn param_dim(&self) -> usize {
        self.dynamics.param_dim()
    }

    pub fn input_set(&self) -> &Polytope {
        &self.input_set
    }

    pub fn disturbance_set(&self) -> &Polytope {
        &self.disturbance_set
    }

    /// `max_{w in W} ||w||_2`.
    pub fn w_bar(&self) -> f64 {
        self.w_bar
    }

    pub fn kernel(&self, x: &DVector<f64>) -> DMatrix<f64> {
        self.dynamics.kernel(x)
    }

    /// Disturbance-free prediction `f(x, u; theta)`.
    pub fn predict(&self, x: &DVector<f64>, u: &DVector<f64>, theta: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim("state", self.state_dim(), x.len())?;
        check_dim("input", self.input_dim(), u.len())?;
        check_dim("parameter", self.param_dim(), theta.len())?;
        let d = &self.dynamics;
        Ok(d.drift(x) - d.kernel(x).transpose() * theta + d.coupling(x) * u)
    }

    pub fn step(
        &self,
        x: &DVector<f64>,
        u: &DVector<f64>,
        w: &DVector<f64>,
        theta: &DVector<f64>,
    ) -> Result<DVector<f64>> {
        check_dim("disturbance", self.state_dim(), w.len())?;
        Ok(self.predict(x, u, theta)? + w)
    }

    /// `r_t = x_t - f0(x_{t-1}) - g(x_{t-1}) u_{t-1}`.
    pub fn residual(&self, x_prev: &DVector<f64>, u_prev: &DVector<f64>, x: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim("state", self.state_dim(), x_prev.len())?;
        check_dim("state", self.state_dim(), x.len())?;
        check_dim("input", self.input_dim(), u_prev.len())?;
        let d = &self.dynamics;
        Ok(x - d.drift(x_prev) - d.coupling(x_prev) * u_prev)
    }
}

pub(crate) fn check_dim(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { what, expected, got })
    }
}

/// Affine model: `f0(x) = A x + c`, `phi(x) = K0 + sum_j x[j] K_j`, `g(x) = G`.
#[derive(Debug, Clone)]
pub struct AffineDynamics {
    pub drift_matrix: DMatrix<f64>,
    pub drift_offset: DVector<f64>,
    /// `q x n`.
    pub kernel_const: DMatrix<f64>,
    /// One `q x n` slope per state coordinate, or empty for a constant kernel.
    pub kernel_slopes: Vec<DMatrix<f64>>,
    /// `n x m`.
    pub coupling: DMatrix<f64>,
}

impl AffineDynamics {
    pub fn validate(&self) -> Result<()> {
        let n = self.drift_matrix.nrows();
        check_dim("drift matrix columns", n, self.drift_matrix.ncols())?;
        check_dim("drift offset", n, self.drift_offset.len())?;
        check_dim("kernel columns", n, self.kernel_const.ncols())?;
        check_dim("coupling rows", n, self.coupling.nrows())?;
        if !self.kernel_slopes.is_empty() {
            check_dim("kernel slopes", n, self.kernel_slopes.len())?;
            for k in &self.kernel_slopes {
                check_dim("kernel slope rows", self.kernel_const.nrows(), k.nrows())?;
                check_dim("kernel slope columns", n, k.ncols())?;
            }
        }
        Ok(())
    }

    /// Scalar system `x+ = a x + c - (k0 + k1 x) theta + g u + w`.
    pub fn scalar(a: f64, c: f64, k0: f64, k1: f64, g: f64) -> Self {
        Self {
            drift_matrix: DMatrix::from_element(1, 1, a),
            drift_offset: DVector::from_element(1, c),
            kernel_const: DMatrix::from_element(1, 1, k0),
            kernel_slopes: vec![DMatrix::from_element(1, 1, k1)],
            coupling: DMatrix::from_element(1, 1, g),
        }
    }
}

impl Dynamics for AffineDynamics {
    fn state_dim(&self) -> usize {
        self.drift_matrix.nrows()
    }
    fn input_dim(&self) -> usize {
        self.coupling.ncols()
    }
    fn param_dim(&self) -> usize {
        self.kernel_const.nrows()
    }
    fn drift(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.drift_matrix * x + &self.drift_offset
    }
    fn kernel(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let mut k = self.kernel_const.clone();
        for (j, slope) in self.kernel_slopes.iter().enumerate() {
            k += slope * x[j];
        }
        k
    }
    fn coupling(&self, _x: &DVector<f64>) -> DMatrix<f64> {
        self.coupling.clone()
    }
}

/// Physical constants and uncertainty description of the ACC benchmark.
///
/// The state is `(v, d)`: ego speed and gap to the lead vehicle. The
/// unknown parameter is `(mu_aero, v_f)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AccParams {
    /// Effective mass, kg.
    pub mass: f64,
    /// Coulomb friction, N.
    pub f_roll: f64,
    /// Viscous coefficient, N s/m.
    pub mu_vis: f64,
    /// Sampling period, s.
    pub dt: f64,
    /// True `(mu_aero, v_f)`.
    pub theta_true: [f64; 2],
    pub mu_aero_bounds: [f64; 2],
    pub v_f_bounds: [f64; 2],
    /// Bounds on `w_v` (m/s^2) and `w_d` (m/s) before scaling by `dt`.
    pub w_bounds: [f64; 2],
    /// Input bound as a multiple of `mass * GRAVITY`.
    pub u_max_g: f64,
    /// Admissible state box `(v, d)`.
    pub state_lo: [f64; 2],
    pub state_hi: [f64; 2],
}

impl Default for AccParams {
    fn default() -> Self {
        Self {
            mass: 1650.0,
            f_roll: 0.1,
            mu_vis: 5.0,
            dt: 0.1,
            theta_true: [0.25, 14.0],
            mu_aero_bounds: [0.1, 0.4],
            v_f_bounds: [10.0, 20.0],
            w_bounds: [0.5, 0.5],
            u_max_g: 0.3,
            state_lo: [-5.0, -1000.0],
            state_hi: [60.0, 2000.0],
        }
    }
}

impl AccParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("mass", self.mass),
            ("f_roll", self.f_roll),
            ("mu_vis", self.mu_vis),
            ("dt", self.dt),
            ("w_v bound", self.w_bounds[0]),
            ("w_d bound", self.w_bounds[1]),
            ("u_max_g", self.u_max_g),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParams(format!("{name} must be positive, got {v}")));
            }
        }
        for (name, b) in [("mu_aero_bounds", self.mu_aero_bounds), ("v_f_bounds", self.v_f_bounds)] {
            if !(b[0] <= b[1]) || b[0] < 0.0 {
                return Err(Error::InvalidParams(format!("{name} must be ordered and non-negative")));
            }
        }
        let inside = |v: f64, b: [f64; 2]| b[0] <= v && v <= b[1];
        if !inside(self.theta_true[0], self.mu_aero_bounds) || !inside(self.theta_true[1], self.v_f_bounds) {
            return Err(Error::InvalidParams("theta_true outside the parameter box".into()));
        }
        if self.state_lo.iter().zip(&self.state_hi).any(|(l, h)| l >= h) {
            return Err(Error::InvalidParams("empty state box".into()));
        }
        Ok(())
    }

    pub fn theta_true(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.theta_true)
    }

    pub fn theta_box(&self) -> Polytope {
        Polytope::from_box(
            &[self.mu_aero_bounds[0], self.v_f_bounds[0]],
            &[self.mu_aero_bounds[1], self.v_f_bounds[1]],
        )
        .expect("2-d box")
    }

    pub fn u_max(&self) -> f64 {
        self.u_max_g * self.mass * GRAVITY
    }

    /// Known part of the resistance, `F_roll + mu_vis v`.
    pub fn known_resistance(&self, v: f64) -> f64 {
        self.f_roll + self.mu_vis * v
    }

    /// Full resistance `F_r(v)` for a given drag coefficient.
    pub fn resistance(&self, v: f64, mu_aero: f64) -> f64 {
        self.known_resistance(v) + mu_aero * v * v
    }

    pub fn state_box(&self) -> Polytope {
        Polytope::from_box(&self.state_lo, &self.state_hi).expect("2-d box")
    }
}

/// Forward-Euler ACC model.
#[derive(Debug, Clone)]
pub struct AccDynamics {
    params: AccParams,
}

impl AccDynamics {
    pub fn params(&self) -> &AccParams {
        &self.params
    }
}

impl Dynamics for AccDynamics {
    fn state_dim(&self) -> usize {
        2
    }
    fn input_dim(&self) -> usize {
        1
    }
    fn param_dim(&self) -> usize {
        2
    }
    fn drift(&self, x: &DVector<f64>) -> DVector<f64> {
        let p = &self.params;
        let (v, d) = (x[0], x[1]);
        DVector::from_column_slice(&[
            v - p.dt / p.mass * p.known_resistance(v),
            d - p.dt * v,
        ])
    }
    fn kernel(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let p = &self.params;
        let v = x[0];
        // phi^T = [[dt/M v^2, 0], [0, -dt]]; symmetric, so phi has the same entries
        DMatrix::from_row_slice(2, 2, &[p.dt / p.mass * v * v, 0.0, 0.0, -p.dt])
    }
    fn coupling(&self, _x: &DVector<f64>) -> DMatrix<f64> {
        let p = &self.params;
        DMatrix::from_column_slice(2, 1, &[p.dt / p.mass, 0.0])
    }
    fn state_names(&self) -> Vec<String> {
        vec!["v".into(), "d".into()]
    }
}

/// Build the discretized ACC model with `W = [-w_v dt, w_v dt] x [-w_d dt, w_d dt]`
/// and `U = [-u_max, u_max]`.
pub fn acc_model(params: &AccParams) -> Result<SystemModel> {
    params.validate()?;
    let u_max = params.u_max();
    let input_set = Polytope::from_box(&[-u_max], &[u_max])?;
    let w = [params.w_bounds[0] * params.dt, params.w_bounds[1] * params.dt];
    let disturbance_set = Polytope::symmetric_box(&w)?;
    SystemModel::new(
        Arc::new(AccDynamics {
            params: params.clone(),
        }),
        input_set,
        disturbance_set,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DisturbanceMode {
    UniformBox,
    VertexAdversarial,
    Zero,
}

/// Draw one disturbance from `W`.
///
/// `step` selects the vertex in `VertexAdversarial` mode (cycled in the
/// deterministic order returned by [`disturbance_vertices`]).
pub fn sample_disturbance<R: Rng + ?Sized>(
    w: &Polytope,
    rng: &mut R,
    mode: DisturbanceMode,
    step: usize,
) -> Result<DVector<f64>> {
    match mode {
        DisturbanceMode::Zero => Ok(DVector::zeros(w.dim())),
        DisturbanceMode::UniformBox => {
            let (lo, hi) = w.as_box().ok_or(Error::UnsupportedSetShape)?;
            Ok(DVector::from_fn(w.dim(), |i, _| {
                if lo[i] < hi[i] {
                    rng.gen_range(lo[i]..=hi[i])
                } else {
                    lo[i]
                }
            }))
        }
        DisturbanceMode::VertexAdversarial => {
            let verts = disturbance_vertices(w)?;
            Ok(verts[step % verts.len()].clone())
        }
    }
}

/// Vertices of `W`: box corners for boxes, otherwise vertex enumeration.
pub fn disturbance_vertices(w: &Polytope) -> Result<Vec<DVector<f64>>> {
    if let Some((lo, hi)) = w.as_box() {
        let n = lo.len();
        return Ok((0..1usize << n)
            .map(|mask| DVector::from_fn(n, |i, _| if mask >> i & 1 == 1 { hi[i] } else { lo[i] }))
            .collect());
    }
    Ok(crate::geometry::enumerate_vertices(w)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(xs)
    }

    fn scalar_model() -> SystemModel {
        // f0 = x, phi = 1, g = 1, W = [-1, 1], U = [-10, 10]
        SystemModel::new(
            Arc::new(AffineDynamics::scalar(1.0, 0.0, 1.0, 0.0, 1.0)),
            Polytope::from_box(&[-10.0], &[10.0]).unwrap(),
            Polytope::symmetric_box(&[1.0]).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn step_with_everything_off_is_drift() {
        let m = acc_model(&AccParams::default()).unwrap();
        let x = v(&[20.0, 50.0]);
        let out = m.step(&x, &v(&[0.0]), &v(&[0.0, 0.0]), &v(&[0.0, 0.0])).unwrap();
        assert_eq!(out, m.dynamics().drift(&x));
    }

    #[test]
    fn sign_convention_of_parameter_term() {
        let m = scalar_model();
        let out = m.step(&v(&[0.0]), &v(&[0.0]), &v(&[0.0]), &v(&[1.0])).unwrap();
        assert_eq!(out[0], -1.0);
    }

    #[test]
    fn acc_step_matches_hand_evaluation() {
        let p = AccParams::default();
        let m = acc_model(&p).unwrap();
        let (v0, d0) = (20.0, 50.0);
        // v+ = v - dt/M (F_roll + mu_vis v + mu_aero v^2) ; d+ = d + dt (v_f - v)
        let fr = 0.1 + 5.0 * 20.0 + 0.25 * 400.0;
        let v_next = v0 - 0.1 / 1650.0 * fr;
        let d_next = d0 + 0.1 * (14.0 - 20.0);
        let out = m.step(&v(&[v0, d0]), &v(&[0.0]), &v(&[0.0, 0.0]), &p.theta_true()).unwrap();
        assert_abs_diff_eq!(out[0], v_next, epsilon = 1e-12);
        assert_abs_diff_eq!(out[0], 19.987872727272727, epsilon = 1e-12);
        assert_abs_diff_eq!(out[1], d_next, epsilon = 1e-12);
        assert_abs_diff_eq!(out[1], 49.4, epsilon = 1e-12);

        // with input and disturbance: (dt/M) u and w_v dt, w_d dt
        let (u, wv, wd) = (1000.0, 0.3, -0.2);
        let w = v(&[wv * 0.1, wd * 0.1]);
        let out = m.step(&v(&[v0, d0]), &v(&[u]), &w, &p.theta_true()).unwrap();
        assert_abs_diff_eq!(out[0], v_next + 0.1 / 1650.0 * u + wv * 0.1, epsilon = 1e-12);
        assert_abs_diff_eq!(out[1], d_next + wd * 0.1, epsilon = 1e-12);
    }

    #[test]
    fn acc_limits() {
        let p = AccParams::default();
        let m = acc_model(&p).unwrap();
        let zero = v(&[0.0, 0.0]);
        // theta = 0: friction-only decay and d+ = d - dt v
        let out = m.step(&v(&[20.0, 50.0]), &v(&[0.0]), &zero, &zero).unwrap();
        assert_abs_diff_eq!(out[0], 20.0 - 0.1 / 1650.0 * (0.1 + 100.0), epsilon = 1e-12);
        assert_abs_diff_eq!(out[1], 48.0, epsilon = 1e-12);
        // v = 0: aerodynamic term vanishes
        let out = m.step(&v(&[0.0, 50.0]), &v(&[500.0]), &zero, &p.theta_true()).unwrap();
        assert_abs_diff_eq!(out[0], -0.1 / 1650.0 * 0.1 + 0.1 / 1650.0 * 500.0, epsilon = 1e-12);
        assert_abs_diff_eq!(m.w_bar(), (2.0f64 * 0.05 * 0.05).sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn invalid_params_rejected() {
        let mut p = AccParams::default();
        p.dt = 0.0;
        assert!(matches!(acc_model(&p), Err(Error::InvalidParams(_))));
        let mut p = AccParams::default();
        p.theta_true = [0.5, 14.0];
        assert!(matches!(acc_model(&p), Err(Error::InvalidParams(_))));
    }

    #[test]
    fn dimension_mismatch() {
        let m = scalar_model();
        assert!(matches!(
            m.step(&v(&[0.0, 1.0]), &v(&[0.0]), &v(&[0.0]), &v(&[1.0])),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn residual_examples() {
        let m = scalar_model();
        // theta* = 1, w = 0.3, x_prev = 0, u_prev = 0 -> x = -0.7, r = -0.7
        let x = m.step(&v(&[0.0]), &v(&[0.0]), &v(&[0.3]), &v(&[1.0])).unwrap();
        assert_abs_diff_eq!(x[0], -0.7, epsilon = 1e-15);
        let r = m.residual(&v(&[0.0]), &v(&[0.0]), &x).unwrap();
        assert_abs_diff_eq!(r[0], -0.7, epsilon = 1e-15);

        let acc = acc_model(&AccParams::default()).unwrap();
        let zero = v(&[0.0, 0.0]);
        let x_prev = v(&[18.0, 60.0]);
        let x = acc.step(&x_prev, &v(&[100.0]), &zero, &zero).unwrap();
        assert!(acc.residual(&x_prev, &v(&[100.0]), &x).unwrap().amax() < 1e-12);
        let corner = v(&[0.05, -0.05]);
        let x = acc.step(&x_prev, &v(&[100.0]), &corner, &zero).unwrap();
        let r = acc.residual(&x_prev, &v(&[100.0]), &x).unwrap();
        assert!((r - corner).amax() < 1e-12);
    }

    #[test]
    fn disturbance_modes() {
        let w = Polytope::symmetric_box(&[1.0, 1.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        assert_eq!(sample_disturbance(&w, &mut rng, DisturbanceMode::Zero, 0).unwrap(), v(&[0.0, 0.0]));
        let vert = sample_disturbance(&w, &mut rng, DisturbanceMode::VertexAdversarial, 0).unwrap();
        assert!(vert.iter().all(|c| c.abs() == 1.0));
        let n = 10_000;
        let mut mean = DVector::zeros(2);
        for t in 0..n {
            let s = sample_disturbance(&w, &mut rng, DisturbanceMode::UniformBox, t).unwrap();
            assert!(w.contains(&s, 0.0));
            mean += s;
        }
        mean /= n as f64;
        assert!(mean.amax() < 0.05, "{mean}");

        let tri = Polytope::from_rows(&[vec![1.0, 1.0], vec![-1.0, 0.0], vec![0.0, -1.0]], &[1.0, 1.0, 1.0]).unwrap();
        assert_eq!(
            sample_disturbance(&tri, &mut rng, DisturbanceMode::UniformBox, 0),
            Err(Error::UnsupportedSetShape)
        );
        assert!(tri.contains(&sample_disturbance(&tri, &mut rng, DisturbanceMode::VertexAdversarial, 4).unwrap(), 1e-9));
    }
}
