//! Minimally invasive safety filter and the ACC nominal policies.

use nalgebra::DVector;

use crate::certificates::SafeInputSet;
use crate::dynamics::AccParams;
use crate::geometry::{coordinate_range, lp_solve, project, GeometryError, Sense};
use crate::{Error, Result};

/// Margin tolerance for accepting an input and for flagging modification.
pub const TOL_MARGIN: f64 = 1e-9;
/// Looser tolerance applied before declaring the filter infeasible.
pub const TOL_INFEASIBLE: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq)]
pub struct FilterResult {
    pub u_safe: DVector<f64>,
    pub modified: bool,
    pub margin_before: f64,
    pub margin_after: f64,
    pub constraint: SafeInputSet,
}

/// Euclidean projection of `u_nom` onto `{u in U : a_u^T u + a_0 >= 0}`.
///
/// Scalar inputs use an interval clamp and vector inputs a polytope
/// projection. `FilterInfeasible` carries step 0; the caller attaches the step.
pub fn filter_solve(safe: &SafeInputSet, u_nom: &DVector<f64>) -> Result<FilterResult> {
    if u_nom.len() != safe.a_u.len() {
        return Err(Error::DimensionMismatch {
            what: "nominal input",
            expected: safe.a_u.len(),
            got: u_nom.len(),
        });
    }
    let margin_before = safe.margin(u_nom);
    let u_safe = if margin_before >= 0.0 && safe.input_set.contains(u_nom, 0.0) {
        u_nom.clone()
    } else if u_nom.len() == 1 {
        clamp_scalar(safe, u_nom[0])?
    } else {
        project_vector(safe, u_nom)?
    };
    let margin_after = safe.margin(&u_safe);
    Ok(FilterResult {
        modified: (&u_safe - u_nom).norm() > TOL_MARGIN,
        u_safe,
        margin_before,
        margin_after,
        constraint: safe.clone(),
    })
}

fn clamp_scalar(safe: &SafeInputSet, u_nom: f64) -> Result<DVector<f64>> {
    let (mut lo, mut hi) = coordinate_range(&safe.input_set, 0)?;
    let (a, a0) = (safe.a_u[0], safe.a_0);
    if a > 0.0 {
        lo = lo.max(-a0 / a);
    } else if a < 0.0 {
        hi = hi.min(-a0 / a);
    } else if a0 < -TOL_MARGIN {
        let (ulo, uhi) = coordinate_range(&safe.input_set, 0)?;
        return recheck(safe, &[ulo, uhi]);
    }
    if lo > hi {
        let (ulo, uhi) = coordinate_range(&safe.input_set, 0)?;
        return recheck(safe, &[ulo, uhi]);
    }
    Ok(DVector::from_element(1, u_nom.clamp(lo, hi)))
}

/// Accept the best input if it misses the constraint only by round-off.
fn recheck(safe: &SafeInputSet, candidates: &[f64]) -> Result<DVector<f64>> {
    let (u, best) = candidates
        .iter()
        .map(|&u| (u, safe.a_u[0] * u + safe.a_0))
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .expect("non-empty candidate list");
    if best >= -TOL_INFEASIBLE {
        Ok(DVector::from_element(1, u))
    } else {
        Err(Error::FilterInfeasible { step: 0, best_margin: best })
    }
}

fn project_vector(safe: &SafeInputSet, u_nom: &DVector<f64>) -> Result<DVector<f64>> {
    match project(&safe.as_polytope()?, u_nom) {
        Ok(u) => Ok(u),
        Err(GeometryError::EmptySet) => {
            let best = lp_solve(&safe.a_u, &safe.input_set, Sense::Maximize)?;
            let margin = best.value + safe.a_0;
            if margin >= -TOL_INFEASIBLE {
                Ok(best.point)
            } else {
                Err(Error::FilterInfeasible { step: 0, best_margin: margin })
            }
        }
        Err(e) => Err(e.into()),
    }
}

/// Scalar filter for margins that are not affine in `u`.
///
/// Assumes the certified inputs form an interval. Returns `u_nom` if it is
/// certified, otherwise bisects towards the certified end of `[lo, hi]`
/// whose margin is largest.
pub fn filter_solve_bisection<F>(margin: F, lo: f64, hi: f64, u_nom: f64) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    let u_nom = u_nom.clamp(lo, hi);
    if margin(u_nom)? >= 0.0 {
        return Ok(u_nom);
    }
    let (m_lo, m_hi) = (margin(lo)?, margin(hi)?);
    let target = if m_lo >= m_hi { lo } else { hi };
    let best = m_lo.max(m_hi);
    if best < -TOL_INFEASIBLE {
        return Err(Error::FilterInfeasible { step: 0, best_margin: best });
    }
    if best < 0.0 {
        return Ok(target);
    }
    // margin(bad) < 0 <= margin(good)
    let (mut bad, mut good) = (u_nom, target);
    for _ in 0..200 {
        let mid = 0.5 * (bad + good);
        if mid == bad || mid == good {
            break;
        }
        if margin(mid)? >= 0.0 {
            good = mid;
        } else {
            bad = mid;
        }
    }
    Ok(good)
}

/// Feedback-linearizing speed tracker `clamp_U(M k (v_ref - v) + F_r(v))`
/// using the drag coefficient `mu_aero`.
pub fn nominal_with_drag(params: &AccParams, x: &DVector<f64>, v_ref: f64, gain: f64, mu_aero: f64) -> DVector<f64> {
    let v = x[0];
    let u_max = params.u_max();
    let u = params.mass * gain * (v_ref - v) + params.resistance(v, mu_aero);
    DVector::from_element(1, u.clamp(-u_max, u_max))
}

/// Tracker with the true drag coefficient.
pub fn nominal_tracking(params: &AccParams, x: &DVector<f64>, v_ref: f64, gain: f64) -> DVector<f64> {
    nominal_with_drag(params, x, v_ref, gain, params.theta_true[0])
}

/// Certainty-equivalence tracker with the drag coefficient taken from `theta_hat`.
pub fn nominal_ce(params: &AccParams, x: &DVector<f64>, theta_hat: &DVector<f64>, v_ref: f64, gain: f64) -> DVector<f64> {
    nominal_with_drag(params, x, v_ref, gain, theta_hat[0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Polytope;
    use approx::assert_abs_diff_eq;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(xs)
    }

    fn scalar_set(a: f64, a0: f64) -> SafeInputSet {
        SafeInputSet {
            a_u: v(&[a]),
            a_0: a0,
            input_set: Polytope::from_box(&[-10.0], &[10.0]).unwrap(),
        }
    }

    /// Closest certified grid point of `[-10, 10]` at resolution `1e-4`.
    fn grid_oracle(s: &SafeInputSet, u_nom: f64) -> Option<f64> {
        (0..=200_000)
            .map(|k| -10.0 + k as f64 * 1e-4)
            .filter(|&u| s.margin(&v(&[u])) >= 0.0)
            .min_by(|a, b| (a - u_nom).abs().total_cmp(&(b - u_nom).abs()))
    }

    #[test]
    fn certified_nominal_passes_through() {
        let s = scalar_set(1.0, -3.0);
        let r = filter_solve(&s, &v(&[5.0])).unwrap();
        assert_eq!(r.u_safe, v(&[5.0]));
        assert!(!r.modified);
    }

    #[test]
    fn clamp_to_lower_bound() {
        let s = scalar_set(1.0, -3.0);
        let r = filter_solve(&s, &v(&[1.0])).unwrap();
        assert_abs_diff_eq!(r.u_safe[0], 3.0, epsilon = 1e-12);
        assert!(r.modified);
        assert!(r.margin_after >= -TOL_MARGIN);
        assert_abs_diff_eq!(r.u_safe[0], grid_oracle(&s, 1.0).unwrap(), epsilon = 1e-3);
        // idempotent
        assert_eq!(filter_solve(&s, &r.u_safe).unwrap().u_safe, r.u_safe);
    }

    #[test]
    fn grid_oracle_agreement() {
        for (a, a0, un) in [(2.0, 5.0, -8.0), (-0.5, 1.2, 9.0), (-3.0, -6.0, 1.0), (0.7, 0.0, -2.0)] {
            let s = scalar_set(a, a0);
            let got = filter_solve(&s, &v(&[un])).unwrap().u_safe[0];
            assert_abs_diff_eq!(got, grid_oracle(&s, un).unwrap(), epsilon = 1e-3);
        }
    }

    #[test]
    fn infeasible() {
        let s = scalar_set(1.0, -20.0);
        assert!(matches!(filter_solve(&s, &v(&[0.0])), Err(Error::FilterInfeasible { .. })));
        let s = scalar_set(0.0, -1.0);
        assert!(matches!(filter_solve(&s, &v(&[0.0])), Err(Error::FilterInfeasible { .. })));
        // misses only by round-off: accepted at the boundary
        let s = scalar_set(1.0, -10.0 - 1e-8);
        assert_eq!(filter_solve(&s, &v(&[0.0])).unwrap().u_safe, v(&[10.0]));
    }

    #[test]
    fn vector_input_projection() {
        let s = SafeInputSet {
            a_u: v(&[1.0, 1.0]),
            a_0: -1.0,
            input_set: Polytope::from_box(&[-2.0, -2.0], &[2.0, 2.0]).unwrap(),
        };
        let r = filter_solve(&s, &v(&[0.0, 0.0])).unwrap();
        assert_abs_diff_eq!(r.u_safe[0], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(r.u_safe[1], 0.5, epsilon = 1e-12);
        let bad = SafeInputSet { a_0: -5.0, ..s };
        assert!(matches!(filter_solve(&bad, &v(&[0.0, 0.0])), Err(Error::FilterInfeasible { .. })));
    }

    #[test]
    fn bisection_matches_clamp_for_affine_margin() {
        let s = scalar_set(1.0, -3.0);
        let u = filter_solve_bisection(|u| Ok(s.margin(&v(&[u]))), -10.0, 10.0, 1.0).unwrap();
        assert_abs_diff_eq!(u, 3.0, epsilon = 1e-9);
        assert!(filter_solve_bisection(|u| Ok(u - 20.0), -10.0, 10.0, 0.0).is_err());
    }

    #[test]
    fn nominal_examples() {
        let p = AccParams::default();
        // zero tracking error balances resistance
        let u = nominal_tracking(&p, &v(&[30.0, 100.0]), 30.0, 0.08);
        assert_abs_diff_eq!(u[0], 0.1 + 5.0 * 30.0 + 0.25 * 900.0, epsilon = 1e-9);
        // saturation
        let u = nominal_tracking(&p, &v(&[0.0, 100.0]), 30.0, 10.0);
        assert_abs_diff_eq!(u[0], 0.3 * 1650.0 * 9.81, epsilon = 1e-9);
        // v = 18: 1650 * 0.08 * 12 + 0.1 + 90 + 81
        let u = nominal_tracking(&p, &v(&[18.0, 60.0]), 30.0, 0.08);
        assert_abs_diff_eq!(u[0], 1584.0 + 171.1, epsilon = 1e-9);
    }

    #[test]
    fn certainty_equivalence_nominal() {
        let p = AccParams::default();
        let x = v(&[18.0, 60.0]);
        assert_eq!(nominal_ce(&p, &x, &v(&[0.25, 14.0]), 30.0, 0.08), nominal_tracking(&p, &x, 30.0, 0.08));
        let u0 = nominal_ce(&p, &x, &v(&[0.0, 14.0]), 30.0, 0.08);
        assert_abs_diff_eq!(nominal_tracking(&p, &x, 30.0, 0.08)[0] - u0[0], 0.25 * 324.0, epsilon = 1e-9);
        let mid = nominal_ce(&p, &v(&[24.5, 40.0]), &v(&[0.31, 12.0]), 30.0, 0.08);
        assert_abs_diff_eq!(mid[0], 1650.0 * 0.08 * 5.5 + 0.1 + 5.0 * 24.5 + 0.31 * 24.5 * 24.5, epsilon = 1e-9);
    }
}
