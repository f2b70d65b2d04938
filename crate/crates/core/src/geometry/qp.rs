//! Euclidean projection onto a polytope by a primal active-set method.
//!
//! `min 1/2 ||x - y||^2  s.t.  H x <= h`. The equality-constrained
//! subproblem on a working set `A x = b` has the closed form
//! `x = y - A^T l` with `(A A^T) l = A y - b`.

use nalgebra::{DMatrix, DVector};

use super::{GeometryError, Polytope, MAX_LP_DIM, TOL_FEAS};

const MAX_ITER: usize = 10_000;

pub fn project(p: &Polytope, point: &DVector<f64>) -> Result<DVector<f64>, GeometryError> {
    let n = p.dim();
    if point.len() != n {
        return Err(GeometryError::DimensionMismatch {
            expected: n,
            got: point.len(),
        });
    }
    if n > MAX_LP_DIM {
        return Err(GeometryError::DimensionTooLarge(n));
    }
    if p.contains(point, 0.0) {
        return Ok(point.clone());
    }
    let mut x = p.feasible_point().map_err(|e| match e {
        GeometryError::Infeasible => GeometryError::EmptySet,
        other => other,
    })?;

    let h = p.normals();
    let offsets = p.offsets();
    let rows: Vec<usize> = (0..p.n_rows()).filter(|&i| h.row(i).norm() > 0.0).collect();
    let mut working: Vec<usize> = Vec::new();

    for _ in 0..MAX_ITER {
        let (target, multipliers) = equality_qp(h, offsets, &working, point)?;
        let step = &target - &x;
        if step.norm() <= 1e-13 * (1.0 + x.norm()) {
            // stationary on the working set; check multiplier signs
            let worst = multipliers
                .iter()
                .enumerate()
                .min_by(|a, b| a.1.total_cmp(b.1));
            match worst {
                Some((k, &l)) if l < -1e-12 => {
                    working.remove(k);
                    continue;
                }
                _ => return Ok(x),
            }
        }
        let mut alpha = 1.0;
        let mut blocking = None;
        for &i in &rows {
            if working.contains(&i) {
                continue;
            }
            let ai = h.row(i);
            let slope = ai.dot(&step.transpose());
            if slope <= 1e-14 {
                continue;
            }
            let gap = (offsets[i] - ai.dot(&x.transpose())).max(0.0);
            let a = gap / slope;
            if a < alpha {
                alpha = a;
                blocking = Some(i);
            }
        }
        x += alpha * &step;
        if let Some(i) = blocking {
            working.push(i);
        }
    }
    log::warn!("projection iteration cap reached");
    debug_assert!(p.violation(&x) <= TOL_FEAS * 10.0);
    Ok(x)
}

/// Solve the projection with the working-set rows as equalities.
fn equality_qp(
    h: &DMatrix<f64>,
    offsets: &DVector<f64>,
    working: &[usize],
    y: &DVector<f64>,
) -> Result<(DVector<f64>, Vec<f64>), GeometryError> {
    if working.is_empty() {
        return Ok((y.clone(), Vec::new()));
    }
    let a = h.select_rows(working.iter());
    let b = DVector::from_iterator(working.len(), working.iter().map(|&i| offsets[i]));
    let gram = &a * a.transpose();
    let rhs = &a * y - b;
    let lambda = gram
        .clone()
        .cholesky()
        .map(|c| c.solve(&rhs))
        .or_else(|| gram.lu().solve(&rhs))
        .ok_or(GeometryError::Infeasible)?;
    let x = y - a.transpose() * &lambda;
    Ok((x, lambda.iter().copied().collect()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(xs)
    }

    fn unit_box() -> Polytope {
        Polytope::from_box(&[0.0, 0.0], &[1.0, 1.0]).unwrap()
    }

    #[test]
    fn interior_point_is_fixed() {
        let x = v(&[0.3, 0.6]);
        assert_eq!(project(&unit_box(), &x).unwrap(), x);
    }

    #[test]
    fn box_projection_equals_clamp() {
        for (y, want) in [([2.0, 0.5], [1.0, 0.5]), ([-3.0, -3.0], [0.0, 0.0]), ([0.4, 7.0], [0.4, 1.0])] {
            let got = project(&unit_box(), &v(&y)).unwrap();
            assert_abs_diff_eq!(got[0], want[0], epsilon = 1e-12);
            assert_abs_diff_eq!(got[1], want[1], epsilon = 1e-12);
        }
    }

    #[test]
    fn onto_slanted_face() {
        // triangle x + y <= 1, x,y >= 0; (1,1) projects to (0.5, 0.5)
        let p = Polytope::from_rows(
            &[vec![1.0, 1.0], vec![-1.0, 0.0], vec![0.0, -1.0]],
            &[1.0, 0.0, 0.0],
        )
        .unwrap();
        let got = project(&p, &v(&[1.0, 1.0])).unwrap();
        assert_abs_diff_eq!(got[0], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(got[1], 0.5, epsilon = 1e-12);
        // (3, -1) projects to the vertex (1, 0)
        let got = project(&p, &v(&[3.0, -1.0])).unwrap();
        assert_abs_diff_eq!(got[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(got[1], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn empty_set() {
        let p = Polytope::from_rows(&[vec![1.0], vec![-1.0]], &[0.0, -1.0]).unwrap();
        assert_eq!(project(&p, &v(&[5.0])), Err(GeometryError::EmptySet));
    }
}
