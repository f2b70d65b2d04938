use nalgebra::{DMatrix, DVector};

use super::{lp_solve, GeometryError, Polytope, Sense, MAX_VERTEX_DIM, TOL_FEAS, TOL_VERTEX};

/// All vertices of a bounded, non-empty polytope with `dim <= 3`.
///
/// Every `dim`-subset of rows is intersected, infeasible candidates are
/// discarded and near-duplicates merged. Output is sorted lexicographically
/// so repeated calls are deterministic.
pub fn enumerate_vertices(p: &Polytope) -> Result<Vec<DVector<f64>>, GeometryError> {
    let dim = p.dim();
    if dim > MAX_VERTEX_DIM {
        return Err(GeometryError::DimensionTooLarge(dim));
    }
    if dim == 0 {
        return Ok(vec![DVector::zeros(0)]);
    }
    check_bounded(p)?;

    let h = p.normals();
    let offsets = p.offsets();
    let rows: Vec<usize> = (0..p.n_rows()).filter(|&i| h.row(i).norm() > 0.0).collect();
    let mut out: Vec<DVector<f64>> = Vec::new();
    let mut combo: Vec<usize> = (0..dim).collect();
    if rows.len() < dim {
        return Err(GeometryError::UnboundedPolytope);
    }
    let tol = |x: &DVector<f64>| TOL_FEAS * (1.0 + x.amax());
    loop {
        let sel: Vec<usize> = combo.iter().map(|&k| rows[k]).collect();
        let a = DMatrix::from_fn(dim, dim, |r, c| h[(sel[r], c)] / h.row(sel[r]).norm());
        let b = DVector::from_fn(dim, |r, _| offsets[sel[r]] / h.row(sel[r]).norm());
        if a.determinant().abs() > 1e-12 {
            if let Some(x) = a.lu().solve(&b) {
                if p.violation(&x) <= tol(&x) && !out.iter().any(|v| (v - &x).norm() <= TOL_VERTEX) {
                    out.push(x);
                }
            }
        }
        if !next_combination(&mut combo, rows.len()) {
            break;
        }
    }
    if out.is_empty() {
        return Err(GeometryError::EmptySet);
    }
    out.sort_by(|a, b| {
        a.iter()
            .zip(b.iter())
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    Ok(out)
}

fn check_bounded(p: &Polytope) -> Result<(), GeometryError> {
    for j in 0..p.dim() {
        let mut e = DVector::zeros(p.dim());
        e[j] = 1.0;
        for sense in [Sense::Maximize, Sense::Minimize] {
            match lp_solve(&e, p, sense) {
                Ok(_) => {}
                Err(GeometryError::Infeasible) => return Err(GeometryError::EmptySet),
                Err(GeometryError::Unbounded) => return Err(GeometryError::UnboundedPolytope),
                Err(e) => return Err(e),
            }
        }
    }
    Ok(())
}

fn next_combination(c: &mut [usize], n: usize) -> bool {
    let k = c.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if c[i] < n - k + i {
            c[i] += 1;
            for j in i + 1..k {
                c[j] = c[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_box_has_four() {
        let b = Polytope::from_box(&[0.0, 0.0], &[1.0, 1.0]).unwrap();
        assert_eq!(enumerate_vertices(&b).unwrap().len(), 4);
    }

    #[test]
    fn triangle() {
        let p = Polytope::from_rows(
            &[vec![1.0, 1.0], vec![-1.0, 0.0], vec![0.0, -1.0]],
            &[1.0, 0.0, 0.0],
        )
        .unwrap();
        let v = enumerate_vertices(&p).unwrap();
        let expect = [[0.0, 0.0], [0.0, 1.0], [1.0, 0.0]];
        assert_eq!(v.len(), 3);
        for (got, want) in v.iter().zip(expect) {
            assert!((got - DVector::from_column_slice(&want)).norm() < 1e-12);
        }
    }

    #[test]
    fn cut_box_has_five() {
        // pairwise intersections of the 5 lines, filtered by feasibility:
        // (0,0) (1,0) (0,1) (1,0.5) (0.5,1)
        let b = Polytope::from_box(&[0.0, 0.0], &[1.0, 1.0]).unwrap();
        let cut = Polytope::from_rows(&[vec![1.0, 1.0]], &[1.5]).unwrap();
        let v = enumerate_vertices(&b.intersect(&cut).unwrap()).unwrap();
        assert_eq!(v.len(), 5);
        assert!(v.iter().any(|x| (x - DVector::from_column_slice(&[1.0, 0.5])).norm() < 1e-12));
    }

    #[test]
    fn cube_and_duplicates() {
        let c = Polytope::from_box(&[0.0; 3], &[1.0; 3]).unwrap();
        let doubled = c.intersect(&c).unwrap();
        assert_eq!(enumerate_vertices(&doubled).unwrap().len(), 8);
    }

    #[test]
    fn errors() {
        let big = Polytope::from_box(&[0.0; 4], &[1.0; 4]).unwrap();
        assert_eq!(enumerate_vertices(&big), Err(GeometryError::DimensionTooLarge(4)));
        let half = Polytope::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]], &[1.0, 1.0]).unwrap();
        assert_eq!(enumerate_vertices(&half), Err(GeometryError::UnboundedPolytope));
    }
}
