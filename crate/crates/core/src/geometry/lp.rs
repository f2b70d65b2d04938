//! Dense two-phase tableau simplex with Bland's anti-cycling rule.
//!
//! Solves `max/min c^T x  s.t.  H x <= h` with `x` free. Free variables are
//! split as `x = x+ - x-`, each row gets a slack, and rows with negative
//! offsets get an artificial variable for phase one.

use nalgebra::DVector;

use super::{GeometryError, Polytope, MAX_LP_DIM, TOL_FEAS};

const EPS_PIVOT: f64 = 1e-11;
const MAX_ITER: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Maximize,
    Minimize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub point: DVector<f64>,
    pub value: f64,
}

struct Tableau {
    /// Row-major `rows x (cols + 1)`, last column is the right-hand side.
    data: Vec<f64>,
    rows: usize,
    cols: usize,
    basis: Vec<usize>,
}

impl Tableau {
    fn width(&self) -> usize {
        self.cols + 1
    }

    fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.width() + j]
    }

    fn rhs(&self, i: usize) -> f64 {
        self.at(i, self.cols)
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let w = self.width();
        let p = self.data[r * w + c];
        for j in 0..w {
            self.data[r * w + j] /= p;
        }
        self.data[r * w + c] = 1.0;
        for i in 0..self.rows {
            if i == r {
                continue;
            }
            let f = self.data[i * w + c];
            if f == 0.0 {
                continue;
            }
            for j in 0..w {
                self.data[i * w + j] -= f * self.data[r * w + j];
            }
            self.data[i * w + c] = 0.0;
        }
        self.basis[r] = c;
    }

    fn remove_row(&mut self, r: usize) {
        let w = self.width();
        self.data.drain(r * w..(r + 1) * w);
        self.basis.remove(r);
        self.rows -= 1;
    }

    /// Minimize `cost^T z` over the current basis using Bland's rule.
    fn minimize(&mut self, cost: &[f64], allowed: &[bool]) -> Result<(), GeometryError> {
        let scale = 1.0 + cost.iter().fold(0.0f64, |m, c| m.max(c.abs()));
        let eps_cost = 1e-11 * scale;
        let mut in_basis = vec![false; self.cols];
        for &b in &self.basis {
            in_basis[b] = true;
        }
        for _ in 0..MAX_ITER {
            let mut entering = None;
            for j in 0..self.cols {
                if !allowed[j] || in_basis[j] {
                    continue;
                }
                let mut d = cost[j];
                for i in 0..self.rows {
                    d -= cost[self.basis[i]] * self.at(i, j);
                }
                if d < -eps_cost {
                    entering = Some(j);
                    break;
                }
            }
            let Some(j) = entering else {
                return Ok(());
            };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.rows {
                let a = self.at(i, j);
                if a <= EPS_PIVOT {
                    continue;
                }
                let ratio = self.rhs(i).max(0.0) / a;
                leave = match leave {
                    None => Some((i, ratio)),
                    Some((k, best)) => {
                        let tie = (ratio - best).abs() <= 1e-12 * (1.0 + best.abs());
                        if (!tie && ratio < best) || (tie && self.basis[i] < self.basis[k]) {
                            Some((i, ratio))
                        } else {
                            Some((k, best))
                        }
                    }
                };
            }
            let Some((r, _)) = leave else {
                return Err(GeometryError::Unbounded);
            };
            in_basis[self.basis[r]] = false;
            in_basis[j] = true;
            self.pivot(r, j);
        }
        log::warn!("simplex iteration cap reached; returning current basis");
        Ok(())
    }
}

/// Optimize a linear objective over a polytope.
pub fn lp_solve(
    objective: &DVector<f64>,
    p: &Polytope,
    sense: Sense,
) -> Result<LpSolution, GeometryError> {
    let n = p.dim();
    if objective.len() != n {
        return Err(GeometryError::DimensionMismatch {
            expected: n,
            got: objective.len(),
        });
    }
    if n > MAX_LP_DIM {
        return Err(GeometryError::DimensionTooLarge(n));
    }

    let h = p.normals();
    let offsets = p.offsets();
    let mut rows: Vec<usize> = Vec::with_capacity(p.n_rows());
    for i in 0..p.n_rows() {
        if h.row(i).amax() == 0.0 {
            if offsets[i] < -TOL_FEAS {
                return Err(GeometryError::Infeasible);
            }
            continue;
        }
        rows.push(i);
    }
    let m = rows.len();
    let n_art = rows.iter().filter(|&&i| offsets[i] < 0.0).count();
    let cols = 2 * n + m + n_art;
    let w = cols + 1;
    let mut data = vec![0.0; m * w];
    let mut basis = vec![0; m];
    let mut art = 0;
    for (r, &i) in rows.iter().enumerate() {
        let flip = if offsets[i] < 0.0 { -1.0 } else { 1.0 };
        for j in 0..n {
            data[r * w + j] = flip * h[(i, j)];
            data[r * w + n + j] = -flip * h[(i, j)];
        }
        data[r * w + 2 * n + r] = flip;
        data[r * w + cols] = flip * offsets[i];
        if flip < 0.0 {
            let c = 2 * n + m + art;
            data[r * w + c] = 1.0;
            basis[r] = c;
            art += 1;
        } else {
            basis[r] = 2 * n + r;
        }
    }
    let mut tab = Tableau {
        data,
        rows: m,
        cols,
        basis,
    };
    let is_art = |j: usize| j >= 2 * n + m;

    if n_art > 0 {
        let cost: Vec<f64> = (0..cols).map(|j| if is_art(j) { 1.0 } else { 0.0 }).collect();
        let allowed = vec![true; cols];
        tab.minimize(&cost, &allowed)?;
        let infeas: f64 = (0..tab.rows)
            .filter(|&i| is_art(tab.basis[i]))
            .map(|i| tab.rhs(i))
            .sum();
        let scale = 1.0 + offsets.amax();
        if infeas > TOL_FEAS * scale {
            return Err(GeometryError::Infeasible);
        }
        // drive remaining artificials out of the basis, dropping dependent rows
        let mut i = 0;
        while i < tab.rows {
            if !is_art(tab.basis[i]) {
                i += 1;
                continue;
            }
            let col = (0..2 * n + m)
                .filter(|&j| tab.at(i, j).abs() > 1e-9)
                .max_by(|&a, &b| tab.at(i, a).abs().total_cmp(&tab.at(i, b).abs()));
            match col {
                Some(j) => {
                    tab.pivot(i, j);
                    i += 1;
                }
                None => tab.remove_row(i),
            }
        }
    }

    let sign = match sense {
        Sense::Minimize => 1.0,
        Sense::Maximize => -1.0,
    };
    let mut cost = vec![0.0; cols];
    for j in 0..n {
        cost[j] = sign * objective[j];
        cost[n + j] = -sign * objective[j];
    }
    let allowed: Vec<bool> = (0..cols).map(|j| !is_art(j)).collect();
    tab.minimize(&cost, &allowed)?;

    let mut z = vec![0.0; cols];
    for i in 0..tab.rows {
        z[tab.basis[i]] = tab.rhs(i);
    }
    let point = DVector::from_fn(n, |j, _| z[j] - z[n + j]);
    let value = objective.dot(&point);
    Ok(LpSolution { point, value })
}
