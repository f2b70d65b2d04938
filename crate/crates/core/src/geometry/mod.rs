//! Small dense polytope computations in halfspace form `{x : H x <= h}`.
//!
//! Everything here targets desk-scale problems (a handful of variables and
//! at most a few dozen rows), so the solvers are dense and exact up to
//! double precision: a Bland-rule simplex for linear programs, brute-force
//! vertex enumeration for `dim <= 3`, and a primal active-set method for
//! Euclidean projection.

mod lp;
mod qp;
mod vertices;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use lp::{lp_solve, LpSolution, Sense};
pub use qp::project;
pub use vertices::enumerate_vertices;

/// Feasibility tolerance on `H x <= h`.
pub const TOL_FEAS: f64 = 1e-9;
/// Optimality tolerance of the LP solver.
pub const TOL_LP: f64 = 1e-9;
/// Distance under which two vertices are merged.
pub const TOL_VERTEX: f64 = 1e-7;
/// Largest dimension accepted by the LP and projection solvers.
pub const MAX_LP_DIM: usize = 16;
/// Largest dimension accepted by vertex enumeration.
pub const MAX_VERTEX_DIM: usize = 3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("linear program is infeasible")]
    Infeasible,
    #[error("linear program is unbounded")]
    Unbounded,
    #[error("set is empty")]
    EmptySet,
    #[error("dimension {0} too large for this operation")]
    DimensionTooLarge(usize),
    #[error("polytope is unbounded")]
    UnboundedPolytope,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

/// Which p-norm to maximize in [`max_norm_distance`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum NormOrder {
    One,
    Two,
}

impl TryFrom<u8> for NormOrder {
    type Error = String;
    fn try_from(p: u8) -> Result<Self, String> {
        match p {
            1 => Ok(NormOrder::One),
            2 => Ok(NormOrder::Two),
            other => Err(format!("norm order must be 1 or 2, got {other}")),
        }
    }
}

impl From<NormOrder> for u8 {
    fn from(p: NormOrder) -> u8 {
        match p {
            NormOrder::One => 1,
            NormOrder::Two => 2,
        }
    }
}

impl NormOrder {
    pub fn norm(self, v: &DVector<f64>) -> f64 {
        match self {
            NormOrder::One => v.lp_norm(1),
            NormOrder::Two => v.norm(),
        }
    }
}

/// Convex polytope `{x : H x <= h}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Polytope {
    normals: DMatrix<f64>,
    offsets: DVector<f64>,
}

impl Polytope {
    pub fn new(normals: DMatrix<f64>, offsets: DVector<f64>) -> Result<Self, GeometryError> {
        if normals.nrows() != offsets.len() {
            return Err(GeometryError::DimensionMismatch {
                expected: normals.nrows(),
                got: offsets.len(),
            });
        }
        Ok(Self { normals, offsets })
    }

    /// Build from row slices; every row must have the same length.
    pub fn from_rows(rows: &[Vec<f64>], offsets: &[f64]) -> Result<Self, GeometryError> {
        let dim = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != dim) {
            return Err(GeometryError::DimensionMismatch {
                expected: dim,
                got: bad.len(),
            });
        }
        let normals = DMatrix::from_fn(rows.len(), dim, |i, j| rows[i][j]);
        Self::new(normals, DVector::from_column_slice(offsets))
    }

    /// The whole space (no constraints).
    pub fn universe(dim: usize) -> Self {
        Self {
            normals: DMatrix::zeros(0, dim),
            offsets: DVector::zeros(0),
        }
    }

    /// Axis-aligned box `lo <= x <= hi`, rows ordered `x_i <= hi_i` then `-x_i <= -lo_i`.
    pub fn from_box(lo: &[f64], hi: &[f64]) -> Result<Self, GeometryError> {
        if lo.len() != hi.len() {
            return Err(GeometryError::DimensionMismatch {
                expected: lo.len(),
                got: hi.len(),
            });
        }
        let n = lo.len();
        let mut normals = DMatrix::zeros(2 * n, n);
        let mut offsets = DVector::zeros(2 * n);
        for i in 0..n {
            normals[(i, i)] = 1.0;
            offsets[i] = hi[i];
            normals[(n + i, i)] = -1.0;
            offsets[n + i] = -lo[i];
        }
        Ok(Self { normals, offsets })
    }

    /// Symmetric box `|x_i| <= half_width_i`.
    pub fn symmetric_box(half_width: &[f64]) -> Result<Self, GeometryError> {
        let lo: Vec<f64> = half_width.iter().map(|w| -w).collect();
        Self::from_box(&lo, half_width)
    }

    pub fn dim(&self) -> usize {
        self.normals.ncols()
    }

    pub fn n_rows(&self) -> usize {
        self.normals.nrows()
    }

    pub fn normals(&self) -> &DMatrix<f64> {
        &self.normals
    }

    pub fn offsets(&self) -> &DVector<f64> {
        &self.offsets
    }

    /// Largest constraint violation `max_i (H_i x - h_i)`, `-inf` with no rows.
    pub fn violation(&self, x: &DVector<f64>) -> f64 {
        (&self.normals * x - &self.offsets)
            .iter()
            .fold(f64::NEG_INFINITY, |m, v| m.max(*v))
    }

    pub fn contains(&self, x: &DVector<f64>, tol: f64) -> bool {
        x.len() == self.dim() && (self.n_rows() == 0 || self.violation(x) <= tol)
    }

    /// Stack the rows of both polytopes; membership is the conjunction.
    pub fn intersect(&self, other: &Polytope) -> Result<Polytope, GeometryError> {
        if self.dim() != other.dim() {
            return Err(GeometryError::DimensionMismatch {
                expected: self.dim(),
                got: other.dim(),
            });
        }
        let (r1, r2) = (self.n_rows(), other.n_rows());
        let mut normals = DMatrix::zeros(r1 + r2, self.dim());
        normals.rows_mut(0, r1).copy_from(&self.normals);
        normals.rows_mut(r1, r2).copy_from(&other.normals);
        let mut offsets = DVector::zeros(r1 + r2);
        offsets.rows_mut(0, r1).copy_from(&self.offsets);
        offsets.rows_mut(r1, r2).copy_from(&other.offsets);
        Ok(Polytope { normals, offsets })
    }

    /// Some point of the set, or `Infeasible`.
    pub fn feasible_point(&self) -> Result<DVector<f64>, GeometryError> {
        lp_solve(&DVector::zeros(self.dim()), self, Sense::Maximize).map(|s| s.point)
    }

    pub fn is_empty(&self) -> bool {
        if self.has_contradictory_zero_row() {
            return true;
        }
        matches!(self.feasible_point(), Err(GeometryError::Infeasible))
    }

    fn has_contradictory_zero_row(&self) -> bool {
        (0..self.n_rows())
            .any(|i| self.normals.row(i).amax() == 0.0 && self.offsets[i] < -TOL_FEAS)
    }

    /// Drop rows that do not affect membership: zero rows, duplicates and
    /// rows implied by the others (checked with one LP per row).
    pub fn remove_redundant(&self) -> Polytope {
        let dim = self.dim();
        let mut keep: Vec<usize> = Vec::with_capacity(self.n_rows());
        for i in 0..self.n_rows() {
            let row = self.normals.row(i);
            let scale = row.norm();
            if scale == 0.0 {
                if self.offsets[i] < -TOL_FEAS {
                    // contradictory row, the set is empty; keep it as witness
                    keep.push(i);
                }
                continue;
            }
            let duplicate = keep.iter().any(|&k| {
                let other = self.normals.row(k);
                let other_scale = other.norm();
                other_scale > 0.0
                    && (row / scale - other / other_scale).amax() < 1e-12
                    && self.offsets[k] / other_scale <= self.offsets[i] / scale + 1e-15
            });
            if !duplicate {
                keep.push(i);
            }
        }
        // LP redundancy test against the remaining rows
        let mut idx = 0;
        while idx < keep.len() {
            let i = keep[idx];
            if self.normals.row(i).amax() == 0.0 {
                idx += 1;
                continue;
            }
            let others: Vec<usize> = keep.iter().copied().filter(|&k| k != i).collect();
            let reduced = self.select_rows(&others);
            let objective = self.normals.row(i).transpose();
            let redundant = match lp_solve(&objective, &reduced, Sense::Maximize) {
                Ok(sol) => sol.value <= self.offsets[i] + TOL_FEAS * (1.0 + self.offsets[i].abs()),
                Err(GeometryError::Infeasible) => true,
                Err(_) => false,
            };
            if redundant {
                keep.remove(idx);
            } else {
                idx += 1;
            }
        }
        if keep.is_empty() {
            return Polytope::universe(dim);
        }
        self.select_rows(&keep)
    }

    fn select_rows(&self, rows: &[usize]) -> Polytope {
        let normals = self.normals.select_rows(rows.iter());
        let offsets = DVector::from_iterator(rows.len(), rows.iter().map(|&i| self.offsets[i]));
        Polytope { normals, offsets }
    }

    /// If the polytope is exactly described by axis-aligned rows, its bounds.
    pub fn as_box(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        let n = self.dim();
        let mut lo = vec![f64::NEG_INFINITY; n];
        let mut hi = vec![f64::INFINITY; n];
        for i in 0..self.n_rows() {
            let row = self.normals.row(i);
            let nonzero: Vec<usize> = (0..n).filter(|&j| row[j] != 0.0).collect();
            match nonzero.as_slice() {
                [] if self.offsets[i] >= 0.0 => {}
                [j] => {
                    let a = row[*j];
                    let bound = self.offsets[i] / a;
                    if a > 0.0 {
                        hi[*j] = hi[*j].min(bound);
                    } else {
                        lo[*j] = lo[*j].max(bound);
                    }
                }
                _ => return None,
            }
        }
        let finite = lo.iter().chain(hi.iter()).all(|v| v.is_finite());
        (finite && lo.iter().zip(&hi).all(|(l, h)| l <= h)).then_some((lo, hi))
    }

    /// Rows rescaled so the offsets are all one (`H_w w <= 1`). Requires
    /// every offset to be strictly positive, i.e. the origin is interior.
    pub fn unit_offset_normals(&self) -> Option<DMatrix<f64>> {
        if self.offsets.iter().any(|&h| h <= 0.0 || !h.is_finite()) {
            return None;
        }
        let mut scaled = self.normals.clone();
        for (i, mut row) in scaled.row_iter_mut().enumerate() {
            row /= self.offsets[i];
        }
        Some(scaled)
    }
}

/// `max_{x in P} ||x - anchor||_p`.
///
/// The 1-norm is computed with `2^dim` signed LPs (`||y||_1 = max_s s^T y`),
/// which works in any dimension up to [`MAX_LP_DIM`]. The 2-norm maximum of a
/// convex function is attained at a vertex, so it uses vertex enumeration
/// and is limited to [`MAX_VERTEX_DIM`].
pub fn max_norm_distance(
    p: &Polytope,
    anchor: &DVector<f64>,
    norm: NormOrder,
) -> Result<f64, GeometryError> {
    if anchor.len() != p.dim() {
        return Err(GeometryError::DimensionMismatch {
            expected: p.dim(),
            got: anchor.len(),
        });
    }
    match norm {
        NormOrder::One => max_one_norm_signed_lp(p, anchor),
        NormOrder::Two => {
            let verts = enumerate_vertices(p)?;
            Ok(verts
                .iter()
                .map(|v| (v - anchor).norm())
                .fold(0.0, f64::max))
        }
    }
}

fn max_one_norm_signed_lp(p: &Polytope, anchor: &DVector<f64>) -> Result<f64, GeometryError> {
    let dim = p.dim();
    if dim > MAX_LP_DIM {
        return Err(GeometryError::DimensionTooLarge(dim));
    }
    let mut best: f64 = 0.0;
    for mask in 0u32..(1u32 << dim) {
        let signs = DVector::from_fn(dim, |j, _| if mask >> j & 1 == 1 { -1.0 } else { 1.0 });
        let sol = match lp_solve(&signs, p, Sense::Maximize) {
            Ok(sol) => sol,
            Err(GeometryError::Infeasible) => return Err(GeometryError::EmptySet),
            Err(e) => return Err(e),
        };
        best = best.max(sol.value - signs.dot(anchor));
    }
    Ok(best)
}

/// Largest singular value.
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().svd(false, false).singular_values.max()
}

/// `(min x[i], max x[i])` over the polytope.
pub fn coordinate_range(p: &Polytope, i: usize) -> Result<(f64, f64), GeometryError> {
    if i >= p.dim() {
        return Err(GeometryError::DimensionMismatch {
            expected: p.dim(),
            got: i + 1,
        });
    }
    let mut e = DVector::zeros(p.dim());
    e[i] = 1.0;
    let map = |err| match err {
        GeometryError::Infeasible => GeometryError::EmptySet,
        other => other,
    };
    let lo = lp_solve(&e, p, Sense::Minimize).map_err(map)?.value;
    let hi = lp_solve(&e, p, Sense::Maximize).map_err(map)?.value;
    Ok((lo.min(hi), hi.max(lo)))
}
