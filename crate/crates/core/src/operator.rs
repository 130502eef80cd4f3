//! Finite-difference Laplacians on the grids and spectral-extent estimation.

use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::grid::{CrossSectionGrid, CrossSectionShape, Grid1D};
use crate::solve::BandCholesky;
use crate::util::{self, SplitMix};

/// Storage kinds for assembled operators. All operators are symmetric
/// positive definite.
#[derive(Debug, Clone, PartialEq)]
pub enum OperatorKind {
    /// Symmetric tridiagonal matrix: main diagonal plus one off diagonal.
    Tridiagonal { diag: Vec<f64>, off: Vec<f64> },
    /// Symmetric sparse matrix in CSR layout (full pattern stored).
    SparseRows {
        row_ptr: Vec<usize>,
        col_idx: Vec<usize>,
        values: Vec<f64>,
    },
}

/// Spectral enclosure cached on an operator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralBounds {
    pub lambda_min: f64,
    pub lambda_max: f64,
    /// Relative widening applied to the raw iterative estimates; the
    /// enclosure is only trusted when this is positive.
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteOperator {
    dim: usize,
    kind: OperatorKind,
    bounds: Option<SpectralBounds>,
}

impl DiscreteOperator {
    pub fn tridiagonal(diag: Vec<f64>, off: Vec<f64>) -> Self {
        assert!(diag.len() >= 1 && off.len() + 1 == diag.len());
        DiscreteOperator {
            dim: diag.len(),
            kind: OperatorKind::Tridiagonal { diag, off },
            bounds: None,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> &OperatorKind {
        &self.kind
    }

    pub fn cached_bounds(&self) -> Option<SpectralBounds> {
        self.bounds
    }

    pub fn set_cached_bounds(&mut self, bounds: SpectralBounds) {
        self.bounds = Some(bounds);
    }

    /// For a Toeplitz tridiagonal operator, its (diagonal, off-diagonal)
    /// values. This is the prerequisite of the sine-basis diagonalization.
    pub fn toeplitz_tridiag(&self) -> Option<(f64, f64)> {
        match &self.kind {
            OperatorKind::Tridiagonal { diag, off } => {
                let d0 = diag[0];
                if diag.iter().any(|&d| d != d0) {
                    return None;
                }
                if self.dim == 1 {
                    // 1x1: off-diagonal value is fixed by the stencil scale.
                    return Some((d0, -d0 / 2.0));
                }
                let e0 = off[0];
                if off.iter().any(|&e| e != e0) {
                    return None;
                }
                Some((d0, e0))
            }
            _ => None,
        }
    }

    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        let mut out = alloc::vec![0.0; self.dim];
        self.matvec_into(v, &mut out);
        out
    }

    pub fn matvec_into(&self, v: &[f64], out: &mut [f64]) {
        assert_eq!(v.len(), self.dim);
        assert_eq!(out.len(), self.dim);
        match &self.kind {
            OperatorKind::Tridiagonal { diag, off } => {
                let n = self.dim;
                for i in 0..n {
                    let mut s = diag[i] * v[i];
                    if i > 0 {
                        s += off[i - 1] * v[i - 1];
                    }
                    if i + 1 < n {
                        s += off[i] * v[i + 1];
                    }
                    out[i] = s;
                }
            }
            OperatorKind::SparseRows {
                row_ptr,
                col_idx,
                values,
            } => {
                for i in 0..self.dim {
                    let mut s = 0.0;
                    for p in row_ptr[i]..row_ptr[i + 1] {
                        s += values[p] * v[col_idx[p]];
                    }
                    out[i] = s;
                }
            }
        }
    }

    /// Maximum |i - j| over stored entries.
    pub fn bandwidth(&self) -> usize {
        match &self.kind {
            OperatorKind::Tridiagonal { .. } => usize::from(self.dim > 1),
            OperatorKind::SparseRows {
                row_ptr, col_idx, ..
            } => {
                let mut bw = 0usize;
                for i in 0..self.dim {
                    for p in row_ptr[i]..row_ptr[i + 1] {
                        bw = bw.max(i.abs_diff(col_idx[p]));
                    }
                }
                bw
            }
        }
    }

    /// Entry (i, j); zero when not stored.
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        match &self.kind {
            OperatorKind::Tridiagonal { diag, off } => {
                if i == j {
                    diag[i]
                } else if i.abs_diff(j) == 1 {
                    off[i.min(j)]
                } else {
                    0.0
                }
            }
            OperatorKind::SparseRows {
                row_ptr,
                col_idx,
                values,
            } => {
                for p in row_ptr[i]..row_ptr[i + 1] {
                    if col_idx[p] == j {
                        return values[p];
                    }
                }
                0.0
            }
        }
    }

    /// Dense row-major copy, for small instances and test oracles.
    pub fn to_dense(&self) -> Vec<f64> {
        let n = self.dim;
        let mut out = alloc::vec![0.0; n * n];
        match &self.kind {
            OperatorKind::Tridiagonal { diag, off } => {
                for i in 0..n {
                    out[i * n + i] = diag[i];
                    if i + 1 < n {
                        out[i * n + i + 1] = off[i];
                        out[(i + 1) * n + i] = off[i];
                    }
                }
            }
            OperatorKind::SparseRows {
                row_ptr,
                col_idx,
                values,
            } => {
                for i in 0..n {
                    for p in row_ptr[i]..row_ptr[i + 1] {
                        out[i * n + col_idx[p]] = values[p];
                    }
                }
            }
        }
        out
    }

    /// max |A - A^T| over stored entries (0 for tridiagonal storage).
    pub fn max_asymmetry(&self) -> f64 {
        match &self.kind {
            OperatorKind::Tridiagonal { .. } => 0.0,
            OperatorKind::SparseRows {
                row_ptr, col_idx, ..
            } => {
                let mut worst: f64 = 0.0;
                for i in 0..self.dim {
                    for p in row_ptr[i]..row_ptr[i + 1] {
                        let j = col_idx[p];
                        let v = self.entry(i, j);
                        let w = self.entry(j, i);
                        worst = worst.max(util::abs(v - w));
                    }
                }
                worst
            }
        }
    }

    pub fn max_abs_entry(&self) -> f64 {
        match &self.kind {
            OperatorKind::Tridiagonal { diag, off } => diag
                .iter()
                .chain(off.iter())
                .fold(0.0f64, |m, &v| m.max(util::abs(v))),
            OperatorKind::SparseRows { values, .. } => {
                values.iter().fold(0.0f64, |m, &v| m.max(util::abs(v)))
            }
        }
    }
}

/// Second-difference operator `h^-2 tridiag[-1, 2, -1]` on the interval grid.
pub fn assemble_laplacian_1d(grid: &Grid1D) -> DiscreteOperator {
    let n = grid.len();
    let s = 1.0 / (grid.spacing() * grid.spacing());
    DiscreteOperator::tridiagonal(alloc::vec![2.0 * s; n], alloc::vec![-s; n.saturating_sub(1)])
}

/// Dirichlet Laplacian on the cross section: 3-point stencil on the interval,
/// 5-point stencil on the L-shape. Couplings to lattice neighbors outside the
/// domain are dropped (homogeneous Dirichlet).
pub fn assemble_laplacian_cs(grid: &CrossSectionGrid) -> DiscreteOperator {
    let s = 1.0 / (grid.spacing() * grid.spacing());
    match grid.shape() {
        CrossSectionShape::Interval => {
            let n = grid.len();
            DiscreteOperator::tridiagonal(
                alloc::vec![2.0 * s; n],
                alloc::vec![-s; n.saturating_sub(1)],
            )
        }
        CrossSectionShape::LShape => {
            let n = grid.len();
            let mut row_ptr = Vec::with_capacity(n + 1);
            let mut col_idx = Vec::new();
            let mut values = Vec::new();
            row_ptr.push(0);
            for (idx, &(i2, i3)) in grid.multi_indices().iter().enumerate() {
                let (i2, i3) = (i2 as i64, i3 as i64);
                let mut entries: Vec<(usize, f64)> = Vec::with_capacity(5);
                entries.push((idx, 4.0 * s));
                for (d2, d3) in [(-1, 0), (1, 0), (0, -1), (0, 1)] {
                    if let Some(j) = grid.index_at(i2 + d2, i3 + d3) {
                        entries.push((j, -s));
                    }
                }
                entries.sort_by_key(|e| e.0);
                for (j, v) in entries {
                    col_idx.push(j);
                    values.push(v);
                }
                row_ptr.push(col_idx.len());
            }
            DiscreteOperator {
                dim: n,
                kind: OperatorKind::SparseRows {
                    row_ptr,
                    col_idx,
                    values,
                },
                bounds: None,
            }
        }
    }
}

fn solve_for_inverse_iteration(op: &DiscreteOperator) -> Result<InverseApply> {
    match &op.kind {
        OperatorKind::Tridiagonal { diag, off } => Ok(InverseApply::Tridiag {
            diag: diag.clone(),
            off: off.clone(),
        }),
        OperatorKind::SparseRows { .. } => {
            let chol = BandCholesky::factor(op, 0.0)?;
            Ok(InverseApply::Band(chol))
        }
    }
}

enum InverseApply {
    Tridiag { diag: Vec<f64>, off: Vec<f64> },
    Band(BandCholesky),
}

impl InverseApply {
    fn apply(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        match self {
            InverseApply::Tridiag { diag, off } => crate::solve::thomas_solve(diag, off, rhs),
            InverseApply::Band(chol) => Ok(chol.solve(rhs)),
        }
    }
}

const EIG_ITER_CAP: usize = 200_000;

fn rayleigh_iterate(
    op: &DiscreteOperator,
    inverse: Option<&InverseApply>,
    tol: f64,
    what: &str,
) -> Result<f64> {
    let n = op.dim();
    let mut rng = SplitMix::new(0x5eed_1d0e);
    let mut v: Vec<f64> = (0..n).map(|_| rng.next_sym()).collect();
    let nv = util::norm2(&v);
    util::scale(1.0 / nv, &mut v);
    let mut theta = 0.0;
    let mut av = alloc::vec![0.0; n];
    for _ in 0..EIG_ITER_CAP {
        op.matvec_into(&v, &mut av);
        theta = util::dot(&v, &av);
        // residual of (theta, v) as an eigenpair
        let mut res = 0.0;
        for i in 0..n {
            let d = av[i] - theta * v[i];
            res += d * d;
        }
        if util::sqrt(res) <= tol * util::abs(theta).max(f64::MIN_POSITIVE) {
            return Ok(theta);
        }
        match inverse {
            None => core::mem::swap(&mut v, &mut av),
            Some(inv) => v = inv.apply(&v)?,
        }
        let nv = util::norm2(&v);
        if !(nv > 0.0) || !nv.is_finite() {
            return Err(Error::EstimationFailure(String::from(
                "eigen-iteration produced a degenerate vector",
            )));
        }
        util::scale(1.0 / nv, &mut v);
    }
    let _ = theta;
    Err(Error::EstimationFailure(alloc::format!(
        "{what} iteration did not converge within {EIG_ITER_CAP} steps"
    )))
}

/// Enclosure of the extreme eigenvalues of a symmetric positive definite
/// operator: `lambda_max` by power iteration, `lambda_min` by inverse
/// iteration reusing one factorization. Toeplitz tridiagonal operators use
/// their closed-form sine-basis eigenvalues instead (the same spectrum the
/// exponential actions diagonalize in). The raw estimates are widened by
/// the relative `margin`; the iterations stop at relative residual
/// `max(1e-6, margin / 2)`.
pub fn spectral_bounds(op: &DiscreteOperator, margin: f64) -> Result<(f64, f64)> {
    if !(margin >= 0.0) {
        return Err(Error::invalid("spectral margin must be nonnegative"));
    }
    if let Some((d, e)) = op.toeplitz_tridiag() {
        // eigenvalues d + 2e cos(k pi / (n+1)) are monotone in k
        let n = op.dim();
        let c1 = util::cos(core::f64::consts::PI / (n + 1) as f64);
        let ends = [d + 2.0 * e * c1, d - 2.0 * e * c1];
        let lo = ends[0].min(ends[1]);
        let hi = ends[0].max(ends[1]);
        if !(lo > 0.0) {
            return Err(Error::EstimationFailure(String::from(
                "operator does not look positive definite",
            )));
        }
        return Ok((lo * (1.0 - margin), hi * (1.0 + margin)));
    }
    let tol = (margin / 2.0).max(1e-6);
    let hi = rayleigh_iterate(op, None, tol, "power")?;
    let inv = solve_for_inverse_iteration(op)?;
    let lo = rayleigh_iterate(op, Some(&inv), tol, "inverse")?;
    if !(lo > 0.0 && hi >= lo) {
        return Err(Error::EstimationFailure(String::from(
            "operator does not look positive definite",
        )));
    }
    Ok((lo * (1.0 - margin), hi * (1.0 + margin)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_cross_section, build_interval_grid};

    #[test]
    fn laplacian_1d_small() {
        let g = build_interval_grid(1.0, 3).unwrap();
        let a = assemble_laplacian_1d(&g);
        match a.kind() {
            OperatorKind::Tridiagonal { diag, off } => {
                assert_eq!(diag, &[8.0, 8.0, 8.0]);
                assert_eq!(off, &[-4.0, -4.0]);
            }
            _ => panic!("expected tridiagonal"),
        }
    }

    #[test]
    fn laplacian_1d_single_node() {
        let g = build_interval_grid(1.0, 1).unwrap(); // h = 1
        let a = assemble_laplacian_1d(&g);
        assert_eq!(a.to_dense(), vec![2.0]);
    }

    #[test]
    fn laplacian_1d_eigenvalues_match_dense_oracle() {
        let g = build_interval_grid(1.0, 3).unwrap();
        let a = assemble_laplacian_1d(&g);
        let (vals, _) = longdomain_oracle::sym_eigen(3, &a.to_dense());
        let expected = [4.0 * (2.0 - 2f64.sqrt()), 8.0, 4.0 * (2.0 + 2f64.sqrt())];
        for (v, e) in vals.iter().zip(expected.iter()) {
            assert!((v - e).abs() < 1e-12, "{v} vs {e}");
        }
    }

    #[test]
    fn cs_interval_matches_1d_stencil() {
        let gcs = build_cross_section(CrossSectionShape::Interval, 0.5).unwrap();
        let g1 = build_interval_grid(1.0, 3).unwrap();
        assert_eq!(
            assemble_laplacian_cs(&gcs).to_dense(),
            assemble_laplacian_1d(&g1).to_dense()
        );
    }

    /// Expected stencil for the five-node L-shape at h' = 0.5, enumerated by
    /// hand from the lattice: index 0..4 = (.5,.5), (.5,1), (.5,1.5), (1,.5),
    /// (1.5,.5). Couplings only between lattice neighbors that are both
    /// interior; everything else hits the Dirichlet boundary (in particular
    /// the reentrant corner (1,1) next to nodes 1 and 3).
    #[test]
    fn cs_lshape_coarse_stencil() {
        let gcs = build_cross_section(CrossSectionShape::LShape, 0.5).unwrap();
        let a = assemble_laplacian_cs(&gcs);
        let d = a.to_dense();
        let n = 5;
        let expect = |i: usize, j: usize| -> f64 {
            let pairs = [(0usize, 1usize), (0, 3), (1, 2), (3, 4)];
            if i == j {
                16.0
            } else if pairs.contains(&(i.min(j), i.max(j))) {
                -4.0
            } else {
                0.0
            }
        };
        for i in 0..n {
            for j in 0..n {
                assert_eq!(d[i * n + j], expect(i, j), "entry ({i},{j})");
            }
        }
    }

    #[test]
    fn assembled_operators_are_symmetric() {
        for h in [0.5, 0.25, 0.125] {
            let gcs = build_cross_section(CrossSectionShape::LShape, h).unwrap();
            let a = assemble_laplacian_cs(&gcs);
            assert!(a.max_asymmetry() <= 1e-14 * a.max_abs_entry());
        }
    }

    #[test]
    fn monotone_inverse_on_desk_scale() {
        // All entries of the dense inverse of the cross-section Laplacian are
        // nonnegative (discrete maximum principle).
        let gcs = build_cross_section(CrossSectionShape::LShape, 0.25).unwrap();
        let a = assemble_laplacian_cs(&gcs);
        let n = a.dim();
        assert!(n <= 100);
        let inv = longdomain_oracle::inverse(n, &a.to_dense());
        for v in &inv {
            assert!(*v >= -1e-13, "inverse entry {v} negative");
        }
    }

    #[test]
    fn spectral_bounds_exact_small() {
        let g = build_interval_grid(1.0, 3).unwrap();
        let a = assemble_laplacian_1d(&g);
        let (lo, hi) = spectral_bounds(&a, 0.0).unwrap();
        assert!((lo - 4.0 * (2.0 - 2f64.sqrt())).abs() < 1e-8);
        assert!((hi - 4.0 * (2.0 + 2f64.sqrt())).abs() < 1e-8);
    }

    #[test]
    fn spectral_bounds_margin_widens() {
        // On a 1x1 operator the iteration is exact independent of its
        // stopping tolerance, so the widening is exactly the margin.
        let a = DiscreteOperator::tridiagonal(vec![2.0], vec![]);
        let (lo, hi) = spectral_bounds(&a, 0.05).unwrap();
        assert!((lo - 0.95 * 2.0).abs() < 1e-12);
        assert!((hi - 1.05 * 2.0).abs() < 1e-12);
    }

    #[test]
    fn spectral_bounds_scalar() {
        let a = DiscreteOperator::tridiagonal(vec![2.0], vec![]);
        let (lo, hi) = spectral_bounds(&a, 0.0).unwrap();
        assert!((lo - 2.0).abs() < 1e-12 && (hi - 2.0).abs() < 1e-12);
    }

    #[test]
    fn interval_cs_smallest_eigenvalue_near_continuum() {
        // Smallest eigenvalue of the interval cross-section Laplacian
        // approaches (pi/2)^2; at h' = 2/64 it must be within 0.1%.
        let gcs = build_cross_section(CrossSectionShape::Interval, 2.0 / 64.0).unwrap();
        let a = assemble_laplacian_cs(&gcs);
        let (lo, _) = spectral_bounds(&a, 0.0).unwrap();
        let target = core::f64::consts::PI * core::f64::consts::PI / 4.0;
        assert!((lo - target).abs() < 1e-3 * target, "{lo} vs {target}");
    }
}
