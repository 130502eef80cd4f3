//! Reference solutions the method errors are measured against.
//!
//! The planar case solves the full Kronecker-sum system exactly by fast
//! diagonalization: one sine transform of the data in the cross-section
//! direction, one shifted tridiagonal solve per cross-section mode, one
//! inverse transform per interval row. This route shares no code with the
//! exponential-sum solver being benchmarked. The three-dimensional case uses
//! the rank-30 exponential-sum solve with tightened quadrature, as its
//! convergence in the rank is exponential.

use longdomain_core::expm::{sine_transform, SincQuadrature};
use longdomain_core::expsum::ExponentialSum;
use longdomain_core::field::{FullGridField, TensorField};
use longdomain_core::method3::{method3_solve_with_sum, spectral_interval, Method3Config};
use longdomain_core::solve::solve_shifted_1d;
use longdomain_core::{
    assemble_laplacian_1d, assemble_laplacian_cs, CrossSectionGrid, Grid1D,
};

use crate::cache::ExpsumCache;
use crate::BenchError;

pub const REFERENCE_3D_RANK: usize = 30;

fn toeplitz_eigenvalues(op: &longdomain_core::DiscreteOperator) -> Result<Vec<f64>, BenchError> {
    let (d, e) = op.toeplitz_tridiag().ok_or_else(|| {
        BenchError::Parse("fast diagonalization needs an interval cross section".into())
    })?;
    let m = op.dim();
    let base = std::f64::consts::PI / (m + 1) as f64;
    Ok((1..=m)
        .map(|k| d + 2.0 * e * (k as f64 * base).cos())
        .collect())
}

fn check_residual_2d(
    grid1: &Grid1D,
    gridcs: &CrossSectionGrid,
    values: &[f64],
    rhs: impl Fn(usize, usize) -> f64,
) -> Result<(), BenchError> {
    let a1 = assemble_laplacian_1d(grid1);
    let acs = assemble_laplacian_cs(gridcs);
    let (n, m) = (grid1.len(), gridcs.len());
    let mut res = 0.0;
    let mut rhs_norm = 0.0;
    // A' along rows
    let mut row_image = vec![0.0; m];
    let mut full_res = vec![0.0; n * m];
    for i in 0..n {
        acs.matvec_into(&values[i * m..(i + 1) * m], &mut row_image);
        for k in 0..m {
            full_res[i * m + k] = row_image[k];
        }
    }
    // A1 along columns (tridiagonal: explicit neighbors)
    let (d, e) = a1.toeplitz_tridiag().expect("interval operator is Toeplitz");
    let mut sol_norm = 0.0;
    for i in 0..n {
        for k in 0..m {
            let mut s = d * values[i * m + k];
            if i > 0 {
                s += e * values[(i - 1) * m + k];
            }
            if i + 1 < n {
                s += e * values[(i + 1) * m + k];
            }
            let b = rhs(i, k);
            let r = full_res[i * m + k] + s - b;
            res += r * r;
            rhs_norm += b * b;
            sol_norm += values[i * m + k] * values[i * m + k];
        }
    }
    // Backward-error form: the operator norm enters the attainable floor.
    let op_norm = d.abs() + 2.0 * e.abs() + acs.max_abs_entry() * 3.0;
    let scale = rhs_norm.sqrt() + op_norm * sol_norm.sqrt();
    if res.sqrt() > 1e-10 * scale.max(1e-300) {
        return Err(BenchError::Solver(format!(
            "2d reference residual {:.3e} above contract",
            res.sqrt() / scale
        )));
    }
    Ok(())
}

/// Exact discrete solve of `(A1 ⊗ I + I ⊗ A') u = 1 ⊗ f` on the planar
/// cylinder by fast diagonalization of the cross-section factor.
pub fn reference_solution_2d(
    f: &[f64],
    grid1: &Grid1D,
    gridcs: &CrossSectionGrid,
) -> Result<FullGridField, BenchError> {
    let (n, m) = (grid1.len(), gridcs.len());
    if f.len() != m {
        return Err(BenchError::Parse("rhs length mismatch".into()));
    }
    if n * m > 10_000_000 {
        return Err(BenchError::Parse(
            "2d reference grid exceeds the unknown budget".into(),
        ));
    }
    let a1 = assemble_laplacian_1d(grid1);
    let acs = assemble_laplacian_cs(gridcs);
    let lambdas = toeplitz_eigenvalues(&acs)?;
    let fhat = sine_transform(f);
    // one shifted tridiagonal solve per cross-section mode
    let mut uhat = Vec::with_capacity(m);
    for k in 0..m {
        let rhs = vec![fhat[k]; n];
        let sol = solve_shifted_1d(&a1, 1.0, lambdas[k], &rhs)?;
        uhat.push(sol);
    }
    // inverse transform per interval row
    let scale = 2.0 / (m + 1) as f64;
    let mut values = vec![0.0; n * m];
    let mut coeff = vec![0.0; m];
    for i in 0..n {
        for k in 0..m {
            coeff[k] = uhat[k][i];
        }
        let row = sine_transform(&coeff);
        for k in 0..m {
            values[i * m + k] = scale * row[k];
        }
    }
    check_residual_2d(grid1, gridcs, &values, |_, k| f[k])?;
    Ok(FullGridField::new(grid1.clone(), gridcs.clone(), values))
}

/// Fast-diagonalization solve for a general full-grid right-hand side (used
/// by the manufactured-solution convergence checks).
pub fn reference_solution_2d_general(rhs: &FullGridField) -> Result<FullGridField, BenchError> {
    let grid1 = rhs.grid1().clone();
    let gridcs = rhs.gridcs().clone();
    let (n, m) = (grid1.len(), gridcs.len());
    let a1 = assemble_laplacian_1d(&grid1);
    let acs = assemble_laplacian_cs(&gridcs);
    let lambdas = toeplitz_eigenvalues(&acs)?;
    // transform every interval row
    let mut ghat = vec![0.0; n * m];
    for i in 0..n {
        let row = sine_transform(&rhs.values()[i * m..(i + 1) * m]);
        ghat[i * m..(i + 1) * m].copy_from_slice(&row);
    }
    let scale = 2.0 / (m + 1) as f64;
    let mut uhat = vec![0.0; n * m];
    let mut col = vec![0.0; n];
    for k in 0..m {
        for i in 0..n {
            col[i] = ghat[i * m + k];
        }
        let sol = solve_shifted_1d(&a1, 1.0, lambdas[k], &col)?;
        for i in 0..n {
            uhat[i * m + k] = sol[i];
        }
    }
    let mut values = vec![0.0; n * m];
    for i in 0..n {
        let row = sine_transform(&uhat[i * m..(i + 1) * m]);
        for k in 0..m {
            values[i * m + k] = scale * row[k];
        }
    }
    check_residual_2d(&grid1, &gridcs, &values, |i, k| rhs.values()[i * m + k])?;
    Ok(FullGridField::new(grid1, gridcs, values))
}

/// Reference configuration of the exponential-sum solver: rank 30 with
/// quadrature tightened to 1e-10.
pub fn reference_3d_config() -> Result<Method3Config, BenchError> {
    Ok(Method3Config::new(REFERENCE_3D_RANK)?
        .with_quad(SincQuadrature::for_tolerance(1e-10)?))
}

/// Rank-30 exponential-sum reference on the given grids, with the fitted
/// sums served through the coefficient cache.
pub fn reference_solution_3d(
    f: &[f64],
    grid1: &Grid1D,
    gridcs: &CrossSectionGrid,
    cache: &ExpsumCache,
) -> Result<TensorField, BenchError> {
    reference_3d_with_rank(f, grid1, gridcs, cache, REFERENCE_3D_RANK)
}

/// Reference-quality solve at an explicit rank (self-consistency checks).
pub fn reference_3d_with_rank(
    f: &[f64],
    grid1: &Grid1D,
    gridcs: &CrossSectionGrid,
    cache: &ExpsumCache,
    rank: usize,
) -> Result<TensorField, BenchError> {
    let cfg = Method3Config {
        rank,
        ..reference_3d_config()?
    };
    let sum = cached_sum_for_grids(grid1, gridcs, rank, cfg.margin, cache)?;
    Ok(method3_solve_with_sum(f, grid1, gridcs, &cfg, &sum)?)
}

/// Fit (or load) the exponential sum for the spectral interval of the grids.
pub fn cached_sum_for_grids(
    grid1: &Grid1D,
    gridcs: &CrossSectionGrid,
    rank: usize,
    margin: f64,
    cache: &ExpsumCache,
) -> Result<ExponentialSum, BenchError> {
    let a1 = assemble_laplacian_1d(grid1);
    let acs = assemble_laplacian_cs(gridcs);
    let (a, b) = spectral_interval(&a1, &acs, margin)?;
    cache.fit(rank, a, b)
}
