//! One-term approximation `psi(lambda_inf, ·) ⊗ u_inf` built from the
//! reduced problem on the cross section, plus the explicit constants of its
//! a-priori energy error bound.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::field::{l2_inner_cs, RankOneTerm, TensorField};
use crate::grid::{CrossSectionGrid, Grid1D};
use crate::operator::{assemble_laplacian_1d, assemble_laplacian_cs, DiscreteOperator, OperatorKind};
use crate::solve::{thomas_solve, BandCholesky};
use crate::util;

/// Solution of the reduced cross-section problem together with the derived
/// scalars: `alpha_inf = ||u_inf||`, `beta_inf = sqrt((f, u_inf))` (equal to
/// `||∇' u_inf||` through the weak form) and `lambda_inf = beta/alpha`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedSolution {
    pub u_inf: Vec<f64>,
    pub alpha_inf: f64,
    pub beta_inf: f64,
    pub lambda_inf: f64,
}

pub(crate) fn solve_spd_cs(acs: &DiscreteOperator, rhs: &[f64]) -> Result<Vec<f64>> {
    match acs.kind() {
        OperatorKind::Tridiagonal { diag, off } => thomas_solve(diag, off, rhs),
        OperatorKind::SparseRows { .. } => Ok(BandCholesky::factor(acs, 0.0)?.solve(rhs)),
    }
}

/// Solve `A' u = f` on the cross section and derive the reduced scalars.
pub fn solve_reduced(f: &[f64], grid: &CrossSectionGrid) -> Result<ReducedSolution> {
    if f.len() != grid.len() {
        return Err(Error::invalid("solve_reduced length mismatch"));
    }
    if f.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("solve_reduced needs finite data"));
    }
    if f.iter().all(|&v| v == 0.0) {
        return Err(Error::DegenerateRhs("lambda_inf is undefined for f = 0".into()));
    }
    let acs = assemble_laplacian_cs(grid);
    let u_inf = solve_spd_cs(&acs, f)?;
    let res = {
        let au = acs.matvec(&u_inf);
        let mut s = 0.0;
        for i in 0..f.len() {
            let d = au[i] - f[i];
            s += d * d;
        }
        util::sqrt(s)
    };
    let fn2 = util::norm2(f);
    if res > 1e-10 * fn2 {
        return Err(Error::SolverFailure(alloc::format!(
            "reduced solve residual {res:.3e} above contract"
        )));
    }
    let alpha_sq = l2_inner_cs(&u_inf, &u_inf, grid)?;
    let beta_sq = l2_inner_cs(f, &u_inf, grid)?;
    if !(alpha_sq > 0.0 && beta_sq > 0.0) {
        return Err(Error::DegenerateRhs("reduced solution has vanishing energy".into()));
    }
    let alpha_inf = util::sqrt(alpha_sq);
    let beta_inf = util::sqrt(beta_sq);
    Ok(ReducedSolution {
        u_inf,
        alpha_inf,
        beta_inf,
        lambda_inf: beta_inf / alpha_inf,
    })
}

/// Closed-form longitudinal profile `1 - cosh(a x)/cosh(a ell)` at the
/// interior nodes, evaluated in the overflow-safe form
/// `1 - (e^{a(x-ell)} + e^{-a(x+ell)}) / (1 + e^{-2 a ell})`.
pub fn psi_profile(a: f64, grid: &Grid1D) -> Result<Vec<f64>> {
    if !(a > 0.0) || !a.is_finite() {
        return Err(Error::invalid("psi_profile rate must be positive"));
    }
    let ell = grid.ell();
    let denom = 1.0 + util::exp(-2.0 * a * ell);
    Ok(grid
        .nodes()
        .iter()
        .map(|&x| 1.0 - (util::exp(a * (x - ell)) + util::exp(-a * (x + ell))) / denom)
        .collect())
}

/// Discrete longitudinal best-approximation factor: solves
/// `(alpha^2 A1 + beta^2 I) p = beta^2 * 1`, the finite-difference form of
/// the boundary value problem the cosh profile solves. Using the solve
/// rather than sampling the closed form keeps the one-term approximation
/// consistent with the grid operators (exact for eigenfunction data).
pub(crate) fn discrete_profile(
    a1: &DiscreteOperator,
    alpha_inf: f64,
    beta_inf: f64,
) -> Result<Vec<f64>> {
    let n = a1.dim();
    let rhs = alloc::vec![beta_inf * beta_inf; n];
    crate::solve::solve_shifted_1d(a1, alpha_inf * alpha_inf, beta_inf * beta_inf, &rhs)
}

/// One-term approximation with its reduced solution.
pub fn method1_with_reduced(
    f: &[f64],
    grid1: &Grid1D,
    gridcs: &CrossSectionGrid,
) -> Result<(TensorField, ReducedSolution)> {
    let reduced = solve_reduced(f, gridcs)?;
    let a1 = assemble_laplacian_1d(grid1);
    let acs = assemble_laplacian_cs(gridcs);
    let p = discrete_profile(&a1, reduced.alpha_inf, reduced.beta_inf)?;
    let mut field = TensorField::new(grid1.clone(), gridcs.clone());
    field.push_term(RankOneTerm::with_caches(p, reduced.u_inf.clone(), &a1, &acs));
    Ok((field, reduced))
}

/// Rank-1 approximation `p ⊗ u_inf` of the long-domain problem.
pub fn method1_solution(
    f: &[f64],
    grid1: &Grid1D,
    gridcs: &CrossSectionGrid,
) -> Result<TensorField> {
    Ok(method1_with_reduced(f, grid1, gridcs)?.0)
}

/// Constants of the windowed energy error bound: for window margin `delta`
/// and smallest cross-section rate `lambda1`,
/// `C1 = 4 e^{-2 lambda1 delta}` and
/// `C2 = 4 (e^{-2 lambda1 delta} / lambda1 + 6 (ell - delta) e^{-2 lambda1 ell})`.
pub fn error_bound_constants(lambda1: f64, ell: f64, delta: f64) -> Result<(f64, f64)> {
    if !(lambda1 > 0.0) {
        return Err(Error::invalid("lambda1 must be positive"));
    }
    if !(delta >= 0.0 && delta < ell) {
        return Err(Error::invalid("need 0 <= delta < ell"));
    }
    let e_delta = util::exp(-2.0 * lambda1 * delta);
    let c1 = 4.0 * e_delta;
    let c2 = 4.0 * (e_delta / lambda1 + 6.0 * (ell - delta) * util::exp(-2.0 * lambda1 * ell));
    Ok((c1, c2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_cross_section, build_interval_grid, CrossSectionShape};
    use core::f64::consts::PI;

    fn interval_cs(k: usize) -> CrossSectionGrid {
        build_cross_section(CrossSectionShape::Interval, 2.0 / k as f64).unwrap()
    }

    #[test]
    fn reduced_constant_rhs() {
        let g = interval_cs(64);
        let f = vec![1.0; g.len()];
        let r = solve_reduced(&f, &g).unwrap();
        // u at the center node equals (1 - 0)/2 exactly (quadratic solution).
        let mid = g.len() / 2;
        assert!((r.u_inf[mid] - 0.5).abs() < 1e-12);
        let h = g.spacing();
        let lam_exact = (2.5f64).sqrt();
        assert!(
            (r.lambda_inf - lam_exact).abs() < 2.0 * h * h,
            "{} vs {lam_exact}",
            r.lambda_inf
        );
        // beta^2 = (f, u_inf) by construction
        let beta_sq = l2_inner_cs(&f, &r.u_inf, &g).unwrap();
        assert!((r.beta_inf * r.beta_inf - beta_sq).abs() <= 1e-10 * beta_sq);
    }

    #[test]
    fn reduced_eigenfunction_rhs() {
        let g = interval_cs(128);
        let f: Vec<f64> = g.coords().iter().map(|c| libm::cos(PI * c[0] / 2.0)).collect();
        let r = solve_reduced(&f, &g).unwrap();
        let h = g.spacing();
        assert!(
            (r.lambda_inf - PI / 2.0).abs() < 2.0 * h * h,
            "{} vs {}",
            r.lambda_inf,
            PI / 2.0
        );
    }

    #[test]
    fn reduced_rejects_zero_rhs() {
        let g = interval_cs(16);
        let f = vec![0.0; g.len()];
        assert!(matches!(solve_reduced(&f, &g), Err(Error::DegenerateRhs(_))));
    }

    #[test]
    fn psi_scalar_values() {
        let g = build_interval_grid(1.0, 15).unwrap();
        let psi = psi_profile(1.0, &g).unwrap();
        // center node x = 0
        let mid = 7;
        assert!((g.nodes()[mid]).abs() < 1e-14);
        let expected = 1.0 - 1.0 / libm::cosh(1.0);
        assert!((psi[mid] - expected).abs() < 1e-14, "{} vs {expected}", psi[mid]);
    }

    #[test]
    fn psi_long_domain_center_is_one() {
        let g = build_interval_grid(20.0, 159).unwrap();
        let psi = psi_profile(2.0, &g).unwrap();
        let mid = 79;
        assert!((g.nodes()[mid]).abs() < 1e-12);
        assert!((psi[mid] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn psi_values_in_unit_interval_and_even() {
        for (a, ell, n) in [(0.3, 1.0, 21), (2.0, 10.0, 100), (3.0, 500.0, 401)] {
            let g = build_interval_grid(ell, n).unwrap();
            let psi = psi_profile(a, &g).unwrap();
            // [0, 1) mathematically; 1.0 is reachable once 1 - psi underflows.
            for &v in &psi {
                assert!(v >= 0.0 && v <= 1.0 && v.is_finite());
            }
            let near_boundary = psi[0].min(psi[n - 1]);
            assert!(near_boundary < 1.0);
            let sym_tol = 1e-13 + 8.0 * a * ell * f64::EPSILON;
            for i in 0..n {
                let j = n - 1 - i;
                assert!((psi[i] - psi[j]).abs() < sym_tol);
            }
        }
        assert!(psi_profile(0.0, &build_interval_grid(1.0, 3).unwrap()).is_err());
    }

    #[test]
    fn psi_satisfies_discrete_ode_to_second_order() {
        // || A1 psi + a^2 psi - a^2 ||_inf scales like h^2 a^4.
        let a = 1.5;
        let resid = |n: usize| -> f64 {
            let g = build_interval_grid(2.0, n).unwrap();
            let a1 = assemble_laplacian_1d(&g);
            let psi = psi_profile(a, &g).unwrap();
            let apsi = a1.matvec(&psi);
            let mut worst: f64 = 0.0;
            for i in 0..n {
                worst = worst.max((apsi[i] + a * a * psi[i] - a * a).abs());
            }
            worst
        };
        let r1 = resid(63);
        let r2 = resid(127);
        let ratio = r1 / r2;
        assert!(
            (3.0..5.0).contains(&ratio),
            "expected O(h^2) residual decay, got ratio {ratio}"
        );
        // magnitude sanity: h^2 a^4 / 12 times cosh-scale ~ 1
        let h = 4.0 / 64.0;
        assert!(r1 < h * h * a.powi(4));
    }

    #[test]
    fn method1_solution_even_in_x1() {
        let g1 = build_interval_grid(5.0, 80).unwrap();
        let gcs = interval_cs(32);
        let f: Vec<f64> = gcs.coords().iter().map(|c| libm::tanh(4.0 * c[0] + 1.0)).collect();
        let u = method1_solution(&f, &g1, &gcs).unwrap();
        assert_eq!(u.rank(), 1);
        let p = u.terms()[0].p();
        for i in 0..p.len() {
            let j = p.len() - 1 - i;
            assert!((p[i] - p[j]).abs() < 1e-13);
        }
    }

    #[test]
    fn discrete_profile_close_to_cosh_form() {
        let g1 = build_interval_grid(5.0, 400).unwrap();
        let gcs = interval_cs(64);
        let f = vec![1.0; gcs.len()];
        let (u, red) = method1_with_reduced(&f, &g1, &gcs).unwrap();
        let psi = psi_profile(red.lambda_inf, &g1).unwrap();
        let h = g1.spacing();
        let mut worst: f64 = 0.0;
        for (a, b) in u.terms()[0].p().iter().zip(psi.iter()) {
            worst = worst.max((a - b).abs());
        }
        assert!(worst < 5.0 * h * h, "profiles differ by {worst}");
    }

    #[test]
    fn lambda_inf_dominates_lambda1() {
        // lambda_inf >= lambda1(discrete) - 1e-8 for generic data.
        let gcs = interval_cs(64);
        let acs = crate::operator::assemble_laplacian_cs(&gcs);
        let (lam_min, _) = crate::operator::spectral_bounds(&acs, 0.0).unwrap();
        let lambda1 = libm::sqrt(lam_min);
        for f in [
            vec![1.0; gcs.len()],
            gcs.coords().iter().map(|c| libm::tanh(4.0 * c[0] + 1.0)).collect(),
            gcs.coords().iter().map(|c| libm::fabs(c[0])).collect(),
        ] {
            let r = solve_reduced(&f, &gcs).unwrap();
            assert!(r.lambda_inf >= lambda1 - 1e-8, "{} < {lambda1}", r.lambda_inf);
        }
    }

    #[test]
    fn bound_constants() {
        // delta = 0 plugs into the corollary form.
        let (c1, c2) = error_bound_constants(2.0, 10.0, 0.0).unwrap();
        assert!((c1 - 4.0).abs() < 1e-14);
        let expect = 4.0 * (1.0 / 2.0 + 6.0 * 10.0 * libm::exp(-2.0 * 2.0 * 10.0));
        assert!((c2 - expect).abs() < 1e-14);
        // scalar evaluation at lambda1 = pi/2, ell = 10, delta = 5
        let (c1, _) = error_bound_constants(PI / 2.0, 10.0, 5.0).unwrap();
        assert!((c1 - 4.0 * libm::exp(-5.0 * PI)).abs() < 1e-18);
        // strictly decreasing in delta
        let mut last = f64::INFINITY;
        for k in 0..5 {
            let d = k as f64;
            let (c1, c2) = error_bound_constants(1.3, 6.0, d).unwrap();
            assert!(c1 < last && c2 < last);
            last = c1.max(c2);
        }
        assert!(error_bound_constants(1.0, 5.0, 5.0).is_err());
        assert!(error_bound_constants(0.0, 5.0, 1.0).is_err());
    }
}
