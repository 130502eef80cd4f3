//! Greedy rank-1 enrichment by alternating directional solves.
//!
//! Term 0 is the one-term approximation of `method1`. Each further term is
//! produced by an inner iteration that alternates the two strong-form
//! updates: fix the interval factor and solve a weighted Helmholtz problem
//! on the cross section, then fix the new cross-section factor and solve on
//! the interval. All couplings with earlier terms go through the cached
//! operator images `A1 p_j`, `A' q_j`, so no iterate is ever differentiated
//! numerically and the residual is never materialized on the product grid.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::field::{rel_l2_error_tensor, RankOneTerm, TensorField};
use crate::grid::{CrossSectionGrid, Grid1D};
use crate::method1::method1_with_reduced;
use crate::operator::{
    assemble_laplacian_1d, assemble_laplacian_cs, DiscreteOperator, OperatorKind,
};
use crate::solve::{solve_shifted_1d, thomas_solve, BandCholesky};
use crate::util;

/// A factor vector together with its operator image `A v`.
#[derive(Debug, Clone, PartialEq)]
pub struct CachedFactor {
    pub values: Vec<f64>,
    pub image: Vec<f64>,
}

impl CachedFactor {
    pub fn new(values: Vec<f64>, op: &DiscreteOperator) -> Self {
        let image = op.matvec(&values);
        CachedFactor { values, image }
    }

    fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }
}

/// Options of the alternating solver.
#[derive(Debug, Clone, PartialEq)]
pub struct AlsOptions {
    /// Total number of rank-1 terms (term 0 included).
    pub max_rank: usize,
    /// Cap on inner sweeps per term.
    pub inner_max: usize,
    /// Relative change of `p ⊗ q` in weighted L2 below which the inner
    /// iteration stops.
    pub inner_tol: f64,
    /// Optional outer stop: relative weighted-L2 size of the appended term.
    pub outer_tol: Option<f64>,
    /// Inner-loop initialization strategy.
    pub init: InnerInit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InnerInit {
    /// Start the sweep from the previous term's interval factor (term 0's
    /// profile for the first enrichment step).
    PreviousTerm,
    /// Always start from term 0's longitudinal profile.
    Method1Profile,
}

impl Default for AlsOptions {
    fn default() -> Self {
        AlsOptions {
            max_rank: 1,
            inner_max: 20,
            inner_tol: 1e-8,
            outer_tol: None,
            init: InnerInit::PreviousTerm,
        }
    }
}

/// Why the outer iteration stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlsStatus {
    /// Reached `max_rank`.
    Completed,
    /// An inner iterate collapsed to zero at this rank; earlier terms are
    /// kept and returned.
    DegenerateIterate { rank: usize },
    /// The appended term fell below `outer_tol` at this rank.
    OuterTolReached { rank: usize },
}

/// Per-term record of the outer iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct AlsStepRecord {
    /// Inner sweeps used for this term (0 for term 0).
    pub inner_iterations: usize,
    /// Coefficient snapshot of the converged pair.
    pub p0: f64,
    pub p1: f64,
    pub q0: f64,
    pub q1: f64,
    /// Relative L2 error of the accumulated field against the supplied
    /// reference, when one was given.
    pub rel_l2_error: Option<f64>,
    /// Energy error against the supplied reference, when one was given.
    pub energy_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlsHistory {
    pub steps: Vec<AlsStepRecord>,
    pub status: AlsStatus,
}

fn require_caches<'t>(field: &'t TensorField) -> Result<Vec<(&'t [f64], &'t [f64], &'t [f64], &'t [f64])>> {
    field
        .terms()
        .iter()
        .map(|t| match (t.ap(), t.aq()) {
            (Some(ap), Some(aq)) => Ok((t.p(), ap, t.q(), aq)),
            _ => Err(Error::invalid("alternating updates need cached operator images")),
        })
        .collect()
}

/// Cross-section update: solve
/// `(p0 A' + p1 I) q = ptilde f + sum_j (ptilde2_j q_j - ptilde0_j A' q_j)`
/// with `p0 = ||p||^2`, `p1 = (A1 p, p)`, `ptilde = h * sum_i p_i`,
/// `ptilde2_j = (-A1 p_j, p)`, `ptilde0_j = (p_j, p)` (interval-weighted
/// inner products throughout).
pub fn inner_update_q(
    field: &TensorField,
    p_cur: &CachedFactor,
    f: &[f64],
    acs: &DiscreteOperator,
) -> Result<CachedFactor> {
    let h = field.grid1().spacing();
    if p_cur.is_zero() {
        return Err(Error::DegenerateIterate("interval iterate vanished".into()));
    }
    if f.len() != field.gridcs().len() || p_cur.values.len() != field.grid1().len() {
        return Err(Error::invalid("inner_update_q dimension mismatch"));
    }
    let terms = require_caches(field)?;
    let p = &p_cur.values;
    let p0 = h * util::dot(p, p);
    let p1 = h * util::dot(&p_cur.image, p);
    let ptilde = h * p.iter().sum::<f64>();
    let mut rhs: Vec<f64> = f.iter().map(|&v| ptilde * v).collect();
    for (pj, apj, qj, aqj) in &terms {
        let ptilde2 = -h * util::dot(apj, p);
        let ptilde0 = h * util::dot(pj, p);
        for i in 0..rhs.len() {
            rhs[i] += ptilde2 * qj[i] - ptilde0 * aqj[i];
        }
    }
    let q = match acs.kind() {
        OperatorKind::Tridiagonal { diag, off } => {
            let sdiag: Vec<f64> = diag.iter().map(|&d| p0 * d + p1).collect();
            let soff: Vec<f64> = off.iter().map(|&e| p0 * e).collect();
            thomas_solve(&sdiag, &soff, &rhs)?
        }
        OperatorKind::SparseRows { .. } => {
            BandCholesky::factor_scaled(acs, p0, p1)?.solve(&rhs)
        }
    };
    Ok(CachedFactor::new(q, acs))
}

/// Interval update: solve
/// `(q0 A1 + q1 I) p = qtilde 1 + sum_j (qtilde2_j p_j - qtilde0_j A1 p_j)`
/// with `q0 = ||q||^2`, `q1 = (A' q, q)`, `qtilde = (f, q)`,
/// `qtilde2_j = (-A' q_j, q)`, `qtilde0_j = (q_j, q)` (cross-section
/// weighted inner products throughout).
pub fn inner_update_p(
    field: &TensorField,
    q_cur: &CachedFactor,
    f: &[f64],
    a1: &DiscreteOperator,
) -> Result<CachedFactor> {
    let w = field.gridcs().node_weight();
    if q_cur.is_zero() {
        return Err(Error::DegenerateIterate("cross-section iterate vanished".into()));
    }
    if f.len() != field.gridcs().len() || q_cur.values.len() != field.gridcs().len() {
        return Err(Error::invalid("inner_update_p dimension mismatch"));
    }
    let terms = require_caches(field)?;
    let q = &q_cur.values;
    let q0 = w * util::dot(q, q);
    let q1 = w * util::dot(&q_cur.image, q);
    let qtilde = w * util::dot(f, q);
    let n = field.grid1().len();
    let mut rhs = alloc::vec![qtilde; n];
    for (pj, apj, qj, aqj) in &terms {
        let qtilde2 = -w * util::dot(aqj, q);
        let qtilde0 = w * util::dot(qj, q);
        for i in 0..n {
            rhs[i] += qtilde2 * pj[i] - qtilde0 * apj[i];
        }
    }
    let p = solve_shifted_1d(a1, q0, q1, &rhs)?;
    Ok(CachedFactor::new(p, a1))
}

/// Relative weighted-L2 change between consecutive sweep pairs, computed in
/// the cancellation-free split `p1⊗q1 - p0⊗q0 = p0⊗(q1-q0) + (p1-p0)⊗q1`.
fn pair_change(
    h: f64,
    w: f64,
    p_new: &[f64],
    q_new: &[f64],
    p_old: &[f64],
    q_old: &[f64],
) -> f64 {
    let dp: Vec<f64> = p_new.iter().zip(p_old).map(|(a, b)| a - b).collect();
    let dq: Vec<f64> = q_new.iter().zip(q_old).map(|(a, b)| a - b).collect();
    let n_p0 = util::dot(p_old, p_old);
    let n_q1 = util::dot(q_new, q_new);
    let n_dp = util::dot(&dp, &dp);
    let n_dq = util::dot(&dq, &dq);
    let cross = util::dot(p_old, &dp) * util::dot(&dq, q_new);
    let delta_sq = (h * w) * (n_p0 * n_dq + 2.0 * cross + n_dp * n_q1);
    let norm_sq = (h * w) * (util::dot(p_new, p_new) * n_q1);
    if norm_sq <= 0.0 {
        return f64::INFINITY;
    }
    util::sqrt(delta_sq.max(0.0) / norm_sq)
}

/// Greedy enrichment: term 0 is the one-term approximation, every further
/// term is the converged limit of the alternating inner iteration applied
/// to the current residual. A supplied same-grid reference makes the
/// history carry per-rank error records.
pub fn als_solve(
    f: &[f64],
    grid1: &Grid1D,
    gridcs: &CrossSectionGrid,
    opts: &AlsOptions,
    reference: Option<&TensorField>,
) -> Result<(TensorField, AlsHistory)> {
    if opts.max_rank < 1 || !(opts.inner_tol > 0.0) || opts.inner_max < 1 {
        return Err(Error::invalid("invalid alternating-solver options"));
    }
    if let Some(tol) = opts.outer_tol {
        if !(tol > 0.0) {
            return Err(Error::invalid("outer tolerance must be positive"));
        }
    }
    let a1 = assemble_laplacian_1d(grid1);
    let acs = assemble_laplacian_cs(gridcs);
    let h = grid1.spacing();
    let w = gridcs.node_weight();
    let (mut field, _reduced) = method1_with_reduced(f, grid1, gridcs)?;
    let mut history = AlsHistory {
        steps: Vec::new(),
        status: AlsStatus::Completed,
    };
    let record = |field: &TensorField, inner: usize, history: &mut AlsHistory| {
        let t = field.terms().last().expect("at least one term");
        let p = t.p();
        let q = t.q();
        let (ap, aq) = (t.ap().unwrap(), t.aq().unwrap());
        let (rel, energy) = match reference {
            Some(r) => (
                rel_l2_error_tensor(field, r, None).ok(),
                crate::field::energy_error_tensor(field, r, &a1, &acs).ok(),
            ),
            None => (None, None),
        };
        history.steps.push(AlsStepRecord {
            inner_iterations: inner,
            p0: h * util::dot(p, p),
            p1: h * util::dot(ap, p),
            q0: w * util::dot(q, q),
            q1: w * util::dot(aq, q),
            rel_l2_error: rel,
            energy_error: energy,
        });
    };
    record(&field, 0, &mut history);
    let field_norm = |field: &TensorField| -> f64 { field.l2_norm() };
    for rank in 1..opts.max_rank {
        // Inner-loop start: previous term's interval factor.
        let init_term = match opts.init {
            InnerInit::PreviousTerm => field.terms().last().unwrap(),
            InnerInit::Method1Profile => &field.terms()[0],
        };
        let mut p_cur = CachedFactor {
            values: init_term.p().to_vec(),
            image: init_term.ap().unwrap().to_vec(),
        };
        let mut q_cur: Option<CachedFactor> = None;
        let mut sweeps = 0;
        let converged = loop {
            if sweeps == opts.inner_max {
                break true;
            }
            sweeps += 1;
            let q_new = match inner_update_q(&field, &p_cur, f, &acs) {
                Ok(q) => q,
                Err(Error::DegenerateIterate(_)) => break false,
                Err(e) => return Err(e),
            };
            if q_new.is_zero() {
                break false;
            }
            let p_new = match inner_update_p(&field, &q_new, f, &a1) {
                Ok(p) => p,
                Err(Error::DegenerateIterate(_)) => break false,
                Err(e) => return Err(e),
            };
            let change = match &q_cur {
                Some(q_prev) => pair_change(
                    h,
                    w,
                    &p_new.values,
                    &q_new.values,
                    &p_cur.values,
                    &q_prev.values,
                ),
                None => f64::INFINITY,
            };
            p_cur = p_new;
            q_cur = Some(q_new);
            if change < opts.inner_tol {
                break true;
            }
        };
        let q_fin = match (converged, q_cur) {
            (true, Some(q)) if !q.is_zero() && !p_cur.is_zero() => q,
            _ => {
                history.status = AlsStatus::DegenerateIterate { rank };
                break;
            }
        };
        let term_norm = util::sqrt(
            (h * util::dot(&p_cur.values, &p_cur.values))
                * (w * util::dot(&q_fin.values, &q_fin.values)),
        );
        field.push_term(RankOneTerm::with_caches(
            p_cur.values.clone(),
            q_fin.values.clone(),
            &a1,
            &acs,
        ));
        record(&field, sweeps, &mut history);
        if let Some(tol) = opts.outer_tol {
            if term_norm < tol * field_norm(&field) {
                history.status = AlsStatus::OuterTolReached { rank };
                break;
            }
        }
    }
    Ok((field, history))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::l2_inner_cs;
    use crate::grid::{build_cross_section, build_interval_grid, CrossSectionShape};
    use crate::method1::{psi_profile, solve_reduced};

    fn setup(
        ell: f64,
        n: usize,
        k: usize,
    ) -> (Grid1D, CrossSectionGrid, DiscreteOperator, DiscreteOperator) {
        let g1 = build_interval_grid(ell, n).unwrap();
        let gcs = build_cross_section(CrossSectionShape::Interval, 2.0 / k as f64).unwrap();
        let a1 = assemble_laplacian_1d(&g1);
        let acs = assemble_laplacian_cs(&gcs);
        (g1, gcs, a1, acs)
    }

    #[test]
    fn update_q_reduces_to_weighted_helmholtz_without_history() {
        let (g1, gcs, a1, acs) = setup(5.0, 120, 32);
        let f = vec![1.0; gcs.len()];
        let red = solve_reduced(&f, &gcs).unwrap();
        let psi = psi_profile(red.lambda_inf, &g1).unwrap();
        let p = CachedFactor::new(psi, &a1);
        let field = TensorField::new(g1.clone(), gcs.clone());
        let q = inner_update_q(&field, &p, &f, &acs).unwrap();
        // direct check: (p0 A' + p1 I) q = ptilde * f
        let h = g1.spacing();
        let p0 = h * util::dot(&p.values, &p.values);
        let p1 = h * util::dot(&p.image, &p.values);
        let ptilde = h * p.values.iter().sum::<f64>();
        let aq = acs.matvec(&q.values);
        for i in 0..q.values.len() {
            let lhs = p0 * aq[i] + p1 * q.values[i];
            assert!((lhs - ptilde * f[i]).abs() < 1e-9 * ptilde.abs());
        }
    }

    #[test]
    fn update_q_recovers_manufactured_factor() {
        // Build f so that the empty-history strong form has solution q*.
        let (g1, gcs, a1, acs) = setup(3.0, 60, 32);
        let p_vals = psi_profile(1.3, &g1).unwrap();
        let p = CachedFactor::new(p_vals, &a1);
        let h = g1.spacing();
        let p0 = h * util::dot(&p.values, &p.values);
        let p1 = h * util::dot(&p.image, &p.values);
        let ptilde = h * p.values.iter().sum::<f64>();
        let q_star: Vec<f64> = gcs.coords().iter().map(|c| (1.0 - c[0] * c[0]) * (c[0] + 2.0)).collect();
        let aq = acs.matvec(&q_star);
        let f: Vec<f64> = (0..gcs.len())
            .map(|i| (p0 * aq[i] + p1 * q_star[i]) / ptilde)
            .collect();
        let field = TensorField::new(g1.clone(), gcs.clone());
        let q = inner_update_q(&field, &p, &f, &acs).unwrap();
        let scale: f64 = q_star.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (a, b) in q.values.iter().zip(q_star.iter()) {
            assert!((a - b).abs() < 1e-10 * scale);
        }
    }

    #[test]
    fn update_q_is_inverse_homogeneous_in_p() {
        let (g1, gcs, a1, acs) = setup(2.0, 40, 16);
        let f: Vec<f64> = gcs.coords().iter().map(|c| libm::tanh(4.0 * c[0] + 1.0)).collect();
        let p_vals = psi_profile(0.9, &g1).unwrap();
        let field = TensorField::new(g1.clone(), gcs.clone());
        let q1 = inner_update_q(&field, &CachedFactor::new(p_vals.clone(), &a1), &f, &acs).unwrap();
        let c = 3.5;
        let scaled: Vec<f64> = p_vals.iter().map(|v| c * v).collect();
        let q2 = inner_update_q(&field, &CachedFactor::new(scaled, &a1), &f, &acs).unwrap();
        for (a, b) in q2.values.iter().zip(q1.values.iter()) {
            assert!((a - b / c).abs() < 1e-12 * b.abs().max(1e-12));
        }
    }

    #[test]
    fn update_p_reproduces_method1_profile() {
        // With q = u_inf and empty history the interval update is the
        // discrete best-approximation problem of the one-term method.
        let (g1, gcs, a1, acs) = setup(5.0, 400, 64);
        let f = vec![1.0; gcs.len()];
        let red = solve_reduced(&f, &gcs).unwrap();
        let q = CachedFactor::new(red.u_inf.clone(), &acs);
        let field = TensorField::new(g1.clone(), gcs.clone());
        let p = inner_update_p(&field, &q, &f, &a1).unwrap();
        let psi = psi_profile(red.lambda_inf, &g1).unwrap();
        let h = g1.spacing();
        for (a, b) in p.values.iter().zip(psi.iter()) {
            assert!((a - b).abs() < 5.0 * h * h, "{a} vs {b}");
        }
        // symmetric data: returned p is even
        let n = p.values.len();
        for i in 0..n {
            assert!((p.values[i] - p.values[n - 1 - i]).abs() < 1e-12);
        }
    }

    #[test]
    fn update_p_zero_rhs_gives_zero() {
        let (g1, gcs, _a1, acs) = setup(2.0, 30, 32);
        // f orthogonal to q in the weighted inner product
        let q_vals: Vec<f64> = gcs.coords().iter().map(|c| 1.0 - c[0] * c[0]).collect();
        let f: Vec<f64> = gcs.coords().iter().map(|c| c[0]).collect(); // odd vs even
        assert!(l2_inner_cs(&f, &q_vals, &gcs).unwrap().abs() < 1e-14);
        let field = TensorField::new(g1.clone(), gcs.clone());
        let a1 = assemble_laplacian_1d(&g1);
        let p = inner_update_p(&field, &CachedFactor::new(q_vals, &acs), &f, &a1).unwrap();
        for v in &p.values {
            assert!(v.abs() < 1e-14);
        }
    }

    #[test]
    fn degenerate_iterate_is_an_error() {
        let (g1, gcs, a1, acs) = setup(1.0, 10, 8);
        let field = TensorField::new(g1.clone(), gcs.clone());
        let zero_p = CachedFactor {
            values: vec![0.0; g1.len()],
            image: vec![0.0; g1.len()],
        };
        let f = vec![1.0; gcs.len()];
        assert!(matches!(
            inner_update_q(&field, &zero_p, &f, &acs),
            Err(Error::DegenerateIterate(_))
        ));
        let zero_q = CachedFactor {
            values: vec![0.0; gcs.len()],
            image: vec![0.0; gcs.len()],
        };
        assert!(matches!(
            inner_update_p(&field, &zero_q, &f, &a1),
            Err(Error::DegenerateIterate(_))
        ));
    }

    #[test]
    fn rank_one_solve_equals_method1() {
        let (g1, gcs, _, _) = setup(5.0, 100, 32);
        let f: Vec<f64> = gcs.coords().iter().map(|c| libm::tanh(4.0 * c[0] + 1.0)).collect();
        let opts = AlsOptions {
            max_rank: 1,
            ..AlsOptions::default()
        };
        let (field, history) = als_solve(&f, &g1, &gcs, &opts, None).unwrap();
        let m1 = crate::method1::method1_solution(&f, &g1, &gcs).unwrap();
        assert_eq!(history.steps.len(), 1);
        assert_eq!(history.status, AlsStatus::Completed);
        assert_eq!(field.rank(), 1);
        for (a, b) in field.terms()[0].p().iter().zip(m1.terms()[0].p()) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn converged_pair_is_stationary() {
        let (g1, gcs, a1, acs) = setup(5.0, 150, 48);
        let f: Vec<f64> = gcs.coords().iter().map(|c| libm::tanh(4.0 * c[0] + 1.0)).collect();
        let opts = AlsOptions {
            max_rank: 3,
            inner_tol: 1e-12,
            inner_max: 60,
            ..AlsOptions::default()
        };
        let (field, history) = als_solve(&f, &g1, &gcs, &opts, None).unwrap();
        assert_eq!(history.status, AlsStatus::Completed);
        // Re-apply both updates to the last converged pair: fixed point up
        // to 1e-6 relative.
        let rank = field.rank();
        let prior = field.truncated(rank - 1);
        let last = &field.terms()[rank - 1];
        let p = CachedFactor {
            values: last.p().to_vec(),
            image: last.ap().unwrap().to_vec(),
        };
        let q_re = inner_update_q(&prior, &p, &f, &acs).unwrap();
        let q_scale: f64 = last.q().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (a, b) in q_re.values.iter().zip(last.q().iter()) {
            assert!((a - b).abs() <= 1e-6 * q_scale, "{a} vs {b}");
        }
        let p_re = inner_update_p(&prior, &q_re, &f, &a1).unwrap();
        let p_scale: f64 = last.p().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (a, b) in p_re.values.iter().zip(last.p().iter()) {
            assert!((a - b).abs() <= 1e-6 * p_scale);
        }
    }

    #[test]
    fn history_errors_derease_against_self_reference() {
        // Use a richer als run as reference for a shorter one.
        let (g1, gcs, _, _) = setup(5.0, 120, 32);
        let f: Vec<f64> = gcs.coords().iter().map(|c| libm::tanh(4.0 * c[0] + 1.0)).collect();
        let opts_ref = AlsOptions {
            max_rank: 8,
            ..AlsOptions::default()
        };
        let (reference, _) = als_solve(&f, &g1, &gcs, &opts_ref, None).unwrap();
        let opts = AlsOptions {
            max_rank: 4,
            ..AlsOptions::default()
        };
        let (_, history) = als_solve(&f, &g1, &gcs, &opts, Some(&reference)).unwrap();
        let errs: Vec<f64> = history.steps.iter().map(|s| s.energy_error.unwrap()).collect();
        for w in errs.windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "energy errors must not increase: {errs:?}");
        }
    }
}
