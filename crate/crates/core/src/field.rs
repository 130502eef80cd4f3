//! Rank-structured solution fields `u = sum_j p_j ⊗ q_j`, full-grid fields,
//! and the weighted error norms used to compare them.
//!
//! All L2 pairings are node-weight sums (`h` on the interval, `h'` or `h'^2`
//! on the cross section), consistent with the O(h^2) finite-difference
//! discretization. Rank-1 terms optionally cache the operator images
//! `A1 p` and `A' q`, which stand in for the discrete second derivatives
//! during the alternating sweeps so iterates are never differentiated
//! numerically.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::grid::{CrossSectionGrid, CrossSectionShape, Grid1D};
use crate::operator::DiscreteOperator;
use crate::util;

/// One rank-1 term `p ⊗ q` with optional cached operator images.
#[derive(Debug, Clone, PartialEq)]
pub struct RankOneTerm {
    p: Vec<f64>,
    q: Vec<f64>,
    ap: Option<Vec<f64>>,
    aq: Option<Vec<f64>>,
}

impl RankOneTerm {
    pub fn new(p: Vec<f64>, q: Vec<f64>) -> Self {
        RankOneTerm {
            p,
            q,
            ap: None,
            aq: None,
        }
    }

    /// Build a term and populate both caches.
    pub fn with_caches(
        p: Vec<f64>,
        q: Vec<f64>,
        a1: &DiscreteOperator,
        acs: &DiscreteOperator,
    ) -> Self {
        let ap = a1.matvec(&p);
        let aq = acs.matvec(&q);
        RankOneTerm {
            p,
            q,
            ap: Some(ap),
            aq: Some(aq),
        }
    }

    pub fn p(&self) -> &[f64] {
        &self.p
    }

    pub fn q(&self) -> &[f64] {
        &self.q
    }

    /// Cached `A1 p` (the discrete `-p''`), if populated.
    pub fn ap(&self) -> Option<&[f64]> {
        self.ap.as_deref()
    }

    /// Cached `A' q` (the discrete `-Δ' q`), if populated.
    pub fn aq(&self) -> Option<&[f64]> {
        self.aq.as_deref()
    }
}

/// Sum of rank-1 terms over a fixed pair of grids.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorField {
    grid1: Grid1D,
    gridcs: CrossSectionGrid,
    terms: Vec<RankOneTerm>,
}

impl TensorField {
    pub fn new(grid1: Grid1D, gridcs: CrossSectionGrid) -> Self {
        TensorField {
            grid1,
            gridcs,
            terms: Vec::new(),
        }
    }

    pub fn grid1(&self) -> &Grid1D {
        &self.grid1
    }

    pub fn gridcs(&self) -> &CrossSectionGrid {
        &self.gridcs
    }

    pub fn rank(&self) -> usize {
        self.terms.len()
    }

    pub fn terms(&self) -> &[RankOneTerm] {
        &self.terms
    }

    pub fn push_term(&mut self, term: RankOneTerm) {
        assert_eq!(term.p.len(), self.grid1.len(), "p length must match grid");
        assert_eq!(term.q.len(), self.gridcs.len(), "q length must match grid");
        self.terms.push(term);
    }

    /// Copy of this field keeping only the first `rank` terms.
    pub fn truncated(&self, rank: usize) -> TensorField {
        TensorField {
            grid1: self.grid1.clone(),
            gridcs: self.gridcs.clone(),
            terms: self.terms.iter().take(rank).cloned().collect(),
        }
    }

    /// Materialize the field on the full product grid.
    pub fn evaluate_full(&self) -> FullGridField {
        let n = self.grid1.len();
        let m = self.gridcs.len();
        let mut values = alloc::vec![0.0; n * m];
        for term in &self.terms {
            for i in 0..n {
                let pi = term.p[i];
                if pi == 0.0 {
                    continue;
                }
                let row = &mut values[i * m..(i + 1) * m];
                for (slot, &qk) in row.iter_mut().zip(term.q.iter()) {
                    *slot += pi * qk;
                }
            }
        }
        FullGridField {
            grid1: self.grid1.clone(),
            gridcs: self.gridcs.clone(),
            values,
        }
    }

    /// Weighted L2 norm computed from factor Gram matrices.
    pub fn l2_norm(&self) -> f64 {
        util::sqrt(tensor_inner(self, self, None).max(0.0))
    }

    /// Linearly interpolate every factor onto finer grids spanning the same
    /// domain. Caches are not carried over.
    pub fn prolong_to(&self, grid1: &Grid1D, gridcs: &CrossSectionGrid) -> TensorField {
        let mut out = TensorField::new(grid1.clone(), gridcs.clone());
        for term in &self.terms {
            let p = prolong_interval(&term.p, &self.grid1, grid1);
            let q = prolong_cross_section(&term.q, &self.gridcs, gridcs);
            out.push_term(RankOneTerm::new(p, q));
        }
        out
    }
}

/// Dense values on the product grid, row `i` holding the cross-section slice
/// at interval node `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct FullGridField {
    grid1: Grid1D,
    gridcs: CrossSectionGrid,
    values: Vec<f64>,
}

impl FullGridField {
    pub fn new(grid1: Grid1D, gridcs: CrossSectionGrid, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), grid1.len() * gridcs.len());
        FullGridField {
            grid1,
            gridcs,
            values,
        }
    }

    pub fn grid1(&self) -> &Grid1D {
        &self.grid1
    }

    pub fn gridcs(&self) -> &CrossSectionGrid {
        &self.gridcs
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn at(&self, i: usize, k: usize) -> f64 {
        self.values[i * self.gridcs.len() + k]
    }
}

/// Weighted inner product on the interval grid: `h * sum u_i v_i`.
pub fn l2_inner_1d(u: &[f64], v: &[f64], grid: &Grid1D) -> Result<f64> {
    if u.len() != grid.len() || v.len() != grid.len() {
        return Err(Error::invalid("l2_inner_1d length mismatch"));
    }
    Ok(grid.spacing() * util::dot(u, v))
}

/// Weighted inner product on the cross section (`h'` or `h'^2` per node).
pub fn l2_inner_cs(u: &[f64], v: &[f64], grid: &CrossSectionGrid) -> Result<f64> {
    if u.len() != grid.len() || v.len() != grid.len() {
        return Err(Error::invalid("l2_inner_cs length mismatch"));
    }
    Ok(grid.node_weight() * util::dot(u, v))
}

fn window_range(grid: &Grid1D, window: Option<f64>) -> Result<(usize, usize)> {
    match window {
        None => Ok((0, grid.len())),
        Some(l0) => {
            if !(l0 > 0.0 && l0 <= grid.ell() * (1.0 + 1e-12)) {
                return Err(Error::invalid("window must satisfy 0 < l0 <= ell"));
            }
            let tol = 1e-9 * grid.spacing();
            let nodes = grid.nodes();
            let start = nodes.partition_point(|&x| x < -l0 - tol);
            let end = nodes.partition_point(|&x| x <= l0 + tol);
            Ok((start, end))
        }
    }
}

fn check_same_grids_full(a: &FullGridField, b: &FullGridField) -> Result<()> {
    if a.grid1 != b.grid1 || a.gridcs != b.gridcs {
        return Err(Error::invalid("fields live on different grids"));
    }
    Ok(())
}

/// Relative weighted L2 error `||approx - ref|| / ||ref||`, optionally
/// restricted to interval nodes with `|x1| <= l0`.
pub fn rel_l2_error(
    approx: &FullGridField,
    reference: &FullGridField,
    window: Option<f64>,
) -> Result<f64> {
    check_same_grids_full(approx, reference)?;
    let (start, end) = window_range(&approx.grid1, window)?;
    let m = approx.gridcs.len();
    let mut num = 0.0;
    let mut den = 0.0;
    for i in start..end {
        let row_a = &approx.values[i * m..(i + 1) * m];
        let row_r = &reference.values[i * m..(i + 1) * m];
        for k in 0..m {
            let d = row_a[k] - row_r[k];
            num += d * d;
            den += row_r[k] * row_r[k];
        }
    }
    if den == 0.0 {
        return Err(Error::DegenerateReference);
    }
    Ok(util::sqrt(num / den))
}

/// Enumerate cross-section difference edges as (left, right) node indices,
/// `None` meaning the zero Dirichlet boundary.
fn cs_edges(grid: &CrossSectionGrid) -> Vec<(Option<usize>, Option<usize>)> {
    let mut edges = Vec::new();
    match grid.shape() {
        CrossSectionShape::Interval => {
            let n = grid.len();
            edges.push((None, Some(0)));
            for k in 0..n - 1 {
                edges.push((Some(k), Some(k + 1)));
            }
            edges.push((Some(n - 1), None));
        }
        CrossSectionShape::LShape => {
            for (idx, &(i2, i3)) in grid.multi_indices().iter().enumerate() {
                let (i2, i3) = (i2 as i64, i3 as i64);
                for (d2, d3) in [(1i64, 0i64), (0, 1)] {
                    edges.push((Some(idx), grid.index_at(i2 + d2, i3 + d3)));
                    if grid.index_at(i2 - d2, i3 - d3).is_none() {
                        edges.push((None, Some(idx)));
                    }
                }
            }
        }
    }
    edges
}

fn edge_value(values: &[f64], e: Option<usize>) -> f64 {
    e.map_or(0.0, |k| values[k])
}

/// Weighted H1-seminorm of `approx - ref` by forward differences, including
/// one-sided differences to the zero boundary in every direction.
pub fn h1_seminorm_error(approx: &FullGridField, reference: &FullGridField) -> Result<f64> {
    h1_seminorm_error_windowed(approx, reference, None)
}

/// Same seminorm restricted to the subdomain `|x1| <= l0`.
pub fn h1_seminorm_error_windowed(
    approx: &FullGridField,
    reference: &FullGridField,
    window: Option<f64>,
) -> Result<f64> {
    check_same_grids_full(approx, reference)?;
    let (start, end) = window_range(&approx.grid1, window)?;
    if start >= end {
        return Ok(0.0);
    }
    let g1 = &approx.grid1;
    let gcs = &approx.gridcs;
    let n = g1.len();
    let m = gcs.len();
    let h = g1.spacing();
    let hp = gcs.spacing();
    let diff = |i: usize, k: usize| approx.values[i * m + k] - reference.values[i * m + k];
    let mut acc = 0.0;
    // Interval-direction edges. The boundary one-sided differences are only
    // included when the window reaches the domain ends.
    for k in 0..m {
        if start == 0 {
            let d = diff(0, k) / h;
            acc += d * d;
        }
        for i in (start + 1)..end {
            let d = (diff(i, k) - diff(i - 1, k)) / h;
            acc += d * d;
        }
        if end == n {
            let d = diff(n - 1, k) / h;
            acc += d * d;
        }
    }
    // Cross-section edges within each slice.
    let edges = cs_edges(gcs);
    for i in start..end {
        let row_a = &approx.values[i * m..(i + 1) * m];
        let row_r = &reference.values[i * m..(i + 1) * m];
        for &(ea, eb) in &edges {
            let da = edge_value(row_a, ea) - edge_value(row_r, ea);
            let db = edge_value(row_a, eb) - edge_value(row_r, eb);
            let d = (db - da) / hp;
            acc += d * d;
        }
    }
    Ok(util::sqrt(acc * h * gcs.node_weight()))
}

fn check_same_grids_tensor(a: &TensorField, b: &TensorField) -> Result<()> {
    if a.grid1 != b.grid1 || a.gridcs != b.gridcs {
        return Err(Error::invalid("tensor fields live on different grids"));
    }
    Ok(())
}

/// Weighted L2 inner product of two tensor fields via factor Gram sums,
/// optionally windowed in the interval direction. Never materializes the
/// full grid.
fn tensor_inner(a: &TensorField, b: &TensorField, window: Option<f64>) -> f64 {
    let (start, end) = window_range(&a.grid1, window).expect("window validated by caller");
    let h = a.grid1.spacing();
    let w = a.gridcs.node_weight();
    let mut acc = 0.0;
    for ta in &a.terms {
        for tb in &b.terms {
            let mut g1 = 0.0;
            for i in start..end {
                g1 += ta.p[i] * tb.p[i];
            }
            let g2 = util::dot(&ta.q, &tb.q);
            acc += (h * g1) * (w * g2);
        }
    }
    acc
}

/// Relative weighted L2 error between tensor fields, computed in factored
/// form. Accurate down to roughly the square root of machine precision
/// relative to the field norms.
pub fn rel_l2_error_tensor(
    approx: &TensorField,
    reference: &TensorField,
    window: Option<f64>,
) -> Result<f64> {
    check_same_grids_tensor(approx, reference)?;
    if let Some(l0) = window {
        window_range(&approx.grid1, Some(l0))?;
    }
    let aa = tensor_inner(approx, approx, window);
    let ab = tensor_inner(approx, reference, window);
    let bb = tensor_inner(reference, reference, window);
    if bb <= 0.0 {
        return Err(Error::DegenerateReference);
    }
    let num = (aa - 2.0 * ab + bb).max(0.0);
    Ok(util::sqrt(num / bb))
}

/// Energy inner product of tensor fields through the assembled operators:
/// `(A1 p, p') (q, q') + (p, p') (A' q, q')` summed over term pairs.
/// Algebraically identical to the forward-difference seminorm pairing.
fn tensor_energy_inner(
    a: &TensorField,
    b: &TensorField,
    a1: &DiscreteOperator,
    acs: &DiscreteOperator,
) -> f64 {
    let h = a.grid1.spacing();
    let w = a.gridcs.node_weight();
    let mut acc = 0.0;
    let b_ap: Vec<Vec<f64>> = b
        .terms
        .iter()
        .map(|t| t.ap.clone().unwrap_or_else(|| a1.matvec(&t.p)))
        .collect();
    let b_aq: Vec<Vec<f64>> = b
        .terms
        .iter()
        .map(|t| t.aq.clone().unwrap_or_else(|| acs.matvec(&t.q)))
        .collect();
    for ta in &a.terms {
        for (j, tb) in b.terms.iter().enumerate() {
            let stiff1 = h * util::dot(&ta.p, &b_ap[j]);
            let mass1 = h * util::dot(&ta.p, &tb.p);
            let stiff2 = w * util::dot(&ta.q, &b_aq[j]);
            let mass2 = w * util::dot(&ta.q, &tb.q);
            acc += stiff1 * mass2 + mass1 * stiff2;
        }
    }
    acc
}

/// Energy-norm distance `||∇(approx - ref)||` of tensor fields in factored
/// form, using the grid operators.
pub fn energy_error_tensor(
    approx: &TensorField,
    reference: &TensorField,
    a1: &DiscreteOperator,
    acs: &DiscreteOperator,
) -> Result<f64> {
    check_same_grids_tensor(approx, reference)?;
    let aa = tensor_energy_inner(approx, approx, a1, acs);
    let ab = tensor_energy_inner(approx, reference, a1, acs);
    let bb = tensor_energy_inner(reference, reference, a1, acs);
    Ok(util::sqrt((aa - 2.0 * ab + bb).max(0.0)))
}

/// Piecewise-linear interpolation of an interval-grid function onto a finer
/// grid of the same half-length, with zero boundary values.
pub fn prolong_interval(values: &[f64], from: &Grid1D, to: &Grid1D) -> Vec<f64> {
    assert_eq!(values.len(), from.len());
    let hc = from.spacing();
    let nc = from.len();
    let at = |j: i64| -> f64 {
        if j >= 1 && j <= nc as i64 {
            values[(j - 1) as usize]
        } else {
            0.0
        }
    };
    to.nodes()
        .iter()
        .map(|&x| {
            let t = (x + from.ell()) / hc;
            let j = util::floor(t + 1e-12) as i64;
            let frac = t - j as f64;
            at(j) * (1.0 - frac) + at(j + 1) * frac
        })
        .collect()
}

/// Interpolation of a cross-section function onto a finer cross-section grid
/// of the same shape (linear on the interval, bilinear on the L-shape).
pub fn prolong_cross_section(
    values: &[f64],
    from: &CrossSectionGrid,
    to: &CrossSectionGrid,
) -> Vec<f64> {
    assert_eq!(values.len(), from.len());
    assert_eq!(from.shape(), to.shape());
    let hc = from.spacing();
    match from.shape() {
        CrossSectionShape::Interval => {
            let nc = from.len();
            let at = |j: i64| -> f64 {
                if j >= 1 && j <= nc as i64 {
                    values[(j - 1) as usize]
                } else {
                    0.0
                }
            };
            to.coords()
                .iter()
                .map(|c| {
                    let t = (c[0] + 1.0) / hc;
                    let j = util::floor(t + 1e-12) as i64;
                    let frac = t - j as f64;
                    at(j) * (1.0 - frac) + at(j + 1) * frac
                })
                .collect()
        }
        CrossSectionShape::LShape => {
            let at = |i2: i64, i3: i64| -> f64 {
                from.index_at(i2, i3).map_or(0.0, |k| values[k])
            };
            to.coords()
                .iter()
                .map(|c| {
                    let t2 = c[0] / hc;
                    let t3 = c[1] / hc;
                    let i2 = util::floor(t2 + 1e-12) as i64;
                    let i3 = util::floor(t3 + 1e-12) as i64;
                    let f2 = t2 - i2 as f64;
                    let f3 = t3 - i3 as f64;
                    at(i2, i3) * (1.0 - f2) * (1.0 - f3)
                        + at(i2 + 1, i3) * f2 * (1.0 - f3)
                        + at(i2, i3 + 1) * (1.0 - f2) * f3
                        + at(i2 + 1, i3 + 1) * f2 * f3
                })
                .collect()
        }
    }
}
