//! Direct solvers for the structured systems that appear in the methods:
//! symmetric tridiagonal elimination, banded Cholesky for the cross-section
//! operators, and an unpivoted complex banded LU for contour-shifted systems.
//!
//! The complex matrices here are `zeta I - c0 A` with `A` symmetric positive
//! definite and `zeta` off the positive real axis, so either the Hermitian or
//! the skew-Hermitian part is definite and elimination without pivoting is
//! stable. Every shifted solve is verified against its residual contract.

use alloc::vec::Vec;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::operator::{DiscreteOperator, OperatorKind};
use crate::util;

/// Solve a symmetric tridiagonal system by elimination. `off` couples node i
/// to i+1.
pub(crate) fn thomas_solve(diag: &[f64], off: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    assert_eq!(off.len() + 1, n.max(1));
    assert_eq!(rhs.len(), n);
    let mut c = alloc::vec![0.0; n];
    let mut d = alloc::vec![0.0; n];
    let mut piv = diag[0];
    if piv == 0.0 {
        return Err(Error::SolverFailure("tridiagonal pivot 0 vanished".into()));
    }
    if n > 1 {
        c[0] = off[0] / piv;
    }
    d[0] = rhs[0] / piv;
    for i in 1..n {
        piv = diag[i] - off[i - 1] * c[i - 1];
        if piv == 0.0 {
            return Err(Error::SolverFailure(alloc::format!(
                "tridiagonal pivot {i} vanished"
            )));
        }
        if i + 1 < n {
            c[i] = off[i] / piv;
        }
        d[i] = (rhs[i] - off[i - 1] * d[i - 1]) / piv;
    }
    for i in (0..n - 1).rev() {
        let next = d[i + 1];
        d[i] -= c[i] * next;
    }
    Ok(d)
}

/// Banded Cholesky factorization of `c0 A + c1 I` for symmetric positive
/// definite banded `A`.
pub struct BandCholesky {
    n: usize,
    bw: usize,
    /// `data[i * (bw+1) + d]` stores `L[i][i-d]`, `d = 0..=bw`.
    data: Vec<f64>,
}

impl BandCholesky {
    pub fn factor(op: &DiscreteOperator, shift: f64) -> Result<Self> {
        Self::factor_scaled(op, 1.0, shift)
    }

    /// Factor `c0 A + c1 I`.
    pub fn factor_scaled(op: &DiscreteOperator, c0: f64, c1: f64) -> Result<Self> {
        let n = op.dim();
        let bw = op.bandwidth();
        let w = bw + 1;
        let mut data = alloc::vec![0.0; n * w];
        // Load the band of c0 A + c1 I.
        match op.kind() {
            OperatorKind::Tridiagonal { diag, off } => {
                for i in 0..n {
                    data[i * w] = c0 * diag[i] + c1;
                    if i > 0 && bw >= 1 {
                        data[i * w + 1] = c0 * off[i - 1];
                    }
                }
            }
            OperatorKind::SparseRows {
                row_ptr,
                col_idx,
                values,
            } => {
                for i in 0..n {
                    data[i * w] = c1;
                    for p in row_ptr[i]..row_ptr[i + 1] {
                        let j = col_idx[p];
                        if j <= i {
                            data[i * w + (i - j)] += c0 * values[p];
                        }
                    }
                }
            }
        }
        // In-place banded Cholesky.
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            for j in lo..=i {
                let mut sum = data[i * w + (i - j)];
                let kk = lo.max(j.saturating_sub(bw));
                for k in kk..j {
                    sum -= data[i * w + (i - k)] * data[j * w + (j - k)];
                }
                if j < i {
                    data[i * w + (i - j)] = sum / data[j * w];
                } else {
                    if !(sum > 0.0) {
                        return Err(Error::SolverFailure(alloc::format!(
                            "banded Cholesky pivot {i} not positive (matrix not SPD?)"
                        )));
                    }
                    data[i * w] = util::sqrt(sum);
                }
            }
        }
        Ok(BandCholesky { n, bw, data })
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        assert_eq!(rhs.len(), self.n);
        let (n, bw, w) = (self.n, self.bw, self.bw + 1);
        let mut x = rhs.to_vec();
        // L y = rhs
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            let mut s = x[i];
            for j in lo..i {
                s -= self.data[i * w + (i - j)] * x[j];
            }
            x[i] = s / self.data[i * w];
        }
        // L^T x = y
        for i in (0..n).rev() {
            let hi = (i + bw).min(n - 1);
            let mut s = x[i];
            for j in (i + 1)..=hi {
                s -= self.data[j * w + (j - i)] * x[j];
            }
            x[i] = s / self.data[i * w];
        }
        x
    }
}

/// Unpivoted banded LU of the complex matrix `c1 I - c0 A` for symmetric
/// banded `A`.
pub(crate) struct ComplexBandLu {
    n: usize,
    bw: usize,
    /// Row-major band: `data[i * (2 bw + 1) + (j - i + bw)]`.
    data: Vec<Complex64>,
}

impl ComplexBandLu {
    pub(crate) fn factor(op: &DiscreteOperator, c0: f64, c1: Complex64) -> Result<Self> {
        let n = op.dim();
        let bw = op.bandwidth();
        let w = 2 * bw + 1;
        let mut data = alloc::vec![Complex64::new(0.0, 0.0); n * w];
        for i in 0..n {
            data[i * w + bw] = c1;
        }
        match op.kind() {
            OperatorKind::Tridiagonal { diag, off } => {
                for i in 0..n {
                    data[i * w + bw] -= Complex64::new(c0 * diag[i], 0.0);
                    if i > 0 {
                        data[i * w + bw - 1] = Complex64::new(-c0 * off[i - 1], 0.0);
                    }
                    if i + 1 < n {
                        data[i * w + bw + 1] = Complex64::new(-c0 * off[i], 0.0);
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
                        let j = col_idx[p];
                        let slot = j + bw - i;
                        data[i * w + slot] -= Complex64::new(c0 * values[p], 0.0);
                    }
                }
            }
        }
        let scale = op.max_abs_entry() * c0.max(1.0) + c1.norm();
        for i in 0..n {
            let piv = data[i * w + bw];
            if piv.norm() <= 1e-300 + 1e-16 * scale {
                return Err(Error::SolverFailure(alloc::format!(
                    "complex banded LU pivot {i} is numerically singular"
                )));
            }
            let hi = (i + bw).min(n - 1);
            for r in (i + 1)..=hi {
                let slot_ri = i + bw - r;
                let mult = data[r * w + slot_ri] / piv;
                data[r * w + slot_ri] = mult;
                if mult.norm() != 0.0 {
                    for j in (i + 1)..=hi {
                        let uij = data[i * w + (j + bw - i)];
                        data[r * w + (j + bw - r)] -= mult * uij;
                    }
                }
            }
        }
        Ok(ComplexBandLu { n, bw, data })
    }

    pub(crate) fn solve(&self, rhs: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(rhs.len(), self.n);
        let (n, bw, w) = (self.n, self.bw, 2 * self.bw + 1);
        let mut x = rhs.to_vec();
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            let mut s = x[i];
            for j in lo..i {
                s -= self.data[i * w + (j + bw - i)] * x[j];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let hi = (i + bw).min(n - 1);
            let mut s = x[i];
            for j in (i + 1)..=hi {
                s -= self.data[i * w + (j + bw - i)] * x[j];
            }
            x[i] = s / self.data[i * w + bw];
        }
        x
    }
}

/// Solve `(c0 A1 + c1 I) x = rhs` for a tridiagonal operator by direct
/// elimination. The result satisfies the residual contract
/// `||r|| <= 1e-12 (||rhs|| + ||x|| ||op||)`.
pub fn solve_shifted_1d(
    a1: &DiscreteOperator,
    c0: f64,
    c1: f64,
    rhs: &[f64],
) -> Result<Vec<f64>> {
    let (diag, off) = match a1.kind() {
        OperatorKind::Tridiagonal { diag, off } => (diag, off),
        _ => return Err(Error::invalid("solve_shifted_1d needs a tridiagonal operator")),
    };
    if !(c0 > 0.0) || !(c1 >= 0.0) {
        return Err(Error::invalid("solve_shifted_1d needs c0 > 0 and c1 >= 0"));
    }
    if rhs.len() != a1.dim() {
        return Err(Error::invalid("solve_shifted_1d dimension mismatch"));
    }
    let n = a1.dim();
    let sdiag: Vec<f64> = diag.iter().map(|&d| c0 * d + c1).collect();
    let soff: Vec<f64> = off.iter().map(|&e| c0 * e).collect();
    let x = thomas_solve(&sdiag, &soff, rhs)?;
    // Residual contract check.
    let mut res = 0.0;
    for i in 0..n {
        let mut s = sdiag[i] * x[i];
        if i > 0 {
            s += soff[i - 1] * x[i - 1];
        }
        if i + 1 < n {
            s += soff[i] * x[i + 1];
        }
        let d = s - rhs[i];
        res += d * d;
    }
    let op_norm = sdiag
        .iter()
        .enumerate()
        .map(|(i, &d)| {
            let mut row = util::abs(d);
            if i > 0 {
                row += util::abs(soff[i - 1]);
            }
            if i + 1 < n {
                row += util::abs(soff[i]);
            }
            row
        })
        .fold(0.0f64, f64::max);
    let bound = 1e-12 * (util::norm2(rhs) + util::norm2(&x) * op_norm);
    if util::sqrt(res) > bound.max(1e-300) {
        return Err(Error::SolverFailure("tridiagonal solve residual above contract".into()));
    }
    Ok(x)
}

/// Relative residual contract for the complex shifted cross-section solves.
pub const SHIFTED_CS_RESIDUAL: f64 = 1e-10;

/// Solve `(c1 I - c0 Acs) x = rhs` by banded complex factorization. Fails
/// with a diagnostic when the shift is (numerically) an eigenvalue of
/// `c0 Acs` or the residual contract is violated.
pub fn solve_shifted_cs(
    acs: &DiscreteOperator,
    c0: f64,
    c1: Complex64,
    rhs: &[Complex64],
) -> Result<Vec<Complex64>> {
    if rhs.len() != acs.dim() {
        return Err(Error::invalid("solve_shifted_cs dimension mismatch"));
    }
    if !(c0 >= 0.0) {
        return Err(Error::invalid("solve_shifted_cs needs c0 >= 0"));
    }
    if c0 == 0.0 {
        if c1.norm() == 0.0 {
            return Err(Error::SolverFailure("scaled-identity solve with zero shift".into()));
        }
        return Ok(rhs.iter().map(|&b| b / c1).collect());
    }
    let lu = ComplexBandLu::factor(acs, c0, c1)?;
    let x = lu.solve(rhs);
    let res = shifted_cs_residual(acs, c0, c1, &x, rhs);
    let rhs_norm = util::sqrt(rhs.iter().map(|b| b.norm_sqr()).sum::<f64>());
    if res > SHIFTED_CS_RESIDUAL * rhs_norm.max(1e-300) {
        return Err(Error::SolverFailure(alloc::format!(
            "shifted cross-section solve residual {res:.3e} above contract (near-singular shift?)"
        )));
    }
    Ok(x)
}

/// `|| (c1 I - c0 A) x - rhs ||_2`, using two real matvecs.
pub(crate) fn shifted_cs_residual(
    acs: &DiscreteOperator,
    c0: f64,
    c1: Complex64,
    x: &[Complex64],
    rhs: &[Complex64],
) -> f64 {
    let n = acs.dim();
    let xr: Vec<f64> = x.iter().map(|z| z.re).collect();
    let xi: Vec<f64> = x.iter().map(|z| z.im).collect();
    let axr = acs.matvec(&xr);
    let axi = acs.matvec(&xi);
    let mut res = 0.0;
    for i in 0..n {
        let ax = Complex64::new(axr[i], axi[i]);
        let r = c1 * x[i] - c0 * ax - rhs[i];
        res += r.norm_sqr();
    }
    util::sqrt(res)
}
