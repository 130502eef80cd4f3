//! Matrix-exponential actions `exp(-alpha A) v` for the two operator
//! factors.
//!
//! The interval operator is a Toeplitz tridiagonal matrix with the analytic
//! sine eigenbasis, so its action is a forward sine transform, a diagonal
//! scaling and an inverse transform.
//!
//! The cross-section operator goes through the contour representation
//! `exp(-M) = (1/2πi) ∮ (ζI - M)^{-1} e^{-ζ} dζ` over the parabola
//! `ζ(s) = s^2 - i s`, which after substitution becomes a line integral of
//! `G(s) = (1/2πi) e^{-s^2 + i s} (2s - i) ((s^2 - i s) I - M)^{-1}`
//! approximated by sinc quadrature with step `c (N+1)^{-2/3}`. One exact
//! spectral shift is applied first: `exp(-M) = e^{-σ} exp(-(M - σI))` with
//! `σ = μ_min - 1/4`, which pins the smallest eigenvalue of the shifted
//! matrix at 1/4 so the integrand's pole strip (and hence the quadrature
//! accuracy) is the same for every `alpha`. Conjugate symmetry
//! `G(-s) = conj(G(s))` lets the sum run over `s >= 0` only.
//!
//! Every quadrature node costs one complex shifted solve. The batched entry
//! point amortizes those solves over many `alpha` values through a shared
//! Lanczos subspace of the cross-section operator (Krylov spaces are shift
//! invariant), verifying the same per-node residual contract and falling
//! back to direct banded solves for nodes the subspace has not resolved.

use alloc::vec::Vec;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::operator::{spectral_bounds, DiscreteOperator};
use crate::solve::{solve_shifted_cs, SHIFTED_CS_RESIDUAL};
use crate::util;

/// Sinc quadrature rule for the contour integral: nodes `s_k = k h`,
/// `k = -N..N`, with `h = c (N+1)^{-2/3}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SincQuadrature {
    big_n: usize,
    step_factor: f64,
}

impl SincQuadrature {
    pub fn new(big_n: usize) -> Result<Self> {
        Self::with_step_factor(big_n, 1.0)
    }

    pub fn with_step_factor(big_n: usize, c: f64) -> Result<Self> {
        if big_n < 1 {
            return Err(Error::invalid("sinc truncation order must be >= 1"));
        }
        if !(c > 0.0) {
            return Err(Error::invalid("sinc step factor must be positive"));
        }
        Ok(SincQuadrature {
            big_n,
            step_factor: c,
        })
    }

    pub fn truncation(&self) -> usize {
        self.big_n
    }

    pub fn step_factor(&self) -> f64 {
        self.step_factor
    }

    pub fn step(&self) -> f64 {
        self.step_factor * util::powf((self.big_n + 1) as f64, -2.0 / 3.0)
    }

    /// Scalar surrogate of the quadrature: the shifted-spectrum scalar case
    /// `mu ∈ [1/4, ∞)`, evaluated with this rule.
    fn scalar(&self, mu: f64) -> f64 {
        let h = self.step();
        let mut acc = node_weight(0.0) * Complex64::new(-1.0 / mu, 0.0);
        for k in 1..=self.big_n {
            let s = k as f64 * h;
            let zeta = Complex64::new(s * s, -s);
            let y = (zeta - mu).inv();
            acc += 2.0 * (node_weight(s) * y).re;
        }
        h * acc.re
    }

    /// Pick the truncation order for a target tolerance by doubling `N`
    /// until two successive scalar surrogate results differ by less than
    /// `0.1 * tol` across a spread of shifted eigenvalues.
    pub fn for_tolerance(tol: f64) -> Result<Self> {
        if !(tol > 0.0) {
            return Err(Error::invalid("tolerance must be positive"));
        }
        let probes = [0.25, 1.0, 10.0, 1e3, 1e6];
        let mut n = 8usize;
        while n <= 2048 {
            let a = SincQuadrature::with_step_factor(n, 1.0)?;
            let b = SincQuadrature::with_step_factor(2 * n, 1.0)?;
            let worst = probes
                .iter()
                .map(|&mu| util::abs(a.scalar(mu) - b.scalar(mu)))
                .fold(0.0f64, f64::max);
            if worst < 0.1 * tol {
                return Ok(a);
            }
            n *= 2;
        }
        SincQuadrature::with_step_factor(2048, 1.0)
    }
}

/// `(1/2πi) e^{-s^2 + i s} (2 s - i)` — the contour weight at node `s`.
fn node_weight(s: f64) -> Complex64 {
    let phase = Complex64::new(-s * s, s).exp();
    let jac = Complex64::new(2.0 * s, -1.0);
    phase * jac / Complex64::new(0.0, 2.0 * core::f64::consts::PI)
}

/// Apply the sine transform `out[j] = sum_k sin((j+1)(k+1) π/(n+1)) v[k]`
/// (the shared eigenbasis of every Toeplitz tridiagonal operator here; the
/// inverse is the same transform scaled by `2/(n+1)`). Rows use a rotation
/// recurrence resynchronized every 256 steps.
pub fn sine_transform(v: &[f64]) -> Vec<f64> {
    let n = v.len();
    let base = core::f64::consts::PI / (n + 1) as f64;
    let mut out = alloc::vec![0.0; n];
    for j in 0..n {
        let theta = (j + 1) as f64 * base;
        let (st, ct) = libm::sincos(theta);
        let mut s_k = 0.0; // sin(0)
        let mut c_k = 1.0; // cos(0)
        let mut acc = 0.0;
        for (k, &vk) in v.iter().enumerate() {
            if k % 256 == 0 {
                let (s, c) = libm::sincos(theta * (k as f64));
                s_k = s;
                c_k = c;
            }
            // advance to sin((k+1) theta)
            let s_next = s_k * ct + c_k * st;
            let c_next = c_k * ct - s_k * st;
            s_k = s_next;
            c_k = c_next;
            acc += s_k * vk;
        }
        out[j] = acc;
    }
    out
}

/// `exp(-alpha A1) v` for a Toeplitz tridiagonal operator via the analytic
/// sine eigenbasis `S_{jk} = sin(jk π/(n+1))`, eigenvalues
/// `d + 2 e cos(k π/(n+1))` (equal to `h^{-2}(2 - 2 cos(kπ/(n+1)))` for the
/// second-difference stencil). `alpha = 0` returns `v` unchanged.
pub fn expm_action_1d(a1: &DiscreteOperator, alpha: f64, v: &[f64]) -> Result<Vec<f64>> {
    expm_action_1d_shifted(a1, alpha, 0.0, v)
}

/// `exp(-alpha (A1 - mu I)) v` for Toeplitz tridiagonal `A1`. The spectral
/// shift `mu` lets rank-1 factor pairs of a tensor inverse stay in
/// representable range when the unbalanced factors would over/underflow.
pub fn expm_action_1d_shifted(
    a1: &DiscreteOperator,
    alpha: f64,
    mu: f64,
    v: &[f64],
) -> Result<Vec<f64>> {
    let (d, e) = a1
        .toeplitz_tridiag()
        .ok_or_else(|| Error::invalid("expm_action_1d needs a Toeplitz tridiagonal operator"))?;
    if v.len() != a1.dim() {
        return Err(Error::invalid("expm_action_1d dimension mismatch"));
    }
    if !(alpha >= 0.0) {
        return Err(Error::invalid("expm_action_1d needs alpha >= 0"));
    }
    if alpha == 0.0 {
        return Ok(v.to_vec());
    }
    let n = v.len();
    let mut coeff = sine_transform(v);
    let base = core::f64::consts::PI / (n + 1) as f64;
    for (k, c) in coeff.iter_mut().enumerate() {
        let lambda = d + 2.0 * e * util::cos((k + 1) as f64 * base);
        *c *= util::exp(-alpha * (lambda - mu));
    }
    let mut out = sine_transform(&coeff);
    let scale = 2.0 / (n + 1) as f64;
    util::scale(scale, &mut out);
    Ok(out)
}

/// Lower bound for the smallest eigenvalue, from the operator's cached
/// enclosure when present.
fn lambda_min_low(acs: &DiscreteOperator) -> Result<f64> {
    if let Some(b) = acs.cached_bounds() {
        return Ok(b.lambda_min);
    }
    Ok(spectral_bounds(acs, 0.05)?.0)
}

/// Exponents beyond this underflow to zero in double precision.
const EXP_UNDERFLOW: f64 = 745.0;

/// `exp(-alpha Acs) v` by sinc quadrature of the parabola contour integral,
/// one complex shifted solve per node. Returns the zero vector once
/// `alpha * lambda_min` is past the double-precision floor.
pub fn expm_action_cs(
    acs: &DiscreteOperator,
    alpha: f64,
    v: &[f64],
    quad: &SincQuadrature,
) -> Result<Vec<f64>> {
    if v.len() != acs.dim() {
        return Err(Error::invalid("expm_action_cs dimension mismatch"));
    }
    if !(alpha > 0.0) {
        return Err(Error::invalid("expm_action_cs needs alpha > 0"));
    }
    let lam_lo = lambda_min_low(acs)?;
    let sigma = alpha * lam_lo - 0.25;
    if sigma > EXP_UNDERFLOW {
        return Ok(alloc::vec![0.0; v.len()]);
    }
    let rhs: Vec<Complex64> = v.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    let h = quad.step();
    let n = v.len();
    let mut acc = alloc::vec![Complex64::new(0.0, 0.0); n];
    for k in 0..=quad.truncation() {
        let s = k as f64 * h;
        let zeta = Complex64::new(s * s, -s);
        let c1 = zeta + sigma;
        let y = solve_shifted_cs(acs, alpha, c1, &rhs).map_err(|e| {
            Error::SolverFailure(alloc::format!("contour node {k}: {e}"))
        })?;
        let w = node_weight(s) * if k == 0 { 1.0 } else { 2.0 };
        for i in 0..n {
            acc[i] += w * y[i];
        }
    }
    let scale = h * util::exp(-sigma);
    // Conjugate-symmetric assembly: doubling real parts of the k > 0 nodes
    // already cancelled the imaginary part, so only the real part is kept.
    Ok(acc.iter().map(|z| scale * z.re).collect())
}

/// Symmetric Lanczos basis with full reorthogonalization.
struct Lanczos<'a> {
    op: &'a DiscreteOperator,
    /// basis vectors, flattened m x n
    basis: Vec<f64>,
    alpha: Vec<f64>,
    beta: Vec<f64>, // beta[j] couples v_j and v_{j+1}; beta.len() == alpha.len()
    exhausted: bool,
}

impl<'a> Lanczos<'a> {
    fn new(op: &'a DiscreteOperator, v0: &[f64]) -> Self {
        let nrm = util::norm2(v0);
        let mut basis = Vec::new();
        basis.extend(v0.iter().map(|&x| x / nrm));
        Lanczos {
            op,
            basis,
            alpha: Vec::new(),
            beta: Vec::new(),
            exhausted: false,
        }
    }

    fn len(&self) -> usize {
        self.alpha.len()
    }

    fn vector(&self, j: usize) -> &[f64] {
        let n = self.op.dim();
        &self.basis[j * n..(j + 1) * n]
    }

    /// Extend the decomposition to `target` steps (or until breakdown).
    fn grow(&mut self, target: usize) {
        let n = self.op.dim();
        let target = target.min(n);
        while self.alpha.len() < target && !self.exhausted {
            let j = self.alpha.len();
            let vj = self.vector(j).to_vec();
            let mut w = self.op.matvec(&vj);
            if j > 0 {
                let b = self.beta[j - 1];
                let prev = self.vector(j - 1).to_vec();
                util::axpy(-b, &prev, &mut w);
            }
            let a = util::dot(&w, &vj);
            util::axpy(-a, &vj, &mut w);
            // full reorthogonalization, two passes
            for _ in 0..2 {
                for i in 0..=j {
                    let vi = self.vector(i);
                    let c = util::dot(&w, vi);
                    for (wk, vk) in w.iter_mut().zip(vi.iter()) {
                        *wk -= c * vk;
                    }
                }
            }
            let b = util::norm2(&w);
            self.alpha.push(a);
            if b <= 1e-14 * util::abs(a).max(1.0) || self.alpha.len() == n {
                self.beta.push(0.0);
                self.exhausted = true;
            } else {
                self.beta.push(b);
                util::scale(1.0 / b, &mut w);
                self.basis.extend_from_slice(&w);
            }
        }
    }

    /// Solve `(c1 I - c0 T_m) y = rhs0 e_1`; returns y and the residual
    /// norm `|c0| beta_{m+1} |y_m|` of the lifted full-space system.
    fn shifted_solve(&self, c0: f64, c1: Complex64, rhs0: f64) -> (Vec<Complex64>, f64) {
        let m = self.len();
        let mut diag: Vec<Complex64> = (0..m).map(|j| c1 - c0 * self.alpha[j]).collect();
        let mut rhs = alloc::vec![Complex64::new(0.0, 0.0); m];
        rhs[0] = Complex64::new(rhs0, 0.0);
        // complex Thomas elimination, off-diagonal -c0 * beta
        for j in 1..m {
            let off = -c0 * self.beta[j - 1];
            let f = off / diag[j - 1];
            diag[j] -= f * off;
            let carry = rhs[j - 1];
            rhs[j] -= f * carry;
        }
        let mut y = rhs;
        y[m - 1] = y[m - 1] / diag[m - 1];
        for j in (0..m - 1).rev() {
            let off = -c0 * self.beta[j];
            let next = y[j + 1];
            y[j] = (y[j] - off * next) / diag[j];
        }
        let tail_beta = if self.exhausted { 0.0 } else { self.beta[m - 1] };
        let res = c0.abs() * tail_beta * y[m - 1].norm();
        (y, res)
    }

    /// `basis^T`-free lift: out += Re(sum_j coeff_j v_j) scaled.
    fn accumulate(&self, coeff: &[Complex64], scale: f64, out: &mut [f64]) {
        let n = self.op.dim();
        for (j, c) in coeff.iter().enumerate() {
            let cr = c.re * scale;
            if cr == 0.0 {
                continue;
            }
            let vj = &self.basis[j * n..(j + 1) * n];
            for i in 0..n {
                out[i] += cr * vj[i];
            }
        }
    }
}

/// Batched `exp(-alpha_nu Acs) v` for many rates against one fixed vector,
/// sharing one Lanczos subspace across every (node, rate) shifted system.
/// Each small solve is certified by the lifted residual; nodes that the
/// subspace cannot certify to the shifted-solve contract are recomputed by
/// direct banded factorization.
pub fn expm_actions_cs_batch(
    acs: &DiscreteOperator,
    alphas: &[f64],
    v: &[f64],
    quad: &SincQuadrature,
) -> Result<Vec<Vec<f64>>> {
    expm_actions_cs_batch_shifted(acs, alphas, 0.0, v, quad)
}

/// Batched `exp(-alpha_nu (Acs - mu I)) v`; see `expm_actions_cs_batch`.
pub fn expm_actions_cs_batch_shifted(
    acs: &DiscreteOperator,
    alphas: &[f64],
    mu: f64,
    v: &[f64],
    quad: &SincQuadrature,
) -> Result<Vec<Vec<f64>>> {
    if v.len() != acs.dim() {
        return Err(Error::invalid("expm_actions_cs_batch dimension mismatch"));
    }
    if alphas.iter().any(|&a| !(a > 0.0)) {
        return Err(Error::invalid("expm_actions_cs_batch needs alpha > 0"));
    }
    let n = acs.dim();
    let vnorm = util::norm2(v);
    if vnorm == 0.0 {
        return Ok(alphas.iter().map(|_| alloc::vec![0.0; n]).collect());
    }
    let lam_lo = lambda_min_low(acs)?;
    let h = quad.step();
    let nn = quad.truncation();
    let mut lanczos = Lanczos::new(acs, v);
    let res_tol = SHIFTED_CS_RESIDUAL * vnorm;
    // exp(-alpha(A - mu)) = e^{-sigma + alpha mu} exp(-(alpha A - sigma));
    // the result underflows once this exponent passes the double floor.
    let dead = |alpha: f64| alpha * (lam_lo - mu) > EXP_UNDERFLOW;
    // Grow the basis until the worst lifted residual over all (node, rate)
    // systems meets the contract, then mop up stragglers directly.
    let cap = n.min(640);
    let mut m = 48.min(n);
    loop {
        lanczos.grow(m);
        let mut worst = 0.0f64;
        'outer: for &alpha in alphas {
            if dead(alpha) {
                continue;
            }
            let sigma = alpha * lam_lo - 0.25;
            for k in 0..=nn {
                let s = k as f64 * h;
                let c1 = Complex64::new(s * s, -s) + sigma;
                let (_, res) = lanczos.shifted_solve(alpha, c1, vnorm);
                worst = worst.max(res);
                if worst > res_tol && lanczos.len() < cap && !lanczos.exhausted {
                    break 'outer;
                }
            }
        }
        if worst <= res_tol || lanczos.len() >= cap || lanczos.exhausted {
            break;
        }
        m = (m * 2).min(cap);
    }
    let mut out = Vec::with_capacity(alphas.len());
    let rhs_c: Vec<Complex64> = v.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    for &alpha in alphas {
        if dead(alpha) {
            out.push(alloc::vec![0.0; n]);
            continue;
        }
        let sigma = alpha * lam_lo - 0.25;
        let scale = h * util::exp(-sigma + alpha * mu);
        let mut result = alloc::vec![0.0; n];
        let mut coeff = alloc::vec![Complex64::new(0.0, 0.0); lanczos.len()];
        for k in 0..=nn {
            let s = k as f64 * h;
            let c1 = Complex64::new(s * s, -s) + sigma;
            let w = node_weight(s) * if k == 0 { 1.0 } else { 2.0 };
            let (y, res) = lanczos.shifted_solve(alpha, c1, vnorm);
            if res <= res_tol {
                for (cj, yj) in coeff.iter_mut().zip(y.iter()) {
                    *cj += w * yj;
                }
            } else {
                // Krylov subspace did not certify this node: direct solve.
                let y_full = solve_shifted_cs(acs, alpha, c1, &rhs_c).map_err(|e| {
                    Error::SolverFailure(alloc::format!("contour node {k}: {e}"))
                })?;
                for i in 0..n {
                    result[i] += scale * (w * y_full[i]).re;
                }
            }
        }
        lanczos.accumulate(&coeff, scale, &mut result);
        out.push(result);
    }
    Ok(out)
}
