//! Near-best exponential-sum approximations of `1/x` on a positive interval:
//! `1/x ≈ sum_nu a_nu exp(-alpha_nu x)` with `a_nu, alpha_nu > 0`.
//!
//! Sums are fitted on the normalized interval `[1, R]` and rescaled (the
//! scaling law `{a/c, alpha/c}` moves a sum from `[1, R]` to `[c, cR]` with
//! sup error `eps/c`). The fitter runs, deterministically,
//!
//! 1. a coarse search over quadrature-style initializations
//!    (`1/x = ∫ e^{-x e^s} e^s ds` truncated to `r` nodes),
//! 2. Lawson-reweighted damped Gauss-Newton in log-parameters on a
//!    log-spaced collocation grid, which drives the weighted least-squares
//!    solution toward the minimax one,
//! 3. for small term counts, an equioscillation refinement that Newton-solves
//!    the alternation system on the current extrema.
//!
//! The reported `eps` is always measured on a dense grid, never assumed.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::util;

/// Grid size for the authoritative sup-error measurement.
const MEASURE_GRID: usize = 20_000;

/// An exponential sum with its validity interval and measured sup error.
#[derive(Debug, Clone, PartialEq)]
pub struct ExponentialSum {
    /// `(a_nu, alpha_nu)`, sorted by strictly increasing `alpha_nu`.
    terms: Vec<(f64, f64)>,
    interval: (f64, f64),
    eps: f64,
}

impl ExponentialSum {
    /// Build a sum from raw coefficients; validates positivity, sorts terms,
    /// merges coincident rates and measures the sup error on `[a, b]`.
    pub fn from_parts(terms: Vec<(f64, f64)>, a: f64, b: f64) -> Result<Self> {
        if !(a > 0.0 && b >= a) {
            return Err(Error::invalid("interval must satisfy 0 < a <= b"));
        }
        if terms.is_empty() {
            return Err(Error::invalid("exponential sum needs at least one term"));
        }
        if terms.iter().any(|&(c, al)| !(c > 0.0) || !(al > 0.0)) {
            return Err(Error::invalid("coefficients must be positive"));
        }
        let mut terms = terms;
        terms.sort_by(|x, y| x.1.total_cmp(&y.1));
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(terms.len());
        for (c, al) in terms {
            match merged.last_mut() {
                Some(last) if (al - last.1).abs() <= 1e-9 * al => last.0 += c,
                _ => merged.push((c, al)),
            }
        }
        let eps = measure_eps(&merged, a, b, MEASURE_GRID);
        Ok(ExponentialSum {
            terms: merged,
            interval: (a, b),
            eps,
        })
    }

    pub fn r(&self) -> usize {
        self.terms.len()
    }

    /// `(a_nu, alpha_nu)` pairs, `alpha` strictly increasing.
    pub fn terms(&self) -> &[(f64, f64)] {
        &self.terms
    }

    pub fn interval(&self) -> (f64, f64) {
        self.interval
    }

    /// Measured sup-norm error on the validity interval.
    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn eval(&self, x: f64) -> f64 {
        debug_assert!(x > 0.0);
        eval_terms(&self.terms, x)
    }

    /// Scaling law: move the sum from `[a, b]` to `[c a, c b]`; the sup
    /// error scales by `1/c` exactly.
    pub fn rescale(&self, c: f64) -> ExponentialSum {
        assert!(c > 0.0);
        ExponentialSum {
            terms: self.terms.iter().map(|&(w, al)| (w / c, al / c)).collect(),
            interval: (self.interval.0 * c, self.interval.1 * c),
            eps: self.eps / c,
        }
    }
}

/// Evaluate an exponential sum at `x > 0`.
pub fn eval_expsum(sum: &ExponentialSum, x: f64) -> f64 {
    sum.eval(x)
}

fn eval_terms(terms: &[(f64, f64)], x: f64) -> f64 {
    let mut s = 0.0;
    for &(c, al) in terms {
        s += c * util::exp(-al * x);
    }
    s
}

/// Log-spaced grid on `[1, bound]` including both endpoints.
fn log_grid(bound: f64, m: usize) -> Vec<f64> {
    let lb = util::ln(bound);
    (0..m)
        .map(|i| util::exp(lb * i as f64 / (m - 1) as f64))
        .collect()
}

fn measure_eps(terms: &[(f64, f64)], a: f64, b: f64, m: usize) -> f64 {
    if b <= a {
        return (1.0 / a - eval_terms(terms, a)).abs();
    }
    let la = util::ln(a);
    let lb = util::ln(b);
    let mut worst: f64 = 0.0;
    for i in 0..m {
        let x = util::exp(la + (lb - la) * i as f64 / (m - 1) as f64);
        worst = worst.max((1.0 / x - eval_terms(terms, x)).abs());
    }
    worst
}

/// Parameters in log space: theta = [ln a_1.., ln alpha_1..].
#[derive(Clone)]
struct LogParams {
    la: Vec<f64>,
    lal: Vec<f64>,
}

impl LogParams {
    fn from_terms(terms: &[(f64, f64)]) -> Self {
        LogParams {
            la: terms.iter().map(|t| util::ln(t.0)).collect(),
            lal: terms.iter().map(|t| util::ln(t.1)).collect(),
        }
    }

    fn to_terms(&self) -> Vec<(f64, f64)> {
        self.la
            .iter()
            .zip(&self.lal)
            .map(|(&la, &lal)| (util::exp(la), util::exp(lal)))
            .collect()
    }

    fn r(&self) -> usize {
        self.la.len()
    }
}

/// Residuals `e_i = 1/x_i - E(x_i)` and the Jacobian of `E` w.r.t. the log
/// parameters: `dE/d(ln a_nu) = a_nu e^{-alpha_nu x}`,
/// `dE/d(ln alpha_nu) = -a_nu alpha_nu x e^{-alpha_nu x}`.
fn residuals_and_jacobian(p: &LogParams, xs: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let r = p.r();
    let terms = p.to_terms();
    let m = xs.len();
    let mut e = alloc::vec![0.0; m];
    let mut jac = alloc::vec![0.0; m * 2 * r]; // row-major, d e_i / d theta_k
    for (i, &x) in xs.iter().enumerate() {
        let mut s = 0.0;
        for (nu, &(c, al)) in terms.iter().enumerate() {
            let g = c * util::exp(-al * x);
            s += g;
            // e = 1/x - E, so de/dtheta = -dE/dtheta
            jac[i * 2 * r + nu] = -g;
            jac[i * 2 * r + r + nu] = al * x * g;
        }
        e[i] = 1.0 / x - s;
    }
    (e, jac)
}

fn weighted_sse(e: &[f64], w: &[f64]) -> f64 {
    e.iter().zip(w).map(|(ei, wi)| wi * ei * ei).sum()
}

/// One damped Gauss-Newton step on the weighted least squares problem.
/// Returns true if the step reduced the weighted SSE.
fn gauss_newton_step(p: &mut LogParams, xs: &[f64], w: &[f64], damping: &mut f64) -> bool {
    let r = p.r();
    let np = 2 * r;
    let (e, jac) = residuals_and_jacobian(p, xs);
    let sse0 = weighted_sse(&e, w);
    // Normal equations J^T W J + lambda diag
    let mut ata = alloc::vec![0.0; np * np];
    let mut atb = alloc::vec![0.0; np];
    for i in 0..xs.len() {
        let wi = w[i];
        if wi == 0.0 {
            continue;
        }
        let row = &jac[i * np..(i + 1) * np];
        for k in 0..np {
            let jk = row[k];
            if jk == 0.0 {
                continue;
            }
            atb[k] -= wi * jk * e[i]; // solve J d = -e in the LSQ sense
            for l in k..np {
                ata[k * np + l] += wi * jk * row[l];
            }
        }
    }
    for k in 0..np {
        for l in 0..k {
            ata[k * np + l] = ata[l * np + k];
        }
    }
    let scale: f64 = (0..np).map(|k| ata[k * np + k]).fold(0.0, f64::max);
    for _attempt in 0..8 {
        let mut m = ata.clone();
        for k in 0..np {
            m[k * np + k] += *damping * scale.max(1e-300);
        }
        let mut step = atb.clone();
        if !util::gauss_solve(np, &mut m, &mut step) {
            *damping *= 10.0;
            continue;
        }
        // log-space trust region
        let inf: f64 = step.iter().fold(0.0, |acc, s| acc.max(util::abs(*s)));
        if inf > 2.0 {
            let f = 2.0 / inf;
            for s in step.iter_mut() {
                *s *= f;
            }
        }
        let mut cand = p.clone();
        for nu in 0..r {
            cand.la[nu] += step[nu];
            cand.lal[nu] += step[r + nu];
        }
        let (e1, _) = residuals_and_jacobian(&cand, xs);
        if weighted_sse(&e1, w) < sse0 {
            *p = cand;
            *damping = (*damping * 0.3).max(1e-14);
            return true;
        }
        *damping *= 10.0;
    }
    false
}

/// Lawson-reweighted Gauss-Newton toward the minimax solution. Returns the
/// best parameters seen, by measured sup error (tracked every `track_every`
/// outer iterations to bound the measurement cost for large term counts).
fn lawson_polish(
    start: LogParams,
    big_r: f64,
    outer: usize,
    track_every: usize,
) -> (LogParams, f64) {
    let m = (48 * start.r()).max(512);
    let xs = log_grid(big_r, m);
    let mut w = alloc::vec![1.0; m];
    let mut p = start;
    let mut damping = 1e-3;
    let mut best = p.clone();
    let mut best_eps = measure_eps(&p.to_terms(), 1.0, big_r, 4000);
    for it in 0..outer {
        for _ in 0..3 {
            gauss_newton_step(&mut p, &xs, &w, &mut damping);
        }
        let (e, _) = residuals_and_jacobian(&p, &xs);
        if it % track_every == 0 || it + 1 == outer {
            let eps = measure_eps(&p.to_terms(), 1.0, big_r, 4000);
            if eps < best_eps {
                best_eps = eps;
                best = p.clone();
            }
        }
        // Lawson update: w <- w * |e|, renormalized.
        let mut total = 0.0;
        for i in 0..m {
            w[i] *= util::abs(e[i]).max(1e-300);
            total += w[i];
        }
        if total > 0.0 {
            let f = m as f64 / total;
            for wi in w.iter_mut() {
                *wi *= f;
            }
        }
    }
    (best, best_eps)
}

/// Alternating extrema of the error on a dense grid: local maxima of |e|
/// with alternating signs, greedily keeping the largest per sign run.
fn alternating_extrema(terms: &[(f64, f64)], big_r: f64, m: usize) -> Vec<(f64, f64)> {
    let xs = log_grid(big_r, m);
    let mut out: Vec<(f64, f64)> = Vec::new();
    for &x in &xs {
        let e = 1.0 / x - eval_terms(terms, x);
        match out.last_mut() {
            Some(last) if last.1.signum() == e.signum() => {
                if util::abs(e) > util::abs(last.1) {
                    *last = (x, e);
                }
            }
            _ => out.push((x, e)),
        }
    }
    out
}

/// Newton refinement of the equioscillation system `e(x_j) = sigma_j d` on
/// the current alternating extrema. Only attempted for small term counts.
fn equioscillation_refine(p: LogParams, big_r: f64) -> (LogParams, f64) {
    let r = p.r();
    let np = 2 * r + 1;
    let mut best = p.clone();
    let mut best_eps = measure_eps(&p.to_terms(), 1.0, big_r, 8000);
    let mut cur = p;
    for _round in 0..24 {
        let terms = cur.to_terms();
        let ext = alternating_extrema(&terms, big_r, 8000);
        if ext.len() < np {
            break;
        }
        // Keep the np extrema of largest magnitude while preserving
        // alternation: take a sliding window of np consecutive extrema with
        // the largest minimum magnitude.
        let mut sel = 0;
        let mut sel_score = -1.0;
        for w0 in 0..=ext.len() - np {
            let score = ext[w0..w0 + np]
                .iter()
                .map(|t| util::abs(t.1))
                .fold(f64::INFINITY, f64::min);
            if score > sel_score {
                sel_score = score;
                sel = w0;
            }
        }
        let pts: Vec<(f64, f64)> = ext[sel..sel + np].to_vec();
        let sigma: Vec<f64> = pts.iter().map(|t| t.1.signum()).collect();
        let d0: f64 = pts.iter().map(|t| util::abs(t.1)).sum::<f64>() / np as f64;
        // Newton system in (theta, d).
        let xs: Vec<f64> = pts.iter().map(|t| t.0).collect();
        let (e, jac) = residuals_and_jacobian(&cur, &xs);
        let mut a = alloc::vec![0.0; np * np];
        let mut b = alloc::vec![0.0; np];
        for j in 0..np {
            for k in 0..2 * r {
                a[j * np + k] = jac[j * 2 * r + k];
            }
            a[j * np + 2 * r] = -sigma[j];
            b[j] = -(e[j] - sigma[j] * d0);
        }
        let mut step = b;
        if !util::gauss_solve(np, &mut a, &mut step) {
            break;
        }
        let mut improved = false;
        let mut t = 1.0;
        for _ in 0..6 {
            let mut cand = cur.clone();
            for nu in 0..r {
                cand.la[nu] += t * step[nu];
                cand.lal[nu] += t * step[r + nu];
            }
            let eps = measure_eps(&cand.to_terms(), 1.0, big_r, 8000);
            if eps < best_eps {
                best_eps = eps;
                best = cand.clone();
                cur = cand;
                improved = true;
                break;
            }
            t *= 0.5;
        }
        if !improved {
            break;
        }
    }
    (best, best_eps)
}

/// Quadrature-style initial guesses: alpha log-spaced over `[e^lo, e^hi]`
/// with the trapezoid weights of `1/x = ∫ e^{-x e^s} e^s ds`.
fn quadrature_init(r: usize, lo: f64, hi: f64) -> Vec<(f64, f64)> {
    let step = if r > 1 { (hi - lo) / (r - 1) as f64 } else { 1.0 };
    (0..r)
        .map(|j| {
            let s = if r > 1 { lo + j as f64 * step } else { lo };
            let al = util::exp(s);
            (step * al, al)
        })
        .collect()
}

fn best_quadrature_inits(r: usize, big_r: f64, keep: usize) -> Vec<Vec<(f64, f64)>> {
    let lnr = util::ln(big_r);
    let mut scored: Vec<(f64, Vec<(f64, f64)>)> = Vec::new();
    let lo_steps = 14;
    let hi_steps = 12;
    for i in 0..lo_steps {
        let lo = -lnr - 2.0 + (lnr + 2.0) * i as f64 / (lo_steps - 1) as f64;
        for j in 0..hi_steps {
            let hi = -0.5 + 4.0 * j as f64 / (hi_steps - 1) as f64;
            if hi <= lo + 0.05 && r > 1 {
                continue;
            }
            let terms = quadrature_init(r, lo, hi);
            let eps = measure_eps(&terms, 1.0, big_r, 600);
            scored.push((eps, terms));
        }
    }
    scored.sort_by(|a, b| a.0.total_cmp(&b.0));
    scored.into_iter().take(keep).map(|t| t.1).collect()
}

/// Warm start from a previous-rank solution: append one faster-decaying term
/// with a small positive weight (sized to contribute about half the current
/// error at the left endpoint). Rates are capped where `e^{-alpha x}` would
/// underflow on the whole interval.
fn warm_start(prev: &[(f64, f64)], eps_prev: f64) -> Vec<(f64, f64)> {
    let mut terms = prev.to_vec();
    let al_max = terms.last().map(|t| t.1).unwrap_or(1.0);
    let al_new = (al_max * 3.0).min(600.0);
    let ln_a = util::ln((eps_prev * 0.5).max(1e-12)) + al_new;
    let a_new = util::exp(ln_a.min(660.0));
    terms.push((a_new, al_new));
    terms
}

const FIT_MAX_TERMS: usize = 40;

/// Fit a near-best exponential-sum approximation of `1/x` on `[a, b]`.
///
/// The fit is performed on the normalized interval `[1, b/a]` through a
/// ladder of term counts `1..=r`, each rung seeded from quadrature
/// initializations and the warm-started previous rung, then rescaled.
pub fn fit_expsum_inv_x(r: usize, a: f64, b: f64) -> Result<ExponentialSum> {
    if !(a > 0.0 && b >= a) || !a.is_finite() || !b.is_finite() {
        return Err(Error::invalid("fit interval must satisfy 0 < a <= b"));
    }
    if r < 1 || r > FIT_MAX_TERMS {
        return Err(Error::invalid("term count must lie in 1..=40"));
    }
    // Degenerate single-point interval: one term interpolates exactly.
    if b - a <= 1e-14 * a {
        let al = 1.0 / a;
        let c = util::exp(al * a) / a;
        return ExponentialSum::from_parts(alloc::vec![(c, al)], a, b);
    }
    let big_r = b / a;
    let mut prev: Option<(Vec<(f64, f64)>, f64)> = None;
    for rr in 1..=r {
        // Careful optimization for the rungs that drive accuracy claims;
        // larger rungs only need near-best quality.
        let (outer, track, refine) = if rr <= 12 { (150, 1, true) } else { (30, 5, false) };
        let mut candidates: Vec<Vec<(f64, f64)>> = if rr <= 12 {
            best_quadrature_inits(rr, big_r, 3)
        } else {
            best_quadrature_inits(rr, big_r, 1)
        };
        if let Some((ref terms, eps_prev)) = prev {
            candidates.push(warm_start(terms, eps_prev));
            if rr <= 12 {
                // perturbed warm start as an extra deterministic restart
                let mut rng = util::SplitMix::new(0xabcd ^ rr as u64);
                let jittered: Vec<(f64, f64)> = warm_start(terms, eps_prev)
                    .iter()
                    .map(|&(c, al)| {
                        (
                            c * util::exp(0.2 * rng.next_sym()),
                            al * util::exp(0.2 * rng.next_sym()),
                        )
                    })
                    .collect();
                candidates.push(jittered);
            }
        }
        let run = |cands: Vec<Vec<(f64, f64)>>| -> (LogParams, f64) {
            let mut best: Option<(LogParams, f64)> = None;
            for cand in cands {
                let start = LogParams::from_terms(&cand);
                let (polished, eps) = lawson_polish(start, big_r, outer, track);
                if best.as_ref().map_or(true, |b| eps < b.1) {
                    best = Some((polished, eps));
                }
            }
            best.expect("at least one candidate")
        };
        let (mut params, mut eps) = run(candidates);
        // Stalled rung: barely better than the previous one. Retry from a
        // wider deterministic restart set before accepting it.
        if let Some((ref terms, eps_prev)) = prev {
            if rr <= 12 && eps > 0.45 * eps_prev && eps_prev > 1e-14 {
                let mut extra = best_quadrature_inits(rr, big_r, 6);
                let mut rng = util::SplitMix::new(0x7777 ^ (rr as u64) << 3);
                for scale in [0.1, 0.35, 0.6] {
                    let jittered: Vec<(f64, f64)> = warm_start(terms, eps_prev)
                        .iter()
                        .map(|&(c, al)| {
                            (
                                c * util::exp(scale * rng.next_sym()),
                                al * util::exp(scale * rng.next_sym()),
                            )
                        })
                        .collect();
                    extra.push(jittered);
                }
                let (p2, e2) = run(extra);
                if e2 < eps {
                    params = p2;
                    eps = e2;
                }
            }
        }
        if refine {
            let (refined, eps_r) = equioscillation_refine(params.clone(), big_r);
            if eps_r < eps {
                params = refined;
                eps = eps_r;
            }
        }
        prev = Some((params.to_terms(), eps));
        if eps < 3e-15 {
            break; // at the double-precision floor; more terms are noise
        }
    }
    let (terms, _) = prev.expect("ladder produced a result");
    let normalized = ExponentialSum::from_parts(terms, 1.0, big_r)?;
    Ok(normalized.rescale(a))
}
