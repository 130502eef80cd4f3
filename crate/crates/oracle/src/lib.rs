//! Dense reference routines used as independent oracles in tests.
//!
//! Everything here goes through nalgebra's dense factorizations, so none of
//! the structured solvers under test share code with these checks. Matrices
//! are passed as row-major slices of length `n * n`.

use nalgebra::{DMatrix, DVector};

pub use nalgebra::Complex;
pub type C64 = Complex<f64>;

fn dense(n: usize, a: &[f64]) -> DMatrix<f64> {
    assert_eq!(a.len(), n * n, "matrix data must be n*n");
    DMatrix::from_row_slice(n, n, a)
}

/// Eigenvalues (ascending) and matching eigenvectors (column-major, each
/// column one eigenvector) of a symmetric matrix.
pub fn sym_eigen(n: usize, a: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let eig = dense(n, a).symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let mut values = Vec::with_capacity(n);
    let mut vectors = Vec::with_capacity(n * n);
    for &k in &order {
        values.push(eig.eigenvalues[k]);
        vectors.extend(eig.eigenvectors.column(k).iter().copied());
    }
    (values, vectors)
}

/// Solve a dense real system by partially pivoted LU.
pub fn solve(n: usize, a: &[f64], b: &[f64]) -> Vec<f64> {
    let lu = dense(n, a).lu();
    let x = lu
        .solve(&DVector::from_row_slice(b))
        .expect("dense oracle solve: singular matrix");
    x.iter().copied().collect()
}

/// Solve a dense complex system by partially pivoted LU. Returns `None` when
/// the factorization detects a (numerically) singular matrix.
pub fn solve_complex(n: usize, a: &[C64], b: &[C64]) -> Option<Vec<C64>> {
    assert_eq!(a.len(), n * n);
    let m = DMatrix::from_row_slice(n, n, a);
    let lu = m.lu();
    lu.solve(&DVector::from_row_slice(b))
        .map(|x| x.iter().copied().collect())
}

/// Dense inverse (row-major).
pub fn inverse(n: usize, a: &[f64]) -> Vec<f64> {
    let inv = dense(n, a)
        .try_inverse()
        .expect("dense oracle inverse: singular matrix");
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            out.push(inv[(i, j)]);
        }
    }
    out
}

/// `exp(-alpha * A) * v` for symmetric `A` via dense eigendecomposition.
pub fn expm_sym_action(n: usize, a: &[f64], alpha: f64, v: &[f64]) -> Vec<f64> {
    let eig = dense(n, a).symmetric_eigen();
    let coeffs = eig.eigenvectors.transpose() * DVector::from_row_slice(v);
    let mut scaled = coeffs;
    for i in 0..n {
        scaled[i] *= (-alpha * eig.eigenvalues[i]).exp();
    }
    let out = &eig.eigenvectors * scaled;
    out.iter().copied().collect()
}

/// Dense matrix-vector product, row-major.
pub fn matvec(n: usize, a: &[f64], v: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; n];
    for i in 0..n {
        let mut s = 0.0;
        for j in 0..n {
            s += a[i * n + j] * v[j];
        }
        out[i] = s;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigen_of_2x2() {
        let (vals, _) = sym_eigen(2, &[2.0, 1.0, 1.0, 2.0]);
        assert!((vals[0] - 1.0).abs() < 1e-12);
        assert!((vals[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn solve_roundtrip() {
        let a = [4.0, 1.0, 1.0, 3.0];
        let x = solve(2, &a, &[1.0, 2.0]);
        let b = matvec(2, &a, &x);
        assert!((b[0] - 1.0).abs() < 1e-12 && (b[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn expm_identity_direction() {
        // exp(-t*I) v = e^{-t} v
        let v = expm_sym_action(2, &[1.0, 0.0, 0.0, 1.0], 0.5, &[1.0, 2.0]);
        assert!((v[0] - (-0.5f64).exp()).abs() < 1e-14);
        assert!((v[1] - 2.0 * (-0.5f64).exp()).abs() < 1e-14);
    }
}
