//! Small dense helpers shared by the lifting, barrier and solver modules.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};

/// Pivots below this multiple of the largest diagonal entry count as failures.
pub const PIVOT_TOL: f64 = 1e-12;

pub type Chol = Cholesky<f64, Dyn>;

/// Cholesky factorization that also rejects numerically tiny pivots.
///
/// Returns `None` unless the matrix is positive definite with every pivot
/// `L_ii^2 >= PIVOT_TOL * max_i A_ii`.
pub fn cholesky(a: &DMatrix<f64>) -> Option<Chol> {
    if a.nrows() == 0 {
        return Cholesky::new(a.clone());
    }
    if a.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let max_diag = a.diagonal().iter().fold(0.0f64, |m, &v| m.max(v));
    if max_diag <= 0.0 {
        return None;
    }
    let chol = Cholesky::new(a.clone())?;
    let floor = PIVOT_TOL * max_diag;
    let l = chol.l_dirty();
    if (0..a.nrows()).all(|i| l[(i, i)] * l[(i, i)] >= floor) {
        Some(chol)
    } else {
        None
    }
}

pub fn logdet(chol: &Chol) -> f64 {
    let l = chol.l_dirty();
    2.0 * (0..l.nrows()).map(|i| l[(i, i)].ln()).sum::<f64>()
}

/// `L^{-1} B` for the lower factor of `chol`.
pub fn lower_solve(chol: &Chol, b: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = b.clone();
    chol.l_dirty().solve_lower_triangular_mut(&mut out);
    out
}

pub fn symmetrize(a: &mut DMatrix<f64>) {
    let n = a.nrows();
    for j in 0..n {
        for i in (j + 1)..n {
            let v = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
    }
}

pub fn min_eigenvalue(a: &DMatrix<f64>) -> f64 {
    let mut s = a.clone();
    symmetrize(&mut s);
    SymmetricEigen::new(s)
        .eigenvalues
        .iter()
        .fold(f64::INFINITY, |m, &v| m.min(v))
}

pub fn max_eigenvalue(a: &DMatrix<f64>) -> f64 {
    let mut s = a.clone();
    symmetrize(&mut s);
    SymmetricEigen::new(s)
        .eigenvalues
        .iter()
        .fold(f64::NEG_INFINITY, |m, &v| m.max(v))
}

pub fn kron(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    a.kronecker(b)
}

/// Frobenius inner product.
pub fn frob(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.component_mul(b).sum()
}

pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}

pub fn dot(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    a.dot(b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cholesky_rejects_tiny_pivots() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0 + 1e-14]);
        assert!(cholesky(&a).is_none());
        let b = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let c = cholesky(&b).unwrap();
        assert!((logdet(&c) - 3.0f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial(5, 2), 10);
        assert_eq!(binomial(12, 4), 495);
        assert_eq!(binomial(3, 0), 1);
        assert_eq!(binomial(2, 3), 0);
    }
}
