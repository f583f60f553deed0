//! Lifting operators for the scalar SOS, SOS-PSD and SOS-L2 cones.
//!
//! All operators act per weight record `(g, P_k)`: the scalar lift is
//! `P_k^T Diag(g * s) P_k`, and the matrix/vector lifts assemble `L_k x L_k`
//! blocks of scalar lifts. Coefficient tensors store one column of values
//! per polynomial component.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{self, Chol};
use crate::polybasis::WeightRecord;

/// `m(m+1)/2`.
pub fn sdim(m: usize) -> usize {
    m * (m + 1) / 2
}

/// Column of the lower-triangle entry `(i, j)`, `i >= j`, in column-major order.
pub fn tri_index(m: usize, i: usize, j: usize) -> usize {
    debug_assert!(i >= j && i < m);
    // column j starts after sum_{c<j} (m - c) entries
    j * m - j * j.saturating_sub(1) / 2 + (i - j)
}

/// `(i, j)` pairs in storage order; the inverse of [`tri_index`].
pub fn tri_pairs(m: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(sdim(m));
    for j in 0..m {
        for i in j..m {
            out.push((i, j));
        }
    }
    out
}

/// Values of an `m`-vector of polynomials, one column per component.
#[derive(Clone, Debug, PartialEq)]
pub struct PolyVec {
    pub coeffs: DMatrix<f64>,
}

impl PolyVec {
    pub fn new(coeffs: DMatrix<f64>) -> Self {
        Self { coeffs }
    }

    pub fn zeros(u: usize, m: usize) -> Self {
        Self::new(DMatrix::zeros(u, m))
    }

    /// Reads a flat component-major vector of length `u * m`.
    pub fn from_flat(u: usize, m: usize, flat: &[f64]) -> Result<Self> {
        if flat.len() != u * m {
            return Err(Error::shape(u * m, flat.len()));
        }
        Ok(Self::new(DMatrix::from_column_slice(u, m, flat)))
    }

    pub fn to_flat(&self) -> DVector<f64> {
        DVector::from_column_slice(self.coeffs.as_slice())
    }

    pub fn m(&self) -> usize {
        self.coeffs.ncols()
    }

    pub fn u(&self) -> usize {
        self.coeffs.nrows()
    }

    pub fn component(&self, i: usize) -> DVector<f64> {
        self.coeffs.column(i).into_owned()
    }

    pub fn inner(&self, other: &PolyVec) -> f64 {
        self.coeffs.dot(&other.coeffs)
    }
}

/// Values of a symmetric `m x m` polynomial matrix, storing the lower
/// triangle column-major. Off-diagonal columns hold the plain entry values.
#[derive(Clone, Debug, PartialEq)]
pub struct PolyMat {
    pub m: usize,
    pub coeffs: DMatrix<f64>,
}

impl PolyMat {
    pub fn new(m: usize, coeffs: DMatrix<f64>) -> Self {
        assert_eq!(coeffs.ncols(), sdim(m));
        Self { m, coeffs }
    }

    pub fn zeros(u: usize, m: usize) -> Self {
        Self::new(m, DMatrix::zeros(u, sdim(m)))
    }

    pub fn from_flat(u: usize, m: usize, flat: &[f64]) -> Result<Self> {
        if flat.len() != u * sdim(m) {
            return Err(Error::shape(u * sdim(m), flat.len()));
        }
        Ok(Self::new(m, DMatrix::from_column_slice(u, sdim(m), flat)))
    }

    pub fn to_flat(&self) -> DVector<f64> {
        DVector::from_column_slice(self.coeffs.as_slice())
    }

    pub fn u(&self) -> usize {
        self.coeffs.nrows()
    }

    /// Slice `(i, j)` in either triangle.
    pub fn slice(&self, i: usize, j: usize) -> DVector<f64> {
        let (a, b) = if i >= j { (i, j) } else { (j, i) };
        self.coeffs.column(tri_index(self.m, a, b)).into_owned()
    }

    pub fn set_slice(&mut self, i: usize, j: usize, v: &DVector<f64>) {
        let (a, b) = if i >= j { (i, j) } else { (j, i) };
        let c = tri_index(self.m, a, b);
        self.coeffs.set_column(c, v);
    }

    /// Inner product of the full symmetric matrices (off-diagonal slices
    /// counted twice).
    pub fn inner(&self, other: &PolyMat) -> f64 {
        tri_pairs(self.m)
            .iter()
            .enumerate()
            .map(|(c, &(i, j))| {
                let w = if i == j { 1.0 } else { 2.0 };
                w * self.coeffs.column(c).dot(&other.coeffs.column(c))
            })
            .sum()
    }

    /// The `m x m` matrix of values at interpolation point `u`.
    pub fn at_point(&self, u: usize) -> DMatrix<f64> {
        DMatrix::from_fn(self.m, self.m, |i, j| {
            let (a, b) = if i >= j { (i, j) } else { (j, i) };
            self.coeffs[(u, tri_index(self.m, a, b))]
        })
    }
}

/// Square grid of equally sized blocks.
pub type BlockGrid = Vec<Vec<DMatrix<f64>>>;

pub fn assemble_blocks(grid: &BlockGrid) -> DMatrix<f64> {
    let m = grid.len();
    let l = grid[0][0].nrows();
    let mut out = DMatrix::zeros(l * m, l * m);
    for (i, row) in grid.iter().enumerate() {
        for (j, b) in row.iter().enumerate() {
            out.view_mut((i * l, j * l), (l, l)).copy_from(b);
        }
    }
    out
}

pub fn split_blocks(a: &DMatrix<f64>, m: usize) -> BlockGrid {
    let l = a.nrows() / m;
    (0..m)
        .map(|i| (0..m).map(|j| a.view((i * l, j * l), (l, l)).into_owned()).collect())
        .collect()
}

/// `P_k^T Diag(g * s) P_k`.
pub fn lambda_sos(w: &WeightRecord, s: &DVector<f64>) -> DMatrix<f64> {
    let mut scaled = w.p.clone();
    for (u, mut row) in scaled.row_iter_mut().enumerate() {
        row *= w.values[u] * s[u];
    }
    let mut out = w.p.transpose() * scaled;
    linalg::symmetrize(&mut out);
    out
}

/// `g * diag(P_k S P_k^T)`.
pub fn lambda_sos_adjoint(w: &WeightRecord, s: &DMatrix<f64>) -> DVector<f64> {
    let ps = &w.p * s;
    DVector::from_fn(w.points(), |u, _| w.values[u] * ps.row(u).dot(&w.p.row(u)))
}

/// Block `(i, j)` is `lambda_sos` of slice `(i, j)`, for both triangles.
pub fn lambda_psd(w: &WeightRecord, s: &PolyMat) -> DMatrix<f64> {
    let l = w.cols();
    let m = s.m;
    let mut out = DMatrix::zeros(l * m, l * m);
    for (c, &(i, j)) in tri_pairs(m).iter().enumerate() {
        let block = lambda_sos(w, &s.coeffs.column(c).into_owned());
        out.view_mut((i * l, j * l), (l, l)).copy_from(&block);
        if i != j {
            out.view_mut((j * l, i * l), (l, l)).copy_from(&block.transpose());
        }
    }
    out
}

/// Slice `(i, j)` is `lambda_sos_adjoint` of block `(i, j)`.
pub fn lambda_psd_adjoint(w: &WeightRecord, s: &DMatrix<f64>, m: usize) -> PolyMat {
    let l = w.cols();
    let mut out = PolyMat::zeros(w.points(), m);
    for (c, &(i, j)) in tri_pairs(m).iter().enumerate() {
        let block = s.view((i * l, j * l), (l, l)).into_owned();
        out.coeffs.set_column(c, &lambda_sos_adjoint(w, &block));
    }
    out
}

/// Block arrowhead lift: `Lambda(s_1)` on the diagonal, `Lambda(s_i)` in the
/// first block row and column.
pub fn lambda_l2(w: &WeightRecord, s: &PolyVec) -> DMatrix<f64> {
    let l = w.cols();
    let m = s.m();
    let mut out = DMatrix::zeros(l * m, l * m);
    let head = lambda_sos(w, &s.component(0));
    for i in 0..m {
        out.view_mut((i * l, i * l), (l, l)).copy_from(&head);
    }
    for i in 1..m {
        let b = lambda_sos(w, &s.component(i));
        out.view_mut((0, i * l), (l, l)).copy_from(&b);
        out.view_mut((i * l, 0), (l, l)).copy_from(&b);
    }
    out
}

pub fn lambda_l2_adjoint(w: &WeightRecord, s: &DMatrix<f64>, m: usize) -> PolyVec {
    let l = w.cols();
    let block = |i: usize, j: usize| s.view((i * l, j * l), (l, l)).into_owned();
    let mut out = PolyVec::zeros(w.points(), m);
    let mut head = DVector::zeros(w.points());
    for j in 0..m {
        head += lambda_sos_adjoint(w, &block(j, j));
    }
    out.coeffs.set_column(0, &head);
    for i in 1..m {
        let v = lambda_sos_adjoint(w, &block(0, i)) + lambda_sos_adjoint(w, &block(i, 0));
        out.coeffs.set_column(i, &v);
    }
    out
}

/// `Lambda(s_1) - sum_{i>=2} Lambda(s_i) Lambda(s_1)^{-1} Lambda(s_i)` given
/// the Cholesky factor of `Lambda(s_1)`.
pub fn schur_pi(w: &WeightRecord, s: &PolyVec, head: &Chol) -> DMatrix<f64> {
    let mut pi = lambda_sos(w, &s.component(0));
    for i in 1..s.m() {
        let y = linalg::lower_solve(head, &lambda_sos(w, &s.component(i)));
        pi -= y.transpose() * y;
    }
    linalg::symmetrize(&mut pi);
    pi
}

/// All blocks of `lambda_l2(s)^{-1}` from two `L x L` factorizations.
///
/// With `Pi` the Schur complement, the inverse is `Pi^{-1}` in the corner,
/// `-Pi^{-1} Lambda_j Lambda_1^{-1}` along the first block row, and
/// `delta_ij Lambda_1^{-1} + Lambda_1^{-1} Lambda_i Pi^{-1} Lambda_j Lambda_1^{-1}`
/// elsewhere.
pub fn block_arrow_inverse_blocks(w: &WeightRecord, s: &PolyVec) -> Result<BlockGrid> {
    let m = s.m();
    let l = w.cols();
    let head = linalg::cholesky(&lambda_sos(w, &s.component(0))).ok_or(Error::SingularPoint)?;
    let pi = linalg::cholesky(&schur_pi(w, s, &head)).ok_or(Error::SingularPoint)?;
    let head_inv = head.inverse();
    let pi_inv = pi.inverse();
    // c_i = Lambda_1^{-1} Lambda_i, so Lambda_i Lambda_1^{-1} = c_i^T
    let c: Vec<DMatrix<f64>> = (1..m)
        .map(|i| head.solve(&lambda_sos(w, &s.component(i))))
        .collect();
    let mut grid = vec![vec![DMatrix::zeros(l, l); m]; m];
    grid[0][0] = pi_inv.clone();
    for j in 1..m {
        let b = -(&pi_inv * c[j - 1].transpose());
        grid[j][0] = b.transpose();
        grid[0][j] = b;
    }
    for i in 1..m {
        let left = &c[i - 1] * &pi_inv;
        for j in 1..m {
            let mut b = &left * c[j - 1].transpose();
            if i == j {
                b += &head_inv;
            }
            grid[i][j] = b;
        }
    }
    Ok(grid)
}

/// Coefficient image of the arrow matrix: `q_1` on the diagonal, `q_i` in
/// the first column, zeros elsewhere.
pub fn arrow_embed(q: &PolyVec) -> PolyMat {
    let m = q.m();
    let mut out = PolyMat::zeros(q.u(), m);
    let head = q.component(0);
    for i in 0..m {
        out.set_slice(i, i, &head);
    }
    for i in 1..m {
        out.set_slice(i, 0, &q.component(i));
    }
    out
}
