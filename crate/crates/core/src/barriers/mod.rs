//! Barrier oracles for the dual weighted SOS cones.
//!
//! Every cone implements [`ConeOracle`]. [`ConeOracle::load`] performs the
//! membership check and, on success, returns a [`BarrierEval`] that caches
//! the factorizations needed for the value, gradient and Hessian at that
//! point. Barriers of weighted cones are sums over the weight records.
//!
//! | cone | dimension | parameter |
//! |------|-----------|-----------|
//! | [`WsosCone`] | `U` | `sum L_k` |
//! | [`WsosPsdCone`] | `U m(m+1)/2` | `sum L_k m` |
//! | [`WsosL2Cone`] | `U m` | `sum 2 L_k` |
//! | [`WsosL1Cone`] | `U m` | `sum L_k m` |

use std::fmt::Debug;

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::lifting;
use crate::linalg::{self, Chol};
use crate::polybasis::WeightRecord;

mod l1;
mod l2;
mod psd;
mod wsos;

pub use l1::WsosL1Cone;
pub use l2::WsosL2Cone;
pub use psd::WsosPsdCone;
pub use wsos::WsosCone;

/// Uniform contract consumed by the interior-point solver.
pub trait ConeOracle: Debug + Send + Sync {
    fn name(&self) -> &'static str;

    /// Ambient dimension.
    fn dim(&self) -> usize;

    /// Barrier parameter.
    fn nu(&self) -> f64;

    fn initial_point(&self) -> Result<DVector<f64>>;

    /// Strict feasibility check. `Ok(None)` when `s` is not in the interior.
    fn load<'a>(&'a self, s: &DVector<f64>) -> Result<Option<Box<dyn BarrierEval + 'a>>>;

    fn feasibility(&self, s: &DVector<f64>) -> Result<bool> {
        Ok(self.load(s)?.is_some())
    }

    fn barrier_value(&self, s: &DVector<f64>) -> Result<f64> {
        Ok(self.load(s)?.ok_or(Error::InfeasiblePoint)?.value())
    }

    fn gradient(&self, s: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(self.load(s)?.ok_or(Error::InfeasiblePoint)?.gradient())
    }

    fn hessian(&self, s: &DVector<f64>) -> Result<DMatrix<f64>> {
        Ok(self.load(s)?.ok_or(Error::InfeasiblePoint)?.hessian())
    }

    fn hessian_inverse_apply(&self, s: &DVector<f64>, rhs: &DVector<f64>) -> Result<DVector<f64>> {
        self.load(s)?
            .ok_or(Error::InfeasiblePoint)?
            .hessian_inverse_apply(rhs)
    }
}

/// Barrier derivatives at one strictly feasible point.
pub trait BarrierEval {
    fn value(&self) -> f64;
    fn gradient(&self) -> DVector<f64>;
    fn hessian(&self) -> DMatrix<f64>;

    fn hessian_factor(&self) -> Result<HessianFactor> {
        HessianFactor::dense(&self.hessian())
    }

    fn hessian_inverse_apply(&self, rhs: &DVector<f64>) -> Result<DVector<f64>> {
        if rhs.len() != self.gradient_len() {
            return Err(Error::shape(self.gradient_len(), rhs.len()));
        }
        Ok(self.hessian_factor()?.solve_vec(rhs))
    }

    fn gradient_len(&self) -> usize;
}

/// Factorized barrier Hessian.
#[derive(Clone, Debug)]
pub enum HessianFactor {
    Dense(Chol),
    BlockArrow(BlockArrowFactor),
}

impl HessianFactor {
    pub fn dense(h: &DMatrix<f64>) -> Result<Self> {
        if h.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericallySingularHessian);
        }
        Cholesky::new(h.clone())
            .map(HessianFactor::Dense)
            .ok_or(Error::NumericallySingularHessian)
    }

    pub fn dim(&self) -> usize {
        match self {
            HessianFactor::Dense(c) => c.l_dirty().nrows(),
            HessianFactor::BlockArrow(b) => b.block * (b.tails.len() + 1),
        }
    }

    pub fn solve(&self, rhs: &DMatrix<f64>) -> DMatrix<f64> {
        match self {
            HessianFactor::Dense(c) => c.solve(rhs),
            HessianFactor::BlockArrow(b) => b.solve(rhs),
        }
    }

    pub fn solve_vec(&self, rhs: &DVector<f64>) -> DVector<f64> {
        let m = DMatrix::from_column_slice(rhs.len(), 1, rhs.as_slice());
        DVector::from_column_slice(self.solve(&m).as_slice())
    }
}

/// Block arrowhead Hessian `[[H_11, H_1i], [H_i1, H_ii]]` with zero blocks
/// between distinct trailing components, eliminated through the Schur
/// complement of the corner block.
#[derive(Clone, Debug)]
pub struct BlockArrowFactor {
    block: usize,
    head: DMatrix<f64>,
    arms: Vec<DMatrix<f64>>,
    tail_blocks: Vec<DMatrix<f64>>,
    tails: Vec<Chol>,
    corner: Chol,
}


impl BlockArrowFactor {
    /// `corner` is `H_11`, `arms[i]` is `H_1(i+2)` and `tails[i]` is `H_(i+2)(i+2)`.
    pub fn new(corner: &DMatrix<f64>, arms: Vec<DMatrix<f64>>, tails: &[DMatrix<f64>]) -> Result<Self> {
        let factors = tails
            .iter()
            .map(|t| Cholesky::new(t.clone()).ok_or(Error::NumericallySingularHessian))
            .collect::<Result<Vec<_>>>()?;
        let mut schur = corner.clone();
        for (arm, tail) in arms.iter().zip(&factors) {
            schur -= arm * tail.solve(&arm.transpose());
        }
        Self::from_parts(corner.clone(), arms, tails.to_vec(), factors, &schur)
    }

    /// Assembles from factored tails and a Schur complement of the corner
    /// computed by the caller, typically in a cancellation-free form.
    pub fn from_parts(
        corner: DMatrix<f64>,
        arms: Vec<DMatrix<f64>>,
        tail_blocks: Vec<DMatrix<f64>>,
        tails: Vec<Chol>,
        schur: &DMatrix<f64>,
    ) -> Result<Self> {
        if arms.len() != tails.len() || tail_blocks.len() != tails.len() {
            return Err(Error::shape(tails.len(), arms.len()));
        }
        let mut schur = schur.clone();
        linalg::symmetrize(&mut schur);
        let factor = Cholesky::new(schur).ok_or(Error::NumericallySingularHessian)?;
        Ok(Self {
            block: corner.nrows(),
            head: corner,
            arms,
            tail_blocks,
            tails,
            corner: factor,
        })
    }

    /// The unfactored matrix times `x`.
    pub fn apply(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let b = self.block;
        let k = x.ncols();
        let mut out = DMatrix::zeros(x.nrows(), k);
        let x1 = x.view((0, 0), (b, k));
        let mut head = &self.head * x1;
        for (i, (arm, tail)) in self.arms.iter().zip(&self.tail_blocks).enumerate() {
            let xi = x.view(((i + 1) * b, 0), (b, k));
            head += arm * xi;
            out.view_mut(((i + 1) * b, 0), (b, k))
                .copy_from(&(arm.transpose() * x1 + tail * xi));
        }
        out.view_mut((0, 0), (b, k)).copy_from(&head);
        out
    }

    /// Worst relative error of `solve(apply(z))` over a few fixed probes.
    /// Elimination through the corner is not backward stable, so callers
    /// use this to decide whether to fall back to a dense factorization.
    pub fn probe_error(&self) -> f64 {
        let n = self.block * (self.tails.len() + 1);
        let probes = DMatrix::from_fn(n, 2, |i, j| if j == 1 && i % 2 == 1 { -0.5 } else { 1.0 });
        let back = self.solve(&self.apply(&probes));
        (back - &probes).amax()
    }

    pub fn solve(&self, rhs: &DMatrix<f64>) -> DMatrix<f64> {
        let b = self.block;
        let k = rhs.ncols();
        let part = |i: usize| rhs.view((i * b, 0), (b, k)).into_owned();
        let mut head = part(0);
        let scaled: Vec<DMatrix<f64>> = self
            .tails
            .iter()
            .enumerate()
            .map(|(i, t)| t.solve(&part(i + 1)))
            .collect();
        for (arm, z) in self.arms.iter().zip(&scaled) {
            head -= arm * z;
        }
        let x1 = self.corner.solve(&head);
        let mut out = DMatrix::zeros(rhs.nrows(), k);
        out.view_mut((0, 0), (b, k)).copy_from(&x1);
        for (i, (arm, tail)) in self.arms.iter().zip(&self.tails).enumerate() {
            let r = part(i + 1) - arm.transpose() * &x1;
            out.view_mut(((i + 1) * b, 0), (b, k)).copy_from(&tail.solve(&r));
        }
        out
    }
}

pub(crate) fn check_weights(weights: &[WeightRecord]) -> Result<usize> {
    let first = weights
        .first()
        .ok_or_else(|| Error::InvalidArgument("at least one weight record is required".into()))?;
    let u = first.points();
    if let Some(w) = weights.iter().find(|w| w.points() != u) {
        return Err(Error::shape(format!("{u} points per weight"), w.points()));
    }
    Ok(u)
}

pub(crate) fn check_len(s: &DVector<f64>, dim: usize) -> Result<()> {
    if s.len() != dim {
        return Err(Error::shape(dim, s.len()));
    }
    Ok(())
}

/// `P Lambda^{-1} P^T` from the Cholesky factor of `Lambda`.
pub(crate) fn sandwich_inverse(chol: &Chol, p: &DMatrix<f64>) -> DMatrix<f64> {
    let v = linalg::lower_solve(chol, &p.transpose());
    v.transpose() * v
}

/// Least-squares fit `argmin_s ||Lambda(s) - I||_F` for one weight record.
pub fn identity_fit(w: &WeightRecord) -> Result<DVector<f64>> {
    let gram = &w.p * w.p.transpose();
    let u = w.points();
    let g = &w.values;
    let normal = DMatrix::from_fn(u, u, |a, b| g[a] * g[b] * gram[(a, b)] * gram[(a, b)]);
    let rhs = DVector::from_fn(u, |a, _| g[a] * gram[(a, a)]);
    let chol = Cholesky::new(normal)
        .ok_or_else(|| Error::DegenerateBasis("identity least-squares system is rank deficient".into()))?;
    Ok(chol.solve(&rhs))
}

/// Relative interiority below which a candidate initial point is rejected.
const INITIAL_MARGIN: f64 = 1e-6;

/// Smallest eigenvalue of any weight lift, relative to the largest
/// eigenvalue of the first one.
fn interior_margin(weights: &[WeightRecord], s: &DVector<f64>) -> f64 {
    let scale = linalg::max_eigenvalue(&lifting::lambda_sos(&weights[0], s));
    if scale <= 0.0 {
        return f64::NEG_INFINITY;
    }
    weights
        .iter()
        .map(|w| linalg::min_eigenvalue(&lifting::lambda_sos(w, s)) / scale)
        .fold(f64::INFINITY, f64::min)
}

/// The head component of every initial point: the identity fit for the
/// first weight, or a constant vector when the fit lies too close to the
/// boundary for some other weight.
pub(crate) fn head_initial_point(weights: &[WeightRecord]) -> Result<DVector<f64>> {
    let fit = identity_fit(&weights[0])?;
    if interior_margin(weights, &fit) >= INITIAL_MARGIN {
        return Ok(fit);
    }
    let w0 = &weights[0];
    let trace: f64 = (0..w0.points())
        .map(|u| w0.values[u] * w0.p.row(u).norm_squared())
        .sum();
    let constant = DVector::from_element(w0.points(), w0.cols() as f64 / trace);
    if interior_margin(weights, &constant) >= INITIAL_MARGIN {
        Ok(constant)
    } else {
        Err(Error::DegenerateBasis(
            "no interior initial point: some weight lift is singular at constant values".into(),
        ))
    }
}

/// Symmetric matrix with entries `entry(a, b)`, rows computed under `exec`.
pub(crate) fn fill_symmetric<F>(dim: usize, exec: Exec, entry: F) -> DMatrix<f64>
where
    F: Fn(usize, usize) -> f64 + Sync + Send,
{
    let rows = exec.map(dim, |a| (0..=a).map(|b| entry(a, b)).collect::<Vec<f64>>());
    let mut h = DMatrix::zeros(dim, dim);
    for (a, row) in rows.into_iter().enumerate() {
        for (b, v) in row.into_iter().enumerate() {
            h[(a, b)] = v;
            h[(b, a)] = v;
        }
    }
    h
}
