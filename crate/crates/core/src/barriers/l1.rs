use std::cell::OnceCell;

use nalgebra::{Cholesky, DMatrix, DVector};

use super::{
    check_len, check_weights, head_initial_point, sandwich_inverse, BarrierEval, BlockArrowFactor, ConeOracle,
    HessianFactor,
};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::lifting::{self, PolyVec};
use crate::linalg::{self, Chol};
use crate::polybasis::WeightRecord;

/// Dual weighted SOS-L1 cone: every `2 x 2` arrowhead `(s_1, s_i)` is
/// positive definite, equivalently `Lambda(s_1 + s_i)` and
/// `Lambda(s_1 - s_i)` are.
///
/// The barrier is evaluated in that second form,
/// `sum_i F(s_1 + s_i) + F(s_1 - s_i) - (m - 2) F(s_1)` with `F` the scalar
/// WSOS barrier, which keeps every Hessian block a sum of positive terms.
/// The Hessian is block arrowhead (tail components do not interact), so the
/// Newton system is solved with `U x U` block eliminations instead of a
/// dense `Um x Um` factorization.
#[derive(Clone, Debug)]
pub struct WsosL1Cone {
    weights: Vec<WeightRecord>,
    u: usize,
    m: usize,
    exec: Exec,
}

impl WsosL1Cone {
    pub fn new(weights: Vec<WeightRecord>, m: usize) -> Result<Self> {
        let u = check_weights(&weights)?;
        if m < 2 {
            return Err(Error::InvalidArgument("the L1 cone needs m >= 2".into()));
        }
        Ok(Self {
            weights,
            u,
            m,
            exec: Exec::Sequential,
        })
    }

    pub fn with_exec(mut self, exec: Exec) -> Self {
        self.exec = exec;
        self
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn weights(&self) -> &[WeightRecord] {
        &self.weights
    }
}

struct L1Weight {
    head: Chol,
    plus: Vec<Chol>,
    minus: Vec<Chol>,
}

/// Per weight: `P Lambda^{-1} P^T` for `s_1` and for `s_1 +- s_i`.
struct L1Blocks {
    t0: DMatrix<f64>,
    plus: Vec<DMatrix<f64>>,
    minus: Vec<DMatrix<f64>>,
}

struct L1Eval<'a> {
    cone: &'a WsosL1Cone,
    parts: Vec<L1Weight>,
    value: f64,
    t: OnceCell<Vec<L1Blocks>>,
}

/// Largest probe error accepted from the block elimination.
const BLOCK_SOLVE_ACCURACY: f64 = 1e-8;

/// Hessian blocks: corner, arms and tails, all `U x U`.
type ArrowBlocks = (DMatrix<f64>, Vec<DMatrix<f64>>, Vec<DMatrix<f64>>);

/// Scalar WSOS Hessians summed over weights: `C` at `s_1` and `A_i`, `B_i`
/// at `s_1 + s_i` and `s_1 - s_i`.
struct SumHessians {
    c: DMatrix<f64>,
    a: Vec<DMatrix<f64>>,
    b: Vec<DMatrix<f64>>,
}

impl L1Eval<'_> {
    fn t(&self) -> &[L1Blocks] {
        self.t.get_or_init(|| {
            let cone = self.cone;
            let parts = &self.parts;
            cone.exec.map(parts.len(), |k| {
                let part = &parts[k];
                let p = &cone.weights[k].p;
                L1Blocks {
                    t0: sandwich_inverse(&part.head, p),
                    plus: part.plus.iter().map(|c| sandwich_inverse(c, p)).collect(),
                    minus: part.minus.iter().map(|c| sandwich_inverse(c, p)).collect(),
                }
            })
        })
    }

    fn sums(&self) -> SumHessians {
        let nu = self.cone.u;
        let tails = self.cone.m - 1;
        let mut out = SumHessians {
            c: DMatrix::zeros(nu, nu),
            a: vec![DMatrix::zeros(nu, nu); tails],
            b: vec![DMatrix::zeros(nu, nu); tails],
        };
        for (w, t) in self.cone.weights.iter().zip(self.t()) {
            let gg = &w.values * w.values.transpose();
            out.c += gg.component_mul(&t.t0.component_mul(&t.t0));
            for i in 0..tails {
                out.a[i] += gg.component_mul(&t.plus[i].component_mul(&t.plus[i]));
                out.b[i] += gg.component_mul(&t.minus[i].component_mul(&t.minus[i]));
            }
        }
        out
    }

    fn blocks(&self, sums: &SumHessians) -> ArrowBlocks {
        let mut corner = -(self.cone.m as f64 - 2.0) * &sums.c;
        let mut arms = Vec::with_capacity(sums.a.len());
        let mut tails = Vec::with_capacity(sums.a.len());
        for (a, b) in sums.a.iter().zip(&sums.b) {
            let tail = a + b;
            corner += &tail;
            arms.push(a - b);
            tails.push(tail);
        }
        (corner, arms, tails)
    }
}

/// `A (A + B)^{-1} B`, written around the smaller of the two so that
/// nothing large cancels.
fn parallel_sum(a: &DMatrix<f64>, b: &DMatrix<f64>, sum: &Chol) -> DMatrix<f64> {
    let small = if a.norm() <= b.norm() { a } else { b };
    let mut out = small - small * sum.solve(small);
    linalg::symmetrize(&mut out);
    out
}

impl BarrierEval for L1Eval<'_> {
    fn value(&self) -> f64 {
        self.value
    }

    fn gradient_len(&self) -> usize {
        self.cone.u * self.cone.m
    }

    fn gradient(&self) -> DVector<f64> {
        let (nu, m) = (self.cone.u, self.cone.m);
        let mut out = DMatrix::zeros(nu, m);
        for (w, t) in self.cone.weights.iter().zip(self.t()) {
            for u in 0..nu {
                let g = w.values[u];
                let both: f64 = t.plus.iter().zip(&t.minus).map(|(p, q)| p[(u, u)] + q[(u, u)]).sum();
                out[(u, 0)] += g * ((m as f64 - 2.0) * t.t0[(u, u)] - both);
                for i in 1..m {
                    out[(u, i)] -= g * (t.plus[i - 1][(u, u)] - t.minus[i - 1][(u, u)]);
                }
            }
        }
        DVector::from_column_slice(out.as_slice())
    }

    fn hessian(&self) -> DMatrix<f64> {
        let nu = self.cone.u;
        let (corner, arms, tails) = self.blocks(&self.sums());
        let mut h = DMatrix::zeros(nu * self.cone.m, nu * self.cone.m);
        h.view_mut((0, 0), (nu, nu)).copy_from(&corner);
        for (i, (arm, tail)) in arms.iter().zip(&tails).enumerate() {
            let o = (i + 1) * nu;
            h.view_mut((0, o), (nu, nu)).copy_from(arm);
            h.view_mut((o, 0), (nu, nu)).copy_from(&arm.transpose());
            h.view_mut((o, o), (nu, nu)).copy_from(tail);
        }
        h
    }

    fn hessian_factor(&self) -> Result<HessianFactor> {
        let sums = self.sums();
        let (corner, arms, tails) = self.blocks(&sums);
        // corner - sum arm tail^{-1} arm' = 4 sum A_i (A_i + B_i)^{-1} B_i - (m - 2) C
        let mut schur = -(self.cone.m as f64 - 2.0) * &sums.c;
        let mut factors = Vec::with_capacity(tails.len());
        for ((a, b), tail) in sums.a.iter().zip(&sums.b).zip(&tails) {
            let f = Cholesky::new(tail.clone()).ok_or(Error::NumericallySingularHessian)?;
            schur += 4.0 * parallel_sum(a, b, &f);
            factors.push(f);
        }
        let blocks = BlockArrowFactor::from_parts(corner, arms, tails, factors, &schur);
        match blocks {
            Ok(f) if f.probe_error() <= BLOCK_SOLVE_ACCURACY => Ok(HessianFactor::BlockArrow(f)),
            _ => HessianFactor::dense(&self.hessian()),
        }
    }
}

impl ConeOracle for WsosL1Cone {
    fn name(&self) -> &'static str {
        "wsos_l1"
    }

    fn dim(&self) -> usize {
        self.u * self.m
    }

    fn nu(&self) -> f64 {
        self.weights.iter().map(|w| (w.cols() * self.m) as f64).sum()
    }

    fn initial_point(&self) -> Result<DVector<f64>> {
        let mut s = PolyVec::zeros(self.u, self.m);
        s.coeffs.set_column(0, &head_initial_point(&self.weights)?);
        Ok(s.to_flat())
    }

    fn load<'a>(&'a self, s: &DVector<f64>) -> Result<Option<Box<dyn BarrierEval + 'a>>> {
        check_len(s, self.dim())?;
        let vec = PolyVec::from_flat(self.u, self.m, s.as_slice())?;
        let mut parts = Vec::with_capacity(self.weights.len());
        let mut value = 0.0;
        for w in &self.weights {
            let Some(head) = linalg::cholesky(&lifting::lambda_sos(w, &vec.component(0))) else {
                return Ok(None);
            };
            let mut plus = Vec::with_capacity(self.m - 1);
            let mut minus = Vec::with_capacity(self.m - 1);
            for i in 1..self.m {
                let (s1, si) = (vec.component(0), vec.component(i));
                let (Some(p), Some(q)) = (
                    linalg::cholesky(&lifting::lambda_sos(w, &(&s1 + &si))),
                    linalg::cholesky(&lifting::lambda_sos(w, &(&s1 - &si))),
                ) else {
                    return Ok(None);
                };
                value -= linalg::logdet(&p) + linalg::logdet(&q);
                plus.push(p);
                minus.push(q);
            }
            value += (self.m as f64 - 2.0) * linalg::logdet(&head);
            parts.push(L1Weight { head, plus, minus });
        }
        Ok(Some(Box::new(L1Eval {
            cone: self,
            parts,
            value,
            t: OnceCell::new(),
        })))
    }
}
