use std::cell::OnceCell;

use nalgebra::{DMatrix, DVector};

use super::{check_len, check_weights, head_initial_point, BarrierEval, ConeOracle};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::lifting::{self, BlockGrid, PolyVec};
use crate::linalg::{self, Chol};
use crate::polybasis::WeightRecord;

/// Dual weighted SOS-L2 cone: the block arrowhead lift is positive definite.
///
/// The barrier is `-logdet Pi - logdet Lambda(s_1)` per weight, where `Pi`
/// is the Schur complement of the arrowhead, so only `L x L` factorizations
/// are needed.
#[derive(Clone, Debug)]
pub struct WsosL2Cone {
    weights: Vec<WeightRecord>,
    u: usize,
    m: usize,
    exec: Exec,
}

impl WsosL2Cone {
    pub fn new(weights: Vec<WeightRecord>, m: usize) -> Result<Self> {
        let u = check_weights(&weights)?;
        if m < 2 {
            return Err(Error::InvalidArgument("the L2 cone needs m >= 2".into()));
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

/// Factorizations of one weight's arrowhead.
pub(super) struct ArrowFactors {
    pub head: Chol,
    pub lifts: Vec<DMatrix<f64>>,
}

impl ArrowFactors {
    /// `None` if `Lambda(s_1)` is not positive definite.
    pub fn new(w: &WeightRecord, s: &PolyVec) -> Option<Self> {
        let head = linalg::cholesky(&lifting::lambda_sos(w, &s.component(0)))?;
        let lifts = (1..s.m()).map(|i| lifting::lambda_sos(w, &s.component(i))).collect();
        Some(Self { head, lifts })
    }

    /// `P Lambda_1^{-1} P^T` and `Lambda_i Lambda_1^{-1} P^T` for each tail.
    pub fn sandwiches(&self, p: &DMatrix<f64>) -> (DMatrix<f64>, Vec<DMatrix<f64>>) {
        let a = linalg::lower_solve(&self.head, &p.transpose());
        let g = self.head.solve(&p.transpose());
        let r = a.transpose() * a;
        let ri = self.lifts.iter().map(|l| l * &g).collect();
        (r, ri)
    }
}

struct L2Weight {
    arrow: ArrowFactors,
    pi: Chol,
}

struct L2Eval<'a> {
    cone: &'a WsosL2Cone,
    parts: Vec<L2Weight>,
    value: f64,
    // per weight: (R, T grid)
    t: OnceCell<Vec<(DMatrix<f64>, BlockGrid)>>,
}

impl L2Eval<'_> {
    fn t(&self) -> &[(DMatrix<f64>, BlockGrid)] {
        self.t.get_or_init(|| {
            let cone = self.cone;
            let parts = &self.parts;
            cone.exec.map(parts.len(), |k| {
                let part = &parts[k];
                let p = &cone.weights[k].p;
                let (r, ri) = part.arrow.sandwiches(p);
                let z0 = linalg::lower_solve(&part.pi, &p.transpose());
                let zi: Vec<DMatrix<f64>> = ri.iter().map(|x| linalg::lower_solve(&part.pi, x)).collect();
                let m = cone.m;
                let mut grid = vec![vec![DMatrix::zeros(0, 0); m]; m];
                grid[0][0] = z0.transpose() * &z0;
                for j in 1..m {
                    let b = -(z0.transpose() * &zi[j - 1]);
                    grid[j][0] = b.transpose();
                    grid[0][j] = b;
                }
                for i in 1..m {
                    for j in i..m {
                        let mut b = zi[i - 1].transpose() * &zi[j - 1];
                        if i == j {
                            b += &r;
                        }
                        grid[j][i] = b.transpose();
                        grid[i][j] = b;
                    }
                }
                (r, grid)
            })
        })
    }
}

fn weight_outer(g: &DVector<f64>) -> DMatrix<f64> {
    g * g.transpose()
}

impl BarrierEval for L2Eval<'_> {
    fn value(&self) -> f64 {
        self.value
    }

    fn gradient_len(&self) -> usize {
        self.cone.u * self.cone.m
    }

    fn gradient(&self) -> DVector<f64> {
        let (nu, m) = (self.cone.u, self.cone.m);
        let mut out = DMatrix::zeros(nu, m);
        for (w, (r, t)) in self.cone.weights.iter().zip(self.t()) {
            for u in 0..nu {
                let g = w.values[u];
                let diag: f64 = (0..m).map(|j| t[j][j][(u, u)]).sum();
                out[(u, 0)] += g * (-diag + (m as f64 - 2.0) * r[(u, u)]);
                for i in 1..m {
                    out[(u, i)] -= 2.0 * g * t[i][0][(u, u)];
                }
            }
        }
        DVector::from_column_slice(out.as_slice())
    }

    fn hessian(&self) -> DMatrix<f64> {
        let (nu, m) = (self.cone.u, self.cone.m);
        let ts = self.t();
        let weights = &self.cone.weights;
        // lower-triangle block pairs (i, j) with i >= j
        let pairs: Vec<(usize, usize)> = (0..m).flat_map(|j| (j..m).map(move |i| (i, j))).collect();
        let blocks = self.cone.exec.map(pairs.len(), |q| {
            let (i, j) = pairs[q];
            let mut acc = DMatrix::zeros(nu, nu);
            for (w, (r, t)) in weights.iter().zip(ts) {
                let mut b = DMatrix::zeros(nu, nu);
                if i == 0 {
                    for blk in t.iter().flatten() {
                        b += blk.component_mul(blk);
                    }
                    b -= (m as f64 - 2.0) * r.component_mul(r);
                } else if j == 0 {
                    for (x, y) in t[0].iter().zip(&t[i]) {
                        b += 2.0 * x.component_mul(y);
                    }
                } else {
                    b += 2.0 * (t[0][0].component_mul(&t[i][j]) + t[i][0].component_mul(&t[0][j]));
                }
                acc += weight_outer(&w.values).component_mul(&b);
            }
            acc
        });
        let mut h = DMatrix::zeros(nu * m, nu * m);
        for (&(i, j), b) in pairs.iter().zip(blocks) {
            h.view_mut((i * nu, j * nu), (nu, nu)).copy_from(&b);
            if i != j {
                h.view_mut((j * nu, i * nu), (nu, nu)).copy_from(&b.transpose());
            }
        }
        linalg::symmetrize(&mut h);
        h
    }
}

impl ConeOracle for WsosL2Cone {
    fn name(&self) -> &'static str {
        "wsos_l2"
    }

    fn dim(&self) -> usize {
        self.u * self.m
    }

    fn nu(&self) -> f64 {
        self.weights.iter().map(|w| 2.0 * w.cols() as f64).sum()
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
            let Some(arrow) = ArrowFactors::new(w, &vec) else {
                return Ok(None);
            };
            let Some(pi) = linalg::cholesky(&lifting::schur_pi(w, &vec, &arrow.head)) else {
                return Ok(None);
            };
            value -= linalg::logdet(&pi) + linalg::logdet(&arrow.head);
            parts.push(L2Weight { arrow, pi });
        }
        Ok(Some(Box::new(L2Eval {
            cone: self,
            parts,
            value,
            t: OnceCell::new(),
        })))
    }
}
