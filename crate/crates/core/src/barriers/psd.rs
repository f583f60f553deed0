use std::cell::OnceCell;

use nalgebra::{DMatrix, DVector};

use super::{check_len, check_weights, fill_symmetric, head_initial_point, BarrierEval, ConeOracle};
use crate::error::Result;
use crate::exec::Exec;
use crate::lifting::{self, sdim, tri_pairs, PolyMat};
use crate::linalg::{self, Chol};
use crate::polybasis::WeightRecord;

/// Dual weighted SOS-PSD cone over `m x m` polynomial matrices.
///
/// Points are [`PolyMat`] coefficient vectors: the lower triangle of slices
/// in column-major order, `U` values per slice.
#[derive(Clone, Debug)]
pub struct WsosPsdCone {
    weights: Vec<WeightRecord>,
    u: usize,
    m: usize,
    exec: Exec,
}

impl WsosPsdCone {
    pub fn new(weights: Vec<WeightRecord>, m: usize) -> Result<Self> {
        let u = check_weights(&weights)?;
        if m == 0 {
            return Err(crate::Error::InvalidArgument("matrix side must be positive".into()));
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

struct PsdEval<'a> {
    cone: &'a WsosPsdCone,
    factors: Vec<Chol>,
    value: f64,
    t: OnceCell<Vec<DMatrix<f64>>>,
    // ordered pairs (alpha, beta) contributing to each stored slice
    pairs: Vec<Vec<(usize, usize)>>,
}

impl PsdEval<'_> {
    fn t(&self) -> &[DMatrix<f64>] {
        self.t.get_or_init(|| {
            let cone = self.cone;
            let factors = &self.factors;
            cone.exec.map(cone.weights.len(), |k| {
                let w = &cone.weights[k];
                let pt = linalg::kron(&DMatrix::identity(cone.m, cone.m), &w.p.transpose());
                let v = linalg::lower_solve(&factors[k], &pt);
                v.transpose() * v
            })
        })
    }
}

impl BarrierEval for PsdEval<'_> {
    fn value(&self) -> f64 {
        self.value
    }

    fn gradient_len(&self) -> usize {
        self.cone.u * sdim(self.cone.m)
    }

    fn gradient(&self) -> DVector<f64> {
        let nu = self.cone.u;
        let mut g = DVector::zeros(self.gradient_len());
        for (w, t) in self.cone.weights.iter().zip(self.t()) {
            for (c, set) in self.pairs.iter().enumerate() {
                for u in 0..nu {
                    let sum: f64 = set.iter().map(|&(a, b)| t[(b * nu + u, a * nu + u)]).sum();
                    g[c * nu + u] -= w.values[u] * sum;
                }
            }
        }
        g
    }

    fn hessian(&self) -> DMatrix<f64> {
        let nu = self.cone.u;
        let ts = self.t();
        let weights = &self.cone.weights;
        let pairs = &self.pairs;
        fill_symmetric(self.gradient_len(), self.cone.exec, |a, b| {
            let (ca, u) = (a / nu, a % nu);
            let (cb, v) = (b / nu, b % nu);
            let mut total = 0.0;
            for (w, t) in weights.iter().zip(ts) {
                let mut acc = 0.0;
                for &(al, be) in &pairs[ca] {
                    for &(ga, de) in &pairs[cb] {
                        acc += t[(be * nu + u, ga * nu + v)] * t[(de * nu + v, al * nu + u)];
                    }
                }
                total += w.values[u] * w.values[v] * acc;
            }
            total
        })
    }
}

impl ConeOracle for WsosPsdCone {
    fn name(&self) -> &'static str {
        "wsos_psd"
    }

    fn dim(&self) -> usize {
        self.u * sdim(self.m)
    }

    fn nu(&self) -> f64 {
        self.weights.iter().map(|w| (w.cols() * self.m) as f64).sum()
    }

    fn initial_point(&self) -> Result<DVector<f64>> {
        let head = head_initial_point(&self.weights)?;
        let mut s = PolyMat::zeros(self.u, self.m);
        for i in 0..self.m {
            s.set_slice(i, i, &head);
        }
        Ok(s.to_flat())
    }

    fn load<'a>(&'a self, s: &DVector<f64>) -> Result<Option<Box<dyn BarrierEval + 'a>>> {
        check_len(s, self.dim())?;
        let mat = PolyMat::from_flat(self.u, self.m, s.as_slice())?;
        let mut factors = Vec::with_capacity(self.weights.len());
        let mut value = 0.0;
        for w in &self.weights {
            match linalg::cholesky(&lifting::lambda_psd(w, &mat)) {
                Some(c) => {
                    value -= linalg::logdet(&c);
                    factors.push(c);
                }
                None => return Ok(None),
            }
        }
        let pairs = tri_pairs(self.m)
            .into_iter()
            .map(|(i, j)| if i == j { vec![(i, i)] } else { vec![(i, j), (j, i)] })
            .collect();
        Ok(Some(Box::new(PsdEval {
            cone: self,
            factors,
            value,
            t: OnceCell::new(),
            pairs,
        })))
    }
}
