use std::cell::OnceCell;

use nalgebra::{DMatrix, DVector};

use super::{check_len, check_weights, head_initial_point, sandwich_inverse, BarrierEval, ConeOracle};
use crate::error::Result;
use crate::exec::Exec;
use crate::lifting;
use crate::linalg::{self, Chol};
use crate::polybasis::WeightRecord;

/// Dual weighted SOS cone: `s` such that every `Lambda_k(s)` is positive definite.
#[derive(Clone, Debug)]
pub struct WsosCone {
    weights: Vec<WeightRecord>,
    u: usize,
    exec: Exec,
}

impl WsosCone {
    pub fn new(weights: Vec<WeightRecord>) -> Result<Self> {
        let u = check_weights(&weights)?;
        Ok(Self {
            weights,
            u,
            exec: Exec::Sequential,
        })
    }

    pub fn with_exec(mut self, exec: Exec) -> Self {
        self.exec = exec;
        self
    }

    pub fn weights(&self) -> &[WeightRecord] {
        &self.weights
    }
}

struct WsosEval<'a> {
    cone: &'a WsosCone,
    factors: Vec<Chol>,
    value: f64,
    t: OnceCell<Vec<DMatrix<f64>>>,
}

impl WsosEval<'_> {
    fn t(&self) -> &[DMatrix<f64>] {
        self.t.get_or_init(|| {
            let cone = self.cone;
            let factors = &self.factors;
            cone.exec.map(cone.weights.len(), |k| {
                sandwich_inverse(&factors[k], &cone.weights[k].p)
            })
        })
    }
}

impl BarrierEval for WsosEval<'_> {
    fn value(&self) -> f64 {
        self.value
    }

    fn gradient_len(&self) -> usize {
        self.cone.u
    }

    fn gradient(&self) -> DVector<f64> {
        let mut g = DVector::zeros(self.cone.u);
        for (w, t) in self.cone.weights.iter().zip(self.t()) {
            for u in 0..self.cone.u {
                g[u] -= w.values[u] * t[(u, u)];
            }
        }
        g
    }

    fn hessian(&self) -> DMatrix<f64> {
        let n = self.cone.u;
        let mut h = DMatrix::zeros(n, n);
        for (w, t) in self.cone.weights.iter().zip(self.t()) {
            let g = &w.values;
            h += DMatrix::from_fn(n, n, |a, b| g[a] * g[b] * t[(a, b)] * t[(a, b)]);
        }
        h
    }
}

impl ConeOracle for WsosCone {
    fn name(&self) -> &'static str {
        "wsos"
    }

    fn dim(&self) -> usize {
        self.u
    }

    fn nu(&self) -> f64 {
        self.weights.iter().map(|w| w.cols() as f64).sum()
    }

    fn initial_point(&self) -> Result<DVector<f64>> {
        head_initial_point(&self.weights)
    }

    fn load<'a>(&'a self, s: &DVector<f64>) -> Result<Option<Box<dyn BarrierEval + 'a>>> {
        check_len(s, self.u)?;
        let mut factors = Vec::with_capacity(self.weights.len());
        let mut value = 0.0;
        for w in &self.weights {
            match linalg::cholesky(&lifting::lambda_sos(w, s)) {
                Some(c) => {
                    value -= linalg::logdet(&c);
                    factors.push(c);
                }
                None => return Ok(None),
            }
        }
        Ok(Some(Box::new(WsosEval {
            cone: self,
            factors,
            value,
            t: OnceCell::new(),
        })))
    }
}
