//! Independent dense oracles shared by the integration tests.
//!
//! Nothing here calls the library's lifting or barrier internals; lifted
//! matrices are assembled entry by entry from the weight records.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sos_cones::barriers::{ConeOracle, WsosCone, WsosL1Cone, WsosL2Cone, WsosPsdCone};
use sos_cones::polybasis::{exponents, BasisContext, ChebyshevPoly, WeightRecord};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn box_weights(n: usize, d: usize, seed: u64) -> Vec<WeightRecord> {
    BasisContext::new(n, d, seed).unwrap().weights
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Kind {
    Wsos,
    Psd,
    L2,
    L1,
}

impl Kind {
    pub const ALL: [Kind; 4] = [Kind::Wsos, Kind::Psd, Kind::L2, Kind::L1];

    pub fn build(self, w: Vec<WeightRecord>, m: usize) -> Box<dyn ConeOracle> {
        match self {
            Kind::Wsos => Box::new(WsosCone::new(w).unwrap()),
            Kind::Psd => Box::new(WsosPsdCone::new(w, m).unwrap()),
            Kind::L2 => Box::new(WsosL2Cone::new(w, m).unwrap()),
            Kind::L1 => Box::new(WsosL1Cone::new(w, m).unwrap()),
        }
    }

    /// Barrier parameter from the lifted dimensions.
    pub fn nu(self, w: &[WeightRecord], m: usize) -> f64 {
        let l: usize = w.iter().map(|r| r.p.ncols()).sum();
        (match self {
            Kind::Wsos => l,
            Kind::Psd | Kind::L1 => l * m,
            Kind::L2 => 2 * l,
        }) as f64
    }
}

/// `sum_u g(u) s(u) p_u p_u^T`.
pub fn dense_lift(w: &WeightRecord, s: &[f64]) -> DMatrix<f64> {
    let l = w.p.ncols();
    let mut out = DMatrix::zeros(l, l);
    for (u, &su) in s.iter().enumerate() {
        let c = w.values[u] * su;
        for a in 0..l {
            for b in 0..l {
                out[(a, b)] += c * w.p[(u, a)] * w.p[(u, b)];
            }
        }
    }
    out
}

pub fn component(s: &DVector<f64>, u: usize, i: usize) -> Vec<f64> {
    s.as_slice()[i * u..(i + 1) * u].to_vec()
}

/// Stored lower-triangle slice index of `(i, j)`, `i >= j`, column-major.
pub fn lower_index(m: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i >= j { (i, j) } else { (j, i) };
    j * m - j * (j + 1) / 2 + i
}

pub fn psd_lift(w: &WeightRecord, s: &DVector<f64>, m: usize) -> DMatrix<f64> {
    let (u, l) = (w.p.nrows(), w.p.ncols());
    let mut out = DMatrix::zeros(l * m, l * m);
    for i in 0..m {
        for j in 0..m {
            let b = dense_lift(w, &component(s, u, lower_index(m, i, j)));
            out.view_mut((i * l, j * l), (l, l)).copy_from(&b);
        }
    }
    out
}

pub fn arrow_lift(w: &WeightRecord, s: &DVector<f64>, m: usize) -> DMatrix<f64> {
    let (u, l) = (w.p.nrows(), w.p.ncols());
    let mut out = DMatrix::zeros(l * m, l * m);
    let head = dense_lift(w, &component(s, u, 0));
    for i in 0..m {
        out.view_mut((i * l, i * l), (l, l)).copy_from(&head);
    }
    for i in 1..m {
        let b = dense_lift(w, &component(s, u, i));
        out.view_mut((0, i * l), (l, l)).copy_from(&b);
        out.view_mut((i * l, 0), (l, l)).copy_from(&b);
    }
    out
}

pub fn min_eig(a: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(a.clone()).eigenvalues.min()
}

pub fn logdet_eig(a: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(a.clone()).eigenvalues.iter().map(|v| v.ln()).sum()
}

/// Smallest eigenvalue over every lifted matrix defining membership.
pub fn membership_margin(kind: Kind, w: &[WeightRecord], s: &DVector<f64>, m: usize) -> f64 {
    let mut worst = f64::INFINITY;
    for r in w {
        let u = r.p.nrows();
        let v = match kind {
            Kind::Wsos => min_eig(&dense_lift(r, s.as_slice())),
            Kind::Psd => min_eig(&psd_lift(r, s, m)),
            Kind::L2 => min_eig(&arrow_lift(r, s, m)),
            Kind::L1 => {
                let head = component(s, u, 0);
                let mut v = f64::INFINITY;
                for i in 1..m {
                    let tail = component(s, u, i);
                    let plus: Vec<f64> = head.iter().zip(&tail).map(|(a, b)| a + b).collect();
                    let minus: Vec<f64> = head.iter().zip(&tail).map(|(a, b)| a - b).collect();
                    v = v.min(min_eig(&dense_lift(r, &plus))).min(min_eig(&dense_lift(r, &minus)));
                }
                v
            }
        };
        worst = worst.min(v);
    }
    worst
}

/// Dense barrier value: `-logdet` of every lift, from eigenvalues.
pub fn dense_barrier(kind: Kind, w: &[WeightRecord], s: &DVector<f64>, m: usize) -> f64 {
    let mut total = 0.0;
    for r in w {
        let u = r.p.nrows();
        total -= match kind {
            Kind::Wsos => logdet_eig(&dense_lift(r, s.as_slice())),
            Kind::Psd => logdet_eig(&psd_lift(r, s, m)),
            Kind::L2 => logdet_eig(&arrow_lift(r, s, m)) - (m as f64 - 2.0) * logdet_eig(&dense_lift(r, &component(s, u, 0))),
            Kind::L1 => {
                let mut acc = 0.0;
                for i in 1..m {
                    let mut two = DVector::zeros(2 * u);
                    two.rows_mut(0, u).copy_from_slice(&component(s, u, 0));
                    two.rows_mut(u, u).copy_from_slice(&component(s, u, i));
                    acc += logdet_eig(&arrow_lift(r, &two, 2));
                }
                acc - (m as f64 - 2.0) * logdet_eig(&dense_lift(r, &component(s, u, 0)))
            }
        };
    }
    total
}

/// A random point strictly inside the cone, a fair distance from the boundary.
pub fn interior(cone: &dyn ConeOracle, rng: &mut ChaCha8Rng) -> DVector<f64> {
    let s0 = cone.initial_point().unwrap();
    let scale = s0.amax();
    let mut t = 1.0;
    loop {
        let dir = DVector::from_fn(cone.dim(), |_, _| rng.random_range(-1.0..1.0));
        if cone.feasibility(&(&s0 + t * scale * &dir)).unwrap() {
            return &s0 + 0.5 * t * scale * dir;
        }
        t *= 0.7;
    }
}

/// Random probes spread on both sides of the boundary.
pub fn probe(cone: &dyn ConeOracle, rng: &mut ChaCha8Rng) -> DVector<f64> {
    let s0 = cone.initial_point().unwrap();
    let scale = s0.amax() * 10f64.powf(rng.random_range(-2.0..1.0));
    let dir = DVector::from_fn(cone.dim(), |_, _| rng.random_range(-1.0..1.0));
    s0 + scale * dir
}

/// Tensor Chebyshev evaluation through `T_k(x) = cos(k acos x)`.
pub fn cheb_eval(q: &ChebyshevPoly, x: &[f64]) -> f64 {
    exponents(q.n, q.degree)
        .iter()
        .zip(q.coeffs.iter())
        .map(|(e, c)| c * e.iter().zip(x).map(|(&k, &xi)| (k as f64 * xi.acos()).cos()).product::<f64>())
        .sum()
}

pub fn rel_diff(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}
