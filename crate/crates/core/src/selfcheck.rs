//! Built-in oracle suites behind `sos-cones selftest`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::barriers::{ConeOracle, WsosCone, WsosL1Cone, WsosL2Cone, WsosPsdCone};
use crate::error::Result;
use crate::lifting::{self, PolyMat, PolyVec};
use crate::linalg;
use crate::polybasis::{BasisContext, WeightRecord};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SuiteReport {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// `(n, d, m)` configurations exercised by every suite.
pub const GRID: [(usize, usize, usize); 4] = [(1, 2, 3), (2, 1, 2), (1, 1, 4), (2, 2, 2)];

const POINTS: usize = 5;

type Cones = (Vec<WeightRecord>, Vec<Box<dyn ConeOracle>>);
type Suite = fn(u64) -> Result<SuiteReport>;

fn cones(n: usize, d: usize, m: usize, seed: u64) -> Result<Cones> {
    let w = BasisContext::new(n, d, seed)?.weights;
    let cones: Vec<Box<dyn ConeOracle>> = vec![
        Box::new(WsosCone::new(w.clone())?),
        Box::new(WsosPsdCone::new(w.clone(), m)?),
        Box::new(WsosL2Cone::new(w.clone(), m)?),
        Box::new(WsosL1Cone::new(w.clone(), m)?),
    ];
    Ok((w, cones))
}

fn interior(cone: &dyn ConeOracle, rng: &mut ChaCha8Rng) -> Result<DVector<f64>> {
    let s0 = cone.initial_point()?;
    let scale = s0.amax();
    let mut t = 1.0;
    while t > 1e-12 {
        let dir = DVector::from_fn(cone.dim(), |_, _| rng.random_range(-1.0..1.0));
        if cone.feasibility(&(&s0 + t * scale * &dir))? {
            return Ok(&s0 + 0.5 * t * scale * dir);
        }
        t *= 0.7;
    }
    Ok(s0)
}

fn derivatives(seed: u64) -> Result<SuiteReport> {
    let (mut eg, mut eh) = (0.0f64, 0.0f64);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for &(n, d, m) in &GRID {
        for cone in cones(n, d, m, seed)?.1 {
            for _ in 0..POINTS {
                let s = interior(cone.as_ref(), &mut rng)?;
                let g = cone.gradient(&s)?;
                let h = cone.hessian(&s)?;
                let (hg, hh) = (1e-5 * s.amax(), 1e-4 * s.amax());
                let dim = cone.dim();
                let mut fg = DVector::zeros(dim);
                let mut fh = DMatrix::zeros(dim, dim);
                for a in 0..dim {
                    let mut e = DVector::zeros(dim);
                    e[a] = hg;
                    fg[a] = (cone.barrier_value(&(&s + &e))? - cone.barrier_value(&(&s - &e))?) / (2.0 * hg);
                    e[a] = hh;
                    fh.set_column(a, &((cone.gradient(&(&s + &e))? - cone.gradient(&(&s - &e))?) / (2.0 * hh)));
                }
                eg = eg.max((fg - &g).norm() / g.norm());
                eh = eh.max((fh - &h).norm() / h.norm());
            }
        }
    }
    Ok(SuiteReport {
        name: "derivatives".into(),
        passed: eg <= 1e-6 && eh <= 1e-5,
        detail: format!("gradient rel err {eg:.2e}, Hessian rel err {eh:.2e}"),
    })
}

fn homogeneity(seed: u64) -> Result<SuiteReport> {
    let (mut en, mut el, mut eh) = (0.0f64, 0.0f64, 0.0f64);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for &(n, d, m) in &GRID {
        for cone in cones(n, d, m, seed)?.1 {
            let nu = cone.nu();
            for _ in 0..POINTS {
                let s = interior(cone.as_ref(), &mut rng)?;
                let g = cone.gradient(&s)?;
                en = en.max((g.dot(&s) + nu).abs());
                let hs = cone.hessian(&s)? * &s;
                eh = eh.max((hs + &g).norm() / g.norm());
                let f = cone.barrier_value(&s)?;
                for t in [0.5, 2.0, 10.0] {
                    el = el.max((cone.barrier_value(&(t * &s))? - f + nu * f64::ln(t)).abs());
                }
            }
        }
    }
    Ok(SuiteReport {
        name: "homogeneity".into(),
        passed: en <= 1e-8 && el <= 1e-9 && eh <= 1e-8,
        detail: format!("|<g,s> + nu| {en:.2e}, F(ts) defect {el:.2e}, |Hs + g| rel {eh:.2e}"),
    })
}

/// Smallest eigenvalue of the dense lifts that define membership.
fn dense_margin(kind: usize, w: &[WeightRecord], s: &DVector<f64>, m: usize) -> Result<f64> {
    let u = w[0].points();
    let mut worst = f64::INFINITY;
    for r in w {
        let v = match kind {
            0 => linalg::min_eigenvalue(&lifting::lambda_sos(r, s)),
            1 => linalg::min_eigenvalue(&lifting::lambda_psd(r, &PolyMat::from_flat(u, m, s.as_slice())?)),
            2 => linalg::min_eigenvalue(&lifting::lambda_l2(r, &PolyVec::from_flat(u, m, s.as_slice())?)),
            _ => {
                let v = PolyVec::from_flat(u, m, s.as_slice())?;
                let head = v.component(0);
                (1..m)
                    .flat_map(|i| [&head + v.component(i), &head - v.component(i)])
                    .map(|x| linalg::min_eigenvalue(&lifting::lambda_sos(r, &x)))
                    .fold(f64::INFINITY, f64::min)
            }
        };
        worst = worst.min(v);
    }
    Ok(worst)
}

fn brute_force(seed: u64) -> Result<SuiteReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut bad, mut total) = (0, 0);
    for &(n, d, m) in &GRID {
        let (w, cones) = cones(n, d, m, seed)?;
        for (kind, cone) in cones.iter().enumerate() {
            let s0 = cone.initial_point()?;
            for _ in 0..50 {
                let scale = s0.amax() * 10f64.powf(rng.random_range(-2.0..1.0));
                let s = &s0 + scale * DVector::from_fn(cone.dim(), |_, _| rng.random_range(-1.0..1.0));
                let margin = dense_margin(kind, &w, &s, m)?;
                if margin.abs() <= 1e-10 {
                    continue;
                }
                total += 1;
                if cone.feasibility(&s)? != (margin > 0.0) {
                    bad += 1;
                }
            }
        }
    }
    Ok(SuiteReport {
        name: "brute-force membership".into(),
        passed: bad == 0,
        detail: format!("{bad} disagreements over {total} probes"),
    })
}

/// Runs every suite. Errors inside a suite count as a failure of that suite.
pub fn run_all(seed: u64) -> Vec<SuiteReport> {
    let suites: [(&str, Suite); 3] = [
        ("derivatives", derivatives),
        ("homogeneity", homogeneity),
        ("brute-force membership", brute_force),
    ];
    suites
        .into_iter()
        .map(|(name, f)| {
            f(seed).unwrap_or_else(|e| SuiteReport {
                name: name.into(),
                passed: false,
                detail: format!("error: {e}"),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_suites_pass() {
        for r in run_all(7) {
            assert!(r.passed, "{}: {}", r.name, r.detail);
        }
    }
}
