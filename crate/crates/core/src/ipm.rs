//! Homogeneous self-dual predictor-corrector solver for
//! `min c'x  s.t.  Ax = b, x in K`, where `K` is a product of cones exposed
//! through [`ConeOracle`]s.
//!
//! Only the barrier of `K` is used (no dual barrier), in the style of
//! Skajaa and Ye. The iterate `(x, y, s, tau, kappa)` satisfies `x in int K`
//! and `tau, kappa > 0`; the central path is `s = -mu grad F(x)`,
//! `tau kappa = mu`. Each iteration takes one predictor step inside a wide
//! neighborhood followed by a few centering corrector steps.

use std::fmt;
use std::ops::Range;
use std::time::{Duration, Instant};

use nalgebra::{Cholesky, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::barriers::{BarrierEval, ConeOracle, HessianFactor};
use crate::error::{Error, Result};

/// One cone of the product together with the coordinates it owns.
#[derive(Debug)]
pub struct ConeBlock {
    pub cone: Box<dyn ConeOracle>,
    pub range: Range<usize>,
}

/// Standard-form conic problem data.
#[derive(Debug)]
pub struct ConicProblem {
    pub c: DVector<f64>,
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub cones: Vec<ConeBlock>,
}

impl ConicProblem {
    /// Cones take consecutive coordinate ranges in the given order.
    pub fn new(c: DVector<f64>, a: DMatrix<f64>, b: DVector<f64>, cones: Vec<Box<dyn ConeOracle>>) -> Result<Self> {
        let mut start = 0;
        let blocks = cones
            .into_iter()
            .map(|cone| {
                let range = start..start + cone.dim();
                start = range.end;
                ConeBlock { cone, range }
            })
            .collect();
        Self::with_blocks(c, a, b, blocks)
    }

    pub fn with_blocks(c: DVector<f64>, a: DMatrix<f64>, b: DVector<f64>, mut cones: Vec<ConeBlock>) -> Result<Self> {
        let n = c.len();
        if a.ncols() != n {
            return Err(Error::shape(format!("A with {n} columns"), a.ncols()));
        }
        if a.nrows() != b.len() {
            return Err(Error::shape(format!("b of length {}", a.nrows()), b.len()));
        }
        cones.sort_by_key(|blk| blk.range.start);
        let mut next = 0;
        for blk in &cones {
            if blk.range.start != next || blk.range.len() != blk.cone.dim() {
                return Err(Error::shape(
                    format!("cone ranges partitioning 0..{n}"),
                    format!("{:?} for a cone of dimension {}", blk.range, blk.cone.dim()),
                ));
            }
            next = blk.range.end;
        }
        if next != n {
            return Err(Error::shape(format!("cones covering {n} coordinates"), next));
        }
        Ok(Self { c, a, b, cones })
    }

    pub fn num_vars(&self) -> usize {
        self.c.len()
    }

    pub fn num_eqs(&self) -> usize {
        self.b.len()
    }

    /// Barrier parameter of the product cone.
    pub fn nu(&self) -> f64 {
        self.cones.iter().map(|blk| blk.cone.nu()).sum()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    pub tol: f64,
    pub max_iters: usize,
    pub time_limit: Option<Duration>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tol: 1e-7,
            max_iters: 500,
            time_limit: None,
        }
    }
}

/// Termination codes: converged, time limit, slow progress, numerical error.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Co,
    Tl,
    Sp,
    Er,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Co => "co",
            Status::Tl => "tl",
            Status::Sp => "sp",
            Status::Er => "er",
        })
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolveResult {
    pub status: Status,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub primal_obj: f64,
    pub dual_obj: f64,
    pub iterations: usize,
    pub wall_time: f64,
    /// Complementarity `mu` at the start of every iteration.
    pub mu_history: Vec<f64>,
    pub note: Option<String>,
}

/// Neighborhood bound for predictor steps.
const PREDICTOR_PROX: f64 = 0.99;
/// Correctors stop once proximity is below this.
const CORRECTOR_PROX: f64 = 0.5;
const MAX_CORRECTORS: usize = 6;
const BACKTRACK: f64 = 0.8;
const MIN_STEP: f64 = 1e-8;
const STALL_LIMIT: usize = 10;
const REGULARIZATION_RETRIES: usize = 5;
const PREDICTOR_STEPS: [f64; 13] = [0.9999, 0.999, 0.995, 0.99, 0.98, 0.95, 0.9, 0.85, 0.8, 0.7, 0.6, 0.5, 0.4];

#[derive(Clone, Debug)]
struct Iterate {
    x: DVector<f64>,
    y: DVector<f64>,
    s: DVector<f64>,
    tau: f64,
    kappa: f64,
}

#[derive(Clone, Debug)]
struct Direction {
    x: DVector<f64>,
    y: DVector<f64>,
    s: DVector<f64>,
    tau: f64,
    kappa: f64,
}

impl Iterate {
    fn step(&self, d: &Direction, alpha: f64) -> Self {
        Self {
            x: &self.x + alpha * &d.x,
            y: &self.y + alpha * &d.y,
            s: &self.s + alpha * &d.s,
            tau: self.tau + alpha * d.tau,
            kappa: self.kappa + alpha * d.kappa,
        }
    }

    fn mu(&self, nu: f64) -> f64 {
        (self.x.dot(&self.s) + self.tau * self.kappa) / (nu + 1.0)
    }
}

/// Right-hand side of the Newton system, see [`NewtonSystem::solve`].
struct Rhs {
    p: DVector<f64>,
    d: DVector<f64>,
    g: f64,
    s: DVector<f64>,
    kappa: f64,
}

/// Barrier data of every cone at one point.
struct Local {
    grad: DVector<f64>,
    factors: Vec<HessianFactor>,
}

impl Local {
    /// `None` if `x` is outside the interior.
    fn at(problem: &ConicProblem, x: &DVector<f64>) -> Result<Option<Self>> {
        let mut grad = DVector::zeros(x.len());
        let mut factors = Vec::with_capacity(problem.cones.len());
        for blk in &problem.cones {
            let part = x.rows(blk.range.start, blk.range.len()).into_owned();
            let Some(eval) = blk.cone.load(&part)? else {
                return Ok(None);
            };
            let g = eval.gradient();
            if g.iter().any(|v| !v.is_finite()) {
                return Err(Error::NumericallySingularHessian);
            }
            grad.rows_mut(blk.range.start, blk.range.len()).copy_from(&g);
            factors.push(factor_with_retries(eval.as_ref())?);
        }
        Ok(Some(Self { grad, factors }))
    }

    /// `H^{-1} r` for the block-diagonal Hessian.
    fn hinv(&self, problem: &ConicProblem, r: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(r.nrows(), r.ncols());
        for (blk, f) in problem.cones.iter().zip(&self.factors) {
            let part = r.rows(blk.range.start, blk.range.len()).into_owned();
            out.rows_mut(blk.range.start, blk.range.len()).copy_from(&f.solve(&part));
        }
        out
    }

    fn hinv_vec(&self, problem: &ConicProblem, r: &DVector<f64>) -> DVector<f64> {
        let m = DMatrix::from_column_slice(r.len(), 1, r.as_slice());
        DVector::from_column_slice(self.hinv(problem, &m).as_slice())
    }

    /// Hessian-norm distance to the central path.
    fn proximity(&self, problem: &ConicProblem, it: &Iterate, mu: f64) -> f64 {
        let psi = &it.s + mu * &self.grad;
        let hpsi = self.hinv_vec(problem, &psi);
        let tk = it.tau * (it.kappa - mu / it.tau);
        let sq = psi.dot(&hpsi) + tk * tk;
        if sq.is_finite() && sq >= 0.0 {
            sq.sqrt() / mu
        } else {
            f64::INFINITY
        }
    }
}

fn factor_with_retries(eval: &dyn BarrierEval) -> Result<HessianFactor> {
    if let Ok(f) = eval.hessian_factor() {
        return Ok(f);
    }
    let h = eval.hessian();
    let scale = h.diagonal().amax().max(f64::MIN_POSITIVE);
    let mut delta = 1e-14 * scale;
    for _ in 0..REGULARIZATION_RETRIES {
        let shifted = &h + DMatrix::identity(h.nrows(), h.ncols()) * delta;
        if let Ok(f) = HessianFactor::dense(&shifted) {
            return Ok(f);
        }
        delta *= 100.0;
    }
    Err(Error::NumericallySingularHessian)
}

/// The Newton system at one iterate, with `A (mu H)^{-1} A'` factorized.
struct NewtonSystem<'a> {
    problem: &'a ConicProblem,
    local: &'a Local,
    mu: f64,
    tau: f64,
    hinv_at: DMatrix<f64>,
    schur: Cholesky<f64, nalgebra::Dyn>,
    q: DVector<f64>,
    v: DVector<f64>,
}

impl<'a> NewtonSystem<'a> {
    fn new(problem: &'a ConicProblem, local: &'a Local, mu: f64, tau: f64) -> Result<Self> {
        let hinv_at = local.hinv(problem, &problem.a.transpose()) / mu;
        let mut mm = &problem.a * &hinv_at;
        crate::linalg::symmetrize(&mut mm);
        let schur = factor_schur(mm)?;
        let hinv_c = local.hinv_vec(problem, &problem.c) / mu;
        let q = schur.solve(&(&problem.b + &problem.a * &hinv_c));
        let v = &hinv_at * &q - hinv_c;
        Ok(Self {
            problem,
            local,
            mu,
            tau,
            hinv_at,
            schur,
            q,
            v,
        })
    }

    /// Solves
    ///
    /// ```text
    ///  A dx - b dtau              = rhs.p
    /// -A'dy + c dtau - ds         = rhs.d
    ///  b'dy - c'dx - dkappa       = rhs.g
    ///  ds + mu H dx               = rhs.s
    ///  dkappa + (mu / tau^2) dtau = rhs.kappa
    /// ```
    fn solve(&self, rhs: &Rhs) -> Direction {
        let pr = self.problem;
        let w = self.local.hinv_vec(pr, &(&rhs.d + &rhs.s)) / self.mu;
        let p = self.schur.solve(&(&rhs.p - &pr.a * &w));
        let u = &self.hinv_at * &p + w;
        let barrier = self.mu / (self.tau * self.tau);
        let num = rhs.g + rhs.kappa - pr.b.dot(&p) + pr.c.dot(&u);
        let den = pr.b.dot(&self.q) - pr.c.dot(&self.v) + barrier;
        let dtau = num / den;
        let dx = u + dtau * &self.v;
        let dy = p + dtau * &self.q;
        let ds = -(pr.a.transpose() * &dy) + dtau * &pr.c - &rhs.d;
        Direction {
            s: ds,
            kappa: rhs.kappa - barrier * dtau,
            x: dx,
            y: dy,
            tau: dtau,
        }
    }
}

fn factor_schur(mut mm: DMatrix<f64>) -> Result<Cholesky<f64, nalgebra::Dyn>> {
    if mm.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericallySingularHessian);
    }
    let scale = mm.diagonal().amax().max(f64::MIN_POSITIVE);
    let mut delta = 1e-14 * scale;
    for attempt in 0..=REGULARIZATION_RETRIES {
        if let Some(c) = Cholesky::new(mm.clone()) {
            return Ok(c);
        }
        if attempt < REGULARIZATION_RETRIES {
            for i in 0..mm.nrows() {
                mm[(i, i)] += delta;
            }
            delta *= 100.0;
        }
    }
    Err(Error::NumericallySingularHessian)
}

struct Residuals {
    p: DVector<f64>,
    d: DVector<f64>,
    g: f64,
}

fn residuals(pr: &ConicProblem, it: &Iterate) -> Residuals {
    Residuals {
        p: &pr.a * &it.x - it.tau * &pr.b,
        d: -(pr.a.transpose() * &it.y) + it.tau * &pr.c - &it.s,
        g: pr.b.dot(&it.y) - pr.c.dot(&it.x) - it.kappa,
    }
}

/// Solves `problem`. Solver outcomes are reported through [`Status`];
/// only malformed input and failing initial points produce errors.
pub fn solve(problem: &ConicProblem, options: &SolveOptions) -> Result<SolveResult> {
    let start = Instant::now();
    let nu = problem.nu();
    let n = problem.num_vars();
    let mut x = DVector::zeros(n);
    for blk in &problem.cones {
        let x0 = blk.cone.initial_point()?;
        x.rows_mut(blk.range.start, blk.range.len()).copy_from(&x0);
    }
    let Some(mut local) = Local::at(problem, &x)? else {
        return Err(Error::InfeasiblePoint);
    };
    let mut it = Iterate {
        s: -&local.grad,
        x,
        y: DVector::zeros(problem.num_eqs()),
        tau: 1.0,
        kappa: 1.0,
    };
    let mut mu_history = Vec::new();
    let mut stalls = 0;
    let mut iterations = 0;
    let finish = |it: &Iterate, status: Status, iterations: usize, mu_history: Vec<f64>, note: Option<String>| {
        let x = &it.x / it.tau;
        let y = &it.y / it.tau;
        SolveResult {
            status,
            primal_obj: problem.c.dot(&x),
            dual_obj: problem.b.dot(&y),
            x: x.as_slice().to_vec(),
            y: y.as_slice().to_vec(),
            iterations,
            wall_time: start.elapsed().as_secs_f64(),
            mu_history,
            note,
        }
    };

    let b_norm = problem.b.norm();
    let c_norm = problem.c.norm();
    loop {
        let mu = it.mu(nu);
        mu_history.push(mu);
        if !mu.is_finite() || !it.tau.is_finite() {
            return Ok(finish(&it, Status::Er, iterations, mu_history, Some("non-finite iterate".into())));
        }

        let xt = &it.x / it.tau;
        let yt = &it.y / it.tau;
        let st = &it.s / it.tau;
        let cx = problem.c.dot(&xt);
        let by = problem.b.dot(&yt);
        let pres = (&problem.a * &xt - &problem.b).norm() / (1.0 + b_norm);
        let dres = (problem.a.transpose() * &yt + &st - &problem.c).norm() / (1.0 + c_norm);
        let gap = (cx - by).abs() / (1.0 + cx.abs());
        if pres <= options.tol && dres <= options.tol && gap <= options.tol {
            return Ok(finish(&it, Status::Co, iterations, mu_history, None));
        }
        if let Some(note) = infeasibility(problem, &it, options.tol) {
            return Ok(finish(&it, Status::Er, iterations, mu_history, Some(note)));
        }
        if iterations >= options.max_iters {
            let note = format!("iteration limit {} reached", options.max_iters);
            return Ok(finish(&it, Status::Sp, iterations, mu_history, Some(note)));
        }
        if options.time_limit.is_some_and(|t| start.elapsed() >= t) {
            return Ok(finish(&it, Status::Tl, iterations, mu_history, None));
        }
        iterations += 1;

        // predictor
        let res = residuals(problem, &it);
        let system = match NewtonSystem::new(problem, &local, mu, it.tau) {
            Ok(s) => s,
            Err(e) => return Ok(finish(&it, Status::Er, iterations, mu_history, Some(e.to_string()))),
        };
        let dir = system.solve(&Rhs {
            p: -res.p,
            d: -res.d,
            g: -res.g,
            s: -&it.s,
            kappa: -it.kappa,
        });
        let mut accepted = None;
        let mut alpha = PREDICTOR_STEPS[0];
        let mut k = 0;
        while alpha >= MIN_STEP {
            let cand = it.step(&dir, alpha);
            if cand.tau > 0.0 && cand.kappa > 0.0 {
                if let Ok(Some(loc)) = Local::at(problem, &cand.x) {
                    let cmu = cand.mu(nu);
                    if cmu > 0.0 && loc.proximity(problem, &cand, cmu) <= PREDICTOR_PROX {
                        accepted = Some((cand, loc, alpha));
                        break;
                    }
                }
            }
            k += 1;
            alpha = if k < PREDICTOR_STEPS.len() {
                PREDICTOR_STEPS[k]
            } else {
                alpha * BACKTRACK
            };
        }
        match accepted {
            Some((cand, loc, alpha)) => {
                it = cand;
                local = loc;
                stalls = if alpha < MIN_STEP * 1e2 { stalls + 1 } else { 0 };
            }
            None => stalls += 1,
        }
        if stalls >= STALL_LIMIT {
            let note = "step sizes stalled".to_string();
            return Ok(finish(&it, Status::Sp, iterations, mu_history, Some(note)));
        }

        // correctors
        for _ in 0..MAX_CORRECTORS {
            let mu = it.mu(nu);
            let prox = local.proximity(problem, &it, mu);
            if prox <= CORRECTOR_PROX {
                break;
            }
            let system = match NewtonSystem::new(problem, &local, mu, it.tau) {
                Ok(s) => s,
                Err(e) => return Ok(finish(&it, Status::Er, iterations, mu_history, Some(e.to_string()))),
            };
            let dir = system.solve(&Rhs {
                p: DVector::zeros(problem.num_eqs()),
                d: DVector::zeros(n),
                g: 0.0,
                s: -(&it.s + mu * &local.grad),
                kappa: -it.kappa + mu / it.tau,
            });
            let mut alpha = 1.0;
            let mut moved = false;
            while alpha >= MIN_STEP {
                let cand = it.step(&dir, alpha);
                if cand.tau > 0.0 && cand.kappa > 0.0 {
                    if let Ok(Some(loc)) = Local::at(problem, &cand.x) {
                        let cmu = cand.mu(nu);
                        if cmu > 0.0 && loc.proximity(problem, &cand, cmu) < prox {
                            it = cand;
                            local = loc;
                            moved = true;
                            break;
                        }
                    }
                }
                alpha *= BACKTRACK;
            }
            if !moved {
                break;
            }
        }
    }
}

/// Normalized infeasibility certificates of the embedding, if any.
fn infeasibility(pr: &ConicProblem, it: &Iterate, tol: f64) -> Option<String> {
    let by = pr.b.dot(&it.y);
    if by > 0.0 && it.tau < tol * by {
        let r = (pr.a.transpose() * &it.y + &it.s).norm();
        if r <= tol * by * (1.0 + pr.c.norm()) {
            return Some("primal infeasibility certificate".into());
        }
    }
    let cx = pr.c.dot(&it.x);
    if cx < 0.0 && it.tau < tol * -cx {
        let r = (&pr.a * &it.x).norm();
        if r <= tol * -cx * (1.0 + pr.b.norm()) {
            return Some("dual infeasibility certificate".into());
        }
    }
    None
}
