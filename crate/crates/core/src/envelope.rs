//! Polynomial envelope benchmark.
//!
//! Given random `q_2, ..., q_m` of degree `2 d_r`, find the polynomial `q_1`
//! of degree `2d` with least integral over `[-1,1]^n` such that
//! `q_1(x) >= ||(q_2(x), ..., q_m(x))||_p` on the box.
//!
//! Every formulation is written as `x = h + M phi in K` with `phi`
//! collecting the free coefficient vectors (always starting with the values
//! `f_1` of `q_1`) and objective `c' phi`. Since only dual-cone barriers are
//! available, the solver receives the conic dual
//!
//! ```text
//! min h'z  s.t.  M'z = c,  z in K*
//! ```
//!
//! whose negated optimum is the envelope objective and whose equality
//! multiplier gives `phi = -y`.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::barriers::{ConeOracle, WsosCone, WsosL1Cone, WsosL2Cone, WsosPsdCone};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::ipm::{self, ConicProblem, SolveOptions, SolveResult, Status};
use crate::lifting::{sdim, tri_index, tri_pairs, PolyVec};
use crate::linalg::{binomial, kron};
use crate::polybasis::{BasisContext, ChebyshevPoly, WeightRecord};

/// Environment variable capping the number of sweep worker threads.
pub const THREADS_ENV: &str = "SOS_CONES_THREADS";

/// Parameters that determine an instance.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct InstanceSpec {
    pub n: usize,
    pub d_r: usize,
    pub d: usize,
    pub m: usize,
    pub p: u8,
    pub seed: u64,
    /// Replace the random polynomials by zero.
    #[serde(default)]
    pub zero: bool,
}

impl InstanceSpec {
    pub fn new(n: usize, d_r: usize, d: usize, m: usize, p: u8, seed: u64) -> Self {
        Self {
            n,
            d_r,
            d,
            m,
            p,
            seed,
            zero: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if self.n == 0 || self.d_r == 0 {
            return bad("n and d_r must be positive".into());
        }
        if self.m < 2 {
            return bad(format!("m must be at least 2, got {}", self.m));
        }
        match self.p {
            1 if self.d != self.d_r => bad(format!("p = 1 requires d = d_r, got d = {}", self.d)),
            2 if self.d != self.d_r && self.d != 2 * self.d_r => {
                bad(format!("p = 2 requires d in {{d_r, 2 d_r}}, got d = {}", self.d))
            }
            1 | 2 => Ok(()),
            p => bad(format!("p must be 1 or 2, got {p}")),
        }
    }
}

/// Samples `m - 1` polynomials of degree `2 d_r` with Chebyshev coefficients
/// uniform on `[-1, 1]`.
pub fn random_polys(n: usize, d_r: usize, m: usize, seed: u64) -> Vec<ChebyshevPoly> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // a separate stream from the point sampler, which uses stream 0
    rng.set_stream(1);
    let len = binomial(n + 2 * d_r, n);
    (1..m)
        .map(|_| {
            let coeffs = DVector::from_fn(len, |_, _| rng.random_range(-1.0..=1.0));
            ChebyshevPoly::new(n, 2 * d_r, coeffs)
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct EnvelopeInstance {
    pub spec: InstanceSpec,
    pub basis: BasisContext,
    /// `q_2, ..., q_m`.
    pub q: Vec<ChebyshevPoly>,
    /// Values of `q_2, ..., q_m` at the interpolation points, `U x (m-1)`.
    pub polys: PolyVec,
}

impl EnvelopeInstance {
    pub fn new(spec: InstanceSpec) -> Result<Self> {
        Self::new_with(spec, Exec::default())
    }

    pub fn new_with(spec: InstanceSpec, exec: Exec) -> Result<Self> {
        spec.validate()?;
        let basis = BasisContext::new_with(spec.n, spec.d, spec.seed, exec)?;
        let mut q = random_polys(spec.n, spec.d_r, spec.m, spec.seed);
        if spec.zero {
            for poly in &mut q {
                poly.coeffs.fill(0.0);
            }
        }
        let mut values = DMatrix::zeros(basis.u(), spec.m - 1);
        for (i, poly) in q.iter().enumerate() {
            values.set_column(i, &poly.values_at(&basis.points));
        }
        Ok(Self {
            spec,
            basis,
            q,
            polys: PolyVec::new(values),
        })
    }

    pub fn u(&self) -> usize {
        self.basis.u()
    }

    /// Values of `q_i` for `i` in `2..=m` (1-based, as in the problem statement).
    pub fn f(&self, i: usize) -> DVector<f64> {
        self.polys.component(i - 2)
    }
}

#[derive(Serialize)]
struct InstanceJson<'a> {
    #[serde(flatten)]
    spec: &'a InstanceSpec,
    u: usize,
    /// Chebyshev coefficients of `q_2..q_m`.
    q: Vec<&'a [f64]>,
    /// Values of `q_2..q_m` at the interpolation points.
    f: Vec<Vec<f64>>,
    points: Vec<Vec<f64>>,
}

impl Serialize for EnvelopeInstance {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        InstanceJson {
            spec: &self.spec,
            u: self.u(),
            q: self.q.iter().map(|p| p.coeffs.as_slice()).collect(),
            f: (2..=self.spec.m).map(|i| self.f(i).as_slice().to_vec()).collect(),
            points: (0..self.u()).map(|u| self.basis.point(u)).collect(),
        }
        .serialize(ser)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Formulation {
    Sosl2,
    Sos,
    Sospsd,
    Sosl1,
    SosExt,
}

impl Formulation {
    pub const ALL: [Formulation; 5] = [
        Formulation::Sosl2,
        Formulation::Sos,
        Formulation::Sospsd,
        Formulation::Sosl1,
        Formulation::SosExt,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Formulation::Sosl2 => "sosl2",
            Formulation::Sos => "sos",
            Formulation::Sospsd => "sospsd",
            Formulation::Sosl1 => "sosl1",
            Formulation::SosExt => "sos_ext",
        }
    }

    /// The norm this formulation models.
    pub fn p(self) -> u8 {
        match self {
            Formulation::Sosl2 | Formulation::Sos | Formulation::Sospsd => 2,
            Formulation::Sosl1 | Formulation::SosExt => 1,
        }
    }
}

impl fmt::Display for Formulation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Formulation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Formulation::ALL
            .into_iter()
            .find(|f| f.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown formulation '{s}'")))
    }
}

/// Sizes of the primal formulation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FormulationDims {
    pub cone_dim: usize,
    /// Equalities beyond the cone membership itself.
    pub extra_equalities: usize,
    /// Variables beyond `f_1`.
    pub extra_vars: usize,
}

/// A built problem plus what is needed to read the envelope back.
#[derive(Debug)]
pub struct BuiltProblem {
    pub formulation: Formulation,
    pub problem: ConicProblem,
    pub dims: FormulationDims,
    u: usize,
}

impl BuiltProblem {
    /// Values of `q_1` at the interpolation points from a solver result.
    pub fn envelope_values(&self, result: &SolveResult) -> DVector<f64> {
        DVector::from_iterator(self.u, result.y[..self.u].iter().map(|v| -v))
    }

    /// `int q_1` over the box.
    pub fn objective(&self, result: &SolveResult) -> f64 {
        -result.primal_obj
    }
}

/// Turns `x = h + M phi in K`, objective `c' phi`, into the solver's dual form.
fn dual_problem(h: DVector<f64>, m: DMatrix<f64>, c: DVector<f64>, cones: Vec<Box<dyn ConeOracle>>) -> Result<ConicProblem> {
    ConicProblem::new(h, m.transpose(), c, cones)
}

/// Unit vectors `e_i` and sums `e_i + e_j`, in lower-triangle storage order.
fn product_directions(m: usize) -> DMatrix<f64> {
    let pairs = tri_pairs(m);
    let mut y = DMatrix::zeros(pairs.len(), m);
    for (v, &(i, j)) in pairs.iter().enumerate() {
        y[(v, i)] = 1.0;
        y[(v, j)] = 1.0;
    }
    y
}

/// Weights of the scalar WSOS cone over `(x, y)` points for quadratic forms in `y`.
fn product_weights(weights: &[WeightRecord], y: &DMatrix<f64>) -> Vec<WeightRecord> {
    weights
        .iter()
        .map(|w| {
            let values = DVector::from_iterator(
                y.nrows() * w.points(),
                (0..y.nrows()).flat_map(|_| w.values.iter().copied()),
            );
            WeightRecord::new(values, kron(y, &w.p))
        })
        .collect()
}

pub fn build(instance: &EnvelopeInstance, formulation: Formulation) -> Result<BuiltProblem> {
    build_with(instance, formulation, Exec::Sequential)
}

/// Builds the problem; `exec` controls parallelism inside barrier evaluations.
pub fn build_with(instance: &EnvelopeInstance, formulation: Formulation, exec: Exec) -> Result<BuiltProblem> {
    let spec = &instance.spec;
    if formulation.p() != spec.p {
        return Err(Error::FormulationMismatch(format!(
            "{formulation} models p = {}, instance has p = {}",
            formulation.p(),
            spec.p
        )));
    }
    let u = instance.u();
    let m = spec.m;
    let weights = instance.basis.weights.clone();
    let w = instance.basis.quad.clone();
    let eye = DMatrix::<f64>::identity(u, u);
    let (problem, dims) = match formulation {
        Formulation::Sosl2 | Formulation::Sosl1 => {
            let mut h = DVector::zeros(u * m);
            h.rows_mut(u, u * (m - 1)).copy_from(&DVector::from_column_slice(instance.polys.coeffs.as_slice()));
            let mut mm = DMatrix::zeros(u * m, u);
            mm.view_mut((0, 0), (u, u)).copy_from(&eye);
            let cone: Box<dyn ConeOracle> = if formulation == Formulation::Sosl2 {
                Box::new(WsosL2Cone::new(weights, m)?.with_exec(exec))
            } else {
                Box::new(WsosL1Cone::new(weights, m)?.with_exec(exec))
            };
            let dims = FormulationDims {
                cone_dim: u * m,
                extra_equalities: 0,
                extra_vars: 0,
            };
            (dual_problem(h, mm, w, vec![cone])?, dims)
        }
        Formulation::Sospsd => {
            // stored coordinates pair with the trace inner product, so
            // off-diagonal data is doubled
            let s = sdim(m);
            let mut h = DVector::zeros(u * s);
            let mut mm = DMatrix::zeros(u * s, u);
            for i in 0..m {
                let c = tri_index(m, i, i);
                mm.view_mut((c * u, 0), (u, u)).copy_from(&eye);
            }
            for i in 1..m {
                let c = tri_index(m, i, 0);
                h.rows_mut(c * u, u).copy_from(&(2.0 * instance.f(i + 1)));
            }
            let cone = Box::new(WsosPsdCone::new(weights, m)?.with_exec(exec));
            let dims = FormulationDims {
                cone_dim: u * s,
                extra_equalities: 0,
                extra_vars: 0,
            };
            (dual_problem(h, mm, w, vec![cone])?, dims)
        }
        Formulation::Sos => {
            let y = product_directions(m);
            let rows = y.nrows();
            let mut h = DVector::zeros(u * rows);
            let mut mm = DMatrix::zeros(u * rows, u);
            for v in 0..rows {
                let diag: f64 = y.row(v).iter().map(|t| t * t).sum();
                mm.view_mut((v * u, 0), (u, u)).copy_from(&(diag * &eye));
                let mut hv = DVector::zeros(u);
                for i in 1..m {
                    hv += 2.0 * y[(v, 0)] * y[(v, i)] * instance.f(i + 1);
                }
                h.rows_mut(v * u, u).copy_from(&hv);
            }
            let cone = Box::new(WsosCone::new(product_weights(&weights, &y))?.with_exec(exec));
            let dims = FormulationDims {
                cone_dim: u * rows,
                extra_equalities: 0,
                extra_vars: 0,
            };
            (dual_problem(h, mm, w, vec![cone])?, dims)
        }
        Formulation::SosExt => {
            // phi = (f_1, g_2..g_m); blocks x_0 = f_1 - sum(2 g_i - f_i), x_g = g_i, x_h = g_i - f_i
            let k = m - 1;
            let mut h = DVector::zeros(u * (2 * k + 1));
            let mut mm = DMatrix::zeros(u * (2 * k + 1), u * m);
            mm.view_mut((0, 0), (u, u)).copy_from(&eye);
            let mut h0 = DVector::zeros(u);
            for i in 0..k {
                let f = instance.f(i + 2);
                h0 += &f;
                mm.view_mut((0, (i + 1) * u), (u, u)).copy_from(&(-2.0 * &eye));
                mm.view_mut(((i + 1) * u, (i + 1) * u), (u, u)).copy_from(&eye);
                mm.view_mut(((k + i + 1) * u, (i + 1) * u), (u, u)).copy_from(&eye);
                h.rows_mut((k + i + 1) * u, u).copy_from(&(-f));
            }
            h.rows_mut(0, u).copy_from(&h0);
            let mut c = DVector::zeros(u * m);
            c.rows_mut(0, u).copy_from(&w);
            let cones = (0..2 * k + 1)
                .map(|_| Ok(Box::new(WsosCone::new(weights.clone())?.with_exec(exec)) as Box<dyn ConeOracle>))
                .collect::<Result<Vec<_>>>()?;
            let dims = FormulationDims {
                cone_dim: u * (2 * k + 1),
                extra_equalities: u * k,
                extra_vars: 2 * u * k,
            };
            (dual_problem(h, mm, c, cones)?, dims)
        }
    };
    Ok(BuiltProblem {
        formulation,
        problem,
        dims,
        u,
    })
}

/// One line of a results table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub n: usize,
    pub d_r: usize,
    pub m: usize,
    pub d: usize,
    pub p: u8,
    pub seed: u64,
    pub formulation: Formulation,
    pub st: Status,
    pub iter: usize,
    pub time: f64,
    pub obj: f64,
    pub cone_dim: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub note: Option<String>,
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub row: ResultRow,
    pub result: SolveResult,
    pub dims: FormulationDims,
    /// The recovered `q_1`.
    pub envelope: ChebyshevPoly,
}

pub fn run_instance(instance: &EnvelopeInstance, formulation: Formulation, options: &SolveOptions) -> Result<RunOutput> {
    run_instance_with(instance, formulation, options, Exec::Sequential)
}

pub fn run_instance_with(
    instance: &EnvelopeInstance,
    formulation: Formulation,
    options: &SolveOptions,
    exec: Exec,
) -> Result<RunOutput> {
    let built = build_with(instance, formulation, exec)?;
    let result = ipm::solve(&built.problem, options)?;
    let envelope = instance.basis.interpolate(&built.envelope_values(&result))?;
    let s = &instance.spec;
    let row = ResultRow {
        n: s.n,
        d_r: s.d_r,
        m: s.m,
        d: s.d,
        p: s.p,
        seed: s.seed,
        formulation,
        st: result.status,
        iter: result.iterations,
        time: result.wall_time,
        obj: built.objective(&result),
        cone_dim: built.dims.cone_dim,
        note: result.note.clone(),
    };
    Ok(RunOutput {
        row,
        result,
        dims: built.dims,
        envelope,
    })
}

/// Worst pointwise violation of `q_1(x) >= ||q_bar(x)||_p` at random box points.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Validity {
    /// `max_x ||q_bar(x)||_p - q_1(x) - slack (1 + |q_1(x)|)`; valid iff `<= 0`.
    pub max_excess: f64,
    pub samples: usize,
}

impl Validity {
    pub fn holds(&self) -> bool {
        self.max_excess <= 0.0
    }
}

pub fn check_validity(instance: &EnvelopeInstance, q1: &ChebyshevPoly, samples: usize, slack: f64, seed: u64) -> Validity {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = instance.spec.n;
    let mut worst = f64::NEG_INFINITY;
    let mut x = vec![0.0; n];
    for _ in 0..samples {
        for xi in x.iter_mut() {
            *xi = rng.random_range(-1.0..=1.0);
        }
        let vals: Vec<f64> = instance.q.iter().map(|q| q.eval(&x)).collect();
        let norm = match instance.spec.p {
            1 => vals.iter().map(|v| v.abs()).sum::<f64>(),
            _ => vals.iter().map(|v| v * v).sum::<f64>().sqrt(),
        };
        let head = q1.eval(&x);
        worst = worst.max(norm - head - slack * (1.0 + head.abs()));
    }
    Validity {
        max_excess: worst,
        samples,
    }
}

/// Markdown table with columns n, d_r, m, d, formulation, st, iter, time, obj.
pub fn markdown_table(rows: &[ResultRow]) -> String {
    let mut out = String::from("| n | d_r | m | d | formulation | st | iter | time | obj |\n");
    out.push_str("|--:|--:|--:|--:|:--|:--|--:|--:|--:|\n");
    for r in rows {
        let obj = if r.st == Status::Co {
            format!("{:.6}", r.obj)
        } else {
            "*".into()
        };
        let _ = writeln!(
            out,
            "| {} | {} | {} | {} | {} | {} | {} | {:.2} | {} |",
            r.n, r.d_r, r.m, r.d, r.formulation, r.st, r.iter, r.time, obj
        );
    }
    out
}

/// A grid of instance specifications crossed with formulations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub n: usize,
    pub p: u8,
    pub d_r: Vec<usize>,
    pub m: Vec<usize>,
    /// Multipliers `k` giving `d = k d_r`.
    pub d_factor: Vec<usize>,
    pub seeds: Vec<u64>,
    pub formulations: Vec<Formulation>,
}

impl SweepConfig {
    pub fn cases(&self) -> Vec<(InstanceSpec, Formulation)> {
        let mut out = Vec::new();
        for &d_r in &self.d_r {
            for &m in &self.m {
                for &k in &self.d_factor {
                    for &seed in &self.seeds {
                        for &f in &self.formulations {
                            out.push((InstanceSpec::new(self.n, d_r, k * d_r, m, self.p, seed), f));
                        }
                    }
                }
            }
        }
        out
    }
}

/// Worker count from [`THREADS_ENV`], if set to a positive integer.
pub fn thread_cap() -> Option<usize> {
    std::env::var(THREADS_ENV).ok()?.trim().parse().ok().filter(|&t| t > 0)
}

/// Runs every case, instances in parallel under `exec`. Failures to build
/// an instance become rows with status `er`.
pub fn sweep(cases: &[(InstanceSpec, Formulation)], options: &SolveOptions, exec: Exec) -> Vec<ResultRow> {
    let run = |(spec, f): &(InstanceSpec, Formulation)| -> ResultRow {
        let out = EnvelopeInstance::new_with(spec.clone(), Exec::Sequential)
            .and_then(|inst| run_instance(&inst, *f, options));
        match out {
            Ok(o) => o.row,
            Err(e) => ResultRow {
                n: spec.n,
                d_r: spec.d_r,
                m: spec.m,
                d: spec.d,
                p: spec.p,
                seed: spec.seed,
                formulation: *f,
                st: Status::Er,
                iter: 0,
                time: 0.0,
                obj: f64::NAN,
                cone_dim: 0,
                note: Some(e.to_string()),
            },
        }
    };
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        use rayon::prelude::*;
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Some(t) = thread_cap() {
            builder = builder.num_threads(t);
        }
        if let Ok(pool) = builder.build() {
            return pool.install(|| cases.par_iter().map(run).collect());
        }
    }
    let _ = exec;
    cases.iter().map(run).collect()
}

/// Which cone certifies `q + t e_1` in the separation example.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WitnessCone {
    L2,
    ArrowPsd,
}

/// Minimizes `t` such that `(1 + x^2 + t, 1 - x^2, 2x)` lies in the
/// (unweighted) SOS-L2 cone or in the arrow SOS-PSD cone. The vector is
/// pointwise on the boundary of the second-order cone, so the arrow
/// formulation attains `t = 0` while the L2 cone needs `t > 0`.
pub fn separation_witness(cone: WitnessCone, seed: u64) -> Result<(f64, SolveResult)> {
    let basis = BasisContext::new(1, 1, seed)?;
    let weights = basis.weights[..1].to_vec();
    let u = basis.u();
    let x = basis.points.column(0);
    let q1 = DVector::from_iterator(u, x.iter().map(|t| 1.0 + t * t));
    let q2 = DVector::from_iterator(u, x.iter().map(|t| 1.0 - t * t));
    let q3 = DVector::from_iterator(u, x.iter().map(|t| 2.0 * t));
    let ones = DVector::from_element(u, 1.0);
    let (h, mm, oracle): (DVector<f64>, DVector<f64>, Box<dyn ConeOracle>) = match cone {
        WitnessCone::L2 => {
            let mut h = DVector::zeros(3 * u);
            let mut mm = DVector::zeros(3 * u);
            for (i, v) in [&q1, &q2, &q3].into_iter().enumerate() {
                h.rows_mut(i * u, u).copy_from(v);
            }
            mm.rows_mut(0, u).copy_from(&ones);
            (h, mm, Box::new(WsosL2Cone::new(weights, 3)?))
        }
        WitnessCone::ArrowPsd => {
            let mut h = DVector::zeros(6 * u);
            let mut mm = DVector::zeros(6 * u);
            for i in 0..3 {
                let c = tri_index(3, i, i);
                h.rows_mut(c * u, u).copy_from(&q1);
                mm.rows_mut(c * u, u).copy_from(&ones);
            }
            h.rows_mut(tri_index(3, 1, 0) * u, u).copy_from(&(2.0 * &q2));
            h.rows_mut(tri_index(3, 2, 0) * u, u).copy_from(&(2.0 * &q3));
            (h, mm, Box::new(WsosPsdCone::new(weights, 3)?))
        }
    };
    let n = mm.len();
    let problem = dual_problem(h, DMatrix::from_column_slice(n, 1, mm.as_slice()), DVector::from_element(1, 1.0), vec![oracle])?;
    let result = ipm::solve(&problem, &SolveOptions::default())?;
    Ok((-result.primal_obj, result))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(m: usize, p: u8, d_r: usize, d: usize, seed: u64) -> InstanceSpec {
        InstanceSpec::new(1, d_r, d, m, p, seed)
    }

    #[test]
    fn random_polys_are_deterministic() {
        assert_eq!(random_polys(2, 2, 4, 9), random_polys(2, 2, 4, 9));
        assert_ne!(random_polys(2, 2, 4, 9), random_polys(2, 2, 4, 10));
        for q in random_polys(1, 2, 3, 1) {
            assert!(q.coeffs.iter().all(|c| c.abs() <= 1.0));
            assert_eq!(q.degree, 4);
        }
    }

    #[test]
    fn instance_values_match_direct_evaluation() {
        let inst = EnvelopeInstance::new(spec(3, 2, 1, 1, 4)).unwrap();
        for (i, q) in inst.q.iter().enumerate() {
            for u in 0..inst.u() {
                let x = inst.basis.point(u)[0];
                let direct: f64 = q.coeffs[0] + q.coeffs[1] * x + q.coeffs[2] * (2.0 * x * x - 1.0);
                assert!((inst.polys.coeffs[(u, i)] - direct).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn spec_validation() {
        assert!(spec(3, 2, 2, 3, 0).validate().is_err());
        assert!(spec(3, 1, 2, 4, 0).validate().is_err());
        assert!(spec(1, 2, 2, 2, 0).validate().is_err());
        assert!(spec(3, 3, 2, 2, 0).validate().is_err());
        assert!(spec(3, 2, 2, 4, 0).validate().is_ok());
    }

    #[test]
    fn formulation_mismatch_is_rejected() {
        let inst = EnvelopeInstance::new(spec(3, 2, 1, 1, 0)).unwrap();
        assert!(matches!(build(&inst, Formulation::Sosl1), Err(Error::FormulationMismatch(_))));
        assert_eq!("sos_ext".parse::<Formulation>().unwrap(), Formulation::SosExt);
        assert!("socp".parse::<Formulation>().is_err());
    }

    #[test]
    fn problem_dimensions() {
        let inst = EnvelopeInstance::new(spec(4, 1, 2, 2, 0)).unwrap();
        let u = inst.u();
        let l1 = build(&inst, Formulation::Sosl1).unwrap();
        assert_eq!(l1.dims.cone_dim, u * 4);
        assert_eq!(l1.problem.num_eqs(), u);
        let ext = build(&inst, Formulation::SosExt).unwrap();
        assert_eq!(ext.dims.cone_dim, u * 7);
        assert_eq!(ext.dims.extra_equalities, u * 3);
        assert_eq!(ext.dims.extra_vars, 2 * u * 3);
        let inst2 = EnvelopeInstance::new(spec(4, 2, 2, 2, 0)).unwrap();
        let sos = build(&inst2, Formulation::Sos).unwrap();
        let psd = build(&inst2, Formulation::Sospsd).unwrap();
        assert_eq!(sos.dims.cone_dim, psd.dims.cone_dim);
        assert_eq!(sos.dims.cone_dim, u * 10);
    }

    #[test]
    fn zero_polynomials_give_zero_envelope() {
        let mut s = spec(3, 2, 1, 1, 2);
        s.zero = true;
        let inst = EnvelopeInstance::new(s).unwrap();
        for f in [Formulation::Sosl2, Formulation::Sospsd] {
            let out = run_instance(&inst, f, &SolveOptions::default()).unwrap();
            assert_eq!(out.row.st, Status::Co);
            assert!(out.row.obj.abs() < 1e-6, "{f}: {}", out.row.obj);
        }
    }

    #[test]
    fn small_instances_converge_and_are_valid() {
        for (p, f) in [
            (2, Formulation::Sosl2),
            (2, Formulation::Sos),
            (2, Formulation::Sospsd),
            (1, Formulation::Sosl1),
            (1, Formulation::SosExt),
        ] {
            let inst = EnvelopeInstance::new(spec(3, p, 1, 1, 5)).unwrap();
            let out = run_instance(&inst, f, &SolveOptions::default()).unwrap();
            assert_eq!(out.row.st, Status::Co, "{f}");
            let v = check_validity(&inst, &out.envelope, 1000, 1e-5, 1);
            assert!(v.holds(), "{f}: {v:?}");
        }
    }

    #[test]
    fn table_and_json_shapes() {
        let row = ResultRow {
            n: 1,
            d_r: 2,
            m: 3,
            d: 2,
            p: 2,
            seed: 1,
            formulation: Formulation::SosExt,
            st: Status::Co,
            iter: 12,
            time: 0.5,
            obj: 1.25,
            cone_dim: 15,
            note: None,
        };
        let table = markdown_table(std::slice::from_ref(&row));
        assert!(table.starts_with("| n | d_r | m | d |"));
        assert!(table.contains("| 1 | 2 | 3 | 2 | sos_ext | co | 12 | 0.50 | 1.250000 |"));
        let json = serde_json::to_value(&row).unwrap();
        assert_eq!(json["st"], "co");
        assert_eq!(json["formulation"], "sos_ext");
        let inst = EnvelopeInstance::new(spec(3, 2, 1, 1, 0)).unwrap();
        let j = serde_json::to_value(&inst).unwrap();
        assert_eq!(j["f"].as_array().unwrap().len(), 2);
        assert_eq!(j["d_r"], 1);
    }

    #[test]
    fn sweep_cases_cross_product() {
        let cfg = SweepConfig {
            n: 1,
            p: 2,
            d_r: vec![1, 2],
            m: vec![3],
            d_factor: vec![1, 2],
            seeds: vec![0, 1],
            formulations: vec![Formulation::Sosl2, Formulation::Sos],
        };
        let cases = cfg.cases();
        assert_eq!(cases.len(), 16);
        assert!(cases.iter().all(|(s, _)| s.validate().is_ok()));
    }
}
