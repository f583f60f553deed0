//! Interpolation basis on the box `[-1, 1]^n`.
//!
//! Polynomials of degree `<= 2d` are represented by their values at `U`
//! unisolvent interpolation points (a Lagrange basis), and the half-degree
//! space uses tensor Chebyshev polynomials. A [`BasisContext`] bundles the
//! points, the degree-`d` Vandermonde matrix `P`, the box weights used for
//! weighted SOS, and exact quadrature weights.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::linalg::binomial;

/// Candidate points sampled per interpolation point during selection.
pub const CANDIDATES_PER_POINT: usize = 100;

/// Selected Vandermonde matrices with a larger condition estimate are rejected.
pub const MAX_CONDITION: f64 = 1e12;

/// Exponent tuples with total degree `<= deg`, graded lexicographic order.
///
/// Within one total degree, tuples are ordered lexicographically with larger
/// leading exponents first, so for `n = 2` the degree-one tuples are `(1,0)`
/// then `(0,1)`.
pub fn exponents(n: usize, deg: usize) -> Vec<Vec<usize>> {
    fn fill(n: usize, remaining: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if prefix.len() + 1 == n {
            prefix.push(remaining);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for a in (0..=remaining).rev() {
            prefix.push(a);
            fill(n, remaining - a, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::with_capacity(binomial(n + deg, n));
    for total in 0..=deg {
        fill(n, total, &mut Vec::with_capacity(n), &mut out);
    }
    out
}

/// `T_0(x), ..., T_deg(x)` by the three-term recurrence.
pub fn chebyshev_values(x: f64, deg: usize) -> Vec<f64> {
    let mut t = Vec::with_capacity(deg + 1);
    t.push(1.0);
    if deg >= 1 {
        t.push(x);
    }
    for k in 2..=deg {
        let next = 2.0 * x * t[k - 1] - t[k - 2];
        t.push(next);
    }
    t
}

fn eval_with_exponents(exps: &[Vec<usize>], deg: usize, x: &[f64]) -> Vec<f64> {
    let tables: Vec<Vec<f64>> = x.iter().map(|&xi| chebyshev_values(xi, deg)).collect();
    exps.iter()
        .map(|e| e.iter().zip(&tables).map(|(&a, t)| t[a]).product())
        .collect()
}

/// Tensor Chebyshev basis of total degree `<= d` evaluated at `x`.
///
/// Entry 0 is the constant polynomial.
pub fn chebyshev_basis_eval(n: usize, d: usize, x: &[f64]) -> Vec<f64> {
    assert_eq!(x.len(), n, "point has wrong dimension");
    eval_with_exponents(&exponents(n, d), d, x)
}

/// Rows are the Chebyshev basis of degree `<= deg` at each row of `points`.
pub fn vandermonde(points: &DMatrix<f64>, deg: usize) -> DMatrix<f64> {
    let n = points.ncols();
    let exps = exponents(n, deg);
    let mut v = DMatrix::zeros(points.nrows(), exps.len());
    let mut x = vec![0.0; n];
    for r in 0..points.nrows() {
        for (j, xj) in x.iter_mut().enumerate() {
            *xj = points[(r, j)];
        }
        for (c, val) in eval_with_exponents(&exps, deg, &x).into_iter().enumerate() {
            v[(r, c)] = val;
        }
    }
    v
}

fn condition_estimate(v: &DMatrix<f64>) -> f64 {
    let sv = v.clone().singular_values();
    let max = sv.iter().fold(0.0f64, |m, &s| m.max(s));
    let min = sv.iter().fold(f64::INFINITY, |m, &s| m.min(s));
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Greedy column-pivoted QR on the transpose of a row-major `rows x cols`
/// matrix, returning the first `k` pivot indices (rows of the original).
///
/// Each step picks the row with the largest residual norm (lowest index on
/// ties) and orthogonalizes every row against it.
fn pivoted_rows(data: &mut [f64], rows: usize, cols: usize, k: usize, exec: Exec) -> Result<Vec<usize>> {
    debug_assert_eq!(data.len(), rows * cols);
    let mut picked = Vec::with_capacity(k);
    let mut q = vec![0.0; cols];
    let chunk_rows = (rows / 64).max(64);
    for step in 0..k {
        let norms: Vec<f64> = exec.map(rows, |r| {
            data[r * cols..(r + 1) * cols].iter().map(|v| v * v).sum::<f64>()
        });
        let (best, best_norm) = norms
            .iter()
            .enumerate()
            .fold((usize::MAX, -1.0), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
        if best == usize::MAX || best_norm <= 0.0 || !best_norm.is_finite() {
            return Err(Error::DegeneratePoints(format!(
                "candidate set exhausted after {step} of {k} points"
            )));
        }
        let scale = best_norm.sqrt();
        for (qj, v) in q.iter_mut().zip(&data[best * cols..(best + 1) * cols]) {
            *qj = v / scale;
        }
        let q_ref = &q;
        exec.for_each_chunk_mut(data, chunk_rows * cols, |_, chunk| {
            for row in chunk.chunks_mut(cols) {
                let proj: f64 = row.iter().zip(q_ref).map(|(a, b)| a * b).sum();
                for (a, b) in row.iter_mut().zip(q_ref) {
                    *a -= proj * b;
                }
            }
        });
        picked.push(best);
    }
    Ok(picked)
}

/// Selects `U` unisolvent points for degree `2d` and returns them with the
/// degree-`d` Vandermonde matrix `P`.
pub fn select_points(n: usize, d: usize, seed: u64) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    select_points_with(n, d, seed, Exec::default())
}

pub fn select_points_with(
    n: usize,
    d: usize,
    seed: u64,
    exec: Exec,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    if n == 0 || d == 0 {
        return Err(Error::InvalidArgument("n and d must be at least 1".into()));
    }
    let u = binomial(n + 2 * d, n);
    let candidates = CANDIDATES_PER_POINT * u;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cand = DMatrix::from_fn(candidates, n, |_, _| rng.random_range(-1.0..=1.0));

    let v = vandermonde(&cand, 2 * d);
    // row-major copy so each candidate's row is contiguous
    let mut data: Vec<f64> = Vec::with_capacity(candidates * u);
    for r in 0..candidates {
        data.extend(v.row(r).iter());
    }
    let mut rows = pivoted_rows(&mut data, candidates, u, u, exec)?;
    rows.sort_unstable();

    let points = DMatrix::from_fn(u, n, |i, j| cand[(rows[i], j)]);
    let full = vandermonde(&points, 2 * d);
    let cond = condition_estimate(&full);
    if cond > MAX_CONDITION {
        return Err(Error::DegeneratePoints(format!(
            "condition estimate {cond:.3e} exceeds {MAX_CONDITION:.0e}"
        )));
    }
    Ok((points.clone(), vandermonde(&points, d)))
}

fn chebyshev_moment(k: usize) -> f64 {
    if k % 2 == 1 {
        0.0
    } else {
        2.0 / (1.0 - (k * k) as f64)
    }
}

/// Weights `w` with `w . f = \int_{[-1,1]^n} f` for every `f` of degree `<= 2d`.
///
/// `full` is the degree-`2d` Vandermonde matrix at the interpolation points.
pub fn quadrature_weights(n: usize, d: usize, full: &DMatrix<f64>) -> Result<DVector<f64>> {
    let exps = exponents(n, 2 * d);
    if full.nrows() != exps.len() || full.ncols() != exps.len() {
        return Err(Error::shape(
            format!("{0}x{0}", exps.len()),
            format!("{}x{}", full.nrows(), full.ncols()),
        ));
    }
    let moments = DVector::from_iterator(
        exps.len(),
        exps.iter().map(|e| e.iter().map(|&k| chebyshev_moment(k)).product::<f64>()),
    );
    full.transpose()
        .lu()
        .solve(&moments)
        .ok_or_else(|| Error::DegeneratePoints("quadrature system is singular".into()))
}

/// One weight `g_k` of a weighted SOS cone: its values at the interpolation
/// points and the Vandermonde block of the SOS multiplier's basis.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightRecord {
    pub values: DVector<f64>,
    pub p: DMatrix<f64>,
}

impl WeightRecord {
    pub fn new(values: DVector<f64>, p: DMatrix<f64>) -> Self {
        assert_eq!(values.len(), p.nrows());
        Self { values, p }
    }

    /// The unweighted record `g = 1`.
    pub fn unit(p: DMatrix<f64>) -> Self {
        Self::new(DVector::from_element(p.nrows(), 1.0), p)
    }

    /// Number of interpolation points (`U`).
    pub fn points(&self) -> usize {
        self.p.nrows()
    }

    /// Side of the lifted matrix (`L_k`).
    pub fn cols(&self) -> usize {
        self.p.ncols()
    }
}

/// Weights of the box `[-1,1]^n`: `g_1 = 1` with half-degree `d`, and
/// `g_{1+k} = 1 - x_k^2` with half-degree `d - 1`.
pub fn box_weights(n: usize, d: usize, points: &DMatrix<f64>, p: &DMatrix<f64>) -> Vec<WeightRecord> {
    let lower = binomial(n + d - 1, n);
    let mut out = Vec::with_capacity(n + 1);
    out.push(WeightRecord::unit(p.clone()));
    for k in 0..n {
        let g = DVector::from_iterator(points.nrows(), points.column(k).iter().map(|x| 1.0 - x * x));
        out.push(WeightRecord::new(g, p.columns(0, lower).into_owned()));
    }
    out
}

/// Interpolation data for one `(n, d)` pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "BasisContextJson", try_from = "BasisContextJson")]
pub struct BasisContext {
    pub n: usize,
    pub d: usize,
    /// `U x n`, one interpolation point per row.
    pub points: DMatrix<f64>,
    /// `U x L`, Chebyshev basis of degree `d` at the points.
    pub p: DMatrix<f64>,
    pub weights: Vec<WeightRecord>,
    pub quad: DVector<f64>,
}

impl BasisContext {
    pub fn new(n: usize, d: usize, seed: u64) -> Result<Self> {
        Self::new_with(n, d, seed, Exec::default())
    }

    pub fn new_with(n: usize, d: usize, seed: u64, exec: Exec) -> Result<Self> {
        let (points, _) = select_points_with(n, d, seed, exec)?;
        Self::from_points(n, d, points)
    }

    /// Builds a context on caller-supplied points (which must be unisolvent).
    pub fn from_points(n: usize, d: usize, points: DMatrix<f64>) -> Result<Self> {
        let u = binomial(n + 2 * d, n);
        if points.nrows() != u || points.ncols() != n {
            return Err(Error::shape(
                format!("{u}x{n} points"),
                format!("{}x{}", points.nrows(), points.ncols()),
            ));
        }
        let full = vandermonde(&points, 2 * d);
        let quad = quadrature_weights(n, d, &full)?;
        let p = vandermonde(&points, d);
        let weights = box_weights(n, d, &points, &p);
        Ok(Self {
            n,
            d,
            points,
            p,
            weights,
            quad,
        })
    }

    /// Dimension of the half-degree space, `C(n+d, n)`.
    pub fn l(&self) -> usize {
        self.p.ncols()
    }

    /// Number of interpolation points, `C(n+2d, n)`.
    pub fn u(&self) -> usize {
        self.points.nrows()
    }

    pub fn point(&self, u: usize) -> Vec<f64> {
        self.points.row(u).iter().copied().collect()
    }

    /// Degree-`2d` Vandermonde matrix at the interpolation points.
    pub fn full_vandermonde(&self) -> DMatrix<f64> {
        vandermonde(&self.points, 2 * self.d)
    }

    /// Chebyshev coefficients of the polynomial taking `values` at the points.
    pub fn interpolate(&self, values: &DVector<f64>) -> Result<ChebyshevPoly> {
        if values.len() != self.u() {
            return Err(Error::shape(self.u(), values.len()));
        }
        let coeffs = self
            .full_vandermonde()
            .lu()
            .solve(values)
            .ok_or_else(|| Error::DegeneratePoints("interpolation system is singular".into()))?;
        Ok(ChebyshevPoly::new(self.n, 2 * self.d, coeffs))
    }
}

/// A polynomial stored by its tensor Chebyshev coefficients (graded lex order).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChebyshevPoly {
    pub n: usize,
    pub degree: usize,
    pub coeffs: DVector<f64>,
}

impl ChebyshevPoly {
    pub fn new(n: usize, degree: usize, coeffs: DVector<f64>) -> Self {
        assert_eq!(coeffs.len(), binomial(n + degree, n));
        Self { n, degree, coeffs }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        chebyshev_basis_eval(self.n, self.degree, x)
            .iter()
            .zip(self.coeffs.iter())
            .map(|(a, b)| a * b)
            .sum()
    }

    /// Values at each row of `points`.
    pub fn values_at(&self, points: &DMatrix<f64>) -> DVector<f64> {
        vandermonde(points, self.degree) * &self.coeffs
    }

    /// Exact integral over `[-1,1]^n`.
    pub fn integral(&self) -> f64 {
        exponents(self.n, self.degree)
            .iter()
            .zip(self.coeffs.iter())
            .map(|(e, c)| c * e.iter().map(|&k| chebyshev_moment(k)).product::<f64>())
            .sum()
    }
}

#[derive(Serialize, Deserialize)]
struct WeightJson {
    values: Vec<f64>,
    cols: usize,
}

#[derive(Serialize, Deserialize)]
struct BasisContextJson {
    n: usize,
    d: usize,
    u: usize,
    l: usize,
    /// row-major `U x n`
    points: Vec<f64>,
    /// row-major `U x L`
    p: Vec<f64>,
    weights: Vec<WeightJson>,
    quad: Vec<f64>,
}

fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    m.transpose().as_slice().to_vec()
}

impl From<BasisContext> for BasisContextJson {
    fn from(ctx: BasisContext) -> Self {
        Self {
            n: ctx.n,
            d: ctx.d,
            u: ctx.u(),
            l: ctx.l(),
            points: row_major(&ctx.points),
            p: row_major(&ctx.p),
            weights: ctx
                .weights
                .iter()
                .map(|w| WeightJson {
                    values: w.values.as_slice().to_vec(),
                    cols: w.cols(),
                })
                .collect(),
            quad: ctx.quad.as_slice().to_vec(),
        }
    }
}

impl TryFrom<BasisContextJson> for BasisContext {
    type Error = Error;

    fn try_from(j: BasisContextJson) -> Result<Self> {
        if j.points.len() != j.u * j.n || j.p.len() != j.u * j.l || j.quad.len() != j.u {
            return Err(Error::shape("consistent basis context arrays", "mismatched lengths"));
        }
        let points = DMatrix::from_row_slice(j.u, j.n, &j.points);
        let p = DMatrix::from_row_slice(j.u, j.l, &j.p);
        let weights = j
            .weights
            .into_iter()
            .map(|w| {
                if w.values.len() != j.u || w.cols > j.l {
                    return Err(Error::shape("weight record within basis", "out of range"));
                }
                Ok(WeightRecord::new(
                    DVector::from_vec(w.values),
                    p.columns(0, w.cols).into_owned(),
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            n: j.n,
            d: j.d,
            points,
            p,
            weights,
            quad: DVector::from_vec(j.quad),
        })
    }
}
