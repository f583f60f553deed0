//! Acceptance suite: one pass/fail line per criterion.

mod common;

use std::time::Instant;

use common::*;
use nalgebra::{DMatrix, DVector};
use sos_cones::envelope::{self, EnvelopeInstance, Formulation, InstanceSpec, RunOutput, WitnessCone};
use sos_cones::ipm::{SolveOptions, Status};
use sos_cones::lifting::{self, PolyVec};
use sos_cones::linalg;

const GRID: [(usize, usize, usize); 4] = [(1, 2, 3), (2, 1, 2), (1, 1, 4), (2, 2, 2)];
const SEEDS: [u64; 5] = [1, 2, 3, 4, 5];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn rel_vec(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a - b).norm() / b.norm()
}

fn derivatives() -> Outcome {
    let start = Instant::now();
    let (mut worst_g, mut worst_h) = (0.0f64, 0.0f64);
    for (gi, &(n, d, m)) in GRID.iter().enumerate() {
        let w = box_weights(n, d, 100 + gi as u64);
        for kind in Kind::ALL {
            let cone = kind.build(w.clone(), m);
            let mut r = rng(gi as u64 * 7 + kind as u64);
            for _ in 0..20 {
                let s = interior(cone.as_ref(), &mut r);
                let g = cone.gradient(&s).unwrap();
                let hess = cone.hessian(&s).unwrap();
                let dim = cone.dim();
                let (hg, hh) = (1e-5 * s.amax(), 1e-4 * s.amax());
                let mut fd_g = DVector::zeros(dim);
                let mut fd_h = DMatrix::zeros(dim, dim);
                for a in 0..dim {
                    let mut e = DVector::zeros(dim);
                    e[a] = hg;
                    fd_g[a] = (cone.barrier_value(&(&s + &e)).unwrap() - cone.barrier_value(&(&s - &e)).unwrap()) / (2.0 * hg);
                    e[a] = hh;
                    let col = (cone.gradient(&(&s + &e)).unwrap() - cone.gradient(&(&s - &e)).unwrap()) / (2.0 * hh);
                    fd_h.set_column(a, &col);
                }
                worst_g = worst_g.max(rel_vec(&fd_g, &g));
                worst_h = worst_h.max((&fd_h - &hess).norm() / hess.norm());
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        worst_g <= 1e-6 && worst_h <= 1e-5 && secs < 120.0,
        format!("max gradient rel err {worst_g:.2e}, max Hessian rel err {worst_h:.2e}, {secs:.1}s"),
    )
}

fn parameters() -> Outcome {
    let (mut worst_nu, mut worst_log) = (0.0f64, 0.0f64);
    for (gi, &(n, d, m)) in GRID.iter().enumerate() {
        let w = box_weights(n, d, 200 + gi as u64);
        for kind in Kind::ALL {
            let cone = kind.build(w.clone(), m);
            let nu = kind.nu(&w, m);
            worst_nu = worst_nu.max((cone.nu() - nu).abs());
            let mut r = rng(300 + gi as u64 * 7 + kind as u64);
            for _ in 0..20 {
                let s = interior(cone.as_ref(), &mut r);
                let g = cone.gradient(&s).unwrap();
                worst_nu = worst_nu.max((g.dot(&s) + nu).abs());
                let f = cone.barrier_value(&s).unwrap();
                for t in [0.5, 2.0, 10.0] {
                    let ft = cone.barrier_value(&(t * &s)).unwrap();
                    worst_log = worst_log.max((ft - f + nu * f64::ln(t)).abs());
                }
            }
        }
    }
    outcome(
        worst_nu <= 1e-8 && worst_log <= 1e-9,
        format!("max |<g,s> + nu| {worst_nu:.2e}, max homogeneity defect {worst_log:.2e}"),
    )
}

fn membership() -> Outcome {
    let (mut disagreements, mut decided, mut inside) = (0usize, 0usize, 0usize);
    for (gi, &(n, d, m)) in GRID.iter().enumerate() {
        let w = box_weights(n, d, 400 + gi as u64);
        for kind in Kind::ALL {
            let cone = kind.build(w.clone(), m);
            let mut r = rng(500 + gi as u64 * 7 + kind as u64);
            for _ in 0..200 {
                let s = probe(cone.as_ref(), &mut r);
                let margin = membership_margin(kind, &w, &s, m);
                if margin.abs() <= 1e-10 {
                    continue;
                }
                decided += 1;
                let dense = margin > 0.0;
                inside += dense as usize;
                if cone.feasibility(&s).unwrap() != dense {
                    disagreements += 1;
                }
            }
        }
    }
    outcome(
        disagreements == 0,
        format!("{disagreements} disagreements over {decided} probes ({inside} interior)"),
    )
}

fn schur_identities() -> Outcome {
    let (mut worst_f, mut worst_inv, mut worst_pi) = (0.0f64, 0.0f64, 0.0f64);
    let mut count = 0;
    for (gi, &(n, d, m)) in GRID.iter().enumerate() {
        let w = box_weights(n, d, 600 + gi as u64);
        let cone = Kind::L2.build(w.clone(), m);
        let mut r = rng(700 + gi as u64);
        // 50 points spread over the grid
        let per = if gi < 2 { 13 } else { 12 };
        for _ in 0..per {
            count += 1;
            let s = interior(cone.as_ref(), &mut r);
            let f = cone.barrier_value(&s).unwrap();
            worst_f = worst_f.max((f - dense_barrier(Kind::L2, &w, &s, m)).abs());
            let u = w[0].p.nrows();
            let vec = PolyVec::from_flat(u, m, s.as_slice()).unwrap();
            for rec in &w {
                let l = rec.p.ncols();
                let arrow = arrow_lift(rec, &s, m);
                let inv = arrow.clone().try_inverse().unwrap();
                let blocks = lifting::assemble_blocks(&lifting::block_arrow_inverse_blocks(rec, &vec).unwrap());
                worst_inv = worst_inv.max((&blocks - &inv).norm() / inv.norm());
                // eliminate the trailing diagonal blocks densely
                let rest = arrow.view((l, l), (l * (m - 1), l * (m - 1))).into_owned();
                let arm = arrow.view((0, l), (l, l * (m - 1))).into_owned();
                let dense_pi = arrow.view((0, 0), (l, l)).into_owned() - &arm * rest.try_inverse().unwrap() * arm.transpose();
                let head = linalg::cholesky(&lifting::lambda_sos(rec, &vec.component(0))).unwrap();
                let pi = lifting::schur_pi(rec, &vec, &head);
                worst_pi = worst_pi.max((&pi - &dense_pi).norm() / dense_pi.norm());
            }
        }
    }
    outcome(
        count == 50 && worst_f <= 1e-9 && worst_inv <= 1e-8 && worst_pi <= 1e-9,
        format!("{count} points: barrier identity {worst_f:.2e}, arrow inverse {worst_inv:.2e}, Schur complement {worst_pi:.2e}"),
    )
}

/// Solver statistics collected for the convergence criterion.
#[derive(Default)]
struct Runs {
    records: Vec<(String, Status, usize, f64)>,
}

impl Runs {
    fn push(&mut self, label: String, st: Status, iter: usize, time: f64) {
        self.records.push((label, st, iter, time));
    }
}

fn witness(runs: &mut Runs) -> Outcome {
    let start = Instant::now();
    let (t_psd, r_psd) = envelope::separation_witness(WitnessCone::ArrowPsd, 1).unwrap();
    let (t_l2, r_l2) = envelope::separation_witness(WitnessCone::L2, 1).unwrap();
    runs.push("witness arrow".into(), r_psd.status, r_psd.iterations, r_psd.wall_time);
    runs.push("witness l2".into(), r_l2.status, r_l2.iterations, r_l2.wall_time);
    let secs = start.elapsed().as_secs_f64();
    outcome(
        r_psd.status == Status::Co && r_l2.status == Status::Co && t_psd <= 1e-6 && t_l2 > 1e-4 && secs < 30.0,
        format!("arrow t* = {t_psd:.3e} ({}), L2 t* = {t_l2:.3e} ({}), {secs:.1}s", r_psd.status, r_l2.status),
    )
}

fn solve(spec: &InstanceSpec, f: Formulation, runs: &mut Runs, envelopes: &mut Vec<(EnvelopeInstance, RunOutput)>) -> Option<f64> {
    let inst = EnvelopeInstance::new(spec.clone()).unwrap();
    let out = envelope::run_instance(&inst, f, &SolveOptions::default()).unwrap();
    let label = format!("{f} n={} d_r={} d={} m={} seed={}", spec.n, spec.d_r, spec.d, spec.m, spec.seed);
    runs.push(label, out.row.st, out.row.iter, out.row.time);
    let obj = (out.row.st == Status::Co).then_some(out.row.obj);
    envelopes.push((inst, out));
    obj
}

fn equivalences(runs: &mut Runs, envs: &mut Vec<(EnvelopeInstance, RunOutput)>) -> Outcome {
    let start = Instant::now();
    let (mut worst_psd, mut worst_l1) = (0.0f64, 0.0f64);
    let mut missing = 0;
    for m in [3, 4] {
        for seed in SEEDS {
            let s2 = InstanceSpec::new(1, 2, 2, m, 2, seed);
            match (solve(&s2, Formulation::Sos, runs, envs), solve(&s2, Formulation::Sospsd, runs, envs)) {
                (Some(a), Some(b)) => worst_psd = worst_psd.max(rel_diff(a, b)),
                _ => missing += 1,
            }
            let s1 = InstanceSpec::new(1, 2, 2, m, 1, seed);
            match (solve(&s1, Formulation::Sosl1, runs, envs), solve(&s1, Formulation::SosExt, runs, envs)) {
                (Some(a), Some(b)) => worst_l1 = worst_l1.max(rel_diff(a, b)),
                _ => missing += 1,
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        missing == 0 && worst_psd <= 1e-6 && worst_l1 <= 1e-5 && secs < 300.0,
        format!("sos vs sospsd {worst_psd:.2e}, sosl1 vs sos_ext {worst_l1:.2e}, {missing} unconverged pairs, {secs:.1}s"),
    )
}

fn conservatism(runs: &mut Runs, envs: &mut Vec<(EnvelopeInstance, RunOutput)>) -> Outcome {
    let mut worst_equal = f64::NEG_INFINITY;
    let mut near = 0;
    let mut ratios = Vec::new();
    let mut missing = 0;
    for seed in SEEDS {
        for d in [2, 4] {
            let spec = InstanceSpec::new(1, 2, d, 3, 2, seed);
            let sos = solve(&spec, Formulation::Sos, runs, envs);
            let l2 = solve(&spec, Formulation::Sosl2, runs, envs);
            let (Some(a), Some(b)) = (sos, l2) else {
                missing += 1;
                continue;
            };
            let ratio = a / b;
            if d == 2 {
                worst_equal = worst_equal.max(ratio);
            } else {
                ratios.push(ratio);
                near += (ratio >= 0.99) as usize;
            }
        }
    }
    let shown: Vec<String> = ratios.iter().map(|r| format!("{r:.4}")).collect();
    outcome(
        missing == 0 && worst_equal <= 1.0 + 1e-6 && near >= 4,
        format!(
            "max ratio at d = d_r {worst_equal:.8}, ratios at d = 2 d_r [{}], {near}/5 >= 0.99",
            shown.join(", ")
        ),
    )
}

fn convergence(runs: &Runs) -> Outcome {
    let bad: Vec<String> = runs
        .records
        .iter()
        .filter(|(_, st, it, t)| *st != Status::Co || *it > 200 || *t > 60.0)
        .map(|(l, st, it, t)| format!("{l}: {st} after {it} iterations in {t:.1}s"))
        .collect();
    let max_it = runs.records.iter().map(|r| r.2).max().unwrap_or(0);
    let max_t = runs.records.iter().map(|r| r.3).fold(0.0, f64::max);
    outcome(
        bad.is_empty(),
        if bad.is_empty() {
            format!("{} solves, max {max_it} iterations, max {max_t:.2}s", runs.records.len())
        } else {
            bad.join("; ")
        },
    )
}

fn validity(envs: &[(EnvelopeInstance, RunOutput)]) -> Outcome {
    let mut worst = f64::NEG_INFINITY;
    let mut checked = 0;
    for (k, (inst, out)) in envs.iter().enumerate() {
        if out.row.st != Status::Co {
            continue;
        }
        checked += 1;
        let mut r = rng(900 + k as u64);
        for _ in 0..1000 {
            let x: Vec<f64> = (0..inst.spec.n).map(|_| rand::Rng::random_range(&mut r, -1.0..=1.0)).collect();
            let tails: Vec<f64> = inst.q.iter().map(|q| cheb_eval(q, &x)).collect();
            let norm = if inst.spec.p == 1 {
                tails.iter().map(|v| v.abs()).sum::<f64>()
            } else {
                tails.iter().map(|v| v * v).sum::<f64>().sqrt()
            };
            let head = cheb_eval(&out.envelope, &x);
            worst = worst.max(norm - head - 1e-5 * (1.0 + head.abs()));
        }
    }
    outcome(worst <= 0.0, format!("{checked} envelopes, max excess {worst:.2e}"))
}

fn main() {
    let mut runs = Runs::default();
    let mut envs = Vec::new();
    let mut results = Vec::new();
    let mut report = |k: usize, name: &str, o: Outcome| {
        println!("criterion {k} [{}] {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        results.push(o.pass);
    };
    report(1, "derivative correctness", derivatives());
    report(2, "barrier parameters", parameters());
    report(3, "membership brute force", membership());
    report(4, "Schur and arrow identities", schur_identities());
    report(5, "separation witness", witness(&mut runs));
    report(6, "formulation equivalences", equivalences(&mut runs, &mut envs));
    report(7, "conservatism and near-tightness", conservatism(&mut runs, &mut envs));
    report(8, "solver convergence", convergence(&runs));
    report(9, "pointwise validity", validity(&envs));
    let failed = results.iter().filter(|p| !**p).count();
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
