mod common;

use common::{cheb_eval, rng};
use nalgebra::DVector;
use rand::Rng;
use sos_cones::linalg::binomial;
use sos_cones::polybasis::{exponents, BasisContext, ChebyshevPoly};

/// `int_{-1}^{1} T_k`.
fn cheb_integral(k: usize) -> f64 {
    if k % 2 == 1 {
        0.0
    } else {
        2.0 / (1.0 - (k * k) as f64)
    }
}

#[test]
fn selected_points_are_unisolvent() {
    for n in 1..=4 {
        for d in 1..=4 {
            let ctx = BasisContext::new(n, d, 3).unwrap();
            let v = ctx.full_vandermonde();
            assert_eq!(v.nrows(), binomial(n + 2 * d, n));
            let sv = v.singular_values();
            let cond = sv.max() / sv.min();
            assert!(cond < 1e12, "n={n} d={d}: condition {cond:.3e}");
        }
    }
}

#[test]
fn quadrature_is_exact_for_random_polynomials() {
    let mut r = rng(17);
    for (n, d) in [(1, 1), (1, 3), (2, 2), (3, 1), (2, 3)] {
        let ctx = BasisContext::new(n, d, 5).unwrap();
        let exps = exponents(n, 2 * d);
        for _ in 0..50 {
            let coeffs = DVector::from_fn(exps.len(), |_, _| r.random_range(-1.0..1.0));
            let exact: f64 = exps
                .iter()
                .zip(coeffs.iter())
                .map(|(e, c)| c * e.iter().map(|&k| cheb_integral(k)).product::<f64>())
                .sum();
            let q = ChebyshevPoly::new(n, 2 * d, coeffs);
            let values = DVector::from_fn(ctx.u(), |u, _| cheb_eval(&q, &ctx.point(u)));
            let approx = ctx.quad.dot(&values);
            assert!(
                (approx - exact).abs() <= 1e-8 * exact.abs().max(1.0),
                "n={n} d={d}: {approx} vs {exact}"
            );
            assert!((q.integral() - exact).abs() <= 1e-12 * exact.abs().max(1.0));
        }
    }
}

#[test]
fn basis_order_and_points_are_stable() {
    for (n, d) in [(1, 2), (2, 2), (3, 1)] {
        let a = BasisContext::new(n, d, 11).unwrap();
        let b = BasisContext::new(n, d, 11).unwrap();
        assert_eq!(a.points, b.points);
        assert_eq!(a.p, b.p);
        assert_eq!(exponents(n, d), exponents(n, d));
    }
}

#[test]
fn interpolation_matches_independent_evaluation() {
    let mut r = rng(23);
    let ctx = BasisContext::new(2, 2, 4).unwrap();
    let len = binomial(2 + 4, 2);
    let q = ChebyshevPoly::new(2, 4, DVector::from_fn(len, |_, _| r.random_range(-1.0..1.0)));
    let values = DVector::from_fn(ctx.u(), |u, _| cheb_eval(&q, &ctx.point(u)));
    let back = ctx.interpolate(&values).unwrap();
    for _ in 0..20 {
        let x = [r.random_range(-1.0..1.0), r.random_range(-1.0..1.0)];
        assert!((cheb_eval(&back, &x) - cheb_eval(&q, &x)).abs() < 1e-10);
    }
}
