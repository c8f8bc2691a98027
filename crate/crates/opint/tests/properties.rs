//! Property-based invariants. Inputs are generated as (seed, size) pairs and
//! expanded through the crate's own deterministic generator, so failures
//! shrink to a reproducible seed.

use num_complex::Complex;
use opint::doi::{op_difference, DoiTransformer};
use opint::funkit::{
    default_coincidence_tol, divided_difference, exp_diff, exp_fn, factorial, monomial,
    product_xy, sin_fn, sin_sum, Kernel2,
};
use opint::matcore::{hermitian_eig, mat_fun, op_norm, schatten_norm, Mat};
use opint::moi::{higher_difference_direct, higher_difference_moi};
use opint::noncomm::{pair_difference_repr, OpPair};
use opint::rng::SplitMix64;
use opint::shift::{krein_trace_check, spectral_shift};
use proptest::prelude::*;

type M = Mat<f64>;

fn pair(seed: u64, n: usize) -> (M, M) {
    let mut rng = SplitMix64::new(seed);
    (M::hermitian_gaussian(n, &mut rng), M::hermitian_gaussian(n, &mut rng))
}

proptest! {
    #[test]
    fn schatten_is_unitarily_invariant(seed in any::<u64>(), n in 2usize..=6) {
        let (a, h) = pair(seed, n);
        let u = hermitian_eig(&h).unwrap().basis;
        let rotated = &(&u * &a) * &u.adjoint();
        for p in [1.0, 2.0, 3.5, f64::INFINITY] {
            let lhs = schatten_norm(&rotated, p).unwrap();
            let rhs = schatten_norm(&a, p).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-8 * (1.0 + rhs));
        }
    }

    #[test]
    fn schatten_decreases_in_p(seed in any::<u64>(), n in 2usize..=6) {
        let (a, _) = pair(seed, n);
        let ps = [1.0, 1.5, 2.0, 3.0, 7.0, f64::INFINITY];
        let norms: Vec<f64> = ps.iter().map(|&p| schatten_norm(&a, p).unwrap()).collect();
        for w in norms.windows(2) {
            prop_assert!(w[1] <= w[0] * (1.0 + 1e-10));
        }
    }

    #[test]
    fn schatten_triangle_inequality(seed in any::<u64>(), n in 2usize..=5) {
        let (a, b) = pair(seed, n);
        for p in [1.0, 2.0, 4.0, f64::INFINITY] {
            let lhs = schatten_norm(&(&a + &b), p).unwrap();
            let rhs = schatten_norm(&a, p).unwrap() + schatten_norm(&b, p).unwrap();
            prop_assert!(lhs <= rhs * (1.0 + 1e-10) + 1e-12);
        }
    }

    #[test]
    fn spectral_mapping_for_exp(seed in any::<u64>(), n in 2usize..=6) {
        let (a, _) = pair(seed, n);
        let ea = hermitian_eig(&a).unwrap();
        let fa = mat_fun(&exp_fn(), &ea).unwrap();
        let efa = hermitian_eig(&fa).unwrap();
        // exp is increasing, so the sorted orders line up.
        for (got, lam) in efa.values.iter().zip(&ea.values) {
            prop_assert!((got - lam.exp()).abs() <= 1e-9 * (1.0 + lam.exp()));
        }
    }

    #[test]
    fn trace_is_basis_free(seed in any::<u64>(), n in 2usize..=6) {
        let (a, h) = pair(seed, n);
        let u = hermitian_eig(&h).unwrap().basis;
        let rotated = &(&u * &a) * &u.adjoint();
        let d = (rotated.trace() - a.trace()).norm();
        prop_assert!(d <= 1e-10 * (1.0 + a.trace().norm()));
    }

    #[test]
    fn divided_difference_ignores_order(seed in any::<u64>()) {
        let mut rng = SplitMix64::new(seed);
        let pts: Vec<f64> = (0..4).map(|_| 2.0 * rng.uniform::<f64>() - 1.0).collect();
        let tol = default_coincidence_tol();
        let f = exp_fn::<f64>();
        let base = divided_difference(&f, &pts, tol).unwrap();
        let mut perm = pts.clone();
        perm.reverse();
        perm.swap(0, 2);
        let other = divided_difference(&f, &perm, tol).unwrap();
        prop_assert!((base - other).norm() == 0.0);
    }

    #[test]
    fn divided_difference_recursion(seed in any::<u64>()) {
        let mut rng = SplitMix64::new(seed);
        // Spread the nodes so no confluent merging kicks in.
        let mut pts = [0.0f64; 4];
        for (i, p) in pts.iter_mut().enumerate() {
            *p = i as f64 * 0.7 + 0.5 * rng.uniform::<f64>();
        }
        let tol = default_coincidence_tol();
        let f = sin_fn::<f64>();
        let whole = divided_difference(&f, &pts, tol).unwrap();
        let left = divided_difference(&f, &pts[..3], tol).unwrap();
        let right = divided_difference(&f, &pts[1..], tol).unwrap();
        let recur = (right - left) / Complex::new(pts[3] - pts[0], 0.0);
        prop_assert!((whole - recur).norm() <= 1e-9 * (1.0 + whole.norm()));
    }

    #[test]
    fn divided_difference_mean_value_bound(seed in any::<u64>(), k in 1usize..=4) {
        let mut rng = SplitMix64::new(seed);
        let pts: Vec<f64> = (0..=k).map(|_| 2.0 * rng.uniform::<f64>() - 1.0).collect();
        let hi = pts.iter().fold(f64::NEG_INFINITY, |a, &p| a.max(p));
        let f = exp_fn::<f64>();
        let dd = divided_difference(&f, &pts, default_coincidence_tol()).unwrap();
        // |dd^k exp| <= max exp on the hull / k!.
        let bound = hi.exp() / factorial::<f64>(k);
        prop_assert!(dd.norm() <= bound * (1.0 + 1e-10));
    }

    #[test]
    fn doi_is_linear(seed in any::<u64>(), n in 2usize..=5) {
        let (a, b) = pair(seed, n);
        let mut rng = SplitMix64::new(seed ^ 0x9e37);
        let t1 = M::gaussian(n, n, &mut rng);
        let t2 = M::gaussian(n, n, &mut rng);
        let alpha = Complex::new(rng.gaussian::<f64>(), rng.gaussian::<f64>());
        let tr = DoiTransformer::from_symbol(
            &sin_fn(),
            hermitian_eig(&a).unwrap(),
            hermitian_eig(&b).unwrap(),
            default_coincidence_tol(),
        ).unwrap();
        let lhs = tr.apply(&(&t1.scale(alpha) + &t2)).unwrap();
        let rhs = &tr.apply(&t1).unwrap().scale(alpha) + &tr.apply(&t2).unwrap();
        prop_assert!((&lhs - &rhs).frobenius() <= 1e-10 * (1.0 + rhs.frobenius()));
    }

    #[test]
    fn doi_contracts_frobenius_by_kernel_sup(seed in any::<u64>(), n in 2usize..=6) {
        let (a, b) = pair(seed, n);
        let mut rng = SplitMix64::new(seed ^ 0x51ab);
        let t = M::gaussian(n, n, &mut rng);
        let ea = hermitian_eig(&a).unwrap();
        let eb = hermitian_eig(&b).unwrap();
        let table = M::from_fn(n, n, |i, j| {
            Complex::new((ea.values[i] * eb.values[j]).sin(), (i as f64 - j as f64) / n as f64)
        });
        let sup = table.max_abs();
        let kernel = Kernel2 { xs: ea.values.clone(), ys: eb.values.clone(), table };
        let w = DoiTransformer::new(ea, eb, kernel).apply(&t).unwrap();
        prop_assert!(w.frobenius() <= sup * t.frobenius() * (1.0 + 1e-10));
    }

    #[test]
    fn sin_is_one_lipschitz_in_s2(seed in any::<u64>(), n in 2usize..=6) {
        let (a, b) = pair(seed, n);
        let fa = mat_fun(&sin_fn(), &hermitian_eig(&a).unwrap()).unwrap();
        let fb = mat_fun(&sin_fn(), &hermitian_eig(&b).unwrap()).unwrap();
        let lhs = (&fa - &fb).frobenius();
        let rhs = (&a - &b).frobenius();
        prop_assert!(lhs <= rhs * (1.0 + 1e-9));
    }

    #[test]
    fn difference_routes_agree_at_order_two(seed in any::<u64>(), n in 2usize..=4) {
        let (a, k) = pair(seed, n);
        let direct = higher_difference_direct(&exp_fn(), &a, &k, 2).unwrap();
        let (via_moi, _) = higher_difference_moi(
            &exp_fn(), &a, &k, 2, default_coincidence_tol()).unwrap();
        let rel = (&direct - &via_moi).frobenius() / (1.0 + direct.frobenius());
        prop_assert!(rel <= 1e-8);
    }

    #[test]
    fn pair_difference_representation_holds(seed in any::<u64>(), n in 2usize..=5) {
        let (a1, b1) = pair(seed, n);
        let (a2, b2) = pair(seed ^ 0xdead, n);
        let p1 = OpPair::new(a1, b1).unwrap();
        let p2 = OpPair::new(a2, b2).unwrap();
        for f in [product_xy(), sin_sum(), exp_diff()] {
            let report = pair_difference_repr(&f, &p1, &p2).unwrap();
            prop_assert!(report.residual <= 1e-8, "{} {}", f.name(), report.residual);
        }
    }

    #[test]
    fn shift_function_integrates_to_trace(seed in any::<u64>(), n in 2usize..=6) {
        let (a, b) = pair(seed, n);
        let xi = spectral_shift(&a, &b).unwrap();
        let want = (&b - &a).trace().re;
        prop_assert!((xi.integral() - want).abs() <= 1e-9 * (1.0 + want.abs()));
        let s1 = schatten_norm(&(&b - &a), 1.0).unwrap();
        prop_assert!(xi.l1_norm() <= s1 * (1.0 + 1e-9));
    }

    #[test]
    fn krein_identity_for_exp(seed in any::<u64>(), n in 2usize..=5) {
        let (a, b) = pair(seed, n);
        let (lhs, rhs, gap) = krein_trace_check(&exp_fn(), &a, &b).unwrap();
        prop_assert!(gap <= 1e-9 * (1.0 + lhs.abs().max(rhs.abs())));
    }

    #[test]
    fn operator_difference_residual_is_small(seed in any::<u64>(), n in 2usize..=6) {
        let (a, b) = pair(seed, n);
        let (_, report) = op_difference(&monomial(3), &a, &b).unwrap();
        prop_assert!(report.residual <= 1e-8);
    }

    #[test]
    fn op_norm_bounded_by_frobenius(seed in any::<u64>(), n in 2usize..=6) {
        let (a, _) = pair(seed, n);
        prop_assert!(op_norm(&a).unwrap() <= a.frobenius() * (1.0 + 1e-10));
    }
}
