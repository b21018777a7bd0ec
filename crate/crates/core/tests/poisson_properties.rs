mod common;

use proptest::prelude::*;
use rsmdp::poisson::{
    lambda_at_infinity, mpe_matrix, mpe_residual, perron, solve_mpe, InfinitySign, LogMatrix,
    PERRON_MAX_ITER,
};
use rsmdp::{DecisionRule, Mdp};

/// Faddeev-LeVerrier characteristic polynomial, then the largest real root
/// by bisection above every other root (Cauchy bound).
fn char_poly_perron(a: &[f64], k: usize) -> f64 {
    let mul = |x: &[f64], y: &[f64]| -> Vec<f64> {
        let mut out = vec![0.0; k * k];
        for i in 0..k {
            for j in 0..k {
                out[i * k + j] = (0..k).map(|z| x[i * k + z] * y[z * k + j]).sum();
            }
        }
        out
    };
    let mut coeffs = vec![1.0];
    let mut m = vec![0.0; k * k];
    for n in 1..=k {
        let mut next = mul(a, &m);
        for i in 0..k {
            next[i * k + i] += coeffs[n - 1];
        }
        m = next;
        let am = mul(a, &m);
        let tr: f64 = (0..k).map(|i| am[i * k + i]).sum();
        coeffs.push(-tr / n as f64);
    }
    let p = |x: f64| coeffs.iter().fold(0.0, |acc, c| acc * x + c);
    let bound = 1.0 + coeffs[1..].iter().fold(0.0f64, |mx, c| mx.max(c.abs()));
    // the Perron root is at least the smallest row sum, and the polynomial
    // has no root above it
    let row_min = (0..k).map(|i| (0..k).map(|j| a[i * k + j]).sum::<f64>()).fold(f64::INFINITY, f64::min);
    let (mut lo, mut hi) = (row_min, bound);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if p(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

fn positive_matrix(max_k: usize) -> impl Strategy<Value = (usize, Vec<f64>)> {
    (1..=max_k).prop_flat_map(|k| (Just(k), prop::collection::vec(0.05f64..2.0, k * k)))
}

fn model_rule(sparse: bool) -> impl Strategy<Value = (Mdp, DecisionRule)> {
    common::arb_mdp(4, 3, sparse).prop_flat_map(|m| {
        let (k, l) = (m.k(), m.l());
        (Just(m), prop::collection::vec(0..l, k).prop_map(DecisionRule))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn perron_matches_characteristic_polynomial((k, a) in positive_matrix(6)) {
        let r = perron(&LogMatrix::from_linear(k, &a), 1e-13, PERRON_MAX_ITER).unwrap();
        let oracle = char_poly_perron(&a, k);
        prop_assert!((r.log_root.exp() - oracle).abs() <= 1e-10 * oracle.max(1.0));
    }

    #[test]
    fn eigenpair_and_poisson_residuals((m, u) in model_rule(false), gamma in -4.0f64..4.0) {
        prop_assume!(gamma.abs() > 1e-6);
        let s = solve_mpe(&m, &u, gamma, 1e-11, 0).unwrap();
        prop_assert!(s.residual <= 1e-10);
        prop_assert!((s.perron_root - (gamma * s.lambda_u).exp()).abs() <= 1e-10 * s.perron_root);
        let a = mpe_matrix(&m, &u, gamma).to_linear();
        let k = m.k();
        for i in 0..k {
            let av: f64 = (0..k).map(|j| a[i * k + j] * s.eigenvector[j]).sum();
            prop_assert!((av - s.perron_root * s.eigenvector[i]).abs() <= 1e-10 * s.perron_root);
        }
        // v = e^{γ(w + const)}
        let consts: Vec<f64> = (0..k).map(|x| s.log_eigenvector[x] / gamma - s.w_u[x]).collect();
        prop_assert!(consts.iter().all(|c| (c - consts[0]).abs() <= 1e-8));
        prop_assert!(mpe_residual(&m, &u, gamma, s.lambda_u, &s.w_u) <= 1e-10);
    }

    #[test]
    fn lambda_curve_is_monotone_bounded_and_convex_in_log_root(
        (m, u) in model_rule(false),
        g1 in -4.0f64..4.0,
        g2 in -4.0f64..4.0,
    ) {
        let (lo, hi) = if g1 <= g2 { (g1, g2) } else { (g2, g1) };
        let mid = 0.5 * (lo + hi);
        let lam = |g: f64| solve_mpe(&m, &u, g, 1e-12, 0).unwrap().lambda_u;
        let (a, b, c) = (lam(lo), lam(hi), lam(mid));
        prop_assert!(a <= b + 1e-10);
        let norm = m.reward_norm();
        prop_assert!(a.abs() <= norm + 1e-10 && b.abs() <= norm + 1e-10);
        // γ ↦ γ·λ^u(γ) = ln r(γ) is convex
        prop_assert!(mid * c <= 0.5 * (lo * a + hi * b) + 1e-9);
    }

    #[test]
    fn large_gamma_brackets_the_cycle_limit((m, u) in model_rule(true)) {
        let s = match solve_mpe(&m, &u, 1.0, 1e-12, 0) {
            Ok(s) => s,
            Err(_) => return Ok(()),
        };
        let class = s.recurrent_class.clone();
        let p_min = class
            .iter()
            .flat_map(|&x| m.row(u.action(x), x).to_vec())
            .filter(|p| *p > 0.0)
            .fold(1.0f64, f64::min);
        for (sign, g) in [(InfinitySign::Plus, 200.0), (InfinitySign::Minus, -200.0)] {
            let lim = lambda_at_infinity(&m, &u, sign).unwrap();
            let Ok(sol) = solve_mpe(&m, &u, g, 1e-12, 0) else { continue };
            let gap = p_min.ln().abs() / 200.0 + 1e-9;
            match sign {
                InfinitySign::Plus => prop_assert!(sol.lambda_u <= lim + 1e-9 && sol.lambda_u >= lim - gap),
                InfinitySign::Minus => prop_assert!(sol.lambda_u >= lim - 1e-9 && sol.lambda_u <= lim + gap),
            }
        }
    }
}
