mod common;

use proptest::prelude::*;
use rsmdp::numeric::sup_dist;
use rsmdp::{load_mdp, DecisionRule, MarkovPolicy, Mdp};

fn rule_strategy(k: usize, l: usize) -> impl Strategy<Value = DecisionRule> {
    prop::collection::vec(0..l, k).prop_map(DecisionRule)
}

fn model_and_rules(n: usize) -> impl Strategy<Value = (Mdp, Vec<DecisionRule>)> {
    common::arb_mdp(5, 3, true).prop_flat_map(move |m| {
        let (k, l) = (m.k(), m.l());
        (Just(m), prop::collection::vec(rule_strategy(k, l), 1..=n))
    })
}

/// Distribution after the policy's first `n` steps, propagated as a row vector.
fn propagate(m: &Mdp, pi: &MarkovPolicy, x: usize, n: usize) -> Vec<f64> {
    let mut mu = vec![0.0; m.k()];
    mu[x] = 1.0;
    for t in 0..n {
        let u = pi.rule_at(t);
        let mut next = vec![0.0; m.k()];
        for (z, w) in mu.iter().enumerate() {
            for (y, slot) in next.iter_mut().enumerate() {
                *slot += w * m.p(u.action(z), z, y);
            }
        }
        mu = next;
    }
    mu
}

proptest! {
    #[test]
    fn policy_kernels_are_stochastic((m, rules) in model_and_rules(3)) {
        for u in &rules {
            let p = m.policy_kernel(u);
            prop_assert!(p.max_row_sum_error() <= 1e-12);
            prop_assert!(p.as_slice().iter().all(|v| *v >= 0.0));
        }
    }

    #[test]
    fn n_step_kernel_matches_propagation((m, rules) in model_and_rules(4), n in 0usize..6) {
        let tail = rules.last().unwrap().clone();
        let pi = MarkovPolicy::new(rules.clone(), tail);
        let kern = m.n_step_kernel(&pi, n);
        for x in 0..m.k() {
            prop_assert!(sup_dist(kern.row(x), &propagate(&m, &pi, x, n)) <= 1e-12);
        }
        prop_assert!(kern.max_row_sum_error() <= 1e-12);
    }

    #[test]
    fn rule_index_is_a_bijection(k in 1usize..6, l in 1usize..4, seed in any::<u64>()) {
        let count = l.pow(k as u32);
        let i = (seed % count as u64) as usize;
        let r = DecisionRule::from_index(i, k, l);
        prop_assert_eq!(r.index(l), i);
        prop_assert!(r.actions().iter().all(|a| *a < l));
    }

    #[test]
    fn document_round_trip(m in common::arb_mdp(4, 3, true)) {
        let back = load_mdp(&m.to_json()).unwrap();
        prop_assert_eq!(back, m);
    }

    #[test]
    fn sampled_paths_are_consistent_and_reproducible(
        (m, rules) in model_and_rules(2),
        x0 in 0usize..5,
        seed in any::<u64>(),
    ) {
        let x0 = x0 % m.k();
        let pi = MarkovPolicy::new(rules.clone(), rules[0].clone());
        let a = m.simulate_path(&pi, x0, 30, seed);
        let b = m.simulate_path(&pi, x0, 30, seed);
        prop_assert!(a.is_consistent(&m));
        prop_assert_eq!(a.states[0], x0);
        prop_assert_eq!(a, b);
    }
}

#[test]
fn path_frequencies_match_kernel() {
    let m = rsmdp::corpus::example2();
    let u = DecisionRule(vec![0, 1, 0, 1]);
    let pi = MarkovPolicy::stationary(u.clone());
    let p = m.policy_kernel(&u);
    let mut counts = vec![vec![0.0f64; 4]; 4];
    let mut visits = [0.0f64; 4];
    for seed in 0..40u64 {
        let path = m.simulate_path(&pi, 0, 2_000, seed);
        for w in path.states.windows(2) {
            counts[w[0]][w[1]] += 1.0;
            visits[w[0]] += 1.0;
        }
    }
    for x in 0..4 {
        for y in 0..4 {
            let q = p.get(x, y);
            let freq = counts[x][y] / visits[x];
            let sd = (q * (1.0 - q) / visits[x]).sqrt();
            assert!((freq - q).abs() <= 5.0 * sd + 1e-12, "{x}->{y}: {freq} vs {q}");
        }
    }
}
