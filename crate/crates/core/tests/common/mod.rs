#![allow(dead_code)]

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Dirichlet, Distribution};
use rsmdp::Mdp;

pub fn labels(prefix: &str, n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("{prefix}{i}")).collect()
}

/// Rows drawn from Dirichlet(1), rewards from U[-1, 1].
pub fn random_mdp(rng: &mut ChaCha8Rng, k: usize, l: usize) -> Mdp {
    let dir = Dirichlet::new(&vec![1.0; k]).unwrap();
    let transitions = (0..l)
        .map(|_| (0..k).map(|_| normalize(dir.sample(rng))).collect())
        .collect();
    let rewards = (0..l)
        .map(|_| (0..k).map(|_| rng.gen_range(-1.0..=1.0)).collect())
        .collect();
    Mdp::new(labels("s", k), labels("a", l), transitions, rewards).unwrap()
}

fn normalize(mut row: Vec<f64>) -> Vec<f64> {
    let s: f64 = row.iter().sum();
    row.iter_mut().for_each(|p| *p /= s);
    row
}

/// The 50 models used by the acceptance checks: k, l in 2..=4.
pub fn model_bank() -> Vec<Mdp> {
    let mut rng = ChaCha8Rng::seed_from_u64(20240611);
    (0..50)
        .map(|_| {
            let k = rng.gen_range(2..=4);
            let l = rng.gen_range(2..=4);
            random_mdp(&mut rng, k, l)
        })
        .collect()
}

fn weights_to_row(w: Vec<f64>) -> Vec<f64> {
    let s: f64 = w.iter().sum();
    w.into_iter().map(|p| p / s).collect()
}

/// Models with `k ≤ max_k`, `l ≤ max_l`. With `sparse`, about a third of the
/// entries are zero (each row keeps at least one positive entry).
pub fn arb_mdp(max_k: usize, max_l: usize, sparse: bool) -> impl Strategy<Value = Mdp> {
    (1..=max_k, 1..=max_l).prop_flat_map(move |(k, l)| {
        let entry = if sparse {
            prop_oneof![1 => Just(0.0), 2 => 0.05f64..1.0].boxed()
        } else {
            (0.05f64..1.0).boxed()
        };
        let row = prop::collection::vec(entry, k).prop_map(move |mut w| {
            if w.iter().all(|p| *p == 0.0) {
                w[0] = 1.0;
            }
            weights_to_row(w)
        });
        (
            prop::collection::vec(prop::collection::vec(row, k), l),
            prop::collection::vec(prop::collection::vec(-1.0f64..1.0, k), l),
        )
            .prop_map(move |(t, r)| Mdp::new(labels("s", k), labels("a", l), t, r).unwrap())
    })
}

/// Finite distributions with up to eight outcomes in [-5, 5].
pub fn arb_dist() -> impl Strategy<Value = rsmdp::entropic::FiniteDistribution> {
    (1usize..=8).prop_flat_map(|n| {
        (
            prop::collection::vec(-5.0f64..5.0, n),
            prop::collection::vec(0.01f64..1.0, n),
        )
            .prop_map(|(z, w)| {
                rsmdp::entropic::FiniteDistribution::new(z, weights_to_row(w)).unwrap()
            })
    })
}
