//! Bundled example models `ex1`..`ex4`.

use crate::mdp::{load_mdp, DecisionRule, Mdp};

pub const EX1_JSON: &str = include_str!("../models/ex1.json");
pub const EX2_JSON: &str = include_str!("../models/ex2.json");
pub const EX3_JSON: &str = include_str!("../models/ex3.json");
/// `ex4` at the default `epsilon = 0.05`.
pub const EX4_JSON: &str = include_str!("../models/ex4.json");

/// Default perturbation used for `ex4`.
pub const EX4_DEFAULT_EPSILON: f64 = 0.05;

/// Ids accepted by [`by_id`].
pub const IDS: [&str; 4] = ["ex1", "ex2", "ex3", "ex4"];

pub fn example1() -> Mdp {
    load_mdp(EX1_JSON).expect("bundled ex1 is valid")
}

pub fn example2() -> Mdp {
    load_mdp(EX2_JSON).expect("bundled ex2 is valid")
}

pub fn example3() -> Mdp {
    load_mdp(EX3_JSON).expect("bundled ex3 is valid")
}

/// The three-state gamble model, valid for `epsilon` in `[0, 0.1]`. At zero
/// state 1 is never revisited in one step.
pub fn example4(epsilon: f64) -> Mdp {
    assert!(
        (0.0..=0.1).contains(&epsilon),
        "ex4 needs epsilon in [0, 0.1], got {epsilon}"
    );
    let e = epsilon;
    let back = vec![1.0, 0.0, 0.0];
    Mdp::new(
        vec!["1".into(), "2".into(), "3".into()],
        vec!["1".into(), "2".into()],
        vec![
            vec![vec![2.0 * e, 0.5 - e, 0.5 - e], back.clone(), back.clone()],
            vec![vec![2.0 * e, 0.9 - e, 0.1 - e], back.clone(), back],
        ],
        vec![vec![0.0, 0.0, 8.0], vec![1.0, 0.0, 8.0]],
    )
    .expect("ex4 is valid for epsilon in [0, 0.1]")
}

/// `u`: the first action everywhere in `ex4`.
pub fn ex4_u() -> DecisionRule {
    DecisionRule::constant(0, 3)
}

/// `ũ`: the second action everywhere in `ex4`.
pub fn ex4_tilde_u() -> DecisionRule {
    DecisionRule::constant(1, 3)
}

/// One state, one action, reward `c`.
pub fn single_state(c: f64) -> Mdp {
    Mdp::new(
        vec!["s".into()],
        vec!["a".into()],
        vec![vec![vec![1.0]]],
        vec![vec![c]],
    )
    .expect("single-state model is valid")
}

/// Deterministic two-cycle with one action and zero rewards.
pub fn two_cycle() -> Mdp {
    Mdp::new(
        vec!["1".into(), "2".into()],
        vec!["a".into()],
        vec![vec![vec![0.0, 1.0], vec![1.0, 0.0]]],
        vec![vec![0.0, 0.0]],
    )
    .expect("two-cycle is valid")
}

/// Looks up a bundled model; `epsilon` only affects `ex4`.
pub fn by_id(id: &str, epsilon: Option<f64>) -> Option<Mdp> {
    match id {
        "ex1" => Some(example1()),
        "ex2" => Some(example2()),
        "ex3" => Some(example3()),
        "ex4" => Some(example4(epsilon.unwrap_or(EX4_DEFAULT_EPSILON))),
        _ => None,
    }
}
