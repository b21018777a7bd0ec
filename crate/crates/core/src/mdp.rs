//! Finite MDP model, decision rules, Markov policies and path sampling.
//!
//! States and actions carry string labels in model files and are mapped to
//! dense indices internally. Transition matrices are stored row-major, one
//! `k×k` block per action.

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Identifier of the random generator used by every sampler in the crate.
pub const RNG_ALGORITHM: &str = "ChaCha8Rng (rand_chacha 0.3), seed_from_u64 + per-path stream";

/// Row-sum tolerance applied when a model is loaded.
pub const ROW_SUM_TOL: f64 = 1e-12;

/// Default cap on `l^k` for rule enumeration.
pub const DEFAULT_ENUMERATION_CAP: u128 = 1_000_000;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("malformed model document: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("model has no {0}")]
    Empty(&'static str),
    #[error("duplicate {kind} label `{label}`")]
    DuplicateLabel { kind: &'static str, label: String },
    #[error("`{field}` has no entry for action `{action}`")]
    MissingAction { field: &'static str, action: String },
    #[error("`{field}` mentions unknown action `{action}`")]
    UnknownAction { field: &'static str, action: String },
    #[error("action `{action}`: expected {expected} {what}, found {found}")]
    Shape {
        action: String,
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("action `{action}` row {row} (state `{state}`) column {col}: probability {value} outside [0,1]")]
    BadProbability {
        action: String,
        state: String,
        row: usize,
        col: usize,
        value: f64,
    },
    #[error("action `{action}` row {row} (state `{state}`) sums to {sum}, not 1")]
    RowSum {
        action: String,
        state: String,
        row: usize,
        sum: f64,
    },
    #[error("reward for state `{state}` under action `{action}` is not finite")]
    NonFiniteReward { state: String, action: String },
    #[error("rule enumeration refused: l^k = {count} exceeds the cap {cap}")]
    EnumerationCap { count: String, cap: u128 },
    #[error("decision rule has {found} entries, model has {expected} states")]
    RuleLength { expected: usize, found: usize },
    #[error("action index {0} out of range")]
    ActionIndex(usize),
    #[error("unknown state `{0}`")]
    UnknownState(String),
    #[error("unknown action `{0}`")]
    UnknownActionLabel(String),
}

/// On-disk model document.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDocument {
    pub states: Vec<String>,
    pub actions: Vec<String>,
    pub transitions: BTreeMap<String, Vec<Vec<f64>>>,
    pub rewards: BTreeMap<String, Vec<f64>>,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct LoadOptions {
    /// Rescale rows that fail the row-sum check instead of rejecting them.
    pub renormalize: bool,
}

/// A dense row-stochastic `k×k` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    k: usize,
    data: Vec<f64>,
}

impl Kernel {
    pub fn from_rows(k: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), k * k);
        Self { k, data }
    }

    pub fn identity(k: usize) -> Self {
        let mut data = vec![0.0; k * k];
        for i in 0..k {
            data[i * k + i] = 1.0;
        }
        Self { k, data }
    }

    pub fn order(&self) -> usize {
        self.k
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[x * self.k + y]
    }

    pub fn row(&self, x: usize) -> &[f64] {
        &self.data[x * self.k..(x + 1) * self.k]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// `self · rhs`.
    pub fn then(&self, rhs: &Kernel) -> Kernel {
        Kernel {
            k: self.k,
            data: crate::numeric::mat_mul(&self.data, &rhs.data, self.k),
        }
    }

    pub fn max_row_sum_error(&self) -> f64 {
        (0..self.k)
            .map(|x| (self.row(x).iter().sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

/// Finite MDP with full action sets.
#[derive(Debug, Clone, PartialEq)]
pub struct Mdp {
    states: Vec<String>,
    actions: Vec<String>,
    /// `transitions[a]` is row-major `k×k`.
    transitions: Vec<Vec<f64>>,
    /// `rewards[x * l + a]`.
    rewards: Vec<f64>,
}

impl Mdp {
    /// Builds and validates a model. `transitions[a][x][y]` and
    /// `rewards[a][x]` follow the label order of `actions` and `states`.
    pub fn new(
        states: Vec<String>,
        actions: Vec<String>,
        transitions: Vec<Vec<Vec<f64>>>,
        rewards: Vec<Vec<f64>>,
    ) -> Result<Self, ModelError> {
        Self::with_options(states, actions, transitions, rewards, LoadOptions::default())
    }

    pub fn with_options(
        states: Vec<String>,
        actions: Vec<String>,
        transitions: Vec<Vec<Vec<f64>>>,
        rewards: Vec<Vec<f64>>,
        opts: LoadOptions,
    ) -> Result<Self, ModelError> {
        if states.is_empty() {
            return Err(ModelError::Empty("states"));
        }
        if actions.is_empty() {
            return Err(ModelError::Empty("actions"));
        }
        check_unique("state", &states)?;
        check_unique("action", &actions)?;
        let k = states.len();
        let l = actions.len();
        if transitions.len() != l {
            return Err(ModelError::Shape {
                action: "*".into(),
                what: "transition matrices",
                expected: l,
                found: transitions.len(),
            });
        }
        if rewards.len() != l {
            return Err(ModelError::Shape {
                action: "*".into(),
                what: "reward vectors",
                expected: l,
                found: rewards.len(),
            });
        }

        let mut flat = Vec::with_capacity(l);
        for (a, matrix) in transitions.into_iter().enumerate() {
            let action = &actions[a];
            if matrix.len() != k {
                return Err(ModelError::Shape {
                    action: action.clone(),
                    what: "rows",
                    expected: k,
                    found: matrix.len(),
                });
            }
            let mut block = Vec::with_capacity(k * k);
            for (x, mut row) in matrix.into_iter().enumerate() {
                if row.len() != k {
                    return Err(ModelError::Shape {
                        action: action.clone(),
                        what: "columns",
                        expected: k,
                        found: row.len(),
                    });
                }
                for (y, &p) in row.iter().enumerate() {
                    if !(0.0..=1.0).contains(&p) || !p.is_finite() {
                        return Err(ModelError::BadProbability {
                            action: action.clone(),
                            state: states[x].clone(),
                            row: x + 1,
                            col: y + 1,
                            value: p,
                        });
                    }
                }
                let sum: f64 = row.iter().sum();
                if (sum - 1.0).abs() > ROW_SUM_TOL {
                    if opts.renormalize && sum > 0.0 {
                        row.iter_mut().for_each(|p| *p /= sum);
                    } else {
                        return Err(ModelError::RowSum {
                            action: action.clone(),
                            state: states[x].clone(),
                            row: x + 1,
                            sum,
                        });
                    }
                }
                block.extend(row);
            }
            flat.push(block);
        }

        let mut table = vec![0.0; k * l];
        for (a, r) in rewards.into_iter().enumerate() {
            if r.len() != k {
                return Err(ModelError::Shape {
                    action: actions[a].clone(),
                    what: "rewards",
                    expected: k,
                    found: r.len(),
                });
            }
            for (x, c) in r.into_iter().enumerate() {
                if !c.is_finite() {
                    return Err(ModelError::NonFiniteReward {
                        state: states[x].clone(),
                        action: actions[a].clone(),
                    });
                }
                table[x * l + a] = c;
            }
        }

        Ok(Self {
            states,
            actions,
            transitions: flat,
            rewards: table,
        })
    }

    pub fn from_document(doc: ModelDocument, opts: LoadOptions) -> Result<Self, ModelError> {
        let ModelDocument {
            states,
            actions,
            mut transitions,
            mut rewards,
        } = doc;
        for key in transitions.keys() {
            if !actions.contains(key) {
                return Err(ModelError::UnknownAction {
                    field: "transitions",
                    action: key.clone(),
                });
            }
        }
        for key in rewards.keys() {
            if !actions.contains(key) {
                return Err(ModelError::UnknownAction {
                    field: "rewards",
                    action: key.clone(),
                });
            }
        }
        let mut p = Vec::with_capacity(actions.len());
        let mut c = Vec::with_capacity(actions.len());
        for a in &actions {
            p.push(transitions.remove(a).ok_or_else(|| ModelError::MissingAction {
                field: "transitions",
                action: a.clone(),
            })?);
            c.push(rewards.remove(a).ok_or_else(|| ModelError::MissingAction {
                field: "rewards",
                action: a.clone(),
            })?);
        }
        Self::with_options(states, actions, p, c, opts)
    }

    pub fn to_document(&self) -> ModelDocument {
        let k = self.k();
        let mut transitions = BTreeMap::new();
        let mut rewards = BTreeMap::new();
        for (a, label) in self.actions.iter().enumerate() {
            let rows = (0..k).map(|x| self.row(a, x).to_vec()).collect();
            transitions.insert(label.clone(), rows);
            rewards.insert(label.clone(), (0..k).map(|x| self.reward(x, a)).collect());
        }
        ModelDocument {
            states: self.states.clone(),
            actions: self.actions.clone(),
            transitions,
            rewards,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_document()).expect("model serializes")
    }

    /// Number of states `k`.
    pub fn k(&self) -> usize {
        self.states.len()
    }

    /// Number of actions `l`.
    pub fn l(&self) -> usize {
        self.actions.len()
    }

    pub fn states(&self) -> &[String] {
        &self.states
    }

    pub fn actions(&self) -> &[String] {
        &self.actions
    }

    pub fn state_index(&self, label: &str) -> Result<usize, ModelError> {
        self.states
            .iter()
            .position(|s| s == label)
            .ok_or_else(|| ModelError::UnknownState(label.to_string()))
    }

    pub fn action_index(&self, label: &str) -> Result<usize, ModelError> {
        self.actions
            .iter()
            .position(|s| s == label)
            .ok_or_else(|| ModelError::UnknownActionLabel(label.to_string()))
    }

    pub fn p(&self, a: usize, x: usize, y: usize) -> f64 {
        self.transitions[a][x * self.k() + y]
    }

    /// Row `P_a(x, ·)`.
    pub fn row(&self, a: usize, x: usize) -> &[f64] {
        let k = self.k();
        &self.transitions[a][x * k..(x + 1) * k]
    }

    pub fn action_kernel(&self, a: usize) -> Kernel {
        Kernel::from_rows(self.k(), self.transitions[a].clone())
    }

    pub fn reward(&self, x: usize, a: usize) -> f64 {
        self.rewards[x * self.l() + a]
    }

    /// `‖c‖`, the sup norm of the reward table.
    pub fn reward_norm(&self) -> f64 {
        crate::numeric::sup_norm(&self.rewards)
    }

    pub fn reward_range(&self) -> f64 {
        let (lo, hi) = crate::numeric::min_max(&self.rewards);
        hi - lo
    }

    pub fn check_rule(&self, u: &DecisionRule) -> Result<(), ModelError> {
        if u.0.len() != self.k() {
            return Err(ModelError::RuleLength {
                expected: self.k(),
                found: u.0.len(),
            });
        }
        if let Some(&a) = u.0.iter().find(|&&a| a >= self.l()) {
            return Err(ModelError::ActionIndex(a));
        }
        Ok(())
    }

    /// Kernel `P^u` whose row `x` is `P_{u(x)}(x, ·)`.
    pub fn policy_kernel(&self, u: &DecisionRule) -> Kernel {
        let k = self.k();
        let mut data = Vec::with_capacity(k * k);
        for x in 0..k {
            data.extend_from_slice(self.row(u.action(x), x));
        }
        Kernel::from_rows(k, data)
    }

    /// Rewards `c(x, u(x))` along a rule.
    pub fn policy_rewards(&self, u: &DecisionRule) -> Vec<f64> {
        (0..self.k()).map(|x| self.reward(x, u.action(x))).collect()
    }

    /// Product of the first `n` single-step kernels of `pi` (identity for `n = 0`).
    pub fn n_step_kernel(&self, pi: &MarkovPolicy, n: usize) -> Kernel {
        let mut acc = Kernel::identity(self.k());
        for step in 0..n {
            acc = acc.then(&self.policy_kernel(pi.rule_at(step)));
        }
        acc
    }

    /// Number of stationary rules `l^k`, or `None` on overflow.
    pub fn rule_count(&self) -> Option<u128> {
        (self.l() as u128).checked_pow(self.k() as u32)
    }

    /// Lexicographic enumeration of all `l^k` rules (state 0 is the most
    /// significant position).
    pub fn enumerate_rules(&self, cap: u128) -> Result<Vec<DecisionRule>, ModelError> {
        let count = self.rule_count();
        match count {
            Some(n) if n <= cap => Ok((0..n as usize)
                .map(|i| DecisionRule::from_index(i, self.k(), self.l()))
                .collect()),
            Some(n) => Err(ModelError::EnumerationCap {
                count: n.to_string(),
                cap,
            }),
            None => Err(ModelError::EnumerationCap {
                count: format!("{}^{}", self.l(), self.k()),
                cap,
            }),
        }
    }

    pub fn describe_rule(&self, u: &DecisionRule) -> Vec<String> {
        u.0.iter().map(|&a| self.actions[a].clone()).collect()
    }

    /// Parses a rule written as per-state action labels separated by `/`,
    /// or a single label applied to every state.
    pub fn parse_rule(&self, text: &str) -> Result<DecisionRule, ModelError> {
        let parts: Vec<&str> = text.split('/').map(str::trim).collect();
        if parts.len() == 1 {
            let a = self.action_index(parts[0])?;
            return Ok(DecisionRule::constant(a, self.k()));
        }
        if parts.len() != self.k() {
            return Err(ModelError::RuleLength {
                expected: self.k(),
                found: parts.len(),
            });
        }
        parts
            .iter()
            .map(|p| self.action_index(p))
            .collect::<Result<Vec<_>, _>>()
            .map(DecisionRule)
    }

    /// Samples one path of `horizon` steps. Deterministic in `seed`.
    pub fn simulate_path(
        &self,
        pi: &MarkovPolicy,
        x0: usize,
        horizon: usize,
        seed: u64,
    ) -> SamplePath {
        let sampler = PathSampler::new(self);
        let mut rng = sampler.rng(seed, 0);
        let mut states = Vec::with_capacity(horizon + 1);
        let mut actions = Vec::with_capacity(horizon);
        let mut rewards = Vec::with_capacity(horizon);
        let mut x = x0;
        states.push(x);
        for n in 0..horizon {
            let a = pi.rule_at(n).action(x);
            actions.push(a);
            rewards.push(self.reward(x, a));
            x = sampler.step(&mut rng, a, x);
            states.push(x);
        }
        SamplePath {
            states,
            actions,
            rewards,
        }
    }
}

fn check_unique(kind: &'static str, labels: &[String]) -> Result<(), ModelError> {
    let mut seen = HashSet::new();
    for s in labels {
        if !seen.insert(s.as_str()) {
            return Err(ModelError::DuplicateLabel {
                kind,
                label: s.clone(),
            });
        }
    }
    Ok(())
}

/// Parses and validates a model document.
pub fn load_mdp(document: &str) -> Result<Mdp, ModelError> {
    load_mdp_with(document, LoadOptions::default())
}

pub fn load_mdp_with(document: &str, opts: LoadOptions) -> Result<Mdp, ModelError> {
    let doc: ModelDocument = serde_json::from_str(document)?;
    Mdp::from_document(doc, opts)
}

/// Stationary decision rule `u: E → U`, stored as action indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DecisionRule(pub Vec<usize>);

impl DecisionRule {
    pub fn constant(a: usize, k: usize) -> Self {
        Self(vec![a; k])
    }

    pub fn action(&self, x: usize) -> usize {
        self.0[x]
    }

    pub fn actions(&self) -> &[usize] {
        &self.0
    }

    /// Rule number `index` in lexicographic order.
    pub fn from_index(mut index: usize, k: usize, l: usize) -> Self {
        let mut v = vec![0; k];
        for x in (0..k).rev() {
            v[x] = index % l;
            index /= l;
        }
        Self(v)
    }

    /// Inverse of [`DecisionRule::from_index`].
    pub fn index(&self, l: usize) -> usize {
        self.0.iter().fold(0, |acc, &a| acc * l + a)
    }
}

impl fmt::Display for DecisionRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|a| (a + 1).to_string()).collect();
        write!(f, "[{}]", parts.join(","))
    }
}

/// Markov policy `(u_0, …, u_{H−1}, tail, tail, …)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MarkovPolicy {
    pub rules: Vec<DecisionRule>,
    pub tail: DecisionRule,
}

impl MarkovPolicy {
    pub fn stationary(u: DecisionRule) -> Self {
        Self {
            rules: Vec::new(),
            tail: u,
        }
    }

    pub fn new(rules: Vec<DecisionRule>, tail: DecisionRule) -> Self {
        Self { rules, tail }
    }

    pub fn rule_at(&self, n: usize) -> &DecisionRule {
        self.rules.get(n).unwrap_or(&self.tail)
    }

    pub fn is_stationary(&self) -> bool {
        self.rules.iter().all(|r| *r == self.tail)
    }

    /// The policy seen from step `m` onwards.
    pub fn shifted(&self, m: usize) -> Self {
        Self {
            rules: self.rules.iter().skip(m).cloned().collect(),
            tail: self.tail.clone(),
        }
    }
}

/// One simulated trajectory.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SamplePath {
    pub states: Vec<usize>,
    pub actions: Vec<usize>,
    pub rewards: Vec<f64>,
}

impl SamplePath {
    /// Checks the length relations and that every observed transition has
    /// positive probability.
    pub fn is_consistent(&self, mdp: &Mdp) -> bool {
        let n = self.actions.len();
        if self.states.len() != n + 1 || self.rewards.len() != n {
            return false;
        }
        (0..n).all(|i| {
            let (x, a) = (self.states[i], self.actions[i]);
            mdp.p(a, x, self.states[i + 1]) > 0.0 && mdp.reward(x, a) == self.rewards[i]
        })
    }
}

/// Inverse-CDF sampler over the model's rows.
pub(crate) struct PathSampler {
    k: usize,
    /// `cdf[a][x*k + y]`.
    cdf: Vec<Vec<f64>>,
}

impl PathSampler {
    pub(crate) fn new(mdp: &Mdp) -> Self {
        let k = mdp.k();
        let cdf = (0..mdp.l())
            .map(|a| {
                let mut c = Vec::with_capacity(k * k);
                for x in 0..k {
                    let mut acc = 0.0;
                    for &p in mdp.row(a, x) {
                        acc += p;
                        c.push(acc);
                    }
                }
                c
            })
            .collect();
        Self { k, cdf }
    }

    /// Generator for path number `stream` under `seed`.
    pub(crate) fn rng(&self, seed: u64, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        rng
    }

    #[inline]
    pub(crate) fn step(&self, rng: &mut ChaCha8Rng, a: usize, x: usize) -> usize {
        let row = &self.cdf[a][x * self.k..(x + 1) * self.k];
        let total = row[self.k - 1];
        let r: f64 = rng.gen::<f64>() * total;
        // first y with cdf > r, skipping zero-probability states
        let mut prev = 0.0;
        for (y, &c) in row.iter().enumerate() {
            if r < c && c > prev {
                return y;
            }
            prev = c;
        }
        // r landed on the rounding gap at the top; take the last positive entry
        (0..self.k)
            .rev()
            .find(|&y| row[y] > if y == 0 { 0.0 } else { row[y - 1] })
            .unwrap_or(self.k - 1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus;

    #[test]
    fn loads_example_one_document() {
        let m = load_mdp(corpus::EX1_JSON).unwrap();
        assert_eq!((m.k(), m.l()), (3, 3));
        assert_eq!(m.row(0, 0), &[0.1, 0.8, 0.1]);
        assert_eq!(m.row(1, 2), &[0.2, 0.6, 0.2]);
        assert_eq!(m.row(2, 1), &[0.3, 0.4, 0.3]);
        assert_eq!(m.reward(0, 2), -1.0);
    }

    #[test]
    fn single_state_model_is_valid() {
        let m = Mdp::new(vec!["s".into()], vec!["a".into()], vec![vec![vec![1.0]]], vec![vec![5.0]])
            .unwrap();
        assert_eq!((m.k(), m.l()), (1, 1));
        assert_eq!(m.reward(0, 0), 5.0);
    }

    #[test]
    fn short_row_is_rejected_with_its_position() {
        let doc = r#"{"states":["a","b"],"actions":["1"],
            "transitions":{"1":[[0.5,0.49],[0.5,0.5]]},"rewards":{"1":[0,0]}}"#;
        let err = load_mdp(doc).unwrap_err();
        match &err {
            ModelError::RowSum { action, row, sum, .. } => {
                assert_eq!(action, "1");
                assert_eq!(*row, 1);
                assert!((sum - 0.99).abs() < 1e-12);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(err.to_string().contains("row 1"));
        let fixed = load_mdp_with(doc, LoadOptions { renormalize: true }).unwrap();
        assert!((fixed.row(0, 0).iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn missing_reward_and_duplicates_are_rejected() {
        let doc = r#"{"states":["a"],"actions":["1","2"],
            "transitions":{"1":[[1]],"2":[[1]]},"rewards":{"1":[0]}}"#;
        assert!(matches!(
            load_mdp(doc),
            Err(ModelError::MissingAction { field: "rewards", .. })
        ));
        let doc = r#"{"states":["a","a"],"actions":["1"],
            "transitions":{"1":[[1,0],[0,1]]},"rewards":{"1":[0,0]}}"#;
        assert!(matches!(load_mdp(doc), Err(ModelError::DuplicateLabel { .. })));
        assert!(matches!(load_mdp("{"), Err(ModelError::Parse(_))));
    }

    #[test]
    fn document_round_trip() {
        let m = corpus::example4(0.05);
        let back = load_mdp(&m.to_json()).unwrap();
        assert_eq!(m, back);
    }

    #[test]
    fn policy_kernel_picks_rows() {
        let m = corpus::example1();
        let k = m.policy_kernel(&DecisionRule::constant(0, 3));
        for x in 0..3 {
            assert_eq!(k.row(x), &[0.1, 0.8, 0.1]);
        }
        let m4 = corpus::example4(0.05);
        let u = DecisionRule(vec![1, 0, 0]);
        let k4 = m4.policy_kernel(&u);
        assert!((k4.get(0, 0) - 0.1).abs() < 1e-15);
        assert!((k4.get(0, 1) - 0.85).abs() < 1e-15);
        assert!((k4.get(0, 2) - 0.05).abs() < 1e-15);
    }

    #[test]
    fn two_step_kernels() {
        let m2 = corpus::example2();
        let pi = MarkovPolicy::stationary(DecisionRule::constant(0, 4));
        let p2 = m2.n_step_kernel(&pi, 2);
        for x in 0..4 {
            for (y, want) in [0.2, 0.1, 0.5, 0.2].iter().enumerate() {
                assert!((p2.get(x, y) - want).abs() < 1e-15);
            }
        }
        // epsilon = 0: states 2 and 3 return to 1, so state 1 comes back in two steps
        let m4 = corpus::example4(0.0);
        let pi = MarkovPolicy::stationary(DecisionRule(vec![0, 0, 0]));
        let p2 = m4.n_step_kernel(&pi, 2);
        assert_eq!(p2.row(0), &[1.0, 0.0, 0.0]);
        assert_eq!(p2.row(1), &[0.0, 0.5, 0.5]);
        let one = m4.n_step_kernel(&pi, 1);
        assert_eq!(one, m4.policy_kernel(&pi.tail));
    }

    #[test]
    fn rule_counts() {
        let cap = DEFAULT_ENUMERATION_CAP;
        assert_eq!(corpus::example1().enumerate_rules(cap).unwrap().len(), 27);
        assert_eq!(corpus::example2().enumerate_rules(cap).unwrap().len(), 16);
        assert_eq!(corpus::example4(0.0).enumerate_rules(cap).unwrap().len(), 8);
        let err = corpus::example1().enumerate_rules(10).unwrap_err();
        assert!(err.to_string().contains("27"));
    }

    #[test]
    fn rule_index_round_trip() {
        for i in 0..27 {
            let r = DecisionRule::from_index(i, 3, 3);
            assert_eq!(r.index(3), i);
        }
        assert_eq!(DecisionRule::from_index(1, 3, 3).0, vec![0, 0, 1]);
    }

    #[test]
    fn degenerate_chain_path() {
        let m = corpus::single_state(5.0);
        let pi = MarkovPolicy::stationary(DecisionRule::constant(0, 1));
        let path = m.simulate_path(&pi, 0, 5, 99);
        assert_eq!(path.states, vec![0; 6]);
        assert_eq!(path.rewards, vec![5.0; 5]);
        assert!(path.is_consistent(&m));
    }

    #[test]
    fn paths_are_reproducible() {
        let m = corpus::example4(0.05);
        let pi = MarkovPolicy::new(vec![DecisionRule(vec![1, 0, 0])], DecisionRule(vec![0, 0, 0]));
        let a = m.simulate_path(&pi, 0, 200, 7);
        let b = m.simulate_path(&pi, 0, 200, 7);
        assert_eq!(a, b);
        assert!(a.is_consistent(&m));
        assert_ne!(a, m.simulate_path(&pi, 0, 200, 8));
    }

    #[test]
    fn rank_one_chain_frequencies() {
        let m = corpus::example1();
        let pi = MarkovPolicy::stationary(DecisionRule::constant(2, 3));
        let path = m.simulate_path(&pi, 1, 100_000, 2024);
        let mut counts = [0usize; 3];
        for &x in &path.states[1..] {
            counts[x] += 1;
        }
        for (c, want) in counts.iter().zip([0.3, 0.4, 0.3]) {
            assert!((*c as f64 / 100_000.0 - want).abs() < 0.01);
        }
    }
}
