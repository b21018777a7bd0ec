//! Ergodicity checks: one-step mixing coefficient Δ, strong primitivity of
//! rule-induced kernels, and the multi-step transition ratio K.
//!
//! All checks are advisory. Solvers run regardless and attach the report.

use std::collections::{HashMap, HashSet};

use serde::Serialize;
use thiserror::Error;

use crate::mdp::{DecisionRule, Mdp};
use crate::numeric::mat_mul;

/// Largest state count accepted by the support-set automaton.
pub const MAX_PRIMITIVITY_STATES: usize = 20;

/// Default cap on the number of rule sequences enumerated for K.
pub const DEFAULT_SEQUENCE_CAP: u128 = 1_000_000;

#[derive(Debug, Error)]
pub enum AssumptionError {
    #[error("support-set search needs k <= {MAX_PRIMITIVITY_STATES}, model has k = {0}")]
    TooManyStates(usize),
    #[error("step count must be at least 1")]
    ZeroSteps,
}

/// Pair of (state, action) rows attaining Δ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DeltaWitness {
    pub state_a: usize,
    pub action_a: usize,
    pub state_b: usize,
    pub action_b: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OneStepDelta {
    pub delta: f64,
    pub witness: DeltaWitness,
}

/// Outcome of the support-set search.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Primitivity {
    pub primitive: bool,
    /// Smallest step count after which every product is positive.
    pub n_steps: Option<usize>,
    /// Steps explored before deciding.
    pub explored: usize,
    pub witness: Option<SupportWitness>,
}

/// A start state and a rule sequence whose product kernel leaves the start
/// row with a proper support.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SupportWitness {
    pub start: usize,
    pub rules: Vec<DecisionRule>,
    /// Supports `S_0 = {start}, S_1, …` along the sequence.
    pub supports: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransitionRatio {
    pub steps: usize,
    /// `None` when the ratio is infinite.
    pub k: Option<f64>,
    /// True when K came from interval propagation instead of enumeration.
    pub bound_only: bool,
    /// Column and rule sequence attaining the reported value when enumerated.
    pub column: Option<usize>,
    pub rules: Option<Vec<DecisionRule>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    OneStepMixing {
        delta: f64,
        witness: DeltaWitness,
    },
    NotPrimitive {
        witness: Option<SupportWitness>,
    },
    InfiniteRatio {
        steps: usize,
        column: Option<usize>,
        rules: Option<Vec<DecisionRule>>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErgodicityReport {
    pub delta: f64,
    pub one_step_mixing: bool,
    pub primitive: bool,
    pub n_steps: Option<usize>,
    /// K at `k_steps`; `None` means infinite.
    pub k_ratio: Option<f64>,
    pub k_steps: usize,
    pub k_bound_only: bool,
    pub violations: Vec<Violation>,
}

impl ErgodicityReport {
    /// A.1 and A.2 both hold.
    pub fn all_hold(&self) -> bool {
        self.one_step_mixing && self.k_ratio.is_some()
    }
}

/// Δ as the largest total-variation distance between any two rows
/// `P_a(x,·)` and `P_{a'}(x',·)`. This equals `sup_A |P_a(x,A) − P_{a'}(x',A)|`
/// over all subsets `A`, attained at `A = {y : P_a(x,y) > P_{a'}(x',y)}`.
pub fn one_step_delta(mdp: &Mdp) -> OneStepDelta {
    let (k, l) = (mdp.k(), mdp.l());
    let mut best = OneStepDelta {
        delta: 0.0,
        witness: DeltaWitness {
            state_a: 0,
            action_a: 0,
            state_b: 0,
            action_b: 0,
        },
    };
    for x in 0..k {
        for a in 0..l {
            let r1 = mdp.row(a, x);
            for x2 in 0..k {
                for a2 in 0..l {
                    let r2 = mdp.row(a2, x2);
                    let tv = r1
                        .iter()
                        .zip(r2)
                        .map(|(p, q)| (p - q).max(0.0))
                        .sum::<f64>()
                        .min(1.0);
                    if tv > best.delta {
                        best = OneStepDelta {
                            delta: tv,
                            witness: DeltaWitness {
                                state_a: x,
                                action_a: a,
                                state_b: x2,
                                action_b: a2,
                            },
                        };
                    }
                }
            }
        }
    }
    best
}

type Mask = u32;

fn bits(mask: Mask, k: usize) -> Vec<usize> {
    (0..k).filter(|&i| mask & (1 << i) != 0).collect()
}

/// Parent pointer in the support automaton: previous set and the actions
/// chosen on its members.
#[derive(Clone)]
struct Edge {
    parent: Mask,
    choice: Vec<(usize, usize)>,
}

/// Decides strong primitivity with the reachable-support-set automaton.
///
/// `R_0` is the family of singletons and `R_{n+1}` collects every set
/// `∪_{y∈S} supp P_{a_y}(y,·)` for `S ∈ R_n` and any per-state actions.
/// The model is primitive when some `R_N`, `1 <= N <= max(2^k − 2, 1)`, is
/// `{E}`; the first such `N` is returned. The search stops early when a
/// family repeats without having reached `{E}`.
pub fn strong_primitivity(mdp: &Mdp) -> Result<Primitivity, AssumptionError> {
    let k = mdp.k();
    if k > MAX_PRIMITIVITY_STATES {
        return Err(AssumptionError::TooManyStates(k));
    }
    let full: Mask = if k == 32 { Mask::MAX } else { (1 << k) - 1 };
    let limit = ((1usize << k) - 2).max(1);

    // supports[x][a]
    let supports: Vec<Vec<Mask>> = (0..k)
        .map(|x| {
            (0..mdp.l())
                .map(|a| {
                    mdp.row(a, x)
                        .iter()
                        .enumerate()
                        .filter(|(_, p)| **p > 0.0)
                        .fold(0, |m, (y, _)| m | (1 << y))
                })
                .collect()
        })
        .collect();

    // Successor sets of one set with one representative choice for each.
    let successors = |s: Mask| -> HashMap<Mask, Vec<(usize, usize)>> {
        let mut cur: HashMap<Mask, Vec<(usize, usize)>> = HashMap::new();
        cur.insert(0, Vec::new());
        for y in bits(s, k) {
            let mut next: HashMap<Mask, Vec<(usize, usize)>> = HashMap::new();
            for (u, choice) in &cur {
                for (a, &sup) in supports[y].iter().enumerate() {
                    next.entry(u | sup).or_insert_with(|| {
                        let mut c = choice.clone();
                        c.push((y, a));
                        c
                    });
                }
            }
            cur = next;
        }
        cur
    };

    let mut levels: Vec<HashMap<Mask, Edge>> = Vec::new();
    let start: HashMap<Mask, Edge> = (0..k)
        .map(|x| {
            (
                1 << x,
                Edge {
                    parent: 0,
                    choice: Vec::new(),
                },
            )
        })
        .collect();
    levels.push(start);
    let mut seen: HashSet<Vec<Mask>> = HashSet::new();
    let mut succ_cache: HashMap<Mask, HashMap<Mask, Vec<(usize, usize)>>> = HashMap::new();

    for n in 1..=limit {
        let prev = &levels[n - 1];
        let mut keys: Vec<Mask> = prev.keys().copied().collect();
        keys.sort_unstable();
        let mut next: HashMap<Mask, Edge> = HashMap::new();
        for s in keys {
            let succ = succ_cache.entry(s).or_insert_with(|| successors(s));
            let mut targets: Vec<(&Mask, &Vec<(usize, usize)>)> = succ.iter().collect();
            targets.sort_unstable_by_key(|(m, _)| **m);
            for (t, choice) in targets {
                next.entry(*t).or_insert_with(|| Edge {
                    parent: s,
                    choice: choice.clone(),
                });
            }
        }
        let all_full = next.len() == 1 && next.contains_key(&full);
        let mut family: Vec<Mask> = next.keys().copied().collect();
        family.sort_unstable();
        levels.push(next);
        if all_full {
            return Ok(Primitivity {
                primitive: true,
                n_steps: Some(n),
                explored: n,
                witness: None,
            });
        }
        if !seen.insert(family) || n == limit {
            let witness = build_witness(mdp, &levels, full);
            return Ok(Primitivity {
                primitive: false,
                n_steps: None,
                explored: n,
                witness,
            });
        }
    }
    unreachable!("loop returns at n == limit")
}

fn build_witness(mdp: &Mdp, levels: &[HashMap<Mask, Edge>], full: Mask) -> Option<SupportWitness> {
    let k = mdp.k();
    let last = levels.len() - 1;
    let mut proper: Vec<Mask> = levels[last].keys().copied().filter(|&m| m != full).collect();
    proper.sort_unstable();
    let mut mask = *proper.first()?;
    let mut sets = vec![mask];
    let mut rules = Vec::new();
    for n in (1..=last).rev() {
        let edge = &levels[n][&mask];
        let mut rule = vec![0; k];
        for &(y, a) in &edge.choice {
            rule[y] = a;
        }
        rules.push(DecisionRule(rule));
        mask = edge.parent;
        sets.push(mask);
    }
    rules.reverse();
    sets.reverse();
    let start = mask.trailing_zeros() as usize;
    Some(SupportWitness {
        start,
        rules,
        supports: sets.into_iter().map(|m| bits(m, k)).collect(),
    })
}

/// Ratio contribution of one column: `max/min` over rows, with `0/0 = 1`
/// and `c/0 = ∞`.
fn column_ratio(m: &[f64], k: usize, y: usize) -> f64 {
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for x in 0..k {
        let v = m[x * k + y];
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if hi == 0.0 {
        1.0
    } else if lo == 0.0 {
        f64::INFINITY
    } else {
        hi / lo
    }
}

/// `K = sup P^{(π,N)}(x,y) / P^{(π,N)}(x',y)` over Markov rule sequences of
/// length `steps`. Enumerates all `(l^k)^N` sequences when that count is at
/// most `cap`; otherwise returns the interval-propagation upper bound with
/// `bound_only` set.
pub fn transition_equivalence(
    mdp: &Mdp,
    steps: usize,
    cap: u128,
) -> Result<TransitionRatio, AssumptionError> {
    if steps == 0 {
        return Err(AssumptionError::ZeroSteps);
    }
    let k = mdp.k();
    let total = mdp
        .rule_count()
        .and_then(|r| r.checked_pow(steps as u32))
        .filter(|&t| t <= cap);
    if total.is_none() {
        let all_positive = strong_primitivity(mdp)
            .map(|p| p.n_steps.is_some_and(|n| n <= steps))
            .unwrap_or(false);
        return Ok(interval_bound(mdp, steps, all_positive));
    }
    let rules = mdp
        .enumerate_rules(u128::MAX)
        .expect("rule count already bounded");
    let kernels: Vec<Vec<f64>> = rules
        .iter()
        .map(|u| mdp.policy_kernel(u).as_slice().to_vec())
        .collect();

    struct Best {
        k: f64,
        column: usize,
        seq: Vec<usize>,
    }
    let mut best = Best {
        k: 1.0,
        column: 0,
        seq: vec![0; steps],
    };
    let mut seq = Vec::with_capacity(steps);

    fn dfs(
        prod: &[f64],
        depth: usize,
        steps: usize,
        k: usize,
        kernels: &[Vec<f64>],
        seq: &mut Vec<usize>,
        best: &mut Best,
    ) {
        if depth == steps {
            for y in 0..k {
                let r = column_ratio(prod, k, y);
                if r > best.k {
                    best.k = r;
                    best.column = y;
                    best.seq = seq.clone();
                }
            }
            return;
        }
        for (i, kern) in kernels.iter().enumerate() {
            if best.k == f64::INFINITY {
                return;
            }
            let next = if depth == 0 {
                kern.clone()
            } else {
                mat_mul(prod, kern, k)
            };
            seq.push(i);
            dfs(&next, depth + 1, steps, k, kernels, seq, best);
            seq.pop();
        }
    }
    dfs(&[], 0, steps, k, &kernels, &mut seq, &mut best);

    Ok(TransitionRatio {
        steps,
        k: best.k.is_finite().then_some(best.k),
        bound_only: false,
        column: Some(best.column),
        rules: Some(best.seq.iter().map(|&i| rules[i].clone()).collect()),
    })
}

/// Entrywise bounds `lo ≤ P^{(π,N)} ≤ hi` from per-step action minima and
/// maxima, then `K ≤ max_y max_x hi(x,y) / min_x lo(x,y)`. When every product
/// of length `N` is known to be positive, each entry is at least `p_min^N`.
fn interval_bound(mdp: &Mdp, steps: usize, all_positive: bool) -> TransitionRatio {
    let (k, l) = (mdp.k(), mdp.l());
    let mut lo1 = vec![0.0; k * k];
    let mut hi1 = vec![0.0; k * k];
    for x in 0..k {
        for y in 0..k {
            let vals = (0..l).map(|a| mdp.p(a, x, y));
            lo1[x * k + y] = vals.clone().fold(f64::INFINITY, f64::min);
            hi1[x * k + y] = vals.fold(0.0, f64::max);
        }
    }
    let (mut lo, mut hi) = (lo1.clone(), hi1.clone());
    for _ in 1..steps {
        lo = mat_mul(&lo, &lo1, k);
        hi = mat_mul(&hi, &hi1, k);
    }
    hi.iter_mut().for_each(|v| *v = v.min(1.0));
    if all_positive {
        let p_min = (0..l)
            .flat_map(|a| (0..k).flat_map(move |x| mdp.row(a, x).to_vec()))
            .filter(|p| *p > 0.0)
            .fold(1.0f64, f64::min);
        let floor = p_min.powi(steps as i32);
        lo.iter_mut().for_each(|v| *v = v.max(floor));
    }
    let mut kk = 1.0f64;
    for y in 0..k {
        let h = (0..k).map(|x| hi[x * k + y]).fold(0.0, f64::max);
        let m = (0..k).map(|x| lo[x * k + y]).fold(f64::INFINITY, f64::min);
        let r = if h == 0.0 {
            1.0
        } else if m == 0.0 {
            f64::INFINITY
        } else {
            h / m
        };
        kk = kk.max(r);
    }
    TransitionRatio {
        steps,
        k: kk.is_finite().then_some(kk),
        bound_only: true,
        column: None,
        rules: None,
    }
}

/// Runs all checks. K is evaluated at the primitivity step count when the
/// model is primitive, else at the first `N` in `1..=max(2^k−2,1)` (capped
/// at 4) giving a finite value, else reported infinite at `N = 1`.
pub fn check(mdp: &Mdp) -> Result<ErgodicityReport, AssumptionError> {
    let d = one_step_delta(mdp);
    let prim = strong_primitivity(mdp)?;
    let mut violations = Vec::new();
    let one_step_mixing = d.delta < 1.0;
    if !one_step_mixing {
        violations.push(Violation::OneStepMixing {
            delta: d.delta,
            witness: d.witness,
        });
    }
    if !prim.primitive {
        violations.push(Violation::NotPrimitive {
            witness: prim.witness.clone(),
        });
    }
    let ratio = match prim.n_steps {
        Some(n) => transition_equivalence(mdp, n, DEFAULT_SEQUENCE_CAP)?,
        None => {
            let max_n = ((1usize << mdp.k().min(20)) - 2).clamp(1, 4);
            let mut first = None;
            let mut found = None;
            for n in 1..=max_n {
                let r = transition_equivalence(mdp, n, DEFAULT_SEQUENCE_CAP)?;
                if r.k.is_some() {
                    found = Some(r);
                    break;
                }
                first.get_or_insert(r);
            }
            match found {
                Some(r) => r,
                None => first.expect("at least one step evaluated"),
            }
        }
    };
    if ratio.k.is_none() {
        violations.push(Violation::InfiniteRatio {
            steps: ratio.steps,
            column: ratio.column,
            rules: ratio.rules.clone(),
        });
    }
    Ok(ErgodicityReport {
        delta: d.delta,
        one_step_mixing,
        primitive: prim.primitive,
        n_steps: prim.n_steps,
        k_ratio: ratio.k,
        k_steps: ratio.steps,
        k_bound_only: ratio.bound_only,
        violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus;

    #[test]
    fn delta_examples() {
        assert!((one_step_delta(&corpus::example1()).delta - 0.4).abs() < 1e-12);
        assert_eq!(one_step_delta(&corpus::single_state(5.0)).delta, 0.0);
        let d = one_step_delta(&corpus::example4(0.0));
        assert!((d.delta - 1.0).abs() < 1e-12);
    }

    #[test]
    fn primitivity_examples() {
        let p = strong_primitivity(&corpus::example2()).unwrap();
        assert!(p.primitive);
        assert_eq!(p.n_steps, Some(1));

        let p = strong_primitivity(&corpus::example4(0.05)).unwrap();
        assert!(p.primitive);
        assert_eq!(p.n_steps, Some(2));

        let p = strong_primitivity(&corpus::two_cycle()).unwrap();
        assert!(!p.primitive);
        let w = p.witness.unwrap();
        for pair in w.supports.windows(2) {
            assert_eq!(pair[0].len(), 1);
            assert_ne!(pair[0], pair[1]);
        }
    }

    #[test]
    fn ex4_at_zero_is_periodic() {
        let p = strong_primitivity(&corpus::example4(0.0)).unwrap();
        assert!(!p.primitive);
        let w = p.witness.unwrap();
        assert_eq!(w.rules.len() + 1, w.supports.len());
    }

    #[test]
    fn ratio_examples() {
        let single = transition_equivalence(&corpus::single_state(5.0), 1, DEFAULT_SEQUENCE_CAP).unwrap();
        assert_eq!(single.k, Some(1.0));
        let cyc = transition_equivalence(&corpus::two_cycle(), 1, DEFAULT_SEQUENCE_CAP).unwrap();
        assert_eq!(cyc.k, None);
        // mixing actions across rows: column of state -1 ranges over 0.1..0.3
        let ex1 = transition_equivalence(&corpus::example1(), 1, DEFAULT_SEQUENCE_CAP).unwrap();
        assert!((ex1.k.unwrap() - 3.0).abs() < 1e-12);
        assert!(!ex1.bound_only);
    }

    #[test]
    fn interval_bound_dominates_exact() {
        for m in [corpus::example1(), corpus::example2(), corpus::example4(0.05)] {
            for n in 1..=2 {
                let exact = transition_equivalence(&m, n, DEFAULT_SEQUENCE_CAP).unwrap();
                let bound = transition_equivalence(&m, n, 0).unwrap();
                assert!(bound.bound_only);
                let e = exact.k.unwrap_or(f64::INFINITY);
                let b = bound.k.unwrap_or(f64::INFINITY);
                assert!(b >= e - 1e-12, "bound {b} below exact {e}");
            }
        }
    }

    #[test]
    fn report_flags() {
        let r = check(&corpus::example1()).unwrap();
        assert!(r.all_hold() && r.primitive && r.violations.is_empty());
        let r = check(&corpus::example4(0.0)).unwrap();
        assert!(!r.one_step_mixing && !r.all_hold());
        assert!(!r.violations.is_empty());
        let r = check(&corpus::example4(0.05)).unwrap();
        assert!(r.all_hold());
        assert_eq!(r.k_steps, 2);
    }
}
