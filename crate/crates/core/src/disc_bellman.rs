//! Discounted risk-sensitive recursion on the grid `γβ^n`, non-stationary
//! optimal policies, vanishing-discount diagnostics and Blackwell thresholds.
//!
//! Levels are kept in γ-scaled units: `w^β(x, γβ^n)` is `γ` times the
//! discounted entropic value from step `n` on, in the recursion
//!
//! ```text
//! w(x, γβ^n) = opt_a [ γβ^n c(x,a) + ln Σ_y P_a(x,y) e^{w(y, γβ^{n+1})} ]
//! ```
//!
//! with `opt = max` for `γ > 0` and `min` for `γ < 0`. Internally each level
//! is stored centred at the anchor, `w̄_n = w_n − w_n(z̄)`, together with the
//! increments `λ_n = w_n(z̄) − w_{n+1}(z̄)`.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use thiserror::Error;

use crate::avg_bellman::{solve_average, AvgError, ARGMAX_TIE_TOL, DEFAULT_MAX_ITER};
use crate::corpus;
use crate::mdp::{DecisionRule, MarkovPolicy, Mdp, ModelError};
use crate::numeric::{bisect, certainty_equivalent, span, sup_dist};
use crate::poisson::{lambda_argmax, solve_mpe, PoissonError, LAMBDA_TIE_TOL};

/// Improvement margin below which policy iteration keeps the current action.
const PI_IMPROVEMENT: f64 = 1e-12;
const PI_MAX_ROUNDS: usize = 10_000;

#[derive(Debug, Error)]
pub enum DiscError {
    #[error("discount factor must lie in (0,1), got {0}")]
    Beta(f64),
    #[error("tolerance must be positive, got {0}")]
    Tolerance(f64),
    #[error("the risk-sensitive recursion needs gamma != 0; use neutral_blackwell for gamma = 0")]
    ZeroGamma,
    #[error("level {level} exceeds the truncation depth {horizon}")]
    Level { level: usize, horizon: usize },
    #[error("anchor state {0} out of range")]
    Anchor(usize),
    #[error("switch_index is defined only for the ex4 model at epsilon = 0")]
    NotGambleModel,
    #[error("switch_index needs gamma != 0")]
    SwitchGamma,
    #[error("beta grid must be nonempty, ascending and inside (0,1)")]
    Grid,
    #[error("singular system in policy evaluation")]
    Singular,
    #[error("policy iteration did not stabilise in {0} rounds")]
    PolicyIteration(usize),
    #[error(transparent)]
    Avg(#[from] AvgError),
    #[error(transparent)]
    Poisson(#[from] PoissonError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Smallest `H ≥ min_levels` with `|γ| β^H ‖c‖ / (1−β) ≤ tol`.
pub fn truncation_depth(gamma: f64, beta: f64, c_norm: f64, tol: f64, min_levels: usize) -> usize {
    let mut h = 0usize;
    let mut bound = gamma.abs() * c_norm / (1.0 - beta);
    while bound > tol {
        bound *= beta;
        h += 1;
    }
    h.max(min_levels).max(1)
}

fn check_args(beta: f64, tol: f64) -> Result<(), DiscError> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(DiscError::Beta(beta));
    }
    if !(tol > 0.0) {
        return Err(DiscError::Tolerance(tol));
    }
    Ok(())
}

/// Truncated solution of the discounted recursion.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscSolution {
    pub gamma: f64,
    pub beta: f64,
    /// Truncation depth `H`; level `H` is initialised to zero.
    pub horizon: usize,
    pub anchor: usize,
    /// Certified sup-norm error of every level, in γ-scaled units.
    pub tail_bound: f64,
    /// `J*_γ(x; β) = w^β(x, γ) / γ`.
    pub value: Vec<f64>,
    #[serde(skip)]
    k: usize,
    /// `w̄_n`, flat `(H+1)·k`.
    #[serde(skip)]
    centered: Vec<f64>,
    /// `λ_n` for `n < H`.
    #[serde(skip)]
    increments: Vec<f64>,
    /// `Σ_{m ≥ n} λ_m`, length `H+1`.
    #[serde(skip)]
    suffix: Vec<f64>,
    /// Canonical rule per level, flat `(H+1)·k`.
    #[serde(skip)]
    rules: Vec<usize>,
}

/// One level of a [`DiscSolution`] in readable form.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelReport {
    pub level: usize,
    /// `γβ^n`.
    pub gamma_n: f64,
    /// `w^β(·, γβ^n)`.
    pub w: Vec<f64>,
    pub span: f64,
    pub rule: DecisionRule,
    pub argmax: Vec<Vec<usize>>,
}

impl DiscSolution {
    pub fn centered(&self, n: usize) -> &[f64] {
        &self.centered[n * self.k..(n + 1) * self.k]
    }

    /// `λ_n = w^β(z̄, γβ^n) − w^β(z̄, γβ^{n+1})`; zero at `n = H`.
    pub fn increment(&self, n: usize) -> f64 {
        self.increments.get(n).copied().unwrap_or(0.0)
    }

    /// `w^β(·, γβ^n)`.
    pub fn level(&self, n: usize) -> Vec<f64> {
        self.centered(n).iter().map(|v| v + self.suffix[n]).collect()
    }

    pub fn rule(&self, n: usize) -> DecisionRule {
        DecisionRule(self.rules[n * self.k..(n + 1) * self.k].to_vec())
    }

    /// Maximizing (or minimizing, for `γ < 0`) action sets at level `n`.
    pub fn argmax(&self, mdp: &Mdp, n: usize) -> Vec<Vec<usize>> {
        let next = if n < self.horizon {
            self.centered(n + 1).to_vec()
        } else {
            vec![0.0; self.k]
        };
        let gn = self.gamma * self.beta.powi(n as i32);
        (0..self.k)
            .map(|x| {
                let mut set = step_choice(mdp, gn, &next, x, self.gamma > 0.0, self.gamma.abs()).1;
                set.sort_unstable();
                set
            })
            .collect()
    }

    pub fn level_report(&self, mdp: &Mdp, n: usize) -> LevelReport {
        let w = self.level(n);
        LevelReport {
            level: n,
            gamma_n: self.gamma * self.beta.powi(n as i32),
            span: span(&w),
            w,
            rule: self.rule(n),
            argmax: self.argmax(mdp, n),
        }
    }

    /// `(û_0, …, û_{H−1}, û_H, û_H, …)`.
    pub fn policy(&self) -> MarkovPolicy {
        MarkovPolicy::new(
            (0..self.horizon).map(|n| self.rule(n)).collect(),
            self.rule(self.horizon),
        )
    }
}

/// Best value and optimal action set at one state, in γ-scaled units. The
/// first entry of the set is the lowest-index exact optimizer.
fn step_choice(
    mdp: &Mdp,
    gamma_n: f64,
    next: &[f64],
    x: usize,
    maximize: bool,
    scale: f64,
) -> (f64, Vec<usize>) {
    let vals: Vec<f64> = (0..mdp.l())
        .map(|a| gamma_n * mdp.reward(x, a) + certainty_equivalent(mdp.row(a, x), next, 1.0))
        .collect();
    let best = if maximize {
        vals.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    } else {
        vals.iter().copied().fold(f64::INFINITY, f64::min)
    };
    let tie = ARGMAX_TIE_TOL * scale;
    let exact = (0..mdp.l()).find(|&a| vals[a] == best).expect("best is attained");
    let mut set: Vec<usize> = (0..mdp.l())
        .filter(|&a| (vals[a] - best).abs() <= tie)
        .collect();
    // the exact optimizer leads; the rest are near-ties
    set.retain(|&a| a != exact);
    set.insert(0, exact);
    (best, set)
}

/// One backward step: level `n` from level `n+1` (both γ-scaled, raw).
pub fn backward_step(mdp: &Mdp, gamma: f64, beta: f64, n: usize, next: &[f64]) -> Vec<f64> {
    let gn = gamma * beta.powi(n as i32);
    (0..mdp.k())
        .map(|x| step_choice(mdp, gn, next, x, gamma > 0.0, gamma.abs()).0)
        .collect()
}

/// Solves the truncated recursion. `min_levels` forces a depth of at least
/// that many levels.
pub fn solve_discounted(
    mdp: &Mdp,
    gamma: f64,
    beta: f64,
    tol: f64,
    anchor: usize,
    min_levels: usize,
) -> Result<DiscSolution, DiscError> {
    check_args(beta, tol)?;
    if gamma == 0.0 {
        return Err(DiscError::ZeroGamma);
    }
    if anchor >= mdp.k() {
        return Err(DiscError::Anchor(anchor));
    }
    let k = mdp.k();
    let norm = mdp.reward_norm();
    let h = truncation_depth(gamma, beta, norm, tol, min_levels);
    let mut centered = vec![0.0; (h + 1) * k];
    let mut rules = vec![0usize; (h + 1) * k];
    let mut increments = vec![0.0; h];
    let maximize = gamma > 0.0;

    // level H: zero values, rule from a one-step lookahead on zero
    let gh = gamma * beta.powi(h as i32);
    let zero = vec![0.0; k];
    for x in 0..k {
        rules[h * k + x] = step_choice(mdp, gh, &zero, x, maximize, gamma.abs()).1[0];
    }
    let mut raw = vec![0.0; k];
    let mut gn = gh;
    for n in (0..h).rev() {
        gn /= beta;
        let (cur, rest) = centered.split_at_mut((n + 1) * k);
        let next = &rest[..k];
        for x in 0..k {
            let (v, set) = step_choice(mdp, gn, next, x, maximize, gamma.abs());
            raw[x] = v;
            rules[n * k + x] = set[0];
        }
        let lam = raw[anchor];
        increments[n] = lam;
        for x in 0..k {
            cur[n * k + x] = raw[x] - lam;
        }
    }
    let mut suffix = vec![0.0; h + 1];
    for n in (0..h).rev() {
        suffix[n] = suffix[n + 1] + increments[n];
    }
    let value = (0..k).map(|x| (centered[x] + suffix[0]) / gamma).collect();
    Ok(DiscSolution {
        gamma,
        beta,
        horizon: h,
        anchor,
        tail_bound: gamma.abs() * beta.powi(h as i32) * norm / (1.0 - beta),
        value,
        k,
        centered,
        increments,
        suffix,
        rules,
    })
}

/// Discounted entropic value of a fixed Markov policy.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PolicyValue {
    pub gamma: f64,
    pub beta: f64,
    pub horizon: usize,
    /// Bound on the truncation error, in value units.
    pub tail_bound: f64,
    pub value: Vec<f64>,
}

/// `J_γ(x, π; β)` for every start state, by the backward recursion with the
/// actions of `π` (γ = 0 gives the expected discounted reward).
pub fn evaluate_policy(
    mdp: &Mdp,
    pi: &MarkovPolicy,
    gamma: f64,
    beta: f64,
    tol: f64,
) -> Result<PolicyValue, DiscError> {
    check_args(beta, tol)?;
    mdp.check_rule(&pi.tail)?;
    for r in &pi.rules {
        mdp.check_rule(r)?;
    }
    let k = mdp.k();
    let norm = mdp.reward_norm();
    let (scale, ce_gamma) = if gamma == 0.0 { (1.0, 0.0) } else { (gamma, 1.0) };
    let h = truncation_depth(scale, beta, norm, tol * scale.abs(), pi.rules.len());
    let mut next = vec![0.0; k];
    let mut cur = vec![0.0; k];
    let mut total = 0.0;
    let mut gn = scale * beta.powi(h as i32);
    for n in (0..h).rev() {
        gn /= beta;
        let u = pi.rule_at(n);
        for x in 0..k {
            let a = u.action(x);
            cur[x] = gn * mdp.reward(x, a) + certainty_equivalent(mdp.row(a, x), &next, ce_gamma);
        }
        let shift = cur[0];
        total += shift;
        for x in 0..k {
            next[x] = cur[x] - shift;
        }
    }
    Ok(PolicyValue {
        gamma,
        beta,
        horizon: h,
        tail_bound: beta.powi(h as i32) * norm / (1.0 - beta),
        value: next.iter().map(|v| (v + total) / scale).collect(),
    })
}

/// Switch point of the two-step gamble in `ex4` at `ε = 0`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SwitchIndex {
    pub gamma: f64,
    pub beta: f64,
    /// Positive root `s*` of the advantage of `ũ` over `u` on a gamble of
    /// weight `s`; `None` when one rule wins for every weight in `(0, 2]`.
    pub root: Option<f64>,
    /// Smallest `i` with `β^{2i} < s*`.
    pub index: Option<usize>,
    /// Whether `ũ` is preferred for weights above the root.
    pub tilde_above_root: bool,
}

/// Value advantage of `ũ` over `u` on the gamble starting at step `2i` with
/// weight `s = β^{2i}`: `s + Ent(8βs·B(0.1)) − Ent(8βs·B(0.5))`.
pub fn gamble_advantage(gamma: f64, beta: f64, s: f64) -> f64 {
    let big = 8.0 * beta * s;
    let ent = |p: f64| {
        crate::entropic::entropic_utility(
            &crate::entropic::FiniteDistribution::new(vec![0.0, big], vec![1.0 - p, p])
                .expect("valid two-point law"),
            gamma,
        )
    };
    s + ent(0.1) - ent(0.5)
}

/// The closed-form switch function `f(s) = 0.5 + 0.5e^{−4s} − 0.9e^{−s} − 0.1e^{−5s}`,
/// which has the sign of [`gamble_advantage`] at `γ = −1`, `β = ½`.
pub fn switch_function(s: f64) -> f64 {
    0.5 + 0.5 * (-4.0 * s).exp() - 0.9 * (-s).exp() - 0.1 * (-5.0 * s).exp()
}

fn is_gamble_model(mdp: &Mdp) -> bool {
    let reference = corpus::example4(0.0);
    mdp.k() == 3
        && mdp.l() == 2
        && (0..2).all(|a| {
            (0..3).all(|x| {
                mdp.reward(x, a) == reference.reward(x, a)
                    && (0..3).all(|y| (mdp.p(a, x, y) - reference.p(a, x, y)).abs() <= 1e-15)
            })
        })
}

pub fn switch_index(mdp: &Mdp, gamma: f64, beta: f64) -> Result<SwitchIndex, DiscError> {
    if !is_gamble_model(mdp) {
        return Err(DiscError::NotGambleModel);
    }
    if gamma == 0.0 {
        return Err(DiscError::SwitchGamma);
    }
    if !(beta > 0.0 && beta < 1.0) {
        return Err(DiscError::Beta(beta));
    }
    let (lo, hi) = (1e-3, 2.0);
    let (flo, fhi) = (gamble_advantage(gamma, beta, lo), gamble_advantage(gamma, beta, hi));
    let tilde_above_root = fhi > 0.0;
    let root = (flo.signum() != fhi.signum())
        .then(|| bisect(|s| gamble_advantage(gamma, beta, s), lo, hi, 1e-12, 200));
    let index = root.and_then(|r| {
        if !tilde_above_root {
            return None;
        }
        (0..10_000).find(|&i| beta.powi(2 * i as i32) < r)
    });
    Ok(SwitchIndex {
        gamma,
        beta,
        root,
        index,
        tilde_above_root,
    })
}

/// Centred levels and their distance to the averaged solution.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VanishingEntry {
    pub n: usize,
    pub lambda_n: f64,
    pub w_bar: Vec<f64>,
    pub lambda_n_over_gamma: f64,
    pub dist_lambda: Option<f64>,
    pub dist_w_sup: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VanishingTrace {
    pub gamma: f64,
    pub beta: f64,
    pub anchor: usize,
    pub horizon: usize,
    /// `λ(γ)` from relative value iteration when it converged.
    pub lambda_avg: Option<f64>,
    pub entries: Vec<VanishingEntry>,
}

/// `w̄^β_n` and `λ^β_n` for `n ≤ n_max`, compared with `(w(·,γ), λ(γ))` via
/// `λ_n/γ → λ` and `w̄_n/γ → w`.
pub fn vanishing_trace(
    mdp: &Mdp,
    gamma: f64,
    beta: f64,
    anchor: usize,
    n_max: usize,
    tol: f64,
) -> Result<VanishingTrace, DiscError> {
    let sol = solve_discounted(mdp, gamma, beta, tol, anchor, n_max + 1)?;
    let avg = solve_average(mdp, gamma, 1e-12, DEFAULT_MAX_ITER, anchor).ok();
    let entries = (0..=n_max)
        .map(|n| {
            let w_bar = sol.centered(n).to_vec();
            let lambda_n = sol.increment(n);
            let scaled: Vec<f64> = w_bar.iter().map(|v| v / gamma).collect();
            VanishingEntry {
                n,
                lambda_n,
                lambda_n_over_gamma: lambda_n / gamma,
                dist_lambda: avg.as_ref().map(|a| (lambda_n / gamma - a.lambda).abs()),
                dist_w_sup: avg.as_ref().map(|a| sup_dist(&scaled, &a.w)),
                w_bar,
            }
        })
        .collect();
    Ok(VanishingTrace {
        gamma,
        beta,
        anchor,
        horizon: sol.horizon,
        lambda_avg: avg.map(|a| a.lambda),
        entries,
    })
}

/// Default grid `1 − 2^{−j}`, `j = 1..=14`.
pub fn default_beta_grid() -> Vec<f64> {
    (1..=14).map(|j| 1.0 - 0.5f64.powi(j)).collect()
}

fn check_grid(grid: &[f64]) -> Result<(), DiscError> {
    if grid.is_empty()
        || grid.iter().any(|b| !(*b > 0.0 && *b < 1.0))
        || grid.windows(2).any(|w| w[0] >= w[1])
    {
        return Err(DiscError::Grid);
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvidenceRow {
    pub beta: f64,
    pub level: usize,
    pub rule: DecisionRule,
    pub rule_id: usize,
    pub lambda_rule: f64,
    pub lambda_opt: f64,
    pub member: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ThresholdStatus {
    Found,
    NotFoundOnGrid,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlackwellReport {
    pub gamma: f64,
    pub level: usize,
    pub status: ThresholdStatus,
    /// Smallest grid `β` from which membership holds at every larger grid point.
    pub threshold: Option<f64>,
    pub rows: Vec<EvidenceRow>,
}

fn suffix_threshold(grid: &[f64], ok: &[bool]) -> Option<f64> {
    let mut first = None;
    for (b, m) in grid.iter().zip(ok).rev() {
        if !m {
            break;
        }
        first = Some(*b);
    }
    first
}

/// For each `β`, checks whether the level-`n` rule of the discounted
/// solution is averaged-optimal by comparing its `λ^u(γ)` with `max_u λ^u(γ)`.
pub fn blackwell_threshold(
    mdp: &Mdp,
    gamma: f64,
    level: usize,
    grid: &[f64],
    tol: f64,
) -> Result<BlackwellReport, DiscError> {
    check_grid(grid)?;
    let opt = lambda_argmax(mdp, gamma, 1e-12)?;
    let mut rows = Vec::with_capacity(grid.len());
    for &beta in grid {
        let sol = solve_discounted(mdp, gamma, beta, tol, 0, level + 1)?;
        let rule = sol.rule(level);
        let lambda_rule = solve_mpe(mdp, &rule, gamma, 1e-12, 0)?.lambda_u;
        rows.push(EvidenceRow {
            beta,
            level,
            rule_id: rule.index(mdp.l()),
            rule,
            lambda_rule,
            lambda_opt: opt.lambda,
            member: lambda_rule >= opt.lambda - LAMBDA_TIE_TOL,
        });
    }
    let ok: Vec<bool> = rows.iter().map(|r| r.member).collect();
    let threshold = suffix_threshold(grid, &ok);
    Ok(BlackwellReport {
        gamma,
        level,
        status: if threshold.is_some() {
            ThresholdStatus::Found
        } else {
            ThresholdStatus::NotFoundOnGrid
        },
        threshold,
        rows,
    })
}

/// Risk-neutral discounted solution for one `β` by policy iteration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NeutralDiscounted {
    pub beta: f64,
    pub w: Vec<f64>,
    pub rule: DecisionRule,
    pub rounds: usize,
}

fn evaluate_stationary(mdp: &Mdp, u: &DecisionRule, beta: f64) -> Result<Vec<f64>, DiscError> {
    let k = mdp.k();
    let kern = mdp.policy_kernel(u);
    let c = mdp.policy_rewards(u);
    let mut m = DMatrix::<f64>::identity(k, k);
    for x in 0..k {
        for y in 0..k {
            m[(x, y)] -= beta * kern.get(x, y);
        }
    }
    let w = m
        .lu()
        .solve(&DVector::from_vec(c))
        .ok_or(DiscError::Singular)?;
    Ok(w.iter().copied().collect())
}

/// `w^β = max_a [c + β P_a w^β]` by policy iteration from the lowest-index
/// rule; actions change only on improvement beyond a relative `1e-12`.
/// The reported rule is the lowest-index greedy rule at the fixed point.
pub fn solve_neutral_discounted(mdp: &Mdp, beta: f64) -> Result<NeutralDiscounted, DiscError> {
    check_args(beta, 1.0)?;
    let (k, l) = (mdp.k(), mdp.l());
    let mut u = DecisionRule::constant(0, k);
    for round in 1..=PI_MAX_ROUNDS {
        let w = evaluate_stationary(mdp, &u, beta)?;
        let q = |x: usize, a: usize| {
            mdp.reward(x, a) + beta * mdp.row(a, x).iter().zip(&w).map(|(p, v)| p * v).sum::<f64>()
        };
        let mut changed = false;
        let mut next = u.0.clone();
        for x in 0..k {
            let cur = q(x, u.action(x));
            let margin = PI_IMPROVEMENT * (1.0 + cur.abs());
            let (best_a, best) = (0..l)
                .map(|a| (a, q(x, a)))
                .fold((u.action(x), cur), |acc, (a, v)| if v > acc.1 + margin { (a, v) } else { acc });
            if best_a != u.action(x) && best > cur + margin {
                next[x] = best_a;
                changed = true;
            }
        }
        if !changed {
            let greedy = (0..k)
                .map(|x| {
                    let vals: Vec<f64> = (0..l).map(|a| q(x, a)).collect();
                    let top = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    let tie = ARGMAX_TIE_TOL * (1.0 + top.abs());
                    (0..l).find(|&a| vals[a] >= top - tie).unwrap()
                })
                .collect();
            return Ok(NeutralDiscounted {
                beta,
                w,
                rule: DecisionRule(greedy),
                rounds: round,
            });
        }
        u = DecisionRule(next);
    }
    Err(DiscError::PolicyIteration(PI_MAX_ROUNDS))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NeutralRow {
    pub beta: f64,
    pub rule: DecisionRule,
    pub rule_id: usize,
    pub lambda_rule: f64,
    /// `(1−β) w^β(z̄, 0)`.
    pub scaled_value: f64,
    pub member: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NeutralBlackwell {
    pub anchor: usize,
    /// `λ(0) = max_u λ^u(0)`.
    pub lambda0: f64,
    pub rows: Vec<NeutralRow>,
    /// Greedy rule at the largest grid `β`.
    pub stable_rule: DecisionRule,
    /// Smallest grid `β` from which the greedy rule equals `stable_rule`.
    pub threshold: Option<f64>,
    pub stable_member: bool,
}

pub fn neutral_blackwell(
    mdp: &Mdp,
    grid: &[f64],
    anchor: usize,
) -> Result<NeutralBlackwell, DiscError> {
    check_grid(grid)?;
    if anchor >= mdp.k() {
        return Err(DiscError::Anchor(anchor));
    }
    let lambda0 = lambda_argmax(mdp, 0.0, 1e-12)?.lambda;
    let mut rows = Vec::with_capacity(grid.len());
    for &beta in grid {
        let sol = solve_neutral_discounted(mdp, beta)?;
        let lambda_rule = solve_mpe(mdp, &sol.rule, 0.0, 1e-12, 0)?.lambda_u;
        rows.push(NeutralRow {
            beta,
            rule_id: sol.rule.index(mdp.l()),
            rule: sol.rule,
            lambda_rule,
            scaled_value: (1.0 - beta) * sol.w[anchor],
            member: lambda_rule >= lambda0 - LAMBDA_TIE_TOL,
        });
    }
    let stable_rule = rows.last().expect("grid is nonempty").rule.clone();
    let same: Vec<bool> = rows.iter().map(|r| r.rule == stable_rule).collect();
    let threshold = suffix_threshold(grid, &same);
    let stable_member = rows.last().unwrap().member;
    Ok(NeutralBlackwell {
        anchor,
        lambda0,
        rows,
        stable_rule,
        threshold,
        stable_member,
    })
}
