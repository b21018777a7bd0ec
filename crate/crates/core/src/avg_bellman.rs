//! Averaged risk-sensitive Bellman operator, its fixed point by relative
//! value iteration, and optimal rule extraction.

use serde::Serialize;
use thiserror::Error;

use crate::mdp::{DecisionRule, Mdp};
use crate::numeric::{certainty_equivalent, span, sup_dist};

pub use crate::numeric::span as span_seminorm;

/// Tolerance for membership in the argmax sets of the operator.
pub const ARGMAX_TIE_TOL: f64 = 1e-9;
pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITER: usize = 1_000_000;

/// Number of trailing span ratios kept in the diagnostics.
const RATIO_HISTORY: usize = 16;

#[derive(Debug, Error)]
pub enum AvgError {
    #[error("tolerance must be positive, got {0}")]
    Tolerance(f64),
    #[error("anchor state {0} out of range")]
    Anchor(usize),
    #[error("value iteration did not reach tol {tol} in {} iterations (residual {})", .last.iterations, .last.residual)]
    NotConverged { tol: f64, last: Box<AvgSolution> },
}

/// Output of one application of the operator.
#[derive(Debug, Clone, PartialEq)]
pub struct Applied {
    pub value: Vec<f64>,
    /// Maximizing actions per state within [`ARGMAX_TIE_TOL`].
    pub argmax: Vec<Vec<usize>>,
}

/// `(w, λ)` solving the averaged Bellman equation, anchored at `anchor`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AvgSolution {
    pub gamma: f64,
    pub w: Vec<f64>,
    pub lambda: f64,
    pub residual: f64,
    pub iterations: usize,
    pub anchor: usize,
    /// Last observed ratios `span(g_{m+1}−g_m) / span(g_m−g_{m−1})`.
    pub observed_ratios: Vec<f64>,
}

/// Per-state maximizing sets and the canonical (lowest index) rule.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimalRuleSet {
    pub sets: Vec<Vec<usize>>,
    pub canonical: DecisionRule,
}

impl OptimalRuleSet {
    pub fn contains(&self, u: &DecisionRule) -> bool {
        u.actions()
            .iter()
            .zip(&self.sets)
            .all(|(a, set)| set.contains(a))
    }
}

/// Value of action `a` at state `x`: `c(x,a) + (1/γ) ln Σ_y P_a(x,y) e^{γ g(y)}`.
pub fn q_value(mdp: &Mdp, gamma: f64, g: &[f64], x: usize, a: usize) -> f64 {
    mdp.reward(x, a) + certainty_equivalent(mdp.row(a, x), g, gamma)
}

/// `T_γ g` and the argmax sets. At `γ = 0` the certainty equivalent is the
/// plain expectation.
pub fn apply_t(mdp: &Mdp, gamma: f64, g: &[f64]) -> Applied {
    let mut value = Vec::with_capacity(mdp.k());
    let mut argmax = Vec::with_capacity(mdp.k());
    let mut q = vec![0.0; mdp.l()];
    for x in 0..mdp.k() {
        for (a, qa) in q.iter_mut().enumerate() {
            *qa = q_value(mdp, gamma, g, x, a);
        }
        let best = q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        argmax.push(
            (0..mdp.l())
                .filter(|&a| q[a] >= best - ARGMAX_TIE_TOL)
                .collect(),
        );
        value.push(best);
    }
    Applied { value, argmax }
}

/// Relative value iteration `g_{m+1} = T g_m − (T g_m)(anchor)` from `g_0 = 0`.
///
/// Stops at the first iterate whose Bellman residual
/// `sup_x |g(x) − (T g(x) − λ)|`, `λ = (T g)(anchor)`, is at most `tol`.
pub fn solve_average(
    mdp: &Mdp,
    gamma: f64,
    tol: f64,
    max_iter: usize,
    anchor: usize,
) -> Result<AvgSolution, AvgError> {
    if !(tol > 0.0) {
        return Err(AvgError::Tolerance(tol));
    }
    if anchor >= mdp.k() {
        return Err(AvgError::Anchor(anchor));
    }
    let k = mdp.k();
    let mut g = vec![0.0; k];
    let mut prev_span = f64::NAN;
    let mut ratios: Vec<f64> = Vec::new();
    let mut iter = 0;
    loop {
        let t = apply_t(mdp, gamma, &g).value;
        let lambda = t[anchor];
        let next: Vec<f64> = t.iter().map(|v| v - lambda).collect();
        let residual = sup_dist(&g, &next);
        let diff: Vec<f64> = next.iter().zip(&g).map(|(a, b)| a - b).collect();
        let s = span(&diff);
        if prev_span > 0.0 {
            ratios.push(s / prev_span);
            if ratios.len() > RATIO_HISTORY {
                ratios.remove(0);
            }
        }
        prev_span = s;
        let sol = AvgSolution {
            gamma,
            w: g,
            lambda,
            residual,
            iterations: iter,
            anchor,
            observed_ratios: ratios.clone(),
        };
        if residual <= tol {
            return Ok(sol);
        }
        if iter >= max_iter {
            return Err(AvgError::NotConverged {
                tol,
                last: Box::new(sol),
            });
        }
        g = next;
        iter += 1;
    }
}

/// Argmax sets of the operator at the fixed point.
pub fn extract_rules(mdp: &Mdp, gamma: f64, solution: &AvgSolution) -> OptimalRuleSet {
    let applied = apply_t(mdp, gamma, &solution.w);
    let canonical = DecisionRule(applied.argmax.iter().map(|s| s[0]).collect());
    OptimalRuleSet {
        sets: applied.argmax,
        canonical,
    }
}
