//! Per-rule Poisson equations. For `γ ≠ 0` the multiplicative equation is
//! the Perron eigenproblem of `A = [P^u(x_i,x_j) e^{γ c(x_i,u(x_i))}]`,
//! handled in the log domain; for `γ = 0` the additive equation is solved
//! as a linear system.

use nalgebra::{DMatrix, DVector};
use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use serde::Serialize;
use thiserror::Error;

use crate::mdp::{DecisionRule, Kernel, Mdp, ModelError, DEFAULT_ENUMERATION_CAP};
use crate::numeric::{certainty_equivalent, logsumexp_iter, sup_norm};

/// Tie tolerance on λ when collecting optimal rules.
pub const LAMBDA_TIE_TOL: f64 = 1e-8;
/// Default tolerance for the Perron iteration, in log units.
pub const PERRON_TOL: f64 = 1e-13;
pub const PERRON_MAX_ITER: usize = 1_000_000;
/// Plain power iterations tried on an aperiodic matrix before shifting.
const PLAIN_ITER: usize = 20_000;
const EXTENSION_MAX_ITER: usize = 200_000;
/// Iterations without a narrower bracket before accepting the best one.
const STALL_ITER: usize = 5_000;
/// Largest bracket (relative to the entry scale) accepted on stagnation.
const STALL_FLOOR: f64 = 1e-11;

#[derive(Debug, Error)]
pub enum PoissonError {
    #[error("matrix is reducible; restrict it to a recurrent class first")]
    Reducible,
    #[error("power iteration did not converge in {iterations} iterations (span {span})")]
    NotConverged { iterations: usize, span: f64 },
    #[error("rule has {} recurrent classes: {classes:?}", .classes.len())]
    MultipleRecurrentClasses { classes: Vec<Vec<String>> },
    #[error("transient states grow faster than the recurrent class; the Poisson equation has no finite solution")]
    TransientDominates,
    #[error("singular linear system in the risk-neutral solve")]
    Singular,
    #[error("anchor state {0} out of range")]
    Anchor(usize),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("rule enumeration not feasible ({0}); use solve_average and extract_rules instead")]
    Enumeration(ModelError),
}

/// Square nonnegative matrix stored as natural logs of its entries
/// (`-inf` for zeros), row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct LogMatrix {
    k: usize,
    data: Vec<f64>,
}

impl LogMatrix {
    pub fn new(k: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), k * k);
        Self { k, data }
    }

    pub fn from_linear(k: usize, linear: &[f64]) -> Self {
        Self::new(k, linear.iter().map(|v| v.ln()).collect())
    }

    pub fn order(&self) -> usize {
        self.k
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.k + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.k..(i + 1) * self.k]
    }

    pub fn to_linear(&self) -> Vec<f64> {
        self.data.iter().map(|v| v.exp()).collect()
    }

    /// Principal submatrix on `idx`.
    pub fn restrict(&self, idx: &[usize]) -> LogMatrix {
        let mut data = Vec::with_capacity(idx.len() * idx.len());
        for &i in idx {
            for &j in idx {
                data.push(self.get(i, j));
            }
        }
        LogMatrix::new(idx.len(), data)
    }

    fn support(&self) -> Vec<Vec<usize>> {
        (0..self.k)
            .map(|i| (0..self.k).filter(|&j| self.get(i, j) > f64::NEG_INFINITY).collect())
            .collect()
    }

    /// `ln (A e^{lv})_i`.
    fn log_apply(&self, lv: &[f64]) -> Vec<f64> {
        (0..self.k)
            .map(|i| logsumexp_iter(self.row(i).iter().zip(lv).map(|(a, v)| a + v)))
            .collect()
    }
}

/// Log-domain `A = [P^u(x_i,x_j) e^{γ c(x_i,u(x_i))}]`.
pub fn mpe_matrix(mdp: &Mdp, u: &DecisionRule, gamma: f64) -> LogMatrix {
    let k = mdp.k();
    let kern = mdp.policy_kernel(u);
    let mut data = Vec::with_capacity(k * k);
    for x in 0..k {
        let shift = gamma * mdp.reward(x, u.action(x));
        data.extend(kern.row(x).iter().map(|p| p.ln() + shift));
    }
    LogMatrix::new(k, data)
}

fn support_graph(adj: &[Vec<usize>]) -> DiGraph<(), ()> {
    let mut g = DiGraph::new();
    let nodes: Vec<_> = (0..adj.len()).map(|_| g.add_node(())).collect();
    for (i, row) in adj.iter().enumerate() {
        for &j in row {
            g.add_edge(nodes[i], nodes[j], ());
        }
    }
    g
}

/// Strongly connected components, each sorted, listed by smallest member.
pub fn strong_components(adj: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let g = support_graph(adj);
    let mut comps: Vec<Vec<usize>> = tarjan_scc(&g)
        .into_iter()
        .map(|c| {
            let mut v: Vec<usize> = c.into_iter().map(|n| n.index()).collect();
            v.sort_unstable();
            v
        })
        .collect();
    comps.sort();
    comps
}

/// Closed strongly connected classes of a stochastic kernel's support.
pub fn recurrent_classes(kernel: &Kernel) -> Vec<Vec<usize>> {
    let k = kernel.order();
    let adj: Vec<Vec<usize>> = (0..k)
        .map(|x| (0..k).filter(|&y| kernel.get(x, y) > 0.0).collect())
        .collect();
    closed_components(&adj)
}

fn closed_components(adj: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let comps = strong_components(adj);
    let mut id = vec![0; adj.len()];
    for (c, members) in comps.iter().enumerate() {
        for &x in members {
            id[x] = c;
        }
    }
    comps
        .iter()
        .enumerate()
        .filter(|(c, members)| {
            members
                .iter()
                .all(|&x| adj[x].iter().all(|&y| id[y] == *c))
        })
        .map(|(_, m)| m.clone())
        .collect()
}

/// Period of an irreducible support graph (gcd of cycle lengths).
fn period(adj: &[Vec<usize>]) -> usize {
    fn gcd(a: usize, b: usize) -> usize {
        if b == 0 {
            a
        } else {
            gcd(b, a % b)
        }
    }
    let n = adj.len();
    let mut level = vec![usize::MAX; n];
    level[0] = 0;
    let mut queue = std::collections::VecDeque::from([0]);
    let mut p = 0;
    while let Some(x) = queue.pop_front() {
        for &y in &adj[x] {
            if level[y] == usize::MAX {
                level[y] = level[x] + 1;
                queue.push_back(y);
            } else {
                let diff = (level[x] + 1).abs_diff(level[y]);
                p = gcd(p, diff);
            }
        }
    }
    p.max(1)
}

/// Perron root and eigenvector of an irreducible nonnegative matrix.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerronResult {
    /// `ln r`.
    pub log_root: f64,
    /// `ln v`, normalized so its maximum is 0.
    pub log_vector: Vec<f64>,
    pub iterations: usize,
    /// Width of the final Collatz-Wielandt bracket on `ln r`.
    pub bracket: f64,
    /// Whether the diagonal shift was used.
    pub shifted: bool,
}

/// Power iteration in the log domain. Each step brackets `ln r` between the
/// minimum and maximum of `ln(Av)_i − ln v_i`; it stops when the bracket is
/// at most `tol` (floored at a few ulps of the entries' scale) and reports
/// its midpoint.
///
/// Periodic supports, or aperiodic ones that fail to converge in the plain
/// phase, are iterated on `A + δI` with `δ` the smallest row sum of `A`;
/// the eigenvector is unchanged and `r = r' − δ`.
pub fn perron(a: &LogMatrix, tol: f64, max_iter: usize) -> Result<PerronResult, PoissonError> {
    let k = a.order();
    let adj = a.support();
    if strong_components(&adj).len() != 1 {
        return Err(PoissonError::Reducible);
    }
    let scale = a
        .data
        .iter()
        .filter(|v| v.is_finite())
        .fold(1.0f64, |m, v| m.max(v.abs()));
    let tol = tol.max(8.0 * f64::EPSILON * scale);

    if period(&adj) == 1 {
        if let Ok(res) = power(a, tol, PLAIN_ITER.min(max_iter)) {
            return Ok(res);
        }
    }

    let log_delta = (0..k)
        .map(|i| logsumexp_iter(a.row(i).iter().copied()))
        .fold(f64::INFINITY, f64::min);
    let mut shifted = a.clone();
    for i in 0..k {
        let d = &mut shifted.data[i * k + i];
        *d = logsumexp_iter([*d, log_delta].into_iter());
    }
    let mut res = power(&shifted, tol, max_iter)?;
    // ln(r' − δ) = ln r' + ln(1 − δ/r')
    res.log_root += (-(log_delta - res.log_root).exp()).ln_1p();
    res.shifted = true;
    Ok(res)
}

fn power(a: &LogMatrix, tol: f64, max_iter: usize) -> Result<PerronResult, PoissonError> {
    let k = a.order();
    let scale = a
        .data
        .iter()
        .filter(|v| v.is_finite())
        .fold(1.0f64, |m, v| m.max(v.abs()));
    let stall_floor = STALL_FLOOR * scale;
    let mut lv = vec![0.0; k];
    let mut width = f64::INFINITY;
    let mut best: Option<PerronResult> = None;
    let mut since_best = 0usize;
    for it in 1..=max_iter {
        let next = a.log_apply(&lv);
        let (lo, hi) = next
            .iter()
            .zip(&lv)
            .map(|(n, v)| n - v)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), d| {
                (lo.min(d), hi.max(d))
            });
        width = hi - lo;
        let top = next.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        lv = next.iter().map(|v| v - top).collect();
        let current = PerronResult {
            log_root: 0.5 * (lo + hi),
            log_vector: lv.clone(),
            iterations: it,
            bracket: width,
            shifted: false,
        };
        if width <= tol {
            return Ok(current);
        }
        if best.as_ref().is_none_or(|b| width < b.bracket) {
            best = Some(current);
            since_best = 0;
        } else {
            since_best += 1;
            // rounding floor reached: the bracket no longer shrinks
            if since_best >= STALL_ITER && best.as_ref().unwrap().bracket <= stall_floor {
                return Ok(best.unwrap());
            }
        }
    }
    Err(PoissonError::NotConverged {
        iterations: max_iter,
        span: width,
    })
}

/// Solution `(w^u, λ^u)` of the per-rule Poisson equation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MpeSolution {
    pub rule: DecisionRule,
    pub gamma: f64,
    pub lambda_u: f64,
    /// Anchored so that `w_u[anchor] = 0`.
    pub w_u: Vec<f64>,
    pub anchor: usize,
    /// `ln r`; zero at `γ = 0`.
    pub log_perron_root: f64,
    /// `r = e^{γ λ_u}`; may overflow for very large `|γ|`.
    pub perron_root: f64,
    /// `ln v` with maximum 0, equal to `γ·w_u` up to a constant; empty at `γ = 0`.
    pub log_eigenvector: Vec<f64>,
    pub eigenvector: Vec<f64>,
    pub recurrent_class: Vec<usize>,
    pub residual: f64,
}

fn unique_class(mdp: &Mdp, kern: &Kernel) -> Result<Vec<usize>, PoissonError> {
    let mut classes = recurrent_classes(kern);
    if classes.len() > 1 {
        return Err(PoissonError::MultipleRecurrentClasses {
            classes: classes
                .iter()
                .map(|c| c.iter().map(|&x| mdp.states()[x].clone()).collect())
                .collect(),
        });
    }
    Ok(classes.pop().expect("a finite chain has a closed class"))
}

/// Pointwise residual of `w(x) = c(x,u(x)) − λ + (1/γ) ln Σ_y P^u(x,y) e^{γ w(y)}`.
pub fn mpe_residual(mdp: &Mdp, u: &DecisionRule, gamma: f64, lambda: f64, w: &[f64]) -> f64 {
    (0..mdp.k())
        .map(|x| {
            let a = u.action(x);
            let rhs = mdp.reward(x, a) - lambda + certainty_equivalent(mdp.row(a, x), w, gamma);
            (w[x] - rhs).abs()
        })
        .fold(0.0, f64::max)
}

/// Solves the Poisson equation of rule `u` and anchors `w_u` at `anchor`.
pub fn solve_mpe(
    mdp: &Mdp,
    u: &DecisionRule,
    gamma: f64,
    tol: f64,
    anchor: usize,
) -> Result<MpeSolution, PoissonError> {
    mdp.check_rule(u)?;
    if anchor >= mdp.k() {
        return Err(PoissonError::Anchor(anchor));
    }
    let kern = mdp.policy_kernel(u);
    let class = unique_class(mdp, &kern)?;
    let (lambda, mut w, log_root) = if gamma == 0.0 {
        let (lambda, w) = solve_ape(mdp, u, &kern, &class)?;
        (lambda, w, 0.0)
    } else {
        let a = mpe_matrix(mdp, u, gamma);
        let ptol = (tol * gamma.abs()).min(PERRON_TOL);
        let res = perron(&a.restrict(&class), ptol, PERRON_MAX_ITER)?;
        let lambda = res.log_root / gamma;
        let mut w = vec![f64::NAN; mdp.k()];
        for (i, &x) in class.iter().enumerate() {
            w[x] = res.log_vector[i] / gamma;
        }
        extend_transient(mdp, u, gamma, lambda, &class, &mut w, tol)?;
        (lambda, w, res.log_root)
    };
    let shift = w[anchor];
    w.iter_mut().for_each(|v| *v -= shift);
    let (log_eigenvector, eigenvector) = if gamma == 0.0 {
        (Vec::new(), Vec::new())
    } else {
        let lv: Vec<f64> = w.iter().map(|v| gamma * v).collect();
        let top = lv.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lv: Vec<f64> = lv.iter().map(|v| v - top).collect();
        let ev = lv.iter().map(|v| v.exp()).collect();
        (lv, ev)
    };
    let residual = mpe_residual(mdp, u, gamma, lambda, &w);
    Ok(MpeSolution {
        rule: u.clone(),
        gamma,
        lambda_u: lambda,
        w_u: w,
        anchor,
        log_perron_root: log_root,
        perron_root: log_root.exp(),
        log_eigenvector,
        eigenvector,
        recurrent_class: class,
        residual,
    })
}

/// Fills `w` on transient states by iterating the one-step equation with
/// the recurrent values held fixed.
fn extend_transient(
    mdp: &Mdp,
    u: &DecisionRule,
    gamma: f64,
    lambda: f64,
    class: &[usize],
    w: &mut [f64],
    tol: f64,
) -> Result<(), PoissonError> {
    let transient: Vec<usize> = (0..mdp.k()).filter(|x| !class.contains(x)).collect();
    if transient.is_empty() {
        return Ok(());
    }
    let base = class.iter().map(|&x| w[x]).fold(f64::INFINITY, f64::min);
    for &x in &transient {
        w[x] = base;
    }
    let step_tol = (0.1 * tol).max(4.0 * f64::EPSILON * (1.0 + sup_norm(&mdp.policy_rewards(u))));
    for _ in 0..EXTENSION_MAX_ITER {
        let mut change = 0.0f64;
        for &x in &transient {
            let a = u.action(x);
            let v = mdp.reward(x, a) - lambda + certainty_equivalent(mdp.row(a, x), w, gamma);
            change = change.max((v - w[x]).abs());
            w[x] = v;
        }
        if !change.is_finite() {
            return Err(PoissonError::TransientDominates);
        }
        if change <= step_tol {
            return Ok(());
        }
    }
    Err(PoissonError::TransientDominates)
}

/// Additive equation: stationary law on the recurrent class, then
/// `(I − P) w = c − λ` with one recurrent reference pinned to zero.
fn solve_ape(
    mdp: &Mdp,
    u: &DecisionRule,
    kern: &Kernel,
    class: &[usize],
) -> Result<(f64, Vec<f64>), PoissonError> {
    let k = mdp.k();
    let c = mdp.policy_rewards(u);
    let n = class.len();
    // μ (P_RR − I) = 0 with the last equation replaced by Σ μ = 1
    let mut m = DMatrix::<f64>::zeros(n, n);
    for (i, &x) in class.iter().enumerate() {
        for (j, &y) in class.iter().enumerate() {
            m[(j, i)] = kern.get(x, y) - if i == j { 1.0 } else { 0.0 };
        }
    }
    for i in 0..n {
        m[(n - 1, i)] = 1.0;
    }
    let mut rhs = DVector::<f64>::zeros(n);
    rhs[n - 1] = 1.0;
    let mu = m.lu().solve(&rhs).ok_or(PoissonError::Singular)?;
    let lambda: f64 = class.iter().enumerate().map(|(i, &x)| mu[i] * c[x]).sum();

    let r = class[0];
    let mut m = DMatrix::<f64>::zeros(k, k);
    let mut rhs = DVector::<f64>::zeros(k);
    for x in 0..k {
        if x == r {
            m[(x, x)] = 1.0;
            continue;
        }
        for y in 0..k {
            m[(x, y)] = -kern.get(x, y);
        }
        m[(x, x)] += 1.0;
        rhs[x] = c[x] - lambda;
    }
    let w = m.lu().solve(&rhs).ok_or(PoissonError::Singular)?;
    Ok((lambda, w.iter().copied().collect()))
}

/// `λ(γ) = max_u λ^u(γ)` over all stationary rules with the maximizers.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LambdaArgmax {
    pub gamma: f64,
    pub lambda: f64,
    pub optimal: Vec<DecisionRule>,
    /// `(rule, λ^u)` for every rule in enumeration order.
    pub per_rule: Vec<(DecisionRule, f64)>,
    /// Rules whose Poisson equation could not be solved, with the reason.
    pub failed: Vec<(DecisionRule, String)>,
}

pub fn lambda_argmax(mdp: &Mdp, gamma: f64, tol: f64) -> Result<LambdaArgmax, PoissonError> {
    let rules = mdp
        .enumerate_rules(DEFAULT_ENUMERATION_CAP)
        .map_err(PoissonError::Enumeration)?;
    let mut per_rule = Vec::with_capacity(rules.len());
    let mut failed = Vec::new();
    for u in rules {
        match solve_mpe(mdp, &u, gamma, tol, 0) {
            Ok(s) => per_rule.push((u, s.lambda_u)),
            Err(e) => failed.push((u, e.to_string())),
        }
    }
    let lambda = per_rule
        .iter()
        .map(|(_, l)| *l)
        .fold(f64::NEG_INFINITY, f64::max);
    let optimal = per_rule
        .iter()
        .filter(|(_, l)| *l >= lambda - LAMBDA_TIE_TOL)
        .map(|(u, _)| u.clone())
        .collect();
    Ok(LambdaArgmax {
        gamma,
        lambda,
        optimal,
        per_rule,
        failed,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum InfinitySign {
    Plus,
    Minus,
}

/// `lim_{γ→±∞} λ^u(γ)`: the maximum (resp. minimum) mean node weight of a
/// cycle in the support graph of `P^u` on its recurrent class, with node
/// weights `c(x,u(x))`.
pub fn lambda_at_infinity(
    mdp: &Mdp,
    u: &DecisionRule,
    sign: InfinitySign,
) -> Result<f64, PoissonError> {
    mdp.check_rule(u)?;
    let kern = mdp.policy_kernel(u);
    let class = unique_class(mdp, &kern)?;
    let c = mdp.policy_rewards(u);
    let s = match sign {
        InfinitySign::Plus => 1.0,
        InfinitySign::Minus => -1.0,
    };
    let weights: Vec<f64> = class.iter().map(|&x| s * c[x]).collect();
    let adj: Vec<Vec<usize>> = class
        .iter()
        .map(|&x| {
            class
                .iter()
                .enumerate()
                .filter(|(_, &y)| kern.get(x, y) > 0.0)
                .map(|(j, _)| j)
                .collect()
        })
        .collect();
    Ok(s * max_mean_cycle(&adj, &weights))
}

/// Karp's algorithm for the maximum mean cycle with node weights; edge
/// `i → j` carries weight `weights[i]`. Uses a virtual source so every node
/// starts at zero.
pub fn max_mean_cycle(adj: &[Vec<usize>], weights: &[f64]) -> f64 {
    let n = adj.len();
    let mut d = vec![vec![f64::NEG_INFINITY; n]; n + 1];
    d[0].iter_mut().for_each(|v| *v = 0.0);
    for step in 1..=n {
        for i in 0..n {
            let di = d[step - 1][i];
            if di == f64::NEG_INFINITY {
                continue;
            }
            for &j in &adj[i] {
                let cand = di + weights[i];
                if cand > d[step][j] {
                    d[step][j] = cand;
                }
            }
        }
    }
    let mut best = f64::NEG_INFINITY;
    for v in 0..n {
        if d[n][v] == f64::NEG_INFINITY {
            continue;
        }
        let worst = (0..n)
            .filter(|&s| d[s][v] > f64::NEG_INFINITY)
            .map(|s| (d[n][v] - d[s][v]) / (n - s) as f64)
            .fold(f64::INFINITY, f64::min);
        best = best.max(worst);
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus;

    #[test]
    fn matrix_examples() {
        let m = corpus::example1();
        let a = mpe_matrix(&m, &DecisionRule::constant(0, 3), 1.0);
        for x in 0..3 {
            for (y, p) in [0.1, 0.8, 0.1].iter().enumerate() {
                let want = p * (x as f64 - 1.0).exp();
                assert!((a.get(x, y).exp() - want).abs() < 1e-14);
            }
        }
        let one = mpe_matrix(&corpus::single_state(5.0), &DecisionRule::constant(0, 1), 2.0);
        assert_eq!(one.get(0, 0), 10.0);
    }

    #[test]
    fn perron_on_permutation() {
        let a = LogMatrix::from_linear(2, &[0.0, 1.0, 1.0, 0.0]);
        let r = perron(&a, 1e-13, 1000).unwrap();
        assert!(r.log_root.abs() < 1e-12);
        assert!(r.log_vector.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn perron_on_three_cycle_uses_shift() {
        let a = LogMatrix::from_linear(3, &[0.0, 2.0, 0.0, 0.0, 0.0, 3.0, 0.5, 0.0, 0.0]);
        let r = perron(&a, 1e-13, 100_000).unwrap();
        assert!(r.shifted);
        assert!((r.log_root - 3f64.ln() / 3.0).abs() < 1e-12);
    }

    #[test]
    fn perron_rejects_reducible() {
        let a = LogMatrix::from_linear(2, &[2.0, 0.0, 0.0, 3.0]);
        assert!(matches!(perron(&a, 1e-12, 100), Err(PoissonError::Reducible)));
    }

    #[test]
    fn rank_one_closed_forms() {
        let m = corpus::example2();
        for gamma in [-1.5, -0.3, 0.4, 2.0] {
            let s1 = solve_mpe(&m, &DecisionRule::constant(0, 4), gamma, 1e-10, 0).unwrap();
            let want1 = (0.2 + 0.1 * gamma.exp() + 0.5 * (2.0 * gamma).exp() + 0.2 * (3.0 * gamma).exp()).ln() / gamma;
            assert!((s1.lambda_u - want1).abs() < 1e-11);
            let s2 = solve_mpe(&m, &DecisionRule::constant(1, 4), gamma, 1e-10, 0).unwrap();
            let want2 = (0.1 + 0.5 * gamma.exp() + 0.1 * (2.0 * gamma).exp() + 0.3 * (3.0 * gamma).exp()).ln() / gamma;
            assert!((s2.lambda_u - want2).abs() < 1e-11);
            assert!(s2.residual <= 1e-10);
        }
    }

    #[test]
    fn neutral_branch() {
        let m = corpus::example1();
        let s = solve_mpe(&m, &DecisionRule::constant(1, 3), 0.0, 1e-10, 1).unwrap();
        assert!(s.lambda_u.abs() < 1e-15);
        assert!(s.residual < 1e-12);
        let s = solve_mpe(&corpus::example4(0.0), &corpus::ex4_u(), 0.0, 1e-10, 0).unwrap();
        // half the time in state 1, the rest split evenly between 2 and 3
        assert!((s.lambda_u - 2.0).abs() < 1e-12);
    }

    #[test]
    fn transient_states_are_extended() {
        // state 0 is transient and feeds the two-state recurrent class
        let m = Mdp::new(
            vec!["t".into(), "a".into(), "b".into()],
            vec!["1".into()],
            vec![vec![vec![0.5, 0.25, 0.25], vec![0.0, 0.3, 0.7], vec![0.0, 0.6, 0.4]]],
            vec![vec![2.0, -1.0, 1.0]],
        )
        .unwrap();
        let u = DecisionRule::constant(0, 3);
        for gamma in [-1.0, 0.0, 0.2] {
            let s = solve_mpe(&m, &u, gamma, 1e-10, 1).unwrap();
            assert_eq!(s.recurrent_class, vec![1, 2]);
            assert!(s.residual <= 1e-9, "gamma {gamma}: residual {}", s.residual);
        }
        // a transient self-loop with a large reward outgrows the class
        let m = Mdp::new(
            vec!["t".into(), "a".into()],
            vec!["1".into()],
            vec![vec![vec![0.9, 0.1], vec![0.0, 1.0]]],
            vec![vec![5.0, 0.0]],
        )
        .unwrap();
        let err = solve_mpe(&m, &DecisionRule::constant(0, 2), 2.0, 1e-10, 1).unwrap_err();
        assert!(matches!(err, PoissonError::TransientDominates));
    }

    #[test]
    fn multiple_classes_rejected() {
        let m = Mdp::new(
            vec!["a".into(), "b".into()],
            vec!["1".into()],
            vec![vec![vec![1.0, 0.0], vec![0.0, 1.0]]],
            vec![vec![0.0, 1.0]],
        )
        .unwrap();
        let err = solve_mpe(&m, &DecisionRule::constant(0, 2), 1.0, 1e-10, 0).unwrap_err();
        assert!(err.to_string().contains("2 recurrent classes"));
    }

    #[test]
    fn argmax_examples() {
        let m = corpus::example1();
        let r = lambda_argmax(&m, 1.0, 1e-10).unwrap();
        assert!((r.lambda - (0.3 * (-1f64).exp() + 0.4 + 0.3 * 1f64.exp()).ln()).abs() < 1e-10);
        assert_eq!(r.optimal, vec![DecisionRule::constant(2, 3)]);
        let m3 = corpus::example3();
        let r = lambda_argmax(&m3, 1.0, 1e-10).unwrap();
        assert_eq!(r.optimal, vec![DecisionRule::constant(1, 4)]);
        let r = lambda_argmax(&m3, 0.0, 1e-10).unwrap();
        assert_eq!(r.optimal.len(), 16);
    }

    #[test]
    fn infinity_limits() {
        let one = corpus::single_state(5.0);
        let u = DecisionRule::constant(0, 1);
        assert_eq!(lambda_at_infinity(&one, &u, InfinitySign::Plus).unwrap(), 5.0);
        assert_eq!(lambda_at_infinity(&one, &u, InfinitySign::Minus).unwrap(), 5.0);
        let m = corpus::example1();
        let u = DecisionRule::constant(0, 3);
        assert_eq!(lambda_at_infinity(&m, &u, InfinitySign::Plus).unwrap(), 1.0);
        assert_eq!(lambda_at_infinity(&m, &u, InfinitySign::Minus).unwrap(), -1.0);
        let m4 = corpus::example4(0.0);
        assert_eq!(lambda_at_infinity(&m4, &corpus::ex4_u(), InfinitySign::Plus).unwrap(), 4.0);
        assert_eq!(lambda_at_infinity(&m4, &corpus::ex4_u(), InfinitySign::Minus).unwrap(), 0.0);
    }
}
