//! λ-curves over γ, optimal rule sets per γ, and the decomposition of a γ
//! window into closed optimality intervals per rule class.

use std::collections::HashMap;

use serde::Serialize;
use thiserror::Error;

use crate::mdp::{DecisionRule, Mdp, ModelError, DEFAULT_ENUMERATION_CAP};
use crate::numeric::bisect;
use crate::poisson::{solve_mpe, LAMBDA_TIE_TOL};

pub const DEFAULT_TOL_ROOT: f64 = 1e-10;
pub const BISECTION_BUDGET: usize = 200;
/// Consecutive tied grid points after which two rules are merged.
pub const MERGE_RUN: usize = 3;
/// Number of doublings a window-edge winner must survive to be flagged unbounded.
pub const UNBOUNDED_DOUBLINGS: u32 = 4;
/// Cap on nodes inserted while refining an atlas.
const MAX_INSERTIONS: usize = 10_000;

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("grid must be finite and sorted ascending")]
    Grid,
    #[error("invalid window [{0}, {1}]")]
    Window(f64, f64),
    #[error("grid step must be positive, got {0}")]
    Step(f64),
    #[error("rule enumeration not feasible ({0}); use solve_average and extract_rules instead")]
    Enumeration(ModelError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("no rule could be solved at gamma = {0}")]
    NoSolution(f64),
    #[error("refinement inserted more than {MAX_INSERTIONS} points")]
    Refinement,
}

/// `γ ↦ λ^u(γ)` on a grid. Failed points hold `None`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LambdaCurve {
    pub rule: DecisionRule,
    pub rule_id: usize,
    pub grid: Vec<f64>,
    pub values: Vec<Option<f64>>,
    pub failures: Vec<(f64, String)>,
}

fn lambda(mdp: &Mdp, u: &DecisionRule, gamma: f64, tol: f64) -> Result<f64, String> {
    solve_mpe(mdp, u, gamma, tol, 0)
        .map(|s| s.lambda_u)
        .map_err(|e| e.to_string())
}

/// One curve per rule; a failed solve marks its point and the sweep goes on.
pub fn sweep(
    mdp: &Mdp,
    rules: &[DecisionRule],
    grid: &[f64],
    tol: f64,
) -> Result<Vec<LambdaCurve>, SweepError> {
    if grid.iter().any(|g| !g.is_finite()) || grid.windows(2).any(|w| w[0] > w[1]) {
        return Err(SweepError::Grid);
    }
    rules
        .iter()
        .map(|u| {
            mdp.check_rule(u)?;
            let mut values = Vec::with_capacity(grid.len());
            let mut failures = Vec::new();
            for &g in grid {
                match lambda(mdp, u, g, tol) {
                    Ok(v) => values.push(Some(v)),
                    Err(e) => {
                        values.push(None);
                        failures.push((g, e));
                    }
                }
            }
            Ok(LambdaCurve {
                rule: u.clone(),
                rule_id: u.index(mdp.l()),
                grid: grid.to_vec(),
                values,
                failures,
            })
        })
        .collect()
}

/// Multiples of `h` inside `[lo, hi]` plus both ends.
pub fn window_grid(lo: f64, hi: f64, h: f64) -> Vec<f64> {
    let mut g = vec![lo];
    let first = (lo / h).ceil() as i64;
    let last = (hi / h).floor() as i64;
    let eps = h * 1e-6;
    for i in first..=last {
        let v = i as f64 * h;
        if v - lo > eps && hi - v > eps {
            g.push(v);
        }
    }
    if hi > lo {
        g.push(hi);
    }
    g
}

/// Rules that behave identically on the grid, with one representative.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RuleClass {
    pub id: usize,
    pub representative: DecisionRule,
    pub representative_id: usize,
    pub member_ids: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Merge {
    pub kept_rule_id: usize,
    pub merged_rule_id: usize,
    /// Longest run of consecutive grid points where the two curves tied.
    pub tied_points: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EndpointKind {
    /// A tie verified at an evaluated point.
    Exact,
    /// A root of the gap function bracketed to `tol_root`.
    Refined,
    /// Clipped by the window.
    Window,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Endpoint {
    pub gamma: f64,
    pub kind: EndpointKind,
    /// For window endpoints: the class stayed optimal over the doubling probe.
    pub unbounded: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Interval {
    pub lo: Endpoint,
    pub hi: Endpoint,
    pub isolated: bool,
}

impl Interval {
    pub fn contains(&self, gamma: f64) -> bool {
        self.lo.gamma <= gamma && gamma <= self.hi.gamma
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassIntervals {
    pub class: usize,
    pub intervals: Vec<Interval>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundaryPoint {
    pub gamma: f64,
    pub kind: EndpointKind,
    pub classes: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GammaAtlas {
    pub window: (f64, f64),
    pub step: f64,
    pub tol_root: f64,
    pub grid: Vec<f64>,
    pub classes: Vec<RuleClass>,
    pub merges: Vec<Merge>,
    /// Optimal class ids at each grid point.
    pub optimal: Vec<Vec<usize>>,
    pub regions: Vec<ClassIntervals>,
    pub boundaries: Vec<BoundaryPoint>,
    pub curves: Vec<LambdaCurve>,
}

impl GammaAtlas {
    pub fn class_of_rule(&self, rule_id: usize) -> Option<usize> {
        self.classes
            .iter()
            .find(|c| c.member_ids.contains(&rule_id))
            .map(|c| c.id)
    }

    pub fn intervals_of(&self, class: usize) -> &[Interval] {
        &self.regions[class].intervals
    }

    /// Whether every point of the window lies in some class interval.
    pub fn covers_window(&self) -> bool {
        let mut all: Vec<(f64, f64)> = self
            .regions
            .iter()
            .flat_map(|r| r.intervals.iter().map(|i| (i.lo.gamma, i.hi.gamma)))
            .collect();
        all.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut reach = self.window.0;
        if all.first().is_none_or(|i| i.0 > reach) {
            return false;
        }
        for (lo, hi) in all {
            if lo > reach {
                return false;
            }
            reach = reach.max(hi);
        }
        reach >= self.window.1
    }
}

struct DisjointSets(Vec<usize>);

impl DisjointSets {
    fn find(&mut self, i: usize) -> usize {
        let p = self.0[i];
        if p == i {
            return i;
        }
        let r = self.find(p);
        self.0[i] = r;
        r
    }

    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        let (lo, hi) = (ra.min(rb), ra.max(rb));
        self.0[hi] = lo;
        true
    }
}

fn longest_tie_run(a: &LambdaCurve, b: &LambdaCurve) -> usize {
    let mut best = 0;
    let mut run = 0;
    for (x, y) in a.values.iter().zip(&b.values) {
        match (x, y) {
            (Some(x), Some(y)) if (x - y).abs() <= LAMBDA_TIE_TOL => {
                run += 1;
                best = best.max(run);
            }
            _ => run = 0,
        }
    }
    best
}

/// Groups curves whose values tie on at least [`MERGE_RUN`] consecutive grid
/// points (the grid must have at least that many points for any merge).
fn classify(curves: &[LambdaCurve]) -> (Vec<RuleClass>, Vec<Merge>) {
    let n = curves.len();
    let mut ds = DisjointSets((0..n).collect());
    let mut merges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let run = longest_tie_run(&curves[i], &curves[j]);
            if run >= MERGE_RUN && ds.union(i, j) {
                merges.push(Merge {
                    kept_rule_id: curves[ds.find(i)].rule_id,
                    merged_rule_id: curves[j].rule_id,
                    tied_points: run,
                });
            }
        }
    }
    let mut by_root: Vec<(usize, Vec<usize>)> = Vec::new();
    for i in 0..n {
        let r = ds.find(i);
        match by_root.iter_mut().find(|(root, _)| *root == r) {
            Some((_, m)) => m.push(i),
            None => by_root.push((r, vec![i])),
        }
    }
    let classes = by_root
        .into_iter()
        .enumerate()
        .map(|(id, (root, members))| RuleClass {
            id,
            representative: curves[root].rule.clone(),
            representative_id: curves[root].rule_id,
            member_ids: members.iter().map(|&m| curves[m].rule_id).collect(),
        })
        .collect();
    (classes, merges)
}

/// Class values at arbitrary γ, cached by bit pattern.
struct Evaluator<'a> {
    mdp: &'a Mdp,
    reps: Vec<DecisionRule>,
    tol: f64,
    cache: HashMap<u64, Vec<f64>>,
}

impl<'a> Evaluator<'a> {
    fn values(&mut self, gamma: f64) -> &[f64] {
        let key = gamma.to_bits();
        if !self.cache.contains_key(&key) {
            let v = self
                .reps
                .iter()
                .map(|u| lambda(self.mdp, u, gamma, self.tol).unwrap_or(f64::NEG_INFINITY))
                .collect();
            self.cache.insert(key, v);
        }
        &self.cache[&key]
    }

    fn winners(&mut self, gamma: f64) -> Vec<usize> {
        winners_of(self.values(gamma))
    }

    fn gap(&mut self, c: usize, d: usize, gamma: f64) -> f64 {
        let v = self.values(gamma);
        v[c] - v[d]
    }
}

fn winners_of(values: &[f64]) -> Vec<usize> {
    let best = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if best == f64::NEG_INFINITY {
        return Vec::new();
    }
    (0..values.len())
        .filter(|&c| values[c] >= best - LAMBDA_TIE_TOL)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum NodeKind {
    Grid,
    Refined,
    Probe,
}

#[derive(Debug, Clone)]
struct Node {
    gamma: f64,
    winners: Vec<usize>,
    kind: NodeKind,
}

fn diff(a: &[usize], b: &[usize]) -> Vec<usize> {
    a.iter().copied().filter(|c| !b.contains(c)).collect()
}

/// New node between `left` and `right`, or `None` when the pair needs no
/// refinement. A boundary is only bracketed when each side has a winner the
/// other side lacks; otherwise the surviving winners were already tied at
/// the point where the others drop out.
fn refine_pair(ev: &mut Evaluator, left: &Node, right: &Node, tol_root: f64) -> Option<Node> {
    let only_left = diff(&left.winners, &right.winners);
    let only_right = diff(&right.winners, &left.winners);
    if only_left.is_empty() || only_right.is_empty() || right.gamma - left.gamma <= tol_root {
        return None;
    }
    let (ca, cb) = (only_left[0], only_right[0]);
    let root = bisect(
        |g| ev.gap(cb, ca, g),
        left.gamma,
        right.gamma,
        tol_root,
        BISECTION_BUDGET,
    );
    let mut w = ev.winners(root);
    if w.contains(&ca) || w.contains(&cb) {
        // the bracketing pair is tied at the root up to slope·tol_root
        for c in [ca, cb] {
            if !w.contains(&c) {
                w.push(c);
            }
        }
        w.sort_unstable();
        Some(Node {
            gamma: root,
            winners: w,
            kind: NodeKind::Refined,
        })
    } else {
        Some(Node {
            gamma: root,
            winners: w,
            kind: NodeKind::Probe,
        })
    }
}

/// Decomposes `[lo, hi]` into closed optimality intervals per rule class.
///
/// Classes are evaluated at multiples of `h` (plus the window ends). Where
/// the winners change between neighbouring points, the gap
/// `λ^c(γ) − λ^d(γ)` is bisected to `tol_root`; a root at which a third
/// class wins becomes an extra evaluation point. A class optimal at a single
/// grid point is probed at `±h/10` before it is declared isolated.
pub fn regions(
    mdp: &Mdp,
    window: (f64, f64),
    h: f64,
    tol_root: f64,
) -> Result<GammaAtlas, SweepError> {
    let (lo, hi) = window;
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(SweepError::Window(lo, hi));
    }
    if !(h > 0.0) {
        return Err(SweepError::Step(h));
    }
    let rules = mdp
        .enumerate_rules(DEFAULT_ENUMERATION_CAP)
        .map_err(SweepError::Enumeration)?;
    let grid = window_grid(lo, hi, h);
    let solve_tol = 1e-12;
    let curves = sweep(mdp, &rules, &grid, solve_tol)?;
    let (classes, merges) = classify(&curves);

    let mut ev = Evaluator {
        mdp,
        reps: classes.iter().map(|c| c.representative.clone()).collect(),
        tol: solve_tol,
        cache: HashMap::new(),
    };
    // seed the cache from the curves
    for (i, &g) in grid.iter().enumerate() {
        let v = classes
            .iter()
            .map(|c| {
                let idx = rules.iter().position(|r| *r == c.representative).unwrap();
                curves[idx].values[i].unwrap_or(f64::NEG_INFINITY)
            })
            .collect();
        ev.cache.insert(g.to_bits(), v);
    }

    let mut nodes: Vec<Node> = Vec::with_capacity(grid.len());
    for &g in &grid {
        let w = ev.winners(g);
        if w.is_empty() {
            return Err(SweepError::NoSolution(g));
        }
        nodes.push(Node {
            gamma: g,
            winners: w,
            kind: NodeKind::Grid,
        });
    }
    let optimal: Vec<Vec<usize>> = nodes.iter().map(|n| n.winners.clone()).collect();

    let mut inserted = 0;
    let mut probed: Vec<(usize, u64)> = Vec::new();
    let mut isolated: Vec<(usize, u64)> = Vec::new();
    loop {
        let mut changed = false;
        let mut i = 0;
        while i + 1 < nodes.len() {
            if let Some(n) = refine_pair(&mut ev, &nodes[i], &nodes[i + 1], tol_root) {
                nodes.insert(i + 1, n);
                inserted += 1;
                changed = true;
                if inserted > MAX_INSERTIONS {
                    return Err(SweepError::Refinement);
                }
                continue;
            }
            i += 1;
        }
        // single-point memberships at interior grid nodes
        for idx in 1..nodes.len().saturating_sub(1) {
            if nodes[idx].kind != NodeKind::Grid {
                continue;
            }
            let g = nodes[idx].gamma;
            let lone: Vec<usize> = nodes[idx]
                .winners
                .iter()
                .copied()
                .filter(|c| {
                    !nodes[idx - 1].winners.contains(c) && !nodes[idx + 1].winners.contains(c)
                })
                .collect();
            for c in lone {
                if probed.contains(&(c, g.to_bits())) {
                    continue;
                }
                probed.push((c, g.to_bits()));
                let mut extended = false;
                for p in [g - h / 10.0, g + h / 10.0] {
                    if p <= nodes[idx - 1].gamma || p >= nodes[idx + 1].gamma {
                        continue;
                    }
                    let w = ev.winners(p);
                    if w.contains(&c) {
                        extended = true;
                        let pos = nodes.partition_point(|n| n.gamma < p);
                        nodes.insert(
                            pos,
                            Node {
                                gamma: p,
                                winners: w,
                                kind: NodeKind::Probe,
                            },
                        );
                        inserted += 1;
                    }
                }
                if extended {
                    changed = true;
                    break;
                }
                isolated.push((c, g.to_bits()));
            }
            if changed {
                break;
            }
        }
        if !changed {
            break;
        }
    }

    let last = nodes.len() - 1;
    let unbounded = |ev: &mut Evaluator, c: usize, edge: f64, dir: f64| -> bool {
        let width = hi - lo;
        (1..=UNBOUNDED_DOUBLINGS).all(|j| {
            let p = edge + dir * width * (2f64.powi(j as i32) - 1.0);
            ev.winners(p).contains(&c)
        })
    };
    let endpoint = |ev: &mut Evaluator, c: usize, idx: usize| -> Endpoint {
        let n = &nodes[idx];
        if idx == 0 || idx == last {
            let dir = if idx == 0 { -1.0 } else { 1.0 };
            Endpoint {
                gamma: n.gamma,
                kind: EndpointKind::Window,
                unbounded: unbounded(ev, c, n.gamma, dir),
            }
        } else {
            Endpoint {
                gamma: n.gamma,
                kind: match n.kind {
                    NodeKind::Refined => EndpointKind::Refined,
                    _ => EndpointKind::Exact,
                },
                unbounded: false,
            }
        }
    };

    let mut regions_out = Vec::with_capacity(classes.len());
    let mut boundary_idx: Vec<usize> = Vec::new();
    for c in 0..classes.len() {
        let mut intervals = Vec::new();
        let mut idx = 0;
        while idx <= last {
            if !nodes[idx].winners.contains(&c) {
                idx += 1;
                continue;
            }
            let start = idx;
            while idx < last && nodes[idx + 1].winners.contains(&c) {
                idx += 1;
            }
            let end = idx;
            for b in [start, end] {
                if b != 0 && b != last && !boundary_idx.contains(&b) {
                    boundary_idx.push(b);
                }
            }
            let lo_ep = endpoint(&mut ev, c, start);
            let hi_ep = endpoint(&mut ev, c, end);
            let single = start == end && start != 0 && start != last;
            intervals.push(Interval {
                lo: lo_ep,
                hi: hi_ep,
                isolated: single && isolated.contains(&(c, nodes[start].gamma.to_bits())),
            });
            idx += 1;
        }
        regions_out.push(ClassIntervals {
            class: c,
            intervals,
        });
    }
    boundary_idx.sort_unstable();
    let boundaries = boundary_idx
        .into_iter()
        .map(|b| BoundaryPoint {
            gamma: nodes[b].gamma,
            kind: if nodes[b].kind == NodeKind::Refined {
                EndpointKind::Refined
            } else {
                EndpointKind::Exact
            },
            classes: nodes[b].winners.clone(),
        })
        .collect();

    Ok(GammaAtlas {
        window,
        step: h,
        tol_root,
        grid,
        classes,
        merges,
        optimal,
        regions: regions_out,
        boundaries,
        curves,
    })
}

/// Optimal classes around the risk-neutral point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NeutralReport {
    /// Class ids (from a sweep on `[-1, 1]`) optimal at `γ = 0`.
    pub zero_optimal: Vec<usize>,
    pub classes: Vec<RuleClass>,
    pub singleton: bool,
    /// Largest probed `ε` with the class optimal at `±ε` (singleton case).
    pub epsilon: Option<f64>,
    /// The search reached its limit without leaving the class.
    pub at_limit: bool,
    /// `γ` at which one-sided optimality is read off.
    pub probe: f64,
    pub left_optimal: Vec<usize>,
    pub right_optimal: Vec<usize>,
}

/// Largest doubling step explored by [`neutral_neighborhood`].
pub const NEUTRAL_SEARCH_LIMIT: f64 = 64.0;
const NEUTRAL_PROBE: f64 = 1e-2;

pub fn neutral_neighborhood(mdp: &Mdp, tol: f64) -> Result<NeutralReport, SweepError> {
    let rules = mdp
        .enumerate_rules(DEFAULT_ENUMERATION_CAP)
        .map_err(SweepError::Enumeration)?;
    let grid = window_grid(-1.0, 1.0, 0.1);
    let curves = sweep(mdp, &rules, &grid, 1e-12)?;
    let (classes, _) = classify(&curves);
    let mut ev = Evaluator {
        mdp,
        reps: classes.iter().map(|c| c.representative.clone()).collect(),
        tol: 1e-12,
        cache: HashMap::new(),
    };
    let zero = ev.winners(0.0);
    if zero.is_empty() {
        return Err(SweepError::NoSolution(0.0));
    }
    let left = diff_keep(&ev.winners(-NEUTRAL_PROBE), &zero);
    let right = diff_keep(&ev.winners(NEUTRAL_PROBE), &zero);
    let singleton = zero.len() == 1;
    let (epsilon, at_limit) = if singleton {
        let c = zero[0];
        let ok = |ev: &mut Evaluator, e: f64| {
            ev.winners(-e).contains(&c) && ev.winners(e).contains(&c)
        };
        let mut good = 0.0;
        let mut e = 1e-3;
        let bad = loop {
            if !ok(&mut ev, e) {
                break Some(e);
            }
            good = e;
            if e >= NEUTRAL_SEARCH_LIMIT {
                break None;
            }
            e = (2.0 * e).min(NEUTRAL_SEARCH_LIMIT);
        };
        match bad {
            None => (Some(good), true),
            Some(mut b) => {
                let mut g = good;
                while b - g > tol.max(1e-12) {
                    let mid = 0.5 * (g + b);
                    if ok(&mut ev, mid) {
                        g = mid;
                    } else {
                        b = mid;
                    }
                }
                (Some(g), false)
            }
        }
    } else {
        (None, false)
    };
    Ok(NeutralReport {
        zero_optimal: zero,
        classes,
        singleton,
        epsilon,
        at_limit,
        probe: NEUTRAL_PROBE,
        left_optimal: left,
        right_optimal: right,
    })
}

fn diff_keep(a: &[usize], keep: &[usize]) -> Vec<usize> {
    a.iter().copied().filter(|c| keep.contains(c)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus;

    #[test]
    fn grid_contains_zero_and_ends() {
        let g = window_grid(-3.0, 3.0, 0.05);
        assert_eq!(g.first(), Some(&-3.0));
        assert_eq!(g.last(), Some(&3.0));
        assert!(g.contains(&0.0));
        assert_eq!(g.len(), 121);
        let g = window_grid(-0.33, 0.5, 0.1);
        assert_eq!(g[0], -0.33);
        assert!((g[1] + 0.3).abs() < 1e-15);
    }

    #[test]
    fn single_point_sweep_is_neutral_value() {
        let m = corpus::example2();
        let c = sweep(&m, &[DecisionRule::constant(0, 4)], &[0.0], 1e-12).unwrap();
        assert!((c[0].values[0].unwrap() - 1.7).abs() < 1e-12);
        assert!(sweep(&m, &[DecisionRule::constant(0, 4)], &[1.0, 0.0], 1e-12).is_err());
    }

    #[test]
    fn example1_curves_ordered() {
        let m = corpus::example1();
        let rules: Vec<_> = (0..3).map(|a| DecisionRule::constant(a, 3)).collect();
        let c = sweep(&m, &rules, &[-1.0, 0.0, 1.0], 1e-12).unwrap();
        for (i, g) in [-1.0, 1.0].iter().enumerate() {
            let j = if i == 0 { 0 } else { 2 };
            let v: Vec<f64> = c.iter().map(|cv| g * cv.values[j].unwrap()).collect();
            assert!(v[0] < v[1] && v[1] < v[2]);
        }
        assert!(c.iter().all(|cv| cv.values[1].unwrap().abs() < 1e-12));
    }

    #[test]
    fn example4_merges_irrelevant_actions() {
        let atlas = regions(&corpus::example4(0.05), (-1.0, 1.0), 0.25, 1e-10).unwrap();
        assert_eq!(atlas.classes.len(), 2);
        assert_eq!(atlas.merges.len(), 6);
        assert!(atlas.covers_window());
    }

    #[test]
    fn single_state_neighborhood() {
        let r = neutral_neighborhood(&corpus::single_state(5.0), 1e-6).unwrap();
        assert!(r.singleton && r.at_limit);
        assert_eq!(r.epsilon, Some(NEUTRAL_SEARCH_LIMIT));
    }
}
