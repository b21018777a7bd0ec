//! Entropic utility on finite distributions, its Gibbs dual, and Monte Carlo
//! estimators of the averaged and discounted criteria.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::mdp::{MarkovPolicy, Mdp, PathSampler, RNG_ALGORITHM};
use crate::numeric::logsumexp;

/// Bootstrap resamples used for Monte Carlo standard errors.
pub const BOOTSTRAP_RESAMPLES: usize = 200;

/// Fraction of `m` below which the exponential-weight effective sample size
/// triggers a warning.
pub const ESS_WARNING_FRACTION: f64 = 0.01;

/// Stream id reserved for bootstrap resampling.
const BOOTSTRAP_STREAM: u64 = u64::MAX;

#[derive(Debug, Error)]
pub enum EntropicError {
    #[error("outcomes and probabilities differ in length ({0} vs {1})")]
    Length(usize, usize),
    #[error("distribution has no outcomes")]
    Empty,
    #[error("probability {0} at index {1} is negative or not finite")]
    BadProbability(f64, usize),
    #[error("probabilities sum to {0}, not 1")]
    Sum(f64),
    #[error("outcome at index {0} is not finite")]
    NonFiniteOutcome(usize),
    #[error("the dual representation needs gamma != 0")]
    ZeroGamma,
    #[error("Taylor check needs |gamma| <= 0.1, got {0}")]
    GammaTooLarge(f64),
    #[error("{0} must be at least 1")]
    ZeroCount(&'static str),
    #[error("discount factor must lie in (0,1), got {0}")]
    Beta(f64),
    #[error("start state {0} out of range")]
    State(usize),
}

/// Law of a real random variable with finitely many outcomes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FiniteDistribution {
    outcomes: Vec<f64>,
    probs: Vec<f64>,
}

impl FiniteDistribution {
    pub fn new(outcomes: Vec<f64>, probs: Vec<f64>) -> Result<Self, EntropicError> {
        if outcomes.len() != probs.len() {
            return Err(EntropicError::Length(outcomes.len(), probs.len()));
        }
        if outcomes.is_empty() {
            return Err(EntropicError::Empty);
        }
        for (i, &p) in probs.iter().enumerate() {
            if !(p >= 0.0 && p.is_finite()) {
                return Err(EntropicError::BadProbability(p, i));
            }
        }
        if let Some(i) = outcomes.iter().position(|z| !z.is_finite()) {
            return Err(EntropicError::NonFiniteOutcome(i));
        }
        let s: f64 = probs.iter().sum();
        if (s - 1.0).abs() > 1e-12 {
            return Err(EntropicError::Sum(s));
        }
        Ok(Self { outcomes, probs })
    }

    pub fn point(z: f64) -> Self {
        Self {
            outcomes: vec![z],
            probs: vec![1.0],
        }
    }

    pub fn outcomes(&self) -> &[f64] {
        &self.outcomes
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn mean(&self) -> f64 {
        self.outcomes.iter().zip(&self.probs).map(|(z, p)| z * p).sum()
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.outcomes
            .iter()
            .zip(&self.probs)
            .map(|(z, p)| p * (z - m) * (z - m))
            .sum()
    }

    /// `max − min` over outcomes with positive probability.
    pub fn range(&self) -> f64 {
        let (lo, hi) = self
            .support()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), z| {
                (lo.min(z), hi.max(z))
            });
        hi - lo
    }

    fn support(&self) -> impl Iterator<Item = f64> + Clone + '_ {
        self.outcomes
            .iter()
            .zip(&self.probs)
            .filter(|(_, p)| **p > 0.0)
            .map(|(z, _)| *z)
    }

    /// Shifts every outcome by `a`.
    pub fn translate(&self, a: f64) -> Self {
        Self {
            outcomes: self.outcomes.iter().map(|z| z + a).collect(),
            probs: self.probs.clone(),
        }
    }

    /// Law of `X + Y` for independent `X ~ self`, `Y ~ other`.
    pub fn convolve(&self, other: &Self) -> Self {
        let mut outcomes = Vec::with_capacity(self.outcomes.len() * other.outcomes.len());
        let mut probs = Vec::with_capacity(outcomes.capacity());
        for (z1, p1) in self.outcomes.iter().zip(&self.probs) {
            for (z2, p2) in other.outcomes.iter().zip(&other.probs) {
                outcomes.push(z1 + z2);
                probs.push(p1 * p2);
            }
        }
        Self { outcomes, probs }
    }

    /// `ln E[e^{γZ}]`, skipping zero-probability outcomes.
    fn log_mgf(&self, gamma: f64) -> f64 {
        crate::numeric::log_expect_exp(
            &self.probs,
            &self.outcomes.iter().map(|z| gamma * z).collect::<Vec<_>>(),
        )
    }
}

/// `(1/γ) ln E[e^{γZ}]`, or `E[Z]` at `γ = 0`.
pub fn entropic_utility(d: &FiniteDistribution, gamma: f64) -> f64 {
    if gamma == 0.0 {
        return d.mean();
    }
    d.log_mgf(gamma) / gamma
}

/// Gibbs tilt `q ∝ p·e^{γz}` and the dual objective evaluated at it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GibbsTilt {
    pub q: FiniteDistribution,
    pub dual_value: f64,
    pub gap: f64,
}

/// Kullback-Leibler divergence `H[q‖p]` with `0·ln 0 = 0`.
pub fn relative_entropy(q: &FiniteDistribution, p: &FiniteDistribution) -> f64 {
    q.probs
        .iter()
        .zip(&p.probs)
        .filter(|(qi, _)| **qi > 0.0)
        .map(|(qi, pi)| {
            if *pi == 0.0 {
                f64::INFINITY
            } else {
                qi * (qi.ln() - pi.ln())
            }
        })
        .sum()
}

/// Dual objective `E_q[Z] − (1/γ) H[q‖p]`.
pub fn dual_objective(p: &FiniteDistribution, q: &FiniteDistribution, gamma: f64) -> f64 {
    let eq: f64 = q.outcomes.iter().zip(&q.probs).map(|(z, w)| z * w).sum();
    eq - relative_entropy(q, p) / gamma
}

/// Measure `q_t ∝ p·e^{tz}`.
pub fn tilted(d: &FiniteDistribution, t: f64) -> FiniteDistribution {
    let norm = d.log_mgf(t);
    let probs = d
        .probs
        .iter()
        .zip(&d.outcomes)
        .map(|(p, z)| if *p > 0.0 { p * (t * z - norm).exp() } else { 0.0 })
        .collect();
    FiniteDistribution {
        outcomes: d.outcomes.clone(),
        probs,
    }
}

pub fn gibbs_tilt(d: &FiniteDistribution, gamma: f64) -> Result<GibbsTilt, EntropicError> {
    if gamma == 0.0 {
        return Err(EntropicError::ZeroGamma);
    }
    let q = tilted(d, gamma);
    let dual_value = dual_objective(d, &q, gamma);
    let gap = (dual_value - entropic_utility(d, gamma)).abs();
    Ok(GibbsTilt { q, dual_value, gap })
}

/// Extremum of the dual objective over tilts `q_t`, `t` on an evenly spaced
/// grid of `points` values in `[γ − |γ|, γ + |γ|]`: the minimum for `γ < 0`
/// and the maximum for `γ > 0`. Returns `(extremum, argmin t)`.
pub fn dual_grid_extremum(d: &FiniteDistribution, gamma: f64, points: usize) -> (f64, f64) {
    assert!(gamma != 0.0 && points >= 2);
    let lo = gamma - gamma.abs();
    let step = 2.0 * gamma.abs() / (points - 1) as f64;
    let sign = if gamma < 0.0 { 1.0 } else { -1.0 };
    (0..points)
        .map(|i| {
            let t = lo + step * i as f64;
            (dual_objective(d, &tilted(d, t), gamma), t)
        })
        .min_by(|a, b| (sign * a.0).total_cmp(&(sign * b.0)))
        .expect("grid is nonempty")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TaylorCheck {
    pub residual: f64,
    /// `C·γ²` with `C = (range³/6)·e^{|γ|·range}`.
    pub bound: f64,
    /// Floating-point allowance of the evaluated residual.
    pub rounding: f64,
}

impl TaylorCheck {
    pub fn holds(&self) -> bool {
        self.residual <= self.bound + self.rounding
    }
}

/// Distance between the utility and its second-order expansion
/// `E[Z] + γ·Var(Z)/2`.
pub fn taylor_check(d: &FiniteDistribution, gamma: f64) -> Result<TaylorCheck, EntropicError> {
    if gamma.abs() > 0.1 {
        return Err(EntropicError::GammaTooLarge(gamma));
    }
    let approx = d.mean() + 0.5 * gamma * d.variance();
    let residual = (entropic_utility(d, gamma) - approx).abs();
    let r = d.range();
    let c = r.powi(3) / 6.0 * (gamma.abs() * r).exp();
    let zmax = d.outcomes.iter().fold(0.0f64, |m, z| m.max(z.abs()));
    let n = d.outcomes.len() as f64;
    let rounding = if gamma == 0.0 {
        0.0
    } else {
        16.0 * f64::EPSILON * (zmax + (1.0 + n.ln()) / gamma.abs())
    };
    Ok(TaylorCheck {
        residual,
        bound: c * gamma * gamma,
        rounding,
    })
}

/// Monte Carlo estimate with its diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McEstimate {
    pub estimate: f64,
    /// Bootstrap standard error.
    pub se: f64,
    /// Bound on the truncation bias (zero for the averaged criterion).
    pub bias_bound: f64,
    pub seed: u64,
    pub rng: &'static str,
    pub paths: usize,
    pub horizon: usize,
    /// `exp(2·LSE(γS) − LSE(2γS))`.
    pub effective_sample_size: f64,
    pub ess_warning: bool,
}

/// Per-path weighted reward sums. Path `j` draws from stream `j` of `seed`.
fn sample_sums(
    mdp: &Mdp,
    pi: &MarkovPolicy,
    x0: usize,
    weights: &[f64],
    m: usize,
    seed: u64,
) -> Vec<f64> {
    let sampler = PathSampler::new(mdp);
    (0..m)
        .map(|j| {
            let mut rng = sampler.rng(seed, j as u64);
            let mut x = x0;
            let mut s = 0.0;
            for (t, w) in weights.iter().enumerate() {
                let a = pi.rule_at(t).action(x);
                s += w * mdp.reward(x, a);
                x = sampler.step(&mut rng, a, x);
            }
            s
        })
        .collect()
}

/// Plug-in entropic value of equally weighted samples.
fn plug_in(sums: &[f64], gamma: f64) -> f64 {
    let m = sums.len() as f64;
    if gamma == 0.0 {
        return sums.iter().sum::<f64>() / m;
    }
    let z: Vec<f64> = sums.iter().map(|s| gamma * s).collect();
    (logsumexp(&z) - m.ln()) / gamma
}

fn estimate_from_sums(sums: &[f64], gamma: f64, scale: f64, seed: u64) -> (f64, f64, f64) {
    let m = sums.len();
    let est = plug_in(sums, gamma) * scale;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(BOOTSTRAP_STREAM);
    let mut buf = vec![0.0; m];
    let boots: Vec<f64> = (0..BOOTSTRAP_RESAMPLES)
        .map(|_| {
            for b in buf.iter_mut() {
                *b = sums[rng.gen_range(0..m)];
            }
            plug_in(&buf, gamma) * scale
        })
        .collect();
    let mean = boots.iter().sum::<f64>() / boots.len() as f64;
    let var = boots.iter().map(|b| (b - mean).powi(2)).sum::<f64>() / (boots.len() - 1) as f64;

    let ess = if gamma == 0.0 {
        m as f64
    } else {
        let z: Vec<f64> = sums.iter().map(|s| gamma * s).collect();
        let z2: Vec<f64> = z.iter().map(|v| 2.0 * v).collect();
        (2.0 * logsumexp(&z) - logsumexp(&z2)).exp()
    };
    (est, var.sqrt(), ess)
}

/// Estimate of `(1/n)·Ent_γ(Σ_{t<n} c(X_t, a_t))` from `m` sampled paths.
#[allow(clippy::too_many_arguments)]
pub fn mc_average_criterion(
    mdp: &Mdp,
    pi: &MarkovPolicy,
    gamma: f64,
    x0: usize,
    n: usize,
    m: usize,
    seed: u64,
) -> Result<McEstimate, EntropicError> {
    if n == 0 {
        return Err(EntropicError::ZeroCount("horizon"));
    }
    if m == 0 {
        return Err(EntropicError::ZeroCount("path count"));
    }
    if x0 >= mdp.k() {
        return Err(EntropicError::State(x0));
    }
    let sums = sample_sums(mdp, pi, x0, &vec![1.0; n], m, seed);
    let (estimate, se, ess) = estimate_from_sums(&sums, gamma, 1.0 / n as f64, seed);
    Ok(finish(estimate, se, 0.0, seed, m, n, ess))
}

/// Smallest `H` with `β^H·‖c‖/(1−β) ≤ tol`.
pub fn truncation_horizon(beta: f64, c_norm: f64, tol: f64) -> usize {
    if c_norm == 0.0 {
        return 1;
    }
    let mut h = 0usize;
    let mut w = c_norm / (1.0 - beta);
    while w > tol {
        w *= beta;
        h += 1;
    }
    h.max(1)
}

/// Estimate of `Ent_γ(Σ_{t<H} β^t c(X_t, a_t))` with `H` chosen so the
/// truncated tail is at most `truncation_tol` in sup norm.
#[allow(clippy::too_many_arguments)]
pub fn mc_discounted_criterion(
    mdp: &Mdp,
    pi: &MarkovPolicy,
    gamma: f64,
    beta: f64,
    x0: usize,
    truncation_tol: f64,
    m: usize,
    seed: u64,
) -> Result<McEstimate, EntropicError> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(EntropicError::Beta(beta));
    }
    if m == 0 {
        return Err(EntropicError::ZeroCount("path count"));
    }
    if x0 >= mdp.k() {
        return Err(EntropicError::State(x0));
    }
    let norm = mdp.reward_norm();
    let h = truncation_horizon(beta, norm, truncation_tol);
    let weights: Vec<f64> = (0..h).map(|t| beta.powi(t as i32)).collect();
    let sums = sample_sums(mdp, pi, x0, &weights, m, seed);
    let (estimate, se, ess) = estimate_from_sums(&sums, gamma, 1.0, seed);
    let bias = beta.powi(h as i32) * norm / (1.0 - beta);
    Ok(finish(estimate, se, bias, seed, m, h, ess))
}

fn finish(
    estimate: f64,
    se: f64,
    bias_bound: f64,
    seed: u64,
    m: usize,
    horizon: usize,
    ess: f64,
) -> McEstimate {
    let ess_warning = ess < ESS_WARNING_FRACTION * m as f64;
    if ess_warning {
        log::warn!(
            "effective sample size {ess:.1} is below {:.0}% of {m} paths; the estimate is unreliable",
            ESS_WARNING_FRACTION * 100.0
        );
    }
    McEstimate {
        estimate,
        se,
        bias_bound,
        seed,
        rng: RNG_ALGORITHM,
        paths: m,
        horizon,
        effective_sample_size: ess,
        ess_warning,
    }
}
