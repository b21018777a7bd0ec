//! Small numerical helpers shared by the solvers.

/// `ln Σ exp(x_i)` with the usual max shift. Returns `-inf` for an empty
/// slice or when every term is `-inf`.
pub fn logsumexp(xs: &[f64]) -> f64 {
    logsumexp_iter(xs.iter().copied())
}

/// Iterator form of [`logsumexp`]; the iterator is consumed twice, so it
/// must be cloneable.
pub fn logsumexp_iter<I>(xs: I) -> f64
where
    I: Iterator<Item = f64> + Clone,
{
    let m = xs.clone().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if m == f64::INFINITY {
        return f64::INFINITY;
    }
    m + xs.map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// `ln Σ_y P(x,y) exp(g(y))` for one row of a stochastic matrix given in
/// linear scale. Zero-probability entries are skipped.
pub fn log_expect_exp(row: &[f64], g: &[f64]) -> f64 {
    debug_assert_eq!(row.len(), g.len());
    let m = row
        .iter()
        .zip(g)
        .filter(|(p, _)| **p > 0.0)
        .map(|(_, v)| *v)
        .fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    let s: f64 = row
        .iter()
        .zip(g)
        .filter(|(p, _)| **p > 0.0)
        .map(|(p, v)| p * (v - m).exp())
        .sum();
    m + s.ln()
}

/// Certainty equivalent `(1/γ) ln Σ_y P(y) e^{γ g(y)}` of one row, or
/// `Σ P g` at `γ = 0`.
///
/// Written as `g(s) + ln(Σ P e^{γ(g−g(s))}) / γ` with `s` the
/// support point maximizing `γ g`; the logarithm goes through `ln1p` when
/// the sum is near 1, so it neither overflows for large `|γ|` nor loses
/// relative precision as `γ → 0`.
pub fn certainty_equivalent(row: &[f64], g: &[f64], gamma: f64) -> f64 {
    debug_assert_eq!(row.len(), g.len());
    if gamma == 0.0 {
        return row.iter().zip(g).map(|(p, v)| p * v).sum();
    }
    let mut pivot = f64::NAN;
    for (p, &v) in row.iter().zip(g) {
        if *p > 0.0 && (pivot.is_nan() || gamma * v > gamma * pivot) {
            pivot = v;
        }
    }
    let mut s = 0.0;
    let mut t = 0.0;
    for (p, v) in row.iter().zip(g).filter(|(p, _)| **p > 0.0) {
        let x = gamma * (v - pivot);
        s += p * x.exp_m1();
        t += p * x.exp();
    }
    // ln1p keeps precision when the sum is close to 1, plain ln otherwise
    let l = if t > 0.5 { s.ln_1p() } else { t.ln() };
    pivot + l / gamma
}

/// Span seminorm `½(sup g − inf g)`.
pub fn span(g: &[f64]) -> f64 {
    if g.is_empty() {
        return 0.0;
    }
    let (lo, hi) = min_max(g);
    0.5 * (hi - lo)
}

pub fn min_max(g: &[f64]) -> (f64, f64) {
    g.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        })
}

pub fn sup_norm(g: &[f64]) -> f64 {
    g.iter().fold(0.0, |acc: f64, v| acc.max(v.abs()))
}

/// Sup-norm distance between two vectors of equal length.
pub fn sup_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .fold(0.0, |acc: f64, (x, y)| acc.max((x - y).abs()))
}

/// Dense row-major product of two square matrices of order `k`.
pub fn mat_mul(a: &[f64], b: &[f64], k: usize) -> Vec<f64> {
    let mut out = vec![0.0; k * k];
    for i in 0..k {
        for l in 0..k {
            let ail = a[i * k + l];
            if ail == 0.0 {
                continue;
            }
            for j in 0..k {
                out[i * k + j] += ail * b[l * k + j];
            }
        }
    }
    out
}

/// Bisection for a sign change of `f` on `[lo, hi]`. The caller guarantees
/// `f(lo)` and `f(hi)` have opposite signs (or one of them is zero).
pub fn bisect<F>(mut f: F, mut lo: f64, mut hi: f64, tol: f64, max_iter: usize) -> f64
where
    F: FnMut(f64) -> f64,
{
    let flo = f(lo);
    let lo_neg = flo < 0.0;
    for _ in 0..max_iter {
        if (hi - lo).abs() <= tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if (fm < 0.0) == lo_neg {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
