//! Naive reference statistics.
//!
//! Everything is computed the long way: two-pass variances, double-loop rank
//! statistics, power-series special functions with a Stirling log-gamma, and
//! Simpson integration for the normal CDF. Slow and obvious beats fast and
//! shared; these exist to disagree with the production implementations when
//! the production ones are wrong.

pub fn mean(values: &[f64]) -> f64 {
    let mut sum = 0.0;
    for v in values {
        sum += v;
    }
    sum / values.len() as f64
}

/// Two-pass unbiased sample variance.
pub fn variance(values: &[f64]) -> f64 {
    let m = mean(values);
    let mut acc = 0.0;
    for v in values {
        acc += (v - m) * (v - m);
    }
    acc / (values.len() as f64 - 1.0)
}

/// Log-gamma via the Stirling series, shifting the argument above 8 with the
/// recurrence ln Γ(x) = ln Γ(x + 1) − ln x first.
pub fn ln_gamma(mut x: f64) -> f64 {
    assert!(x > 0.0, "reference ln_gamma wants positive arguments");
    let mut shift = 0.0;
    while x < 8.0 {
        shift -= x.ln();
        x += 1.0;
    }
    // Bernoulli-number coefficients of the asymptotic expansion.
    let coefs = [
        1.0 / 12.0,
        -1.0 / 360.0,
        1.0 / 1_260.0,
        -1.0 / 1_680.0,
        1.0 / 1_188.0,
        -691.0 / 360_360.0,
        1.0 / 156.0,
    ];
    let mut series = 0.0;
    let mut power = x;
    for c in coefs {
        series += c / power;
        power *= x * x;
    }
    shift + (x - 0.5) * x.ln() - x + 0.5 * (2.0 * std::f64::consts::PI).ln() + series
}

fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

/// Regularized incomplete beta by the hypergeometric power series
/// I_x(a,b) = x^a (1-x)^b / (a B(a,b)) * sum_n [(a+b)_n / (a+1)_n] x^n,
/// switching tails where the series converges slowly.
pub fn inc_beta(a: f64, b: f64, x: f64) -> f64 {
    assert!(a > 0.0 && b > 0.0);
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    if x > (a + 1.0) / (a + b + 2.0) {
        return 1.0 - inc_beta(b, a, 1.0 - x);
    }
    let front = (a * x.ln() + b * (1.0 - x).ln() - a.ln() - ln_beta(a, b)).exp();
    let mut term = 1.0;
    let mut sum = 1.0;
    for n in 0..200_000 {
        let nf = n as f64;
        term *= (a + b + nf) / (a + 1.0 + nf) * x;
        sum += term;
        if term.abs() < sum.abs() * 1e-17 {
            break;
        }
    }
    front * sum
}

/// Standard normal CDF by Simpson integration of the density from 0 to |z|.
/// Past |z| = 12 the missing mass is below 1e-32 and the value saturates.
pub fn normal_cdf(z: f64) -> f64 {
    if z < 0.0 {
        return 1.0 - normal_cdf(-z);
    }
    if z > 12.0 {
        return 1.0;
    }
    let n = 40_000usize;
    let h = z / n as f64;
    let phi = |t: f64| (-0.5 * t * t).exp();
    let mut acc = phi(0.0) + phi(z);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * phi(h * i as f64);
    }
    0.5 + acc * h / 3.0 / (2.0 * std::f64::consts::PI).sqrt()
}

/// Student's t CDF through the incomplete beta identity.
pub fn t_cdf(t: f64, df: f64) -> f64 {
    if t == 0.0 {
        return 0.5;
    }
    let tail = 0.5 * inc_beta(0.5 * df, 0.5, df / (df + t * t));
    if t < 0.0 {
        tail
    } else {
        1.0 - tail
    }
}

/// Inverse t CDF by bisection.
pub fn t_inv(p: f64, df: f64) -> f64 {
    assert!(p > 0.0 && p < 1.0);
    let (mut lo, mut hi) = (-1e6, 1e6);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if t_cdf(mid, df) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Everything the reference Welch computation produces.
#[derive(Debug, Clone, PartialEq)]
pub struct RefWelch {
    pub t: f64,
    pub df: f64,
    pub p_less: f64,
    pub p_greater: f64,
    pub cohens_d: f64,
    pub ci_g1: (f64, f64),
    pub ci_g2: (f64, f64),
    pub ci_diff: (f64, f64),
}

/// Textbook Welch test with Welch-Satterthwaite degrees of freedom, pooled
/// Cohen's d, and two-sided 1 - alpha intervals.
pub fn welch(g1: &[f64], g2: &[f64], alpha: f64) -> RefWelch {
    let (n1, n2) = (g1.len() as f64, g2.len() as f64);
    let (m1, m2) = (mean(g1), mean(g2));
    let (v1, v2) = (variance(g1), variance(g2));
    let se2 = v1 / n1 + v2 / n2;
    let t = (m1 - m2) / se2.sqrt();
    let df = se2 * se2
        / ((v1 / n1) * (v1 / n1) / (n1 - 1.0) + (v2 / n2) * (v2 / n2) / (n2 - 1.0));
    let p_less = t_cdf(t, df);
    let pooled = (((n1 - 1.0) * v1 + (n2 - 1.0) * v2) / (n1 + n2 - 2.0)).sqrt();
    let ci = |m: f64, v: f64, n: f64| {
        let half = t_inv(1.0 - alpha / 2.0, n - 1.0) * (v / n).sqrt();
        (m - half, m + half)
    };
    let half_diff = t_inv(1.0 - alpha / 2.0, df) * se2.sqrt();
    RefWelch {
        t,
        df,
        p_less,
        p_greater: 1.0 - p_less,
        cohens_d: (m1 - m2) / pooled,
        ci_g1: ci(m1, v1, n1),
        ci_g2: ci(m2, v2, n2),
        ci_diff: ((m1 - m2) - half_diff, (m1 - m2) + half_diff),
    }
}

/// Mann-Whitney U for the first group by literally counting pairs: one for
/// each (x, y) with x > y, half for each tie.
pub fn u_statistic(g1: &[f64], g2: &[f64]) -> f64 {
    let mut u = 0.0;
    for x in g1 {
        for y in g2 {
            if x > y {
                u += 1.0;
            } else if x == y {
                u += 0.5;
            }
        }
    }
    u
}

/// Linear-interpolation percentile with an insertion sort, no shared code
/// with the production path.
pub fn percentile(values: &[f64], q: f64) -> f64 {
    assert!(!values.is_empty() && (0.0..=100.0).contains(&q));
    let mut sorted: Vec<f64> = Vec::with_capacity(values.len());
    for &v in values {
        let pos = sorted.iter().position(|&s| s > v).unwrap_or(sorted.len());
        sorted.insert(pos, v);
    }
    let h = (sorted.len() as f64 - 1.0) * q / 100.0;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}
