//! Hypothesis tests and summary statistics for comparison records.
//!
//! The toolkit is small and deliberate: one-tailed two-sample t-tests with
//! Welch's correction (uplift distributions have unequal variances and sample
//! sizes), a paired variant for index-matched samples, the Mann-Whitney U
//! test as the rank-based cross-check, and a proportion z-test for win
//! shares. Effect sizes use pooled-variance Cohen's d, and intervals are
//! two-sided at the 1 - alpha level.
//!
//! Unless noted otherwise every function takes plain `f64` slices or
//! [`SampleGroup`]s and rejects NaN and infinity up front; a single corrupt
//! value invalidates a test silently otherwise.

pub mod special;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use special::{normal_cdf, student_t_cdf, student_t_inv};

/// Significance level used when callers do not pick one.
pub const DEFAULT_ALPHA: f64 = 0.05;
/// Outlier clip bound for uplift percentages, in percentage points.
pub const DEFAULT_CLIP_PCT: f64 = 5.0;
/// Below this p-value the display string switches to an inequality.
pub const P_DISPLAY_FLOOR: f64 = 1e-6;
/// Buckets with fewer observations than this get counts but no summary
/// statistics; tiny samples produce noise dressed up as precision.
pub const DEFAULT_MIN_BUCKET_N: usize = 5;

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("sample {label:?} is empty")]
    EmptySample { label: String },
    #[error("sample {label:?} has {n} values, needs at least {need}")]
    TooSmall { label: String, n: usize, need: usize },
    #[error("sample {label:?} contains a non-finite value")]
    NonFinite { label: String },
    #[error("paired test needs equal sizes, got {n1} and {n2}")]
    MismatchedPairs { n1: usize, n2: usize },
    #[error("quantile {q} outside [0, 100]")]
    BadQuantile { q: f64 },
    #[error("alpha {alpha} outside (0, 1)")]
    BadAlpha { alpha: f64 },
    #[error("bad proportion inputs: {successes} successes out of {trials} trials")]
    BadProportion { successes: u64, trials: u64 },
    #[error("null proportion {p0} outside (0, 1)")]
    BadNullProportion { p0: f64 },
}

/// A labeled sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleGroup {
    pub label: String,
    pub values: Vec<f64>,
}

impl SampleGroup {
    pub fn new(label: impl Into<String>, values: Vec<f64>) -> SampleGroup {
        SampleGroup { label: label.into(), values }
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    pub fn mean(&self) -> f64 {
        if self.values.is_empty() {
            return 0.0;
        }
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Unbiased sample variance (n - 1 denominator); zero below two values.
    pub fn variance(&self) -> f64 {
        let n = self.values.len();
        if n < 2 {
            return 0.0;
        }
        let m = self.mean();
        self.values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n as f64 - 1.0)
    }

    fn validate(&self, need: usize) -> Result<(), StatsError> {
        if self.values.is_empty() {
            return Err(StatsError::EmptySample { label: self.label.clone() });
        }
        if self.values.len() < need {
            return Err(StatsError::TooSmall {
                label: self.label.clone(),
                n: self.values.len(),
                need,
            });
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(StatsError::NonFinite { label: self.label.clone() });
        }
        Ok(())
    }
}

/// Direction of the one-tailed alternative, stated about the first sample:
/// `Less` tests whether group one sits below group two.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tail {
    Less,
    Greater,
}

/// Outcome of a hypothesis test. Optional fields are absent where the test
/// does not define them (rank tests have no degrees of freedom, the
/// proportion test has no second sample).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub test: String,
    pub statistic: f64,
    pub df: Option<f64>,
    pub p_value: f64,
    pub p_display: String,
    pub alpha: f64,
    pub significant: bool,
    pub n1: usize,
    pub n2: usize,
    pub cohens_d: Option<f64>,
    pub ci_g1: Option<(f64, f64)>,
    pub ci_g2: Option<(f64, f64)>,
    pub ci_diff: Option<(f64, f64)>,
}

/// Presentation form of a p-value; vanishing values render as an inequality
/// instead of a misleading zero.
pub fn format_p(p: f64) -> String {
    if p < P_DISPLAY_FLOOR {
        "< 1e-6".to_string()
    } else {
        format!("{p:.6}")
    }
}

fn check_alpha(alpha: f64) -> Result<(), StatsError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(StatsError::BadAlpha { alpha });
    }
    Ok(())
}

/// Linear-interpolation percentile (the `h = (n - 1) q / 100` convention).
/// Input order does not matter; the slice is copied and sorted.
pub fn percentile(values: &[f64], q: f64) -> Result<f64, StatsError> {
    if values.is_empty() {
        return Err(StatsError::EmptySample { label: "percentile".into() });
    }
    if !(0.0..=100.0).contains(&q) {
        return Err(StatsError::BadQuantile { q });
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite { label: "percentile".into() });
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    let h = (sorted.len() as f64 - 1.0) * q / 100.0;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    Ok(sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo]))
}

pub fn median(values: &[f64]) -> Result<f64, StatsError> {
    percentile(values, 50.0)
}

/// Removes values with magnitude beyond `limit`. This is removal, not
/// winsorizing: a handful of mispriced trades would otherwise dominate every
/// mean uplift figure.
pub fn clip_outliers(values: &[f64], limit: f64) -> Vec<f64> {
    values.iter().copied().filter(|v| v.abs() <= limit).collect()
}

fn one_tail_p(t: f64, df: f64, tail: Tail) -> f64 {
    match tail {
        Tail::Less => student_t_cdf(t, df),
        Tail::Greater => 1.0 - student_t_cdf(t, df),
    }
}

fn group_ci(g: &SampleGroup, alpha: f64) -> (f64, f64) {
    let n = g.n() as f64;
    let crit = student_t_inv(1.0 - alpha / 2.0, n - 1.0);
    let half = crit * (g.variance() / n).sqrt();
    (g.mean() - half, g.mean() + half)
}

fn build_result(
    test: &str,
    statistic: f64,
    df: Option<f64>,
    p_value: f64,
    alpha: f64,
    n1: usize,
    n2: usize,
) -> TestResult {
    TestResult {
        test: test.to_string(),
        statistic,
        df,
        p_value,
        p_display: format_p(p_value),
        alpha,
        significant: p_value < alpha,
        n1,
        n2,
        cohens_d: None,
        ci_g1: None,
        ci_g2: None,
        ci_diff: None,
    }
}

/// Pooled-variance Cohen's d. Degenerate zero-spread samples yield zero when
/// the means agree and a signed infinity otherwise.
pub fn cohens_d(g1: &SampleGroup, g2: &SampleGroup) -> f64 {
    let (n1, n2) = (g1.n() as f64, g2.n() as f64);
    let pooled =
        ((n1 - 1.0) * g1.variance() + (n2 - 1.0) * g2.variance()) / (n1 + n2 - 2.0);
    let diff = g1.mean() - g2.mean();
    if pooled == 0.0 {
        if diff == 0.0 {
            0.0
        } else {
            diff.signum() * f64::INFINITY
        }
    } else {
        diff / pooled.sqrt()
    }
}

/// One-tailed two-sample t-test with Welch's unequal-variance correction and
/// Welch-Satterthwaite degrees of freedom. Also reports Cohen's d and
/// two-sided 1 - alpha confidence intervals for each mean and for the
/// difference of means.
pub fn welch_t_test(
    g1: &SampleGroup,
    g2: &SampleGroup,
    tail: Tail,
    alpha: f64,
) -> Result<TestResult, StatsError> {
    check_alpha(alpha)?;
    g1.validate(2)?;
    g2.validate(2)?;
    let (n1, n2) = (g1.n() as f64, g2.n() as f64);
    let (v1, v2) = (g1.variance() / n1, g2.variance() / n2);
    let diff = g1.mean() - g2.mean();
    let se2 = v1 + v2;
    let (t, df) = if se2 == 0.0 {
        // Zero spread in both samples: equal means are a perfect null fit,
        // unequal means are infinitely separated.
        let t = if diff == 0.0 { 0.0 } else { diff.signum() * f64::INFINITY };
        (t, n1 + n2 - 2.0)
    } else {
        let df = se2 * se2 / (v1 * v1 / (n1 - 1.0) + v2 * v2 / (n2 - 1.0));
        (diff / se2.sqrt(), df)
    };
    let p = one_tail_p(t, df, tail);
    let mut result = build_result("welch_t", t, Some(df), p, alpha, g1.n(), g2.n());
    result.cohens_d = Some(cohens_d(g1, g2));
    result.ci_g1 = Some(group_ci(g1, alpha));
    result.ci_g2 = Some(group_ci(g2, alpha));
    let crit = student_t_inv(1.0 - alpha / 2.0, df);
    let half = crit * se2.sqrt();
    result.ci_diff = Some((diff - half, diff + half));
    Ok(result)
}

/// One-tailed paired t-test: a one-sample t on the index-wise differences
/// `g1[i] - g2[i]`. `Tail::Less` tests whether group one runs below group two
/// on matched observations.
pub fn paired_t_test(
    g1: &SampleGroup,
    g2: &SampleGroup,
    tail: Tail,
    alpha: f64,
) -> Result<TestResult, StatsError> {
    check_alpha(alpha)?;
    g1.validate(2)?;
    g2.validate(2)?;
    if g1.n() != g2.n() {
        return Err(StatsError::MismatchedPairs { n1: g1.n(), n2: g2.n() });
    }
    let diffs: Vec<f64> =
        g1.values.iter().zip(&g2.values).map(|(a, b)| a - b).collect();
    let d = SampleGroup::new("paired_diffs", diffs);
    let n = d.n() as f64;
    let se = (d.variance() / n).sqrt();
    let t = if se == 0.0 {
        if d.mean() == 0.0 {
            0.0
        } else {
            d.mean().signum() * f64::INFINITY
        }
    } else {
        d.mean() / se
    };
    let df = n - 1.0;
    let p = one_tail_p(t, df, tail);
    let mut result = build_result("paired_t", t, Some(df), p, alpha, g1.n(), g2.n());
    let sd = d.variance().sqrt();
    result.cohens_d = Some(if sd == 0.0 {
        if d.mean() == 0.0 {
            0.0
        } else {
            d.mean().signum() * f64::INFINITY
        }
    } else {
        d.mean() / sd
    });
    result.ci_g1 = Some(group_ci(g1, alpha));
    result.ci_g2 = Some(group_ci(g2, alpha));
    let crit = student_t_inv(1.0 - alpha / 2.0, df);
    result.ci_diff = Some((d.mean() - crit * se, d.mean() + crit * se));
    Ok(result)
}

/// Average ranks (1-based) of the pooled sample, ties sharing their midrank.
fn midranks(pooled: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..pooled.len()).collect();
    order.sort_by(|&a, &b| pooled[a].partial_cmp(&pooled[b]).expect("finite values"));
    let mut ranks = vec![0.0; pooled.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && pooled[order[j + 1]] == pooled[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &o in &order[i..=j] {
            ranks[o] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Visits every k-subset of `0..n` in lexicographic order.
fn for_each_k_subset(n: usize, k: usize, mut f: impl FnMut(&[usize])) {
    if k > n {
        return;
    }
    if k == 0 {
        f(&[]);
        return;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        f(&idx);
        let mut pos = k;
        let mut advanced = false;
        while pos > 0 {
            pos -= 1;
            if idx[pos] < n - k + pos {
                idx[pos] += 1;
                for j in pos + 1..k {
                    idx[j] = idx[j - 1] + 1;
                }
                advanced = true;
                break;
            }
        }
        if !advanced {
            break;
        }
    }
}

/// Pooled sizes up to this run the exact permutation distribution; beyond it
/// the tie-corrected normal approximation takes over.
pub const MWU_EXACT_LIMIT: usize = 20;

/// One-tailed Mann-Whitney U test. The statistic is U for the first group
/// (`R1 - n1 (n1 + 1) / 2` over midranks). Small pooled samples get an exact
/// p-value by enumerating every group assignment; larger ones use the normal
/// approximation with tie-corrected variance and a half-unit continuity
/// correction toward the tested tail.
pub fn mann_whitney_u_test(
    g1: &SampleGroup,
    g2: &SampleGroup,
    tail: Tail,
    alpha: f64,
) -> Result<TestResult, StatsError> {
    check_alpha(alpha)?;
    g1.validate(1)?;
    g2.validate(1)?;
    let (n1, n2) = (g1.n(), g2.n());
    let total = n1 + n2;
    let pooled: Vec<f64> =
        g1.values.iter().chain(&g2.values).copied().collect();
    let ranks = midranks(&pooled);
    let r1: f64 = ranks[..n1].iter().sum();
    let u1 = r1 - (n1 * (n1 + 1)) as f64 / 2.0;

    let p = if total <= MWU_EXACT_LIMIT {
        // Exact null distribution: every assignment of pooled ranks to the
        // first group is equally likely under H0.
        let offset = (n1 * (n1 + 1)) as f64 / 2.0;
        let mut hits = 0u64;
        let mut count = 0u64;
        for_each_k_subset(total, n1, |subset| {
            let u: f64 = subset.iter().map(|&i| ranks[i]).sum::<f64>() - offset;
            count += 1;
            let in_tail = match tail {
                Tail::Less => u <= u1 + 1e-9,
                Tail::Greater => u >= u1 - 1e-9,
            };
            if in_tail {
                hits += 1;
            }
        });
        hits as f64 / count as f64
    } else {
        let mu = (n1 * n2) as f64 / 2.0;
        let nf = total as f64;
        let mut tie_term = 0.0;
        let mut sorted = pooled.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
        let mut i = 0;
        while i < sorted.len() {
            let mut j = i;
            while j + 1 < sorted.len() && sorted[j + 1] == sorted[i] {
                j += 1;
            }
            let t = (j - i + 1) as f64;
            tie_term += t * t * t - t;
            i = j + 1;
        }
        let sigma2 =
            (n1 * n2) as f64 / 12.0 * ((nf + 1.0) - tie_term / (nf * (nf - 1.0)));
        if sigma2 <= 0.0 {
            // Every pooled value identical: no evidence either way.
            0.5
        } else {
            let sigma = sigma2.sqrt();
            match tail {
                Tail::Less => normal_cdf((u1 + 0.5 - mu) / sigma),
                Tail::Greater => 1.0 - normal_cdf((u1 - 0.5 - mu) / sigma),
            }
        }
    };
    Ok(build_result("mann_whitney_u", u1, None, p, alpha, n1, n2))
}

/// One-tailed z-test of a Bernoulli success share against `p0`, standard
/// error taken under the null. `Tail::Greater` tests whether the true share
/// exceeds `p0`.
pub fn proportion_z_test(
    successes: u64,
    trials: u64,
    p0: f64,
    tail: Tail,
    alpha: f64,
) -> Result<TestResult, StatsError> {
    if trials == 0 || successes > trials {
        return Err(StatsError::BadProportion { successes, trials });
    }
    proportion_z_from_share(successes as f64 / trials as f64, trials, p0, tail, alpha)
}

/// Same test, starting from an already-computed share. Useful when the share
/// is quoted at limited precision and the raw success count is unavailable.
pub fn proportion_z_from_share(
    share: f64,
    trials: u64,
    p0: f64,
    tail: Tail,
    alpha: f64,
) -> Result<TestResult, StatsError> {
    check_alpha(alpha)?;
    if trials == 0 || !(0.0..=1.0).contains(&share) {
        return Err(StatsError::BadProportion {
            successes: (share * trials as f64).round() as u64,
            trials,
        });
    }
    if !(p0 > 0.0 && p0 < 1.0) {
        return Err(StatsError::BadNullProportion { p0 });
    }
    let se = (p0 * (1.0 - p0) / trials as f64).sqrt();
    let z = (share - p0) / se;
    let p = match tail {
        Tail::Less => normal_cdf(z),
        Tail::Greater => 1.0 - normal_cdf(z),
    };
    Ok(build_result("proportion_z", z, None, p, alpha, trials as usize, 0))
}

/// Result of an indirect two-group comparison, including how much the
/// outlier clip removed from each side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndirectComparison {
    pub result: TestResult,
    pub retained_a: usize,
    pub retained_b: usize,
    pub clipped_a: usize,
    pub clipped_b: usize,
}

/// Compares two uplift-percentage samples that were measured against a
/// common baseline rather than against each other: clip outliers beyond
/// `clip_pct` percentage points on both sides, then run a one-tailed Welch
/// test of whether group A underperforms group B.
pub fn indirect_compare(
    a: &SampleGroup,
    b: &SampleGroup,
    clip_pct: f64,
    alpha: f64,
) -> Result<IndirectComparison, StatsError> {
    let ca = SampleGroup::new(a.label.clone(), clip_outliers(&a.values, clip_pct));
    let cb = SampleGroup::new(b.label.clone(), clip_outliers(&b.values, clip_pct));
    let result = welch_t_test(&ca, &cb, Tail::Less, alpha)?;
    Ok(IndirectComparison {
        result,
        retained_a: ca.n(),
        retained_b: cb.n(),
        clipped_a: a.n() - ca.n(),
        clipped_b: b.n() - cb.n(),
    })
}

/// Distribution summary of one bucket.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub mean: f64,
    pub median: f64,
    pub p05: f64,
    pub p95: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucketStats {
    pub n: u64,
    /// Share of all observations, over every bucket in the input.
    pub share: f64,
    /// Absent below the minimum population threshold.
    pub stats: Option<SummaryStats>,
}

/// Groups labeled observations and summarizes each label. Labels that never
/// occur are simply absent; buckets below `min_n` report their count and
/// share but no distribution statistics.
pub fn bucket_summary(
    pairs: &[(String, f64)],
    min_n: usize,
) -> Result<BTreeMap<String, BucketStats>, StatsError> {
    let mut grouped: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for (label, value) in pairs {
        if !value.is_finite() {
            return Err(StatsError::NonFinite { label: label.clone() });
        }
        grouped.entry(label.clone()).or_default().push(*value);
    }
    let total = pairs.len() as f64;
    let mut out = BTreeMap::new();
    for (label, values) in grouped {
        let n = values.len();
        let stats = if n >= min_n {
            Some(SummaryStats {
                mean: values.iter().sum::<f64>() / n as f64,
                median: median(&values)?,
                p05: percentile(&values, 5.0)?,
                p95: percentile(&values, 95.0)?,
            })
        } else {
            None
        };
        out.insert(label, BucketStats { n: n as u64, share: n as f64 / total, stats });
    }
    Ok(out)
}
