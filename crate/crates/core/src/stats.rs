//! Rank-based hypothesis tests: Wilcoxon rank-sum and Kruskal-Wallis, both
//! with midrank tie handling.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::gamma::gamma_ur;

use crate::error::{Error, Result};

/// Pooled sample size up to which the rank-sum p-value is computed by full
/// enumeration of group assignments.
pub const EXACT_MAX_N: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestMethod {
    ExactPermutation,
    NormalApprox,
    ChiSquareApprox,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Alternative {
    #[default]
    TwoSided,
    /// First sample tends to be smaller.
    Less,
    /// First sample tends to be larger.
    Greater,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
    pub method: TestMethod,
    pub n_per_group: Vec<usize>,
}

fn check_sample(values: &[f64], what: &str) -> Result<()> {
    if values.is_empty() {
        return Err(Error::usage(format!("{what} is empty")));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::domain(format!("{what} contains non-finite values")));
    }
    Ok(())
}

/// Ranks `1..=n`; tied values share the mean of their rank block.
pub fn rank_with_ties(values: &[f64]) -> Result<Vec<f64>> {
    check_sample(values, "sample")?;
    Ok(ranks_and_ties(values).0)
}

/// Midranks plus the sizes of all tie blocks.
fn ranks_and_ties(values: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let n = values.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; n];
    let mut ties = Vec::new();
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && values[idx[end]] == values[idx[start]] {
            end += 1;
        }
        // positions start..end hold ranks start+1..=end
        let mid = (start + 1 + end) as f64 / 2.0;
        for &i in &idx[start..end] {
            ranks[i] = mid;
        }
        ties.push(end - start);
        start = end;
    }
    (ranks, ties)
}

fn tie_sum(ties: &[usize]) -> f64 {
    ties.iter().map(|&t| (t as f64).powi(3) - t as f64).sum()
}

/// Wilcoxon rank-sum test. The statistic is the Mann-Whitney `U` of `a`,
/// `R_a − n_a(n_a+1)/2` computed from pooled midranks.
///
/// For `n_a + n_b ≤ 12` the p-value is exact, from enumerating every way of
/// assigning the pooled midranks to the two groups; two-sided p is the
/// probability of `|U − n_a n_b / 2|` at least as large as observed. Larger
/// samples use the normal approximation with tie-corrected variance and a
/// continuity correction.
pub fn wilcoxon_rank_sum(a: &[f64], b: &[f64], alternative: Alternative) -> Result<TestResult> {
    check_sample(a, "first sample")?;
    check_sample(b, "second sample")?;
    let (n1, n2) = (a.len(), b.len());
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let (ranks, ties) = ranks_and_ties(&pooled);
    let offset = (n1 * (n1 + 1)) as f64 / 2.0;
    let u = ranks[..n1].iter().sum::<f64>() - offset;
    let center = (n1 * n2) as f64 / 2.0;

    let (p, method) = if n1 + n2 <= EXACT_MAX_N {
        (exact_rank_sum_p(&ranks, n1, u, alternative), TestMethod::ExactPermutation)
    } else {
        let n = (n1 + n2) as f64;
        let var = (n1 * n2) as f64 / 12.0 * ((n + 1.0) - tie_sum(&ties) / (n * (n - 1.0)));
        let p = if var <= 0.0 {
            1.0
        } else {
            let sd = var.sqrt();
            let std_normal = Normal::new(0.0, 1.0).unwrap();
            match alternative {
                Alternative::TwoSided => {
                    let z = ((u - center).abs() - 0.5).max(0.0) / sd;
                    2.0 * std_normal.sf(z)
                }
                Alternative::Less => std_normal.cdf((u - center + 0.5) / sd),
                Alternative::Greater => std_normal.sf((u - center - 0.5) / sd),
            }
        };
        (p, TestMethod::NormalApprox)
    };
    Ok(TestResult {
        statistic: u,
        p_value: p.clamp(0.0, 1.0),
        method,
        n_per_group: vec![n1, n2],
    })
}

/// Enumerates every `n1`-subset of the pooled positions as group one.
fn exact_rank_sum_p(ranks: &[f64], n1: usize, u_obs: f64, alternative: Alternative) -> f64 {
    let n = ranks.len();
    let n2 = n - n1;
    let offset = (n1 * (n1 + 1)) as f64 / 2.0;
    let center = (n1 * n2) as f64 / 2.0;
    // midranks are multiples of 1/2, so a small tolerance decides ties exactly
    let tol = 1e-9;
    let obs_dev = (u_obs - center).abs();
    let mut hits = 0u64;
    let mut total = 0u64;
    let n = n as u32;
    for mask in 0u32..(1u32 << n) {
        if mask.count_ones() as usize != n1 {
            continue;
        }
        let r: f64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| ranks[i as usize]).sum();
        let u = r - offset;
        let extreme = match alternative {
            Alternative::TwoSided => (u - center).abs() >= obs_dev - tol,
            Alternative::Less => u <= u_obs + tol,
            Alternative::Greater => u >= u_obs - tol,
        };
        total += 1;
        hits += u64::from(extreme);
    }
    hits as f64 / total as f64
}

/// Kruskal-Wallis H test with tie correction; the p-value is the upper tail of
/// a chi-square law with `k − 1` degrees of freedom.
pub fn kruskal_wallis(groups: &[Vec<f64>]) -> Result<TestResult> {
    if groups.len() < 2 {
        return Err(Error::usage("Kruskal-Wallis needs at least two groups"));
    }
    for (i, g) in groups.iter().enumerate() {
        check_sample(g, &format!("group {i}"))?;
    }
    let pooled: Vec<f64> = groups.iter().flatten().copied().collect();
    let n = pooled.len() as f64;
    let (ranks, ties) = ranks_and_ties(&pooled);
    let mid = (n + 1.0) / 2.0;
    let mut h = 0.0;
    let mut start = 0;
    for g in groups {
        let ni = g.len();
        let mean_rank = ranks[start..start + ni].iter().sum::<f64>() / ni as f64;
        h += ni as f64 * (mean_rank - mid).powi(2);
        start += ni;
    }
    h *= 12.0 / (n * (n + 1.0));
    let correction = 1.0 - tie_sum(&ties) / (n.powi(3) - n);
    // all values tied: no rank information at all
    let h = if correction > 0.0 { h / correction } else { 0.0 };
    let df = groups.len() - 1;
    Ok(TestResult {
        statistic: h,
        p_value: chi_square_sf(h, df)?,
        method: TestMethod::ChiSquareApprox,
        n_per_group: groups.iter().map(Vec::len).collect(),
    })
}

/// Upper-tail probability of a chi-square law, `Q(df/2, x/2)`.
pub fn chi_square_sf(x: f64, df: usize) -> Result<f64> {
    if x.is_nan() || x < 0.0 {
        return Err(Error::domain("chi-square statistic must be nonnegative"));
    }
    if df == 0 {
        return Err(Error::domain("chi-square degrees of freedom must be positive"));
    }
    if x == 0.0 {
        return Ok(1.0);
    }
    if x.is_infinite() {
        return Ok(0.0);
    }
    Ok(gamma_ur(df as f64 / 2.0, x / 2.0).clamp(0.0, 1.0))
}

/// Spearman rank correlation with midranks.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::usage("spearman inputs differ in length"));
    }
    if x.len() < 2 {
        return Err(Error::usage("spearman needs at least two points"));
    }
    let rx = rank_with_ties(x)?;
    let ry = rank_with_ties(y)?;
    let mx = rx.iter().sum::<f64>() / rx.len() as f64;
    let my = ry.iter().sum::<f64>() / ry.len() as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::domain("spearman correlation undefined for constant input"));
    }
    Ok(sxy / (sxx * syy).sqrt())
}

/// Arithmetic mean and population standard deviation; one value has std 0.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}
