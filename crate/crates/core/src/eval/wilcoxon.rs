//! Paired significance tests on per-item outcomes.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use super::EvalError;

/// Largest number of non-zero differences for which the exact null
/// distribution is used.
pub const EXACT_MAX_N: usize = 25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WilcoxonMethod {
    Exact,
    Normal,
    /// Every pair was tied; the test is uninformative and p = 1.
    NoDiscordantPairs,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WilcoxonResult {
    /// Sum of the ranks of positive differences.
    pub statistic: f64,
    pub p_two_sided: f64,
    pub n_effective: usize,
    pub method: WilcoxonMethod,
}

/// Ranks of the non-zero differences, doubled so mid-ranks stay integral,
/// together with whether each difference is positive.
pub fn signed_doubled_ranks(x: &[f64], y: &[f64]) -> Result<Vec<(u64, bool)>, EvalError> {
    if x.len() != y.len() {
        return Err(EvalError::LengthMismatch { left: x.len(), right: y.len() });
    }
    let mut d: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).filter(|d| *d != 0.0).collect();
    d.sort_by(|a, b| a.abs().total_cmp(&b.abs()));
    let mut out = Vec::with_capacity(d.len());
    let mut i = 0;
    while i < d.len() {
        let mut j = i;
        while j + 1 < d.len() && d[j + 1].abs() == d[i].abs() {
            j += 1;
        }
        // 1-based positions i+1..=j+1 share the mid-rank (i+j+2)/2.
        let doubled = (i + j + 2) as u64;
        out.extend(d[i..=j].iter().map(|v| (doubled, *v > 0.0)));
        i = j + 1;
    }
    Ok(out)
}

/// Exact two-sided p-value from the null distribution of the signed-rank
/// sum, built by dynamic programming over the (doubled) ranks: each rank is
/// positive or negative with probability 1/2 independently.
pub fn exact_p(ranks: &[(u64, bool)]) -> f64 {
    let total: u64 = ranks.iter().map(|r| r.0).sum();
    let observed: u64 = ranks.iter().filter(|r| r.1).map(|r| r.0).sum();
    let mut dist = vec![0.0f64; total as usize + 1];
    dist[0] = 1.0;
    let mut reach = 0usize;
    for &(r, _) in ranks {
        let r = r as usize;
        for s in (0..=reach).rev() {
            let p = dist[s];
            if p != 0.0 {
                dist[s + r] += p * 0.5;
                dist[s] = p * 0.5;
            }
        }
        reach += r;
    }
    let lower: f64 = dist[..=observed as usize].iter().sum();
    let upper: f64 = dist[observed as usize..].iter().sum();
    (2.0 * lower.min(upper)).min(1.0)
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Normal approximation with the tie-corrected variance `sum(r^2)/4` and a
/// continuity correction of half the lattice step of the statistic. For
/// distinct integer ranks the step is 1 and the correction the familiar 0.5;
/// when every rank is tied (binary outcomes) the statistic moves in steps of
/// the common rank.
pub fn normal_p(ranks: &[(u64, bool)]) -> f64 {
    if ranks.is_empty() {
        return 1.0;
    }
    let r: Vec<f64> = ranks.iter().map(|x| x.0 as f64 / 2.0).collect();
    let w: f64 = ranks.iter().zip(&r).filter(|(x, _)| x.1).map(|(_, r)| r).sum();
    let mean = r.iter().sum::<f64>() / 2.0;
    let sd = (r.iter().map(|v| v * v).sum::<f64>() / 4.0).sqrt();
    let step = ranks.iter().fold(0, |g, x| gcd(g, x.0)) as f64 / 2.0;
    let z = ((w - mean).abs() - step / 2.0).max(0.0) / sd;
    erfc(z / std::f64::consts::SQRT_2).min(1.0)
}

/// Wilcoxon signed-rank test on paired observations. Zero differences are
/// dropped; exact p when at most `EXACT_MAX_N` remain, else normal.
pub fn wilcoxon_signed_rank(x: &[f64], y: &[f64]) -> Result<WilcoxonResult, EvalError> {
    wilcoxon_signed_rank_with(x, y, EXACT_MAX_N)
}

pub fn wilcoxon_signed_rank_with(x: &[f64], y: &[f64], exact_max_n: usize) -> Result<WilcoxonResult, EvalError> {
    let ranks = signed_doubled_ranks(x, y)?;
    let n = ranks.len();
    // fold from +0.0: an empty f64 sum is -0.0
    let statistic = ranks.iter().filter(|r| r.1).fold(0.0, |w, r| w + r.0 as f64 / 2.0);
    let (p, method) = if n == 0 {
        (1.0, WilcoxonMethod::NoDiscordantPairs)
    } else if n <= exact_max_n {
        (exact_p(&ranks), WilcoxonMethod::Exact)
    } else {
        (normal_p(&ranks), WilcoxonMethod::Normal)
    };
    Ok(WilcoxonResult {
        statistic,
        p_two_sided: p,
        n_effective: n,
        method,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McNemarResult {
    /// Pairs where only the first run was correct.
    pub only_first: usize,
    /// Pairs where only the second run was correct.
    pub only_second: usize,
    pub statistic: f64,
    pub p_value: f64,
}

/// McNemar's chi-squared test with continuity correction, for paired
/// binary outcomes.
pub fn mcnemar(x: &[bool], y: &[bool]) -> Result<McNemarResult, EvalError> {
    if x.len() != y.len() {
        return Err(EvalError::LengthMismatch { left: x.len(), right: y.len() });
    }
    let b = x.iter().zip(y).filter(|(a, b)| **a && !**b).count();
    let c = x.iter().zip(y).filter(|(a, b)| !**a && **b).count();
    if b + c == 0 {
        return Ok(McNemarResult { only_first: b, only_second: c, statistic: 0.0, p_value: 1.0 });
    }
    let diff = ((b as f64 - c as f64).abs() - 1.0).max(0.0);
    let statistic = diff * diff / (b + c) as f64;
    Ok(McNemarResult {
        only_first: b,
        only_second: c,
        statistic,
        // Survival function of chi-squared with one degree of freedom.
        p_value: erfc((statistic / 2.0).sqrt()),
    })
}
