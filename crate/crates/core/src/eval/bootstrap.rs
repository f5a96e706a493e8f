use super::sample::SplitMix64;

pub const DEFAULT_RESAMPLES: usize = 10_000;
pub const DEFAULT_BOOTSTRAP_SEED: u64 = 0x5EED;

/// Percentile bootstrap interval for a statistic of `n` items. `stat`
/// receives the resampled item indices (drawn with replacement).
pub fn bootstrap_ci<F>(n: usize, resamples: usize, seed: u64, level: f64, mut stat: F) -> Option<(f64, f64)>
where
    F: FnMut(&[usize]) -> f64,
{
    if n == 0 || resamples == 0 {
        return None;
    }
    let mut rng = SplitMix64::new(seed);
    let mut idx = vec![0usize; n];
    let mut values: Vec<f64> = (0..resamples)
        .map(|_| {
            for slot in idx.iter_mut() {
                *slot = rng.below(n as u64) as usize;
            }
            stat(&idx)
        })
        .collect();
    values.sort_by(f64::total_cmp);
    let alpha = (1.0 - level) / 2.0;
    Some((quantile(&values, alpha), quantile(&values, 1.0 - alpha)))
}

/// Linear-interpolated quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}
