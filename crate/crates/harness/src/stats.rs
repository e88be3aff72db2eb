//! Sample statistics and the percentile bootstrap.

use purestat::ensembles::trial_rng;
use rand::Rng;

/// Resamples used by the summaries.
pub const BOOTSTRAP_RESAMPLES: usize = 1000;

/// Mean and standard error of the mean (0 for fewer than two values).
pub fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Fraction of `true` flags and its binomial standard error.
pub fn fraction(flags: impl IntoIterator<Item = bool>) -> (f64, f64) {
    let (hits, n) = flags
        .into_iter()
        .fold((0usize, 0usize), |(h, n), f| (h + f as usize, n + 1));
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let p = hits as f64 / n as f64;
    (p, (p * (1.0 - p) / n as f64).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bootstrap {
    pub mean: f64,
    /// Standard deviation of the resampled means.
    pub stderr: f64,
    /// 2.5% percentile of the resampled means.
    pub ci_low: f64,
    /// 97.5% percentile of the resampled means.
    pub ci_high: f64,
}

/// Percentile bootstrap of the mean with `resamples` draws from a seeded
/// stream.
pub fn bootstrap(values: &[f64], resamples: usize, seed: u64) -> Bootstrap {
    let n = values.len();
    if n == 0 {
        return Bootstrap {
            mean: f64::NAN,
            stderr: f64::NAN,
            ci_low: f64::NAN,
            ci_high: f64::NAN,
        };
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 || resamples == 0 {
        return Bootstrap {
            mean,
            stderr: 0.0,
            ci_low: mean,
            ci_high: mean,
        };
    }
    let mut rng = trial_rng(seed, 0);
    let mut means: Vec<f64> = (0..resamples)
        .map(|_| (0..n).map(|_| values[rng.random_range(0..n)]).sum::<f64>() / n as f64)
        .collect();
    means.sort_by(f64::total_cmp);
    let (m, _) = mean_stderr(&means);
    let sd =
        (means.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (resamples - 1).max(1) as f64).sqrt();
    let pick = |q: f64| means[((q * resamples as f64).floor() as usize).min(resamples - 1)];
    Bootstrap {
        mean,
        stderr: sd,
        ci_low: pick(0.025),
        ci_high: pick(0.975),
    }
}
