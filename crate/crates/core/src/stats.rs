//! Streaming moments and autocorrelation-aware error bars.

use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

/// Mergeable running mean and variance (Welford / Chan et al.).
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RunningStats {
    pub count: u64,
    pub mean: f64,
    m2: f64,
}

impl RunningStats {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let d = x - self.mean;
        self.mean += d / self.count as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn merge(&mut self, other: &RunningStats) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let n = (self.count + other.count) as f64;
        let d = other.mean - self.mean;
        self.mean += d * other.count as f64 / n;
        self.m2 += other.m2 + d * d * self.count as f64 * other.count as f64 / n;
        self.count += other.count;
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            return f64::NAN;
        }
        self.m2 / (self.count - 1) as f64
    }

    /// Standard error assuming independent samples.
    pub fn std_error(&self) -> f64 {
        (self.variance() / self.count as f64).sqrt()
    }
}

impl FromIterator<f64> for RunningStats {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = Self::new();
        for x in iter {
            s.push(x);
        }
        s
    }
}

/// Mean, batch-means standard error and effective sample size of a trace.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceSummary {
    pub mean: f64,
    pub variance: f64,
    pub std_error: f64,
    pub ess: f64,
    pub len: usize,
}

/// Combines summaries of independent chains, weighting by length.
pub fn pool_independent(parts: &[TraceSummary]) -> TraceSummary {
    let total: usize = parts.iter().map(|p| p.len).sum();
    let n = total as f64;
    let mean = parts.iter().map(|p| p.mean * p.len as f64).sum::<f64>() / n;
    let variance = parts.iter().map(|p| p.variance * p.len as f64).sum::<f64>() / n;
    let se2 = parts.iter().map(|p| (p.std_error * p.len as f64 / n).powi(2)).sum::<f64>();
    TraceSummary {
        mean,
        variance,
        std_error: se2.sqrt(),
        ess: parts.iter().map(|p| p.ess).sum(),
        len: total,
    }
}

/// Batch-means summary with `⌊√n⌋` batches (at least 2).
pub fn batch_means(trace: &[f64]) -> TraceSummary {
    let n = trace.len();
    let all: RunningStats = trace.iter().copied().collect();
    let batches = ((n as f64).sqrt().floor() as usize).max(2).min(n.max(1));
    let size = n / batches.max(1);
    if size == 0 || batches < 2 {
        return TraceSummary {
            mean: all.mean,
            variance: all.variance(),
            std_error: f64::NAN,
            ess: f64::NAN,
            len: n,
        };
    }
    let means: RunningStats = (0..batches)
        .map(|b| trace[b * size..(b + 1) * size].iter().sum::<f64>() / size as f64)
        .collect();
    let se = (means.variance() / batches as f64).sqrt();
    let var = all.variance();
    let ess = if se > 0.0 { (var / (se * se)).min(n as f64) } else { n as f64 };
    TraceSummary {
        mean: all.mean,
        variance: var,
        std_error: se,
        ess,
        len: n,
    }
}

/// Integrated autocorrelation time by Sokal's adaptive window (`c = 5`).
pub fn integrated_autocorr_time(trace: &[f64]) -> f64 {
    let n = trace.len();
    if n < 4 {
        return 1.0;
    }
    let mean = trace.iter().sum::<f64>() / n as f64;
    let c0 = trace.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n as f64;
    if c0 == 0.0 {
        return 1.0;
    }
    let mut tau = 1.0;
    for lag in 1..n / 2 {
        let c: f64 = (0..n - lag).map(|i| (trace[i] - mean) * (trace[i + lag] - mean)).sum::<f64>() / n as f64;
        tau += 2.0 * c / c0;
        if (lag as f64) >= 5.0 * tau {
            break;
        }
    }
    tau.max(1.0)
}

/// Ordinary least-squares slope with its standard error.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let resid: Vec<f64> = xs.iter().zip(ys).map(|(x, y)| y - intercept - slope * x).collect();
    let s2 = resid.iter().map(|r| r * r).sum::<f64>() / (n - 2.0).max(1.0);
    (slope, intercept, (s2 / sxx).sqrt())
}
