//! Running moments, least squares on log-log data and bootstrap intervals.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pointcloud::substream_rng;

/// Count, mean and centred second moment. Merging uses Chan's pairwise
/// update, which is associative up to rounding.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub count: u64,
    pub mean: f64,
    pub m2: f64,
}

impl Aggregate {
    pub fn from_slice(xs: &[f64]) -> Self {
        let mut a = Self::default();
        for &x in xs {
            a.push(x);
        }
        a
    }

    pub fn push(&mut self, x: f64) {
        self.merge(&Aggregate { count: 1, mean: x, m2: 0.0 });
    }

    pub fn merge(&mut self, o: &Aggregate) {
        if o.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *o;
            return;
        }
        let n = (self.count + o.count) as f64;
        let (na, nb) = (self.count as f64, o.count as f64);
        let delta = o.mean - self.mean;
        self.mean += delta * nb / n;
        self.m2 += o.m2 + delta * delta * na * nb / n;
        self.count += o.count;
    }

    /// Unbiased sample variance; NaN below two samples.
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            f64::NAN
        } else {
            self.m2 / (self.count - 1) as f64
        }
    }

    pub fn std_dev(&self) -> f64 {
        self.variance().sqrt()
    }

    /// Standard error of the mean.
    pub fn std_err(&self) -> f64 {
        (self.variance() / self.count as f64).sqrt()
    }
}

/// Ordinary least squares `y = intercept + slope·x`.
pub fn ols(x: &[f64], y: &[f64]) -> Result<(f64, f64)> {
    let n = x.len();
    if n != y.len() || n < 2 {
        return Err(Error::Regression(format!("need at least two points, got {n}")));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::Regression("non-finite regression input".into()));
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    if !(sxx > 0.0) {
        return Err(Error::Regression("regressor has no spread".into()));
    }
    let slope = sxy / sxx;
    Ok((slope, my - slope * mx))
}

/// Empirical quantile with linear interpolation between order statistics.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let h = p.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let (lo, hi) = (h.floor() as usize, h.ceil() as usize);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub const BOOTSTRAP_RESAMPLES: usize = 1000;
/// Stream tag keeping bootstrap draws apart from sampling substreams.
const BOOTSTRAP_STREAM: u64 = 0xB007_0000_0000_0000;

/// Log-log fit of a per-group statistic against a regressor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogLogFit {
    pub slope: f64,
    pub intercept: f64,
    /// Percentile 95% bootstrap interval for the slope.
    pub ci: (f64, f64),
    pub resamples: usize,
}

/// OLS of `log stat(samples[i])` on `log x[i]`, with a bootstrap that
/// resamples within each group independently.
pub fn loglog_fit(x: &[f64], samples: &[Vec<f64>], stat: impl Fn(&[f64]) -> f64, seed: u64) -> Result<LogLogFit> {
    if x.len() != samples.len() {
        return Err(Error::Regression("one sample group per regressor value".into()));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = samples.iter().map(|s| stat(s).ln()).collect();
    let (slope, intercept) = ols(&lx, &ly)?;
    let mut rng = substream_rng(seed, BOOTSTRAP_STREAM);
    let mut slopes = Vec::with_capacity(BOOTSTRAP_RESAMPLES);
    let mut buf = Vec::new();
    let mut ys = vec![0.0; samples.len()];
    for _ in 0..BOOTSTRAP_RESAMPLES {
        for (y, s) in ys.iter_mut().zip(samples) {
            buf.clear();
            buf.extend((0..s.len()).map(|_| s[rng.random_range(0..s.len())]));
            *y = stat(&buf).ln();
        }
        // degenerate resamples (e.g. zero variance) are dropped
        if let Ok((b, _)) = ols(&lx, &ys) {
            slopes.push(b);
        }
    }
    if slopes.len() < BOOTSTRAP_RESAMPLES / 2 {
        return Err(Error::Regression("bootstrap resamples mostly degenerate".into()));
    }
    slopes.sort_by(f64::total_cmp);
    Ok(LogLogFit { slope, intercept, ci: (quantile(&slopes, 0.025), quantile(&slopes, 0.975)), resamples: slopes.len() })
}

pub fn mean(xs: &[f64]) -> f64 {
    Aggregate::from_slice(xs).mean
}

pub fn variance(xs: &[f64]) -> f64 {
    Aggregate::from_slice(xs).variance()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn moments_of_a_small_sample() {
        let a = Aggregate::from_slice(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(a.count, 4);
        assert_eq!(a.mean, 2.5);
        assert!((a.variance() - 5.0 / 3.0).abs() < 1e-15);
        assert!(Aggregate::from_slice(&[1.0]).variance().is_nan());
    }

    proptest! {
        #[test]
        fn merge_order_is_immaterial(xs in prop::collection::vec(-1e3f64..1e3, 2..200), cut in 0usize..200) {
            let cut = cut % xs.len();
            let whole = Aggregate::from_slice(&xs);
            let mut left = Aggregate::from_slice(&xs[..cut]);
            let right = Aggregate::from_slice(&xs[cut..]);
            let mut swapped = right;
            swapped.merge(&left);
            left.merge(&right);
            for m in [left, swapped] {
                prop_assert_eq!(m.count, whole.count);
                prop_assert!((m.mean - whole.mean).abs() <= 1e-12 * whole.mean.abs().max(1.0));
                prop_assert!((m.variance() - whole.variance()).abs() <= 1e-12 * whole.variance().max(1.0));
            }
        }
    }

    #[test]
    fn ols_recovers_a_line() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v| 0.5 + 2.0 * v).collect();
        let (b, a) = ols(&x, &y).unwrap();
        assert!((b - 2.0).abs() < 1e-14 && (a - 0.5).abs() < 1e-14);
        assert!(matches!(ols(&[1.0], &[1.0]), Err(Error::Regression(_))));
        assert!(matches!(ols(&[1.0, 1.0], &[1.0, 2.0]), Err(Error::Regression(_))));
    }

    #[test]
    fn quantiles_interpolate() {
        let s = [0.0, 1.0, 2.0, 3.0];
        assert_eq!(quantile(&s, 0.0), 0.0);
        assert_eq!(quantile(&s, 0.5), 1.5);
        assert_eq!(quantile(&s, 1.0), 3.0);
    }

    #[test]
    fn bootstrap_interval_covers_a_known_slope() {
        let mut rng = substream_rng(5, 0);
        let x = [10.0f64, 20.0, 40.0, 80.0];
        // mean grows like x^0.5 with unit noise
        let samples: Vec<Vec<f64>> = x.iter().map(|&v| (0..400).map(|_| v.sqrt() + rng.random_range(-1.0..1.0)).collect()).collect();
        let fit = loglog_fit(&x, &samples, mean, 1).unwrap();
        assert!(fit.ci.0 < 0.5 && 0.5 < fit.ci.1, "{fit:?}");
        assert!(fit.ci.1 - fit.ci.0 < 0.05);
        assert_eq!(fit, loglog_fit(&x, &samples, mean, 1).unwrap());
    }
}
