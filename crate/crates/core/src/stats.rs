//! Small statistical helpers: batch means and ordinary least squares.

use serde::Serialize;

use crate::error::{Error, Result};

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub count: usize,
}

/// Mean and standard error of independent samples.
pub fn mean_estimate(samples: &[f64]) -> MeanEstimate {
    let n = samples.len();
    if n == 0 {
        return MeanEstimate {
            mean: f64::NAN,
            stderr: f64::NAN,
            count: 0,
        };
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    let stderr = if n > 1 {
        let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        (var / n as f64).sqrt()
    } else {
        f64::NAN
    };
    MeanEstimate {
        mean,
        stderr,
        count: n,
    }
}

/// Running mean and variance (Welford).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Welford {
    count: u64,
    mean: f64,
    m2: f64,
}

impl Welford {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn merge(&mut self, other: &Welford) {
        if other.count == 0 {
            return;
        }
        let n = self.count + other.count;
        let delta = other.mean - self.mean;
        self.mean += delta * other.count as f64 / n as f64;
        self.m2 += other.m2 + delta * delta * self.count as f64 * other.count as f64 / n as f64;
        self.count = n;
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            f64::NAN
        } else {
            self.m2 / (self.count - 1) as f64
        }
    }

    pub fn estimate(&self) -> MeanEstimate {
        MeanEstimate {
            mean: self.mean,
            stderr: (self.variance() / self.count as f64).sqrt(),
            count: self.count as usize,
        }
    }
}

/// Splits a correlated series into `batches` contiguous blocks of equal
/// length (dropping the remainder at the front) and returns the mean of block
/// means with its standard error.
pub fn batch_means(series: &[f64], batches: usize) -> Result<MeanEstimate> {
    if batches < 2 {
        return Err(Error::InvalidParameter(
            "batch means need at least 2 batches".into(),
        ));
    }
    let len = series.len() / batches;
    if len == 0 {
        return Err(Error::InvalidParameter(format!(
            "{} samples cannot fill {batches} batches",
            series.len()
        )));
    }
    let skip = series.len() - len * batches;
    let means: Vec<f64> = series[skip..]
        .chunks_exact(len)
        .map(|c| c.iter().sum::<f64>() / len as f64)
        .collect();
    Ok(mean_estimate(&means))
}

/// Kolmogorov–Smirnov distance between the empirical law of `samples` and
/// `cdf`. Sorts `samples` in place.
pub fn ks_distance(samples: &mut [f64], cdf: impl Fn(f64) -> f64) -> f64 {
    samples.sort_by(f64::total_cmp);
    let n = samples.len() as f64;
    samples
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max((i as f64 + 1.0) / n - f)
        })
        .fold(0.0, f64::max)
}

/// Ordinary least-squares line `y ≈ intercept + slope x`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    /// `NaN` with only two points.
    pub slope_stderr: f64,
    pub residuals: Vec<f64>,
}

pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    weighted_linear_fit(x, y, None)
}

/// Least squares with weights `1/σ²` when `sigma` is given; the slope error
/// then comes from the weights alone.
pub fn weighted_linear_fit(x: &[f64], y: &[f64], sigma: Option<&[f64]>) -> Result<LinearFit> {
    let n = x.len();
    if n != y.len() || sigma.is_some_and(|s| s.len() != n) {
        return Err(Error::InvalidParameter(
            "fit inputs differ in length".into(),
        ));
    }
    if n < 2 {
        return Err(Error::InvalidParameter(
            "a line fit needs at least 2 points".into(),
        ));
    }
    let w: Vec<f64> = match sigma {
        Some(s) => s.iter().map(|v| 1.0 / (v * v)).collect(),
        None => vec![1.0; n],
    };
    if w.iter().any(|v| !v.is_finite() || *v <= 0.0) {
        return Err(Error::InvalidParameter(
            "fit uncertainties must be positive".into(),
        ));
    }
    let sw: f64 = w.iter().sum();
    let xbar = w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() / sw;
    let ybar = w.iter().zip(y).map(|(a, b)| a * b).sum::<f64>() / sw;
    let sxx: f64 = w.iter().zip(x).map(|(a, b)| a * (b - xbar).powi(2)).sum();
    let sxy: f64 = (0..n).map(|i| w[i] * (x[i] - xbar) * (y[i] - ybar)).sum();
    let scale: f64 = w.iter().zip(x).map(|(a, b)| a * b * b).sum::<f64>();
    if !(sxx > 1e-12 * scale) {
        return Err(Error::IllConditioned {
            condition: if sxx > 0.0 {
                scale / sxx
            } else {
                f64::INFINITY
            },
            reason: "abscissae are (nearly) identical".into(),
        });
    }
    let slope = sxy / sxx;
    let intercept = ybar - slope * xbar;
    let residuals: Vec<f64> = (0..n).map(|i| y[i] - intercept - slope * x[i]).collect();
    let slope_stderr = match sigma {
        Some(_) => (1.0 / sxx).sqrt(),
        None if n > 2 => {
            let rss: f64 = residuals.iter().map(|r| r * r).sum();
            (rss / (n - 2) as f64 / sxx).sqrt()
        }
        None => f64::NAN,
    };
    Ok(LinearFit {
        slope,
        intercept,
        slope_stderr,
        residuals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn exact_line() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v| 2.5 * v - 1.0).collect();
        let fit = linear_fit(&x, &y).unwrap();
        assert!((fit.slope - 2.5).abs() < 1e-14);
        assert!((fit.intercept + 1.0).abs() < 1e-14);
        assert!(fit.slope_stderr < 1e-14);
    }

    #[test]
    fn degenerate_abscissae() {
        assert!(matches!(
            linear_fit(&[1.0, 1.0, 1.0], &[0.0, 1.0, 2.0]),
            Err(Error::IllConditioned { .. })
        ));
    }

    #[test]
    fn batch_means_of_constant_blocks() {
        let series: Vec<f64> = (0..100).map(|i| (i / 25) as f64).collect();
        let est = batch_means(&series, 4).unwrap();
        assert_eq!(est.mean, 1.5);
        assert_eq!(est.count, 4);
        assert!(batch_means(&series, 1000).is_err());
    }

    proptest! {
        #[test]
        fn welford_matches_two_pass(xs in proptest::collection::vec(-1e3f64..1e3, 2..200), split in 0usize..200) {
            let split = split.min(xs.len());
            let mut a = Welford::default();
            let mut b = Welford::default();
            for &x in &xs[..split] { a.push(x); }
            for &x in &xs[split..] { b.push(x); }
            a.merge(&b);
            let direct = mean_estimate(&xs);
            prop_assert!((a.mean() - direct.mean).abs() <= 1e-9 * (1.0 + direct.mean.abs()));
            let e = a.estimate();
            prop_assert!((e.stderr - direct.stderr).abs() <= 1e-7 * (1.0 + direct.stderr));
        }
    }
}
