//! Autocorrelation times and jackknife-over-bins error bars.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{pairwise_sum, Scalar};

/// Minimum series length accepted by [`autocorrelation`].
pub const MIN_SERIES: usize = 100;
/// Default upper bound on the number of jackknife bins.
pub const MAX_BINS: usize = 50;

/// Mean with error bar of a scalar observable.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimatorResult<T> {
    pub mean: T,
    pub std_error: T,
    /// Integrated autocorrelation time in units of the sample spacing,
    /// floored at 0.5.
    pub tau_int: T,
    pub count: usize,
}

impl<T: Scalar> EstimatorResult<T> {
    /// `|mean - value|` in units of the standard error (infinite when the
    /// error is zero and the values differ).
    pub fn deviation(&self, value: T) -> T {
        let d = (self.mean - value).abs();
        if d == T::zero() {
            T::zero()
        } else {
            d / self.std_error
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum AutocorrFlag {
    Ok,
    /// The series has zero variance; `tau` is reported as 0.5.
    Constant,
    /// `tau < 0.5`: neighboring samples are anti-correlated.
    AntiCorrelated,
    /// No window satisfied `W >= 6 tau(W)` before half the series length.
    Unconverged,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AutocorrTime<T> {
    pub tau: T,
    pub window: usize,
    pub flag: AutocorrFlag,
}

/// Integrated autocorrelation time `1/2 + sum_{t=1}^{W} rho(t)` with the
/// self-consistent window: the smallest `W` with `W >= 6 tau(W)`.
pub fn autocorrelation<T: Scalar>(series: &[T]) -> Result<AutocorrTime<T>> {
    let n = series.len();
    if n < MIN_SERIES {
        return Err(Error::InsufficientSamples {
            needed: MIN_SERIES,
            got: n,
        });
    }
    let mean = pairwise_sum(series) / T::of_usize(n);
    let centered: Vec<T> = series.iter().map(|&x| x - mean).collect();
    let c0 = pairwise_sum(&centered.iter().map(|&x| x * x).collect::<Vec<_>>()) / T::of_usize(n);
    let scale = series.iter().fold(T::zero(), |m, &x| m.max(x.abs()));
    if c0 <= T::epsilon() * T::epsilon() * scale * scale || c0 == T::zero() {
        return Ok(AutocorrTime {
            tau: T::of(0.5),
            window: 0,
            flag: AutocorrFlag::Constant,
        });
    }
    let half = T::of(0.5);
    let six = T::of(6.0);
    let mut tau = half;
    for w in 1..=n / 2 {
        let mut c = T::zero();
        for i in 0..n - w {
            c += centered[i] * centered[i + w];
        }
        tau += c / T::of_usize(n) / c0;
        if T::of_usize(w) >= six * tau {
            let flag = if tau < half {
                AutocorrFlag::AntiCorrelated
            } else {
                AutocorrFlag::Ok
            };
            return Ok(AutocorrTime { tau, window: w, flag });
        }
    }
    Ok(AutocorrTime {
        tau,
        window: n / 2,
        flag: AutocorrFlag::Unconverged,
    })
}

/// `tau` clamped to the `[0.5, inf)` range used in error bars.
pub(crate) fn effective_tau<T: Scalar>(series: &[T]) -> T {
    match autocorrelation(series) {
        Ok(a) => a.tau.max(T::of(0.5)),
        Err(_) => T::of(0.5),
    }
}

/// Number of bins for `n` samples with autocorrelation time `tau`: each
/// bin spans at least `10 tau` samples, clamped to `[2, max_bins]`.
pub fn bin_count<T: Scalar>(n: usize, tau: T, max_bins: usize) -> usize {
    let width = (T::of(10.0) * tau).ceil().to_usize().unwrap_or(usize::MAX).max(1);
    (n / width).clamp(2, max_bins.max(2))
}

/// Jackknife over time bins of a smooth function of sample means.
///
/// `series` are equally long columns; `f` maps the vector of their means
/// to the estimate. Returns the full-sample estimate and the jackknife
/// standard error. Samples beyond the last complete bin are dropped.
pub fn jackknife<T: Scalar, F>(series: &[&[T]], bins: usize, f: F) -> Result<(T, T)>
where
    F: Fn(&[T]) -> T,
{
    let n = series.first().map_or(0, |s| s.len());
    if series.iter().any(|s| s.len() != n) {
        return Err(Error::InvalidParams("jackknife columns differ in length".into()));
    }
    if bins < 2 || n < bins {
        return Err(Error::InsufficientSamples {
            needed: bins.max(2),
            got: n,
        });
    }
    let width = n / bins;
    let used = width * bins;
    let k = series.len();
    // bin sums, bins x columns
    let mut sums = vec![T::zero(); bins * k];
    for (c, s) in series.iter().enumerate() {
        for b in 0..bins {
            sums[b * k + c] = pairwise_sum(&s[b * width..(b + 1) * width]);
        }
    }
    let mut total = vec![T::zero(); k];
    for c in 0..k {
        let col: Vec<T> = (0..bins).map(|b| sums[b * k + c]).collect();
        total[c] = pairwise_sum(&col);
    }
    let full_means: Vec<T> = total.iter().map(|&t| t / T::of_usize(used)).collect();
    let estimate = f(&full_means);
    let rest = T::of_usize(used - width);
    let mut leave_out = Vec::with_capacity(bins);
    let mut means = vec![T::zero(); k];
    for b in 0..bins {
        for c in 0..k {
            means[c] = (total[c] - sums[b * k + c]) / rest;
        }
        leave_out.push(f(&means));
    }
    let avg = pairwise_sum(&leave_out) / T::of_usize(bins);
    let ss = pairwise_sum(&leave_out.iter().map(|&x| (x - avg) * (x - avg)).collect::<Vec<_>>());
    let var = ss * T::of_usize(bins - 1) / T::of_usize(bins);
    Ok((estimate, var.sqrt()))
}

/// Jackknife estimate of `f(means)` with bins sized from the largest
/// autocorrelation time among `tau_series`.
pub fn jackknife_estimate<T: Scalar, F>(series: &[&[T]], tau_series: &[&[T]], f: F) -> Result<EstimatorResult<T>>
where
    F: Fn(&[T]) -> T,
{
    let n = series.first().map_or(0, |s| s.len());
    let tau = tau_series
        .iter()
        .map(|s| effective_tau(s))
        .fold(T::of(0.5), |a, b| a.max(b));
    let bins = bin_count(n, tau, MAX_BINS);
    let (mean, std_error) = jackknife(series, bins, f)?;
    Ok(EstimatorResult {
        mean,
        std_error,
        tau_int: tau,
        count: n,
    })
}

/// Sample mean with autocorrelation-aware error.
pub fn mean_estimate<T: Scalar>(series: &[T]) -> Result<EstimatorResult<T>> {
    jackknife_estimate(&[series], &[series], |m| m[0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ar1(rho: f64, n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x = 0.0;
        let s = (1.0 - rho * rho).sqrt();
        (0..n)
            .map(|_| {
                let z: f64 = rng.sample(rand::distributions::Standard);
                // centered uniform has variance 1/12
                let z = (z - 0.5) * 12f64.sqrt();
                x = rho * x + s * z;
                x
            })
            .collect()
    }

    #[test]
    fn iid_tau_is_half() {
        let a = autocorrelation(&ar1(0.0, 100_000, 1)).unwrap();
        assert!((a.tau - 0.5).abs() < 0.05, "{a:?}");
    }

    #[test]
    fn ar1_tau_matches_closed_form() {
        let a = autocorrelation(&ar1(0.9, 400_000, 2)).unwrap();
        let expected = 1.9 / (2.0 * 0.1);
        assert!((a.tau - expected).abs() < 0.15 * expected, "{a:?}");
        assert_eq!(a.flag, AutocorrFlag::Ok);
    }

    #[test]
    fn alternating_series_is_anticorrelated() {
        let s: Vec<f64> = (0..200).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let a = autocorrelation(&s).unwrap();
        assert!(a.tau < 0.5);
        assert_eq!(a.flag, AutocorrFlag::AntiCorrelated);
    }

    #[test]
    fn constant_series_is_flagged() {
        let a = autocorrelation(&[3.0f64; 150]).unwrap();
        assert_eq!(a.flag, AutocorrFlag::Constant);
        assert_eq!(a.tau, 0.5);
        assert!(autocorrelation(&[1.0f64; 10]).is_err());
    }

    #[test]
    fn jackknife_of_mean_is_standard_error_for_iid() {
        let s = ar1(0.0, 50_000, 3);
        let r = mean_estimate(&s).unwrap();
        let naive = (1.0 / s.len() as f64).sqrt();
        assert!((r.std_error / naive - 1.0).abs() < 0.3, "{r:?}");
        assert!(r.mean.abs() < 4.0 * naive);
    }

    #[test]
    fn jackknife_error_grows_with_correlation() {
        let s = ar1(0.9, 50_000, 4);
        let r = mean_estimate(&s).unwrap();
        let naive = (1.0 / s.len() as f64).sqrt();
        // sqrt(2 tau) = sqrt(19)
        assert!(r.std_error / naive > 3.0, "{r:?}");
    }

    #[test]
    fn bins_are_clamped() {
        assert_eq!(bin_count(100_000, 0.5, 50), 50);
        assert_eq!(bin_count(100, 20.0, 50), 2);
        assert_eq!(bin_count(1000, 5.0, 50), 20);
    }

    #[test]
    fn jackknife_linear_function_is_exact() {
        let a: Vec<f64> = (0..100).map(|i| i as f64).collect();
        let b: Vec<f64> = (0..100).map(|i| 2.0 * i as f64).collect();
        let (est, _) = jackknife(&[&a, &b], 10, |m| m[1] - m[0]).unwrap();
        assert!((est - 49.5).abs() < 1e-12);
    }
}
