//! Mass fits of correlation profiles and log-log exponent fits.

use serde::{Deserialize, Serialize};

use super::profile::{CorrelationProfile, ProfileAccumulator};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Power of `r` multiplied into the profile before the log fit. Critical
/// correlations decay as `r^{-1/4}`.
pub const CRITICAL_PREFACTOR: f64 = 0.25;
/// Points with relative error above this are dropped from manual windows.
pub const MANUAL_REL_ERROR: f64 = 0.5;
/// The automatic window ends before the first point above this.
pub const AUTO_REL_ERROR: f64 = 0.25;
/// Fewest points accepted by any fit.
pub const MIN_FIT_POINTS: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum FitWindow {
    /// `r_min = max(4, 2/m0)` from a pilot fit; `r_max` is the last
    /// separation before the noise floor.
    Auto,
    Range { r_min: usize, r_max: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MassFit<T> {
    /// `max(0, -slope)`.
    pub mass: T,
    /// Fitted slope of `ln(G(r) r^p)` against `r`.
    pub slope: T,
    pub log_prefactor: T,
    pub r_min: usize,
    pub r_max: usize,
    pub points: usize,
    pub residual_rms: T,
    pub mass_std_error: T,
    /// Separations dropped because the value was non-positive or too noisy.
    pub excluded: Vec<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearFit<T> {
    pub slope: T,
    pub intercept: T,
    pub slope_std_error: T,
    pub intercept_std_error: T,
    pub residual_rms: T,
}

/// Least squares line through `(x, y)`. With `sigma`, points are weighted
/// by `1/sigma^2` and the errors come from the weights; otherwise they come
/// from the residual scatter.
pub fn linear_fit<T: Scalar>(x: &[T], y: &[T], sigma: Option<&[T]>) -> Result<LinearFit<T>> {
    let n = x.len();
    if y.len() != n || sigma.is_some_and(|s| s.len() != n) {
        return Err(Error::SizeMismatch {
            expected: n,
            got: y.len(),
        });
    }
    if n < 2 {
        return Err(Error::Fit(format!("need at least 2 points, got {n}")));
    }
    let w: Vec<T> = match sigma {
        Some(s) => s.iter().map(|&e| T::one() / (e * e)).collect(),
        None => vec![T::one(); n],
    };
    let sw: T = w.iter().copied().sum();
    let xm = x.iter().zip(&w).map(|(&a, &b)| a * b).sum::<T>() / sw;
    let ym = y.iter().zip(&w).map(|(&a, &b)| a * b).sum::<T>() / sw;
    let mut sxx = T::zero();
    let mut sxy = T::zero();
    for i in 0..n {
        sxx += w[i] * (x[i] - xm) * (x[i] - xm);
        sxy += w[i] * (x[i] - xm) * (y[i] - ym);
    }
    if !(sxx > T::zero()) || !sxx.is_finite() {
        return Err(Error::Fit("abscissae are degenerate".into()));
    }
    let slope = sxy / sxx;
    let intercept = ym - slope * xm;
    let resid: Vec<T> = (0..n).map(|i| y[i] - intercept - slope * x[i]).collect();
    let residual_rms = (resid.iter().map(|&r| r * r).sum::<T>() / T::of_usize(n)).sqrt();
    let (var_slope, var_icpt) = if sigma.is_some() {
        (T::one() / sxx, T::one() / sw + xm * xm / sxx)
    } else if n > 2 {
        let s2 = resid.iter().map(|&r| r * r).sum::<T>() / T::of_usize(n - 2);
        (s2 / sxx, s2 * (T::one() / T::of_usize(n) + xm * xm / sxx))
    } else {
        (T::zero(), T::zero())
    };
    Ok(LinearFit {
        slope,
        intercept,
        slope_std_error: var_slope.sqrt(),
        intercept_std_error: var_icpt.sqrt(),
        residual_rms,
    })
}

struct Window {
    idx: Vec<usize>,
    excluded: Vec<usize>,
}

fn log_point<T: Scalar>(r: usize, g: T, power: T) -> T {
    g.ln() + power * T::of_usize(r).ln()
}

fn fit_indices<T: Scalar>(profile: &CorrelationProfile<T>, idx: &[usize], power: T) -> Result<LinearFit<T>> {
    let x: Vec<T> = idx.iter().map(|&i| T::of_usize(profile.separations[i])).collect();
    let y: Vec<T> = idx
        .iter()
        .map(|&i| log_point(profile.separations[i], profile.values[i].mean, power))
        .collect();
    let sig: Vec<T> = idx
        .iter()
        .map(|&i| profile.values[i].std_error / profile.values[i].mean)
        .collect();
    let weighted = sig.iter().all(|&s| s > T::zero() && s.is_finite());
    linear_fit(&x, &y, weighted.then_some(sig.as_slice()))
}

fn choose_window<T: Scalar>(profile: &CorrelationProfile<T>, window: FitWindow, power: T) -> Result<Window> {
    let rel = |i: usize| profile.values[i].std_error / profile.values[i].mean.abs();
    match window {
        FitWindow::Range { r_min, r_max } => {
            if r_min >= r_max {
                return Err(Error::Fit(format!("empty window [{r_min}, {r_max}]")));
            }
            let mut idx = Vec::new();
            let mut excluded = Vec::new();
            for (i, &r) in profile.separations.iter().enumerate() {
                if r < r_min || r > r_max {
                    continue;
                }
                if !(profile.values[i].mean > T::zero()) {
                    return Err(Error::Fit(format!("non-positive correlation at r = {r} inside the window")));
                }
                if rel(i) > T::of(MANUAL_REL_ERROR) {
                    excluded.push(r);
                } else {
                    idx.push(i);
                }
            }
            Ok(Window { idx, excluded })
        }
        FitWindow::Auto => {
            let excluded: Vec<usize> = profile
                .separations
                .iter()
                .zip(&profile.values)
                .filter(|(_, v)| !(v.mean > T::zero()))
                .map(|(&r, _)| r)
                .collect();
            // usable prefix: positive and below the noise floor
            let mut usable = Vec::new();
            for (i, &r) in profile.separations.iter().enumerate() {
                if r == 0 {
                    continue;
                }
                if !(profile.values[i].mean > T::zero()) || !(rel(i) < T::of(AUTO_REL_ERROR)) {
                    break;
                }
                usable.push(i);
            }
            if usable.len() < MIN_FIT_POINTS {
                return Ok(Window { idx: usable, excluded });
            }
            let pilot = fit_indices(profile, &usable, power)?;
            let m0 = -pilot.slope;
            let target = if m0 > T::zero() {
                (T::of(2.0) / m0).max(T::of(4.0))
            } else {
                T::of(4.0)
            };
            let mut idx: Vec<usize> = usable
                .iter()
                .copied()
                .filter(|&i| T::of_usize(profile.separations[i]) >= target)
                .collect();
            if idx.len() < MIN_FIT_POINTS {
                idx = usable[usable.len() - MIN_FIT_POINTS..].to_vec();
            }
            Ok(Window { idx, excluded })
        }
    }
}

/// Fit `G(r) r^{1/4} ~ A exp(-m r)`.
pub fn fit_mass<T: Scalar>(profile: &CorrelationProfile<T>, window: FitWindow) -> Result<MassFit<T>> {
    fit_mass_with_prefactor(profile, window, T::of(CRITICAL_PREFACTOR))
}

/// Fit `G(r) r^power ~ A exp(-m r)` by weighted least squares in `ln G`.
pub fn fit_mass_with_prefactor<T: Scalar>(
    profile: &CorrelationProfile<T>,
    window: FitWindow,
    power: T,
) -> Result<MassFit<T>> {
    let w = choose_window(profile, window, power)?;
    if w.idx.len() < MIN_FIT_POINTS {
        return Err(Error::Fit(format!(
            "{} usable points in the window, need {MIN_FIT_POINTS}",
            w.idx.len()
        )));
    }
    let fit = fit_indices(profile, &w.idx, power)?;
    Ok(MassFit {
        mass: (-fit.slope).max(T::zero()),
        slope: fit.slope,
        log_prefactor: fit.intercept,
        r_min: profile.separations[w.idx[0]],
        r_max: profile.separations[*w.idx.last().unwrap()],
        points: w.idx.len(),
        residual_rms: fit.residual_rms,
        mass_std_error: fit.slope_std_error,
        excluded: w.excluded,
    })
}

/// Mass fit whose error is the jackknife spread of the slope over
/// leave-one-bin-out profiles. The window and weights are fixed by the
/// full-sample fit.
pub fn fit_mass_jackknife<T: Scalar>(
    acc: &ProfileAccumulator<T>,
    window: FitWindow,
    power: T,
) -> Result<MassFit<T>> {
    let profile = acc.finish()?;
    let mut fit = fit_mass_with_prefactor(&profile, window, power)?;
    let seps = acc.separations();
    let idx: Vec<usize> = (0..seps.len())
        .filter(|&i| seps[i] >= fit.r_min && seps[i] <= fit.r_max && !fit.excluded.contains(&seps[i]))
        .collect();
    let x: Vec<T> = idx.iter().map(|&i| T::of_usize(seps[i])).collect();
    let sig: Vec<T> = idx
        .iter()
        .map(|&i| profile.values[i].std_error / profile.values[i].mean)
        .collect();
    let weighted = sig.iter().all(|&s| s > T::zero() && s.is_finite());
    let (_, leave) = acc.jackknife_profiles()?;
    let mut slopes = Vec::with_capacity(leave.len());
    for vals in &leave {
        if idx.iter().any(|&i| !(vals[i] > T::zero())) {
            return Err(Error::Fit("a jackknife profile is non-positive inside the window".into()));
        }
        let y: Vec<T> = idx.iter().map(|&i| log_point(seps[i], vals[i], power)).collect();
        slopes.push(linear_fit(&x, &y, weighted.then_some(sig.as_slice()))?.slope);
    }
    let nb = T::of_usize(slopes.len());
    let avg = slopes.iter().copied().sum::<T>() / nb;
    let ss: T = slopes.iter().map(|&s| (s - avg) * (s - avg)).sum();
    fit.mass_std_error = (ss * (nb - T::one()) / nb).sqrt();
    Ok(fit)
}

/// Power-law fit `y = C x^slope` in log-log coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExponentFit<T> {
    pub slope: T,
    pub log_prefactor: T,
    pub slope_std_error: T,
    pub residual_rms: T,
}

/// Log-log least squares of `y` against `x`, weighted by the relative
/// errors of `y` when given and all positive.
pub fn exponent_fit<T: Scalar>(x: &[T], y: &[T], y_err: Option<&[T]>) -> Result<ExponentFit<T>> {
    if x.len() < MIN_FIT_POINTS {
        return Err(Error::Fit(format!("need at least {MIN_FIT_POINTS} points, got {}", x.len())));
    }
    if x.iter().chain(y).any(|&v| !(v > T::zero())) {
        return Err(Error::Fit("log-log fit needs positive data".into()));
    }
    let lx: Vec<T> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<T> = y.iter().map(|v| v.ln()).collect();
    let sig: Option<Vec<T>> = y_err.map(|e| e.iter().zip(y).map(|(&e, &v)| e / v).collect());
    let sig = sig.filter(|s: &Vec<T>| s.iter().all(|&v| v > T::zero() && v.is_finite()));
    let f = linear_fit(&lx, &ly, sig.as_deref())?;
    Ok(ExponentFit {
        slope: f.slope,
        log_prefactor: f.intercept,
        slope_std_error: f.slope_std_error,
        residual_rms: f.residual_rms,
    })
}

/// Exponent of `<s> ~ H^slope`.
pub fn magnetization_exponent<T: Scalar>(big_h: &[T], magnetization: &[T], err: Option<&[T]>) -> Result<ExponentFit<T>> {
    exponent_fit(big_h, magnetization, err)
}
