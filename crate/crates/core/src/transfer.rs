//! Column transfer matrices of Ising strips in a field.
//!
//! A column state is a `W`-bit integer; bit `w` set means the spin in row
//! `w` is `-1`, so state 0 is all plus. Intra-column energy and field are
//! split evenly between the two columns, which makes the matrix symmetric.
//! Entries are stored scaled by `exp(-log_scale)` so they stay finite.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::eigen::{symmetric_eigen, Eigen, Matrix};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const MAX_STRIP_WIDTH: usize = 14;
/// Relative tolerance of the positive-semidefiniteness checks.
pub const PSD_TOLERANCE: f64 = 1e-10;
/// Relative eigenvalue splitting below which the gap is reported degenerate.
pub const DEGENERACY_TOLERANCE: f64 = 1e-12;
/// A scan point is scaling-eligible when its gap exceeds this multiple of
/// the zero-field gap at the same width.
pub const ELIGIBILITY_FACTOR: f64 = 3.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum VerticalBoundary {
    Free,
    Periodic,
}

impl fmt::Display for VerticalBoundary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            VerticalBoundary::Free => "free",
            VerticalBoundary::Periodic => "periodic",
        })
    }
}

impl FromStr for VerticalBoundary {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "free" => Ok(VerticalBoundary::Free),
            "periodic" => Ok(VerticalBoundary::Periodic),
            other => Err(Error::Config(format!("unknown vertical boundary '{other}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StripSpec<T> {
    pub width: usize,
    pub vertical: VerticalBoundary,
    pub beta: T,
    pub big_h: T,
}

impl<T: Scalar> StripSpec<T> {
    pub fn new(width: usize, vertical: VerticalBoundary, beta: T, big_h: T) -> Result<Self> {
        let s = StripSpec {
            width,
            vertical,
            beta,
            big_h,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.width > MAX_STRIP_WIDTH {
            return Err(Error::InvalidParams(format!(
                "strip width must be in 1..={MAX_STRIP_WIDTH}, got {}",
                self.width
            )));
        }
        if !(self.beta > T::zero()) || !self.beta.is_finite() {
            return Err(Error::InvalidParams(format!("beta must be positive, got {}", self.beta)));
        }
        if !(self.big_h >= T::zero()) || !self.big_h.is_finite() {
            return Err(Error::InvalidParams(format!("H must be non-negative, got {}", self.big_h)));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        1 << self.width
    }
}

/// Spin in row `w` of column state `s`.
pub fn column_spin(s: usize, w: usize) -> i32 {
    if s >> w & 1 == 1 {
        -1
    } else {
        1
    }
}

/// `sum_w s_w` for every column state.
pub fn column_magnetization<T: Scalar>(width: usize) -> Vec<T> {
    (0..1usize << width)
        .map(|s| T::of(f64::from(width as i32 - 2 * s.count_ones() as i32)))
        .collect()
}

fn vertical_energy(s: usize, width: usize, vertical: VerticalBoundary) -> i32 {
    let mut e = 0;
    for w in 0..width.saturating_sub(1) {
        e += column_spin(s, w) * column_spin(s, w + 1);
    }
    if vertical == VerticalBoundary::Periodic && width > 1 {
        e += column_spin(s, width - 1) * column_spin(s, 0);
    }
    e
}

#[derive(Clone, Debug)]
pub struct TransferMatrix<T> {
    pub spec: StripSpec<T>,
    /// `exp(-log_scale)` times the transfer matrix.
    pub matrix: Matrix<T>,
    pub log_scale: T,
}

impl<T: Scalar> TransferMatrix<T> {
    /// Unscaled entry.
    pub fn entry(&self, s: usize, t: usize) -> T {
        self.matrix[(s, t)] * self.log_scale.exp()
    }
}

/// `T(s,t) = exp(beta s.t + beta/2 (E_v(s) + E_v(t)) + H/2 sum(s + t))`.
pub fn build_symmetric_transfer<T: Scalar>(spec: &StripSpec<T>) -> Result<TransferMatrix<T>> {
    spec.validate()?;
    let w = spec.width;
    let n = spec.dim();
    let half = T::of(0.5);
    // per-state half weights: beta/2 E_v + H/2 M
    let site: Vec<T> = (0..n)
        .map(|s| {
            let ev = T::of(f64::from(vertical_energy(s, w, spec.vertical)));
            let m = T::of(f64::from(w as i32 - 2 * s.count_ones() as i32));
            half * (spec.beta * ev + spec.big_h * m)
        })
        .collect();
    let log_scale = site[0] + site[0] + spec.beta * T::of_usize(w);
    let matrix = Matrix::from_fn(n, |s, t| {
        let overlap = T::of(f64::from(w as i32 - 2 * (s ^ t).count_ones() as i32));
        (spec.beta * overlap + (site[s] + site[t]) - log_scale).exp()
    });
    Ok(TransferMatrix {
        spec: *spec,
        matrix,
        log_scale,
    })
}

#[derive(Clone, Debug)]
pub struct Spectrum<T> {
    /// Scaled eigenvalues, descending; multiply by `exp(log_scale)`.
    pub eigen: Eigen<T>,
    pub log_scale: T,
}

impl<T: Scalar> Spectrum<T> {
    /// Unscaled eigenvalues, descending.
    pub fn eigenvalues(&self) -> Vec<T> {
        let s = self.log_scale.exp();
        self.eigen.values.iter().map(|&v| v * s).collect()
    }

    pub fn top_eigenvector(&self) -> Option<Vec<T>> {
        self.eigen.vector(0)
    }

    /// `ln(lambda_1 / lambda_2)`.
    pub fn gap(&self) -> Result<T> {
        let v = &self.eigen.values;
        if v.len() < 2 {
            return Err(Error::Degenerate("a 1x1 matrix has no gap".into()));
        }
        if v[0] - v[1] <= T::of(DEGENERACY_TOLERANCE) * v[0].abs() || !(v[1] > T::zero()) {
            return Err(Error::Degenerate(format!("lambda1 = {}, lambda2 = {}", v[0], v[1])));
        }
        Ok((v[0] / v[1]).ln())
    }
}

/// Full eigendecomposition with the top eigenvector entrywise positive.
pub fn spectrum<T: Scalar>(tm: &TransferMatrix<T>) -> Result<Spectrum<T>> {
    Ok(Spectrum {
        eigen: symmetric_eigen(&tm.matrix, true)?,
        log_scale: tm.log_scale,
    })
}

/// Eigendecomposition of an arbitrary symmetric matrix (no scaling).
pub fn matrix_spectrum<T: Scalar>(m: &Matrix<T>) -> Result<Spectrum<T>> {
    Ok(Spectrum {
        eigen: symmetric_eigen(m, true)?,
        log_scale: T::zero(),
    })
}

/// Strip mass `ln(lambda_1 / lambda_2)`.
pub fn mass_gap<T: Scalar>(spec: &StripSpec<T>) -> Result<T> {
    let tm = build_symmetric_transfer(spec)?;
    let e = symmetric_eigen(&tm.matrix, false)?;
    Spectrum {
        eigen: e,
        log_scale: tm.log_scale,
    }
    .gap()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PositivityReport<T> {
    pub lambda1: T,
    pub min_eig_t: T,
    /// Smallest eigenvalue of `T - lambda_1 v_1 v_1^T`.
    pub min_eig_t_minus_p1: T,
    pub passed: bool,
}

/// Smallest eigenvalues of `T` and of `T - lambda_1 P_1`, where `P_1`
/// projects on the top eigenvector; both must be `>= -1e-10 lambda_1`.
/// Values are in the units of `m` (scaled for transfer matrices).
pub fn check_reflection_positivity<T: Scalar>(m: &Matrix<T>) -> Result<PositivityReport<T>> {
    let e = symmetric_eigen(m, true)?;
    let n = m.dim();
    let lambda1 = e.values[0];
    let min_eig_t = *e.values.last().unwrap();
    let v = e.vector(0).unwrap();
    let deflated = Matrix::from_fn(n, |i, j| m[(i, j)] - lambda1 * v[i] * v[j]);
    let d = symmetric_eigen(&deflated, false)?;
    let min_eig_t_minus_p1 = *d.values.last().unwrap();
    let floor = -T::of(PSD_TOLERANCE) * lambda1.abs();
    Ok(PositivityReport {
        lambda1,
        min_eig_t,
        min_eig_t_minus_p1,
        passed: min_eig_t >= floor && min_eig_t_minus_p1 >= floor,
    })
}

/// `Cov(F(X_0), G(X_k))` under the stationary column chain:
/// `sum_{i>=2} (lambda_i/lambda_1)^k <v_1 F, v_i> <v_i, v_1 G>`.
pub fn column_covariance_decay<T: Scalar>(spec: &StripSpec<T>, f: &[T], g: &[T], ks: &[i64]) -> Result<Vec<T>> {
    let tm = build_symmetric_transfer(spec)?;
    let sp = spectrum(&tm)?;
    covariance_from_spectrum(&sp, f, g, ks)
}

pub fn covariance_from_spectrum<T: Scalar>(sp: &Spectrum<T>, f: &[T], g: &[T], ks: &[i64]) -> Result<Vec<T>> {
    let vecs = sp
        .eigen
        .vectors
        .as_ref()
        .ok_or_else(|| Error::InvalidParams("spectrum without eigenvectors".into()))?;
    let n = vecs.dim();
    if f.len() != n || g.len() != n {
        return Err(Error::SizeMismatch {
            expected: n,
            got: if f.len() != n { f.len() } else { g.len() },
        });
    }
    if let Some(&k) = ks.iter().find(|&&k| k < 0) {
        return Err(Error::InvalidParams(format!("negative separation {k}")));
    }
    let v1: Vec<T> = (0..n).map(|i| vecs[(i, 0)]).collect();
    let vf: Vec<T> = v1.iter().zip(f).map(|(&a, &b)| a * b).collect();
    let vg: Vec<T> = v1.iter().zip(g).map(|(&a, &b)| a * b).collect();
    let lambda1 = sp.eigen.values[0];
    let terms: Vec<(T, T)> = (1..n)
        .map(|i| {
            let a: T = (0..n).map(|s| vf[s] * vecs[(s, i)]).sum();
            let b: T = (0..n).map(|s| vecs[(s, i)] * vg[s]).sum();
            (sp.eigen.values[i] / lambda1, a * b)
        })
        .collect();
    Ok(ks
        .iter()
        .map(|&k| {
            terms
                .iter()
                .map(|&(r, c)| if k == 0 { c } else { r.powi(k as i32) * c })
                .sum()
        })
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TmScanRow<T> {
    pub width: usize,
    pub big_h: T,
    pub lambda1: T,
    pub lambda2: T,
    pub gap: T,
    pub min_eig_t: T,
    pub min_eig_t_minus_p1: T,
    /// `gap >= 3 gap(H = 0)` at the same width.
    pub scaling_eligible: bool,
}

fn scan_point<T: Scalar>(spec: &StripSpec<T>) -> Result<(T, T, T, PositivityReport<T>)> {
    let tm = build_symmetric_transfer(spec)?;
    let rp = check_reflection_positivity(&tm.matrix)?;
    let e = symmetric_eigen(&tm.matrix, false)?;
    let sp = Spectrum {
        eigen: e,
        log_scale: tm.log_scale,
    };
    let gap = sp.gap()?;
    let ev = sp.eigenvalues();
    let s = tm.log_scale.exp();
    let rp = PositivityReport {
        lambda1: rp.lambda1 * s,
        min_eig_t: rp.min_eig_t * s,
        min_eig_t_minus_p1: rp.min_eig_t_minus_p1 * s,
        passed: rp.passed,
    };
    Ok((ev[0], ev[1], gap, rp))
}

/// Gaps over `widths x h_grid`, rows ordered by width then by the grid.
/// Grid points run in parallel; results do not depend on the thread count.
pub fn tm_mass_scan<T: Scalar>(
    widths: &[usize],
    vertical: VerticalBoundary,
    beta: T,
    h_grid: &[T],
) -> Result<Vec<TmScanRow<T>>> {
    if widths.is_empty() || h_grid.is_empty() {
        return Err(Error::InvalidParams("tm scan needs at least one width and one field".into()));
    }
    for &w in widths {
        for &h in h_grid {
            StripSpec::new(w, vertical, beta, h)?;
        }
    }
    let zero_gaps: Vec<Option<T>> = widths
        .par_iter()
        .map(|&w| mass_gap(&StripSpec::new(w, vertical, beta, T::zero()).ok()?).ok())
        .collect();
    let points: Vec<(usize, usize)> = (0..widths.len())
        .flat_map(|i| (0..h_grid.len()).map(move |j| (i, j)))
        .collect();
    points
        .par_iter()
        .map(|&(i, j)| {
            let spec = StripSpec::new(widths[i], vertical, beta, h_grid[j])?;
            let (lambda1, lambda2, gap, rp) = scan_point(&spec)?;
            let scaling_eligible = zero_gaps[i].is_some_and(|g0| gap >= T::of(ELIGIBILITY_FACTOR) * g0);
            Ok(TmScanRow {
                width: widths[i],
                big_h: h_grid[j],
                lambda1,
                lambda2,
                gap,
                min_eig_t: rp.min_eig_t,
                min_eig_t_minus_p1: rp.min_eig_t_minus_p1,
                scaling_eligible,
            })
        })
        .collect()
}
