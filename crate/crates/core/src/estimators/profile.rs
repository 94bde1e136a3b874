//! Truncated two-point functions and translation-averaged correlation
//! profiles.

use serde::{Deserialize, Serialize};

use super::stats::{bin_count, effective_tau, jackknife_estimate, EstimatorResult, MAX_BINS};
use crate::error::{Error, Result};
use crate::lattice::{LatticeSpec, SpinConfig};
use crate::scalar::Scalar;

/// Minimum number of retained samples for a two-point estimate.
pub const MIN_SAMPLES: usize = 100;

fn check_samples(n: usize) -> Result<()> {
    if n < MIN_SAMPLES {
        return Err(Error::InsufficientSamples {
            needed: MIN_SAMPLES,
            got: n,
        });
    }
    Ok(())
}

fn check_lengths<T>(cols: &[&[T]]) -> Result<usize> {
    let n = cols[0].len();
    if let Some(c) = cols.iter().find(|c| c.len() != n) {
        return Err(Error::SizeMismatch {
            expected: n,
            got: c.len(),
        });
    }
    Ok(n)
}

/// `<s_x s_y> - <s_x><s_y>` from the time series of the two spins.
pub fn truncated_two_point_spin<T: Scalar>(sx: &[T], sy: &[T]) -> Result<EstimatorResult<T>> {
    let n = check_lengths(&[sx, sy])?;
    check_samples(n)?;
    let prod: Vec<T> = sx.iter().zip(sy).map(|(&a, &b)| a * b).collect();
    jackknife_estimate(&[&prod, sx, sy], &[&prod, sx, sy], |m| m[0] - m[1] * m[2])
}

/// `P(x<->y) - P(x<->g) P(y<->g)` from indicator series of the three
/// connection events. The jackknife carries the covariance between the
/// factors of the product term.
pub fn truncated_two_point_fk<T: Scalar>(conn_xy: &[T], ghost_x: &[T], ghost_y: &[T]) -> Result<EstimatorResult<T>> {
    let n = check_lengths(&[conn_xy, ghost_x, ghost_y])?;
    check_samples(n)?;
    jackknife_estimate(&[conn_xy, ghost_x, ghost_y], &[conn_xy, ghost_x, ghost_y], |m| m[0] - m[1] * m[2])
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    /// Separations along both lattice axes, averaged.
    Axis,
    Horizontal,
    Vertical,
    /// Euclidean distance rounded to the nearest integer.
    Radial,
    /// Horizontal separation between column sums of the spins.
    ColumnSum,
}

/// Truncated two-point estimates per separation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationProfile<T> {
    pub separations: Vec<usize>,
    pub values: Vec<EstimatorResult<T>>,
    pub direction: Direction,
}

impl<T: Scalar> CorrelationProfile<T> {
    pub fn new(separations: Vec<usize>, values: Vec<EstimatorResult<T>>, direction: Direction) -> Result<Self> {
        if separations.len() != values.len() {
            return Err(Error::SizeMismatch {
                expected: separations.len(),
                got: values.len(),
            });
        }
        if separations.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParams("separations must be strictly increasing".into()));
        }
        if values.iter().any(|v| !(v.std_error >= T::zero())) {
            return Err(Error::InvalidParams("every profile value needs a non-negative error".into()));
        }
        Ok(CorrelationProfile {
            separations,
            values,
            direction,
        })
    }

    pub fn len(&self) -> usize {
        self.separations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.separations.is_empty()
    }

    pub fn means(&self) -> Vec<T> {
        self.values.iter().map(|v| v.mean).collect()
    }
}

/// Streaming accumulator for a correlation profile.
///
/// The truncated function at separation `r` is the pair average of
/// `<s_x s_y> - <s_x><s_y>`, so non-uniform magnetization profiles (free
/// or plus boundaries) do not leak into it. Per sample it keeps the
/// pair-averaged product; per block of consecutive samples it keeps the
/// summed site values (column sums for [`Direction::ColumnSum`]). Blocks
/// merge pairwise as the sample grows, so memory stays bounded and
/// jackknife bins are unions of whole blocks.
#[derive(Clone, Debug)]
pub struct ProfileAccumulator<T> {
    spec: LatticeSpec,
    direction: Direction,
    separations: Vec<usize>,
    offsets: Vec<Vec<(i64, i64)>>,
    prod: Vec<Vec<T>>,
    /// Mean site value per sample, for the autocorrelation estimate.
    level: Vec<T>,
    blocks: Vec<Vec<i32>>,
    current: Vec<i32>,
    current_len: usize,
    block_size: usize,
}

/// Blocks are merged pairwise on reaching this count.
const MAX_BLOCKS: usize = 64;

impl<T: Scalar> ProfileAccumulator<T> {
    pub fn new(spec: &LatticeSpec, direction: Direction, separations: &[usize]) -> Result<Self> {
        spec.validate()?;
        if separations.is_empty() {
            return Err(Error::InvalidParams("empty separation list".into()));
        }
        if separations.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParams("separations must be strictly increasing".into()));
        }
        let limit = match direction {
            Direction::Axis | Direction::Radial => spec.width.min(spec.height) / 2,
            Direction::Horizontal | Direction::ColumnSum => spec.width / 2,
            Direction::Vertical => spec.height / 2,
        };
        let rmax = *separations.last().unwrap();
        if rmax > limit {
            return Err(Error::InvalidParams(format!(
                "separation {rmax} exceeds half the lattice ({limit})"
            )));
        }
        let offsets = separations
            .iter()
            .map(|&r| {
                let r = r as i64;
                match direction {
                    Direction::Axis if r == 0 => vec![(0, 0)],
                    Direction::Axis => vec![(r, 0), (0, r)],
                    Direction::Horizontal | Direction::ColumnSum => vec![(r, 0)],
                    Direction::Vertical => vec![(0, r)],
                    Direction::Radial => radial_offsets(r),
                }
            })
            .collect();
        let k = separations.len();
        let field_len = if direction == Direction::ColumnSum {
            spec.width
        } else {
            spec.num_sites()
        };
        Ok(ProfileAccumulator {
            spec: *spec,
            direction,
            separations: separations.to_vec(),
            offsets,
            prod: vec![Vec::new(); k],
            level: Vec::new(),
            blocks: Vec::new(),
            current: vec![0; field_len],
            current_len: 0,
            block_size: 1,
        })
    }

    pub fn len(&self) -> usize {
        self.prod[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.prod[0].is_empty()
    }

    pub fn separations(&self) -> &[usize] {
        &self.separations
    }

    /// Field geometry: `(width, height, wrap)` of the site-value grid.
    fn grid(&self) -> (usize, usize, (bool, bool)) {
        let wrap = (self.spec.boundary.wraps_horizontally(), self.spec.boundary.wraps_vertically());
        if self.direction == Direction::ColumnSum {
            (self.spec.width, 1, (wrap.0, false))
        } else {
            (self.spec.width, self.spec.height, wrap)
        }
    }

    pub fn push(&mut self, spins: &SpinConfig) -> Result<()> {
        if spins.len() != self.spec.num_sites() {
            return Err(Error::SizeMismatch {
                expected: self.spec.num_sites(),
                got: spins.len(),
            });
        }
        let (w, h, wrap) = self.grid();
        let s = spins.as_slice();
        if self.direction == Direction::ColumnSum {
            let mut cols = vec![0i64; w];
            for row in s.chunks(w) {
                for (c, &v) in cols.iter_mut().zip(row) {
                    *c += i64::from(v);
                }
            }
            for (k, offs) in self.offsets.iter().enumerate() {
                let (mut p, mut count) = (0i64, 0usize);
                for &(dx, dy) in offs {
                    pair_segments(w, h, dx, dy, wrap, |a, b, len| {
                        p += (0..len).map(|i| cols[a + i] * cols[b + i]).sum::<i64>();
                        count += len;
                    });
                }
                self.prod[k].push(T::of(p as f64) / T::of_usize(count));
            }
            for (acc, &c) in self.current.iter_mut().zip(&cols) {
                *acc += c as i32;
            }
            self.level.push(T::of(cols.iter().sum::<i64>() as f64) / T::of_usize(w));
        } else {
            for (k, offs) in self.offsets.iter().enumerate() {
                let (mut p, mut count) = (0i64, 0usize);
                for &(dx, dy) in offs {
                    pair_segments(w, h, dx, dy, wrap, |a, b, len| {
                        p += dot(&s[a..a + len], &s[b..b + len]);
                        count += len;
                    });
                }
                self.prod[k].push(T::of(p as f64) / T::of_usize(count));
            }
            for (acc, &v) in self.current.iter_mut().zip(s) {
                *acc += i32::from(v);
            }
            self.level.push(T::of(total(s) as f64) / T::of_usize(s.len()));
        }
        self.current_len += 1;
        if self.current_len == self.block_size {
            let fresh = vec![0; self.current.len()];
            let full = std::mem::replace(&mut self.current, fresh);
            self.blocks.push(full);
            self.current_len = 0;
            if self.blocks.len() == MAX_BLOCKS {
                let merged = self
                    .blocks
                    .chunks(2)
                    .map(|pair| pair[0].iter().zip(&pair[1]).map(|(a, b)| a + b).collect())
                    .collect();
                self.blocks = merged;
                self.block_size *= 2;
            }
        }
        Ok(())
    }

    fn tau(&self) -> T {
        self.prod
            .iter()
            .chain(std::iter::once(&self.level))
            .map(|s| effective_tau(s))
            .fold(T::of(0.5), |a, b| a.max(b))
    }

    /// `sum_pairs m_x m_y / count` per separation for site means `m`.
    fn mean_products(&self, m: &[T]) -> Vec<T> {
        let (w, h, wrap) = self.grid();
        self.offsets
            .iter()
            .map(|offs| {
                let (mut p, mut count) = (T::zero(), 0usize);
                for &(dx, dy) in offs {
                    pair_segments(w, h, dx, dy, wrap, |a, b, len| {
                        p += (0..len).map(|i| m[a + i] * m[b + i]).sum::<T>();
                        count += len;
                    });
                }
                p / T::of_usize(count)
            })
            .collect()
    }

    /// Full-sample profile and leave-one-bin-out profiles. Samples after
    /// the last complete block are not used; bins are contiguous groups of
    /// blocks, at most as many as the autocorrelation time allows.
    pub fn jackknife_profiles(&self) -> Result<(Vec<T>, Vec<Vec<T>>)> {
        check_samples(self.len())?;
        let nb = self.blocks.len();
        let groups = bin_count(self.len(), self.tau(), MAX_BINS).min(nb);
        if groups < 2 {
            return Err(Error::InsufficientSamples {
                needed: 2 * self.block_size,
                got: self.len(),
            });
        }
        let k = self.separations.len();
        let fl = self.current.len();
        let bs = self.block_size;
        let bounds: Vec<usize> = (0..=groups).map(|g| g * nb / groups).collect();
        let mut g_sites = vec![vec![0i64; fl]; groups];
        let mut g_prod = vec![vec![T::zero(); k]; groups];
        let mut g_len = vec![0usize; groups];
        for g in 0..groups {
            for b in bounds[g]..bounds[g + 1] {
                for (acc, &v) in g_sites[g].iter_mut().zip(&self.blocks[b]) {
                    *acc += i64::from(v);
                }
            }
            let (lo, hi) = (bounds[g] * bs, bounds[g + 1] * bs);
            g_len[g] = hi - lo;
            for j in 0..k {
                g_prod[g][j] = self.prod[j][lo..hi].iter().copied().sum();
            }
        }
        let total_len: usize = g_len.iter().sum();
        let estimate = |skip: Option<usize>| -> Vec<T> {
            let n = T::of_usize(total_len - skip.map_or(0, |g| g_len[g]));
            let means: Vec<T> = (0..fl)
                .map(|i| {
                    let sum: i64 = (0..groups).filter(|&g| Some(g) != skip).map(|g| g_sites[g][i]).sum();
                    T::of(sum as f64) / n
                })
                .collect();
            let mm = self.mean_products(&means);
            (0..k)
                .map(|j| {
                    let p: T = (0..groups).filter(|&g| Some(g) != skip).map(|g| g_prod[g][j]).sum();
                    p / n - mm[j]
                })
                .collect()
        };
        let full = estimate(None);
        let leave = (0..groups).map(|g| estimate(Some(g))).collect();
        Ok((full, leave))
    }

    /// Profile with jackknife errors.
    pub fn finish(&self) -> Result<CorrelationProfile<T>> {
        let (full, leave) = self.jackknife_profiles()?;
        let tau = self.tau();
        let g = T::of_usize(leave.len());
        let values = (0..self.separations.len())
            .map(|j| {
                let avg = leave.iter().map(|l| l[j]).sum::<T>() / g;
                let var = leave.iter().map(|l| (l[j] - avg) * (l[j] - avg)).sum::<T>() * (g - T::one()) / g;
                EstimatorResult {
                    mean: full[j],
                    std_error: var.sqrt(),
                    tau_int: tau,
                    count: self.len(),
                }
            })
            .collect();
        CorrelationProfile::new(self.separations.clone(), values, self.direction)
    }
}

fn radial_offsets(r: i64) -> Vec<(i64, i64)> {
    if r == 0 {
        return vec![(0, 0)];
    }
    let mut out = Vec::new();
    for dx in 0..=r {
        for dy in -r..=r {
            if dx == 0 && dy <= 0 {
                continue;
            }
            let d = ((dx * dx + dy * dy) as f64).sqrt();
            if (d - r as f64).abs() < 0.5 || (d - r as f64) == -0.5 {
                out.push((dx, dy));
            }
        }
    }
    out
}

fn dot(a: &[i8], b: &[i8]) -> i64 {
    a.iter().zip(b).map(|(&x, &y)| i32::from(x * y)).sum::<i32>() as i64
}

fn total(a: &[i8]) -> i64 {
    a.iter().map(|&x| i32::from(x)).sum::<i32>() as i64
}

/// Calls `f(a, b, len)` for runs of pairs `(a + i, b + i)`, `i < len`, of
/// row-major indices with `b` at offset `(dx, dy)` from `a`, both ends on
/// a `w x h` grid (wrapping along the axes flagged in `wrap`).
fn pair_segments(w: usize, h: usize, dx: i64, dy: i64, wrap: (bool, bool), mut f: impl FnMut(usize, usize, usize)) {
    let (wi, hi) = (w as i64, h as i64);
    for y in 0..hi {
        let mut y2 = y + dy;
        if y2 < 0 || y2 >= hi {
            if !wrap.1 {
                continue;
            }
            y2 = y2.rem_euclid(hi);
        }
        let (r1, r2) = ((y * wi) as usize, (y2 * wi) as usize);
        // columns whose partner does not wrap
        let c0 = (-dx).max(0);
        let c1 = (wi - dx).min(wi);
        if c0 < c1 {
            f(r1 + c0 as usize, r2 + (c0 + dx) as usize, (c1 - c0) as usize);
        }
        if wrap.0 && dx != 0 && dx.abs() < wi {
            // wrapped columns
            if dx > 0 {
                f(r1 + (wi - dx) as usize, r2, dx as usize);
            } else {
                f(r1, r2 + (wi + dx) as usize, (-dx) as usize);
            }
        }
    }
}

/// Profile from stored spin configurations.
pub fn correlation_profile<T: Scalar>(
    spec: &LatticeSpec,
    samples: &[SpinConfig],
    direction: Direction,
    separations: &[usize],
) -> Result<CorrelationProfile<T>> {
    let mut acc = ProfileAccumulator::new(spec, direction, separations)?;
    for s in samples {
        acc.push(s)?;
    }
    acc.finish()
}
