//! Renormalized lattice magnetization fields and the scaling check
//! between two runs at different spacings.
//!
//! A spin configuration at spacing `a` defines the field
//! `Phi(f) = a^{15/8} sum_x f(a x) s_x`. With the renormalized field
//! `h = H a^{-15/8}`, the continuum limit satisfies
//! `Phi^{h'}(f) = lambda^{-15/8} Phi^{h}(f(./lambda))` in law when
//! `h' = lambda^{15/8} h`.

use serde::{Deserialize, Serialize};

use super::stats::{jackknife_estimate, EstimatorResult};
use crate::error::{Error, Result};
use crate::lattice::{LatticeSpec, SpinConfig};
use crate::scalar::Scalar;

/// Field dimension `15/8`.
pub const FIELD_DIMENSION: f64 = 15.0 / 8.0;

/// Relative tolerance on the `h` bookkeeping between two runs.
const BOOKKEEPING_TOL: f64 = 1e-9;

/// `a^{15/8} sum_x f[x] s_x` for per-site weights `f`.
pub fn smeared_field<T: Scalar>(spec: &LatticeSpec, spins: &SpinConfig, f: &[T]) -> Result<T> {
    let n = spec.num_sites();
    if spins.len() != n || f.len() != n {
        return Err(Error::SizeMismatch {
            expected: n,
            got: if spins.len() != n { spins.len() } else { f.len() },
        });
    }
    let s: T = spins
        .as_slice()
        .iter()
        .zip(f)
        .map(|(&s, &w)| if s > 0 { w } else { -w })
        .sum();
    Ok(T::of(spec.spacing.powf(FIELD_DIMENSION)) * s)
}

/// `a^{15/4} Cov(sum f s, sum g s)` over the sample, with jackknife error.
pub fn block_field_cov<T: Scalar>(
    spec: &LatticeSpec,
    samples: &[SpinConfig],
    f: &[T],
    g: &[T],
) -> Result<EstimatorResult<T>> {
    let xs = samples
        .iter()
        .map(|s| smeared_field(spec, s, f))
        .collect::<Result<Vec<T>>>()?;
    let ys = samples
        .iter()
        .map(|s| smeared_field(spec, s, g))
        .collect::<Result<Vec<T>>>()?;
    covariance(&xs, &ys)
}

fn covariance<T: Scalar>(xs: &[T], ys: &[T]) -> Result<EstimatorResult<T>> {
    let n = xs.len();
    if n < super::profile::MIN_SAMPLES {
        return Err(Error::InsufficientSamples {
            needed: super::profile::MIN_SAMPLES,
            got: n,
        });
    }
    let xy: Vec<T> = xs.iter().zip(ys).map(|(&a, &b)| a * b).collect();
    jackknife_estimate(&[&xy, xs, ys], &[&xy, xs, ys], |m| m[0] - m[1] * m[2])
}

/// Axis-aligned half-open box `[x0, x1) x [y0, y1)` in physical units.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestBox {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl TestBox {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Result<Self> {
        if !(x0 < x1 && y0 < y1) || ![x0, y0, x1, y1].iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidParams(format!("empty test box [{x0},{x1})x[{y0},{y1})")));
        }
        Ok(TestBox { x0, y0, x1, y1 })
    }

    fn scaled(&self, lambda: f64) -> TestBox {
        TestBox {
            x0: self.x0 * lambda,
            y0: self.y0 * lambda,
            x1: self.x1 * lambda,
            y1: self.y1 * lambda,
        }
    }

    /// Indicator weights on the sites of `spec`, placed at `a (col, row)`.
    pub fn weights<T: Scalar>(&self, spec: &LatticeSpec) -> Vec<T> {
        let a = spec.spacing;
        (0..spec.num_sites())
            .map(|i| {
                let s = spec.site(i);
                let (x, y) = (a * s.col as f64, a * s.row as f64);
                if x >= self.x0 && x < self.x1 && y >= self.y0 && y < self.y1 {
                    T::one()
                } else {
                    T::zero()
                }
            })
            .collect()
    }
}

/// One Monte Carlo run entering the scaling check.
#[derive(Clone, Copy, Debug)]
pub struct ScalingRun<'a, T> {
    pub spec: LatticeSpec,
    /// Renormalized field `h = H a^{-15/8}`.
    pub little_h: T,
    pub samples: &'a [SpinConfig],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingComparison<T> {
    pub label: String,
    pub run_a: EstimatorResult<T>,
    pub run_b: EstimatorResult<T>,
    /// `(a - b) / sqrt(err_a^2 + err_b^2)`, zero when both agree exactly.
    pub z: T,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport<T> {
    pub lambda: T,
    pub means: Vec<ScalingComparison<T>>,
    pub covariances: Vec<ScalingComparison<T>>,
    pub max_abs_z: T,
}

fn compare<T: Scalar>(label: String, a: EstimatorResult<T>, b: EstimatorResult<T>) -> ScalingComparison<T> {
    let d = a.mean - b.mean;
    let z = if d == T::zero() {
        T::zero()
    } else {
        d / (a.std_error * a.std_error + b.std_error * b.std_error).sqrt()
    };
    ScalingComparison {
        label,
        run_a: a,
        run_b: b,
        z,
    }
}

/// Compares `lambda^{-15/8} Phi_A(1_{lambda B})` with `Phi_B(1_B)` for every
/// test box `B`: means and all pairwise covariances. Run B must carry the
/// field `h_B = lambda^{15/8} h_A`.
pub fn scaling_check<T: Scalar>(
    run_a: &ScalingRun<'_, T>,
    run_b: &ScalingRun<'_, T>,
    lambda: T,
    boxes: &[TestBox],
) -> Result<ScalingReport<T>> {
    if !(lambda > T::zero()) || !lambda.is_finite() {
        return Err(Error::InvalidParams(format!("lambda must be positive, got {lambda}")));
    }
    if boxes.is_empty() {
        return Err(Error::InvalidParams("no test boxes".into()));
    }
    let dim = T::of(FIELD_DIMENSION);
    let expected = run_a.little_h * lambda.powf(dim);
    let tol = T::of(BOOKKEEPING_TOL) * expected.abs().max(run_b.little_h.abs()).max(T::min_positive_value());
    if (run_b.little_h - expected).abs() > tol {
        return Err(Error::InvalidParams(format!(
            "mismatched lambda bookkeeping: h_B = {} but lambda^(15/8) h_A = {expected}",
            run_b.little_h
        )));
    }
    run_a.spec.validate()?;
    run_b.spec.validate()?;
    let lam = lambda.as_f64();
    let scale_a = lambda.powf(-dim);
    let fields = |run: &ScalingRun<'_, T>, b: &TestBox, scale: T| -> Result<Vec<T>> {
        let w: Vec<T> = b.weights(&run.spec);
        run.samples
            .iter()
            .map(|s| Ok(scale * smeared_field(&run.spec, s, &w)?))
            .collect()
    };
    let mut xa = Vec::with_capacity(boxes.len());
    let mut xb = Vec::with_capacity(boxes.len());
    for b in boxes {
        xa.push(fields(run_a, &b.scaled(lam), scale_a)?);
        xb.push(fields(run_b, b, T::one())?);
    }
    let mut means = Vec::new();
    for (k, (a, b)) in xa.iter().zip(&xb).enumerate() {
        let ea = jackknife_estimate(&[a], &[a], |m| m[0])?;
        let eb = jackknife_estimate(&[b], &[b], |m| m[0])?;
        means.push(compare(format!("mean_{k}"), ea, eb));
    }
    let mut covariances = Vec::new();
    for i in 0..boxes.len() {
        for j in i..boxes.len() {
            let ca = covariance(&xa[i], &xa[j])?;
            let cb = covariance(&xb[i], &xb[j])?;
            covariances.push(compare(format!("cov_{i}_{j}"), ca, cb));
        }
    }
    let max_abs_z = means
        .iter()
        .chain(&covariances)
        .map(|c| c.z.abs())
        .fold(T::zero(), |a, b| a.max(b));
    Ok(ScalingReport {
        lambda,
        means,
        covariances,
        max_abs_z,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Boundary;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn samples(n: usize, sites: usize, seed: u64) -> Vec<SpinConfig> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| SpinConfig::from_vec((0..sites).map(|_| if rng.gen_bool(0.6) { 1 } else { -1 }).collect()).unwrap())
            .collect()
    }

    fn spec(l: usize, a: f64) -> LatticeSpec {
        let mut s = LatticeSpec::new(l, l, Boundary::Free).unwrap();
        s.spacing = a;
        s
    }

    #[test]
    fn block_covariance_of_independent_spins() {
        let sp = spec(4, 0.5);
        let data = samples(4000, 16, 1);
        let f = vec![1.0f64; 16];
        let r = block_field_cov(&sp, &data, &f, &f).unwrap();
        // 16 independent spins with variance 1 - 0.04
        let expected = 0.5f64.powf(15.0 / 4.0) * 16.0 * 0.96;
        assert!(r.deviation(expected) < 4.0, "{r:?} vs {expected}");
    }

    #[test]
    fn exact_rescaling_gives_zero_discrepancy() {
        // same configurations read at spacings a and a/lambda realize the
        // same lattice model when h scales with lambda^{15/8}
        let lambda = 2.0f64;
        let data = samples(500, 64, 2);
        let a = ScalingRun {
            spec: spec(8, 1.0),
            little_h: 0.3,
            samples: &data,
        };
        let b = ScalingRun {
            spec: spec(8, 0.5),
            little_h: 0.3 * lambda.powf(FIELD_DIMENSION),
            samples: &data,
        };
        let boxes = [TestBox::new(0.0, 0.0, 2.0, 2.0).unwrap(), TestBox::new(1.0, 1.0, 4.0, 3.0).unwrap()];
        let r = scaling_check(&a, &b, lambda, &boxes).unwrap();
        assert!(r.max_abs_z < 1e-9, "{r:?}");
        assert_eq!(r.covariances.len(), 3);
    }

    #[test]
    fn unit_lambda_on_one_run_is_zero() {
        let data = samples(300, 36, 3);
        let a = ScalingRun {
            spec: spec(6, 0.25),
            little_h: 1.0,
            samples: &data,
        };
        let r = scaling_check(&a, &a, 1.0, &[TestBox::new(0.0, 0.0, 1.0, 1.0).unwrap()]).unwrap();
        assert_eq!(r.max_abs_z, 0.0);
    }

    #[test]
    fn bookkeeping_mismatch_is_rejected() {
        let data = samples(300, 16, 4);
        let a = ScalingRun {
            spec: spec(4, 1.0),
            little_h: 1.0,
            samples: &data,
        };
        let b = ScalingRun { little_h: 2.0, ..a };
        let boxes = [TestBox::new(0.0, 0.0, 1.0, 1.0).unwrap()];
        assert!(scaling_check(&a, &b, 2.0, &boxes).is_err());
        assert!(scaling_check(&a, &a, 0.0, &boxes).is_err());
        assert!(TestBox::new(1.0, 0.0, 1.0, 2.0).is_err());
    }
}
