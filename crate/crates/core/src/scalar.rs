//! Floating-point scalar abstraction shared by the numeric modules.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Real scalar used for weights, probabilities, estimators and spectra.
///
/// Implemented for `f32` and `f64`. Everything in the crate that does
/// arithmetic on reals is generic over this trait; the crate root exposes
/// `f64` aliases for the common case.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from `f64`; every implementor can represent the
    /// (possibly rounded) value.
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 converts to every Scalar")
    }

    fn of_usize(n: usize) -> Self {
        Self::from_usize(n).expect("usize converts to every Scalar")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("Scalar converts to f64")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Critical inverse temperature of the square-lattice Ising model,
/// `ln(1 + sqrt 2) / 2`, evaluated in the target precision.
pub fn beta_critical<T: Scalar>() -> T {
    let two = T::of(2.0);
    (T::one() + two.sqrt()).ln() / two
}

/// `ln(exp(a) + exp(b))` without overflow.
pub fn log_add_exp<T: Scalar>(a: T, b: T) -> T {
    if a == T::neg_infinity() {
        return b;
    }
    if b == T::neg_infinity() {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// `ln cosh(x)` that stays finite for large `|x|`.
pub(crate) fn ln_cosh<T: Scalar>(x: T) -> T {
    let ax = x.abs();
    ax + (-(ax + ax)).exp().ln_1p() - T::of(2.0).ln()
}

/// Pairwise summation; reduction order depends only on the slice length.
pub fn pairwise_sum<T: Scalar>(xs: &[T]) -> T {
    const LEAF: usize = 32;
    if xs.len() <= LEAF {
        let mut s = T::zero();
        for &x in xs {
            s += x;
        }
        return s;
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}
