//! Floating-point abstraction for the numeric core.
//!
//! Every algorithm in this crate is written against [`Scalar`] so the same
//! code runs in `f64` (the default everywhere downstream) or `f32`. The
//! trait is a thin bundle over `num-traits`: no methods of its own, just
//! the operations dense linear algebra needs plus thread-safety bounds so
//! problems can be shared across worker threads.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, NumAssign};

/// Real scalar type usable by the solvers and linear algebra.
///
/// Implemented for `f32` and `f64`. The blanket impl keeps the bound set in
/// one place; downstream code should depend on `Scalar`, never on the
/// individual super-traits.
pub trait Scalar: Float + NumAssign + Sum + Debug + Display + Send + Sync + 'static {
    /// Lossy conversion from `f64`, used for literals and tolerances.
    ///
    /// Panics only if the value is not representable at all, which cannot
    /// happen for the finite constants this crate feeds it.
    fn from_f64(x: f64) -> Self {
        Self::from(x).expect("finite f64 constant converts to every Scalar")
    }

    /// Lossy conversion to `f64` for reporting and serialization.
    fn into_f64(self) -> f64 {
        self.to_f64().expect("every Scalar converts to f64")
    }
}

impl<T> Scalar for T where T: Float + NumAssign + Sum + Debug + Display + Send + Sync + 'static {}

#[cfg(test)]
mod tests {
    use super::*;

    fn norm<S: Scalar>(xs: &[S]) -> S {
        xs.iter().map(|x| *x * *x).sum::<S>().sqrt()
    }

    #[test]
    fn works_for_both_precisions() {
        assert_eq!(norm(&[3.0f64, 4.0]), 5.0);
        assert_eq!(norm(&[3.0f32, 4.0]), 5.0);
    }

    #[test]
    fn f64_round_trip() {
        let x = f64::from_f64(0.1);
        assert_eq!(x.into_f64(), 0.1);
        let y = f32::from_f64(0.5);
        assert_eq!(y, 0.5f32);
    }
}
