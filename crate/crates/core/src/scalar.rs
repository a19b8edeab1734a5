//! Floating-point scalar abstraction shared by the learned components.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use ndarray::{LinalgScalar, ScalarOperand};
use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Real scalar the network, encoders and classifiers are generic over.
///
/// Implemented for `f32` (fast training) and `f64` (gradient checking,
/// checkpoint fidelity).
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + LinalgScalar
    + ScalarOperand
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from `f64`; never fails for finite input.
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("finite f64 converts to scalar")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    fn sigmoid(self) -> Self {
        if self >= Self::zero() {
            Self::one() / (Self::one() + (-self).exp())
        } else {
            let e = self.exp();
            e / (Self::one() + e)
        }
    }

    /// `-y ln σ(l) - (1-y) ln(1-σ(l))`, evaluated without overflow.
    fn bce_with_logit(self, target: Self) -> Self {
        let zero = Self::zero();
        self.max(zero) - self * target + (-self.abs()).exp().ln_1p()
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
