//! Scalar abstraction shared by plain floats and the reverse-mode [`Var`].
//!
//! Everything numeric in the crate (activations, marginal networks, the
//! copula combiner, the conditioning network) is written once against
//! [`Scalar`]. Any `num_traits::Float` type gets it through a blanket impl,
//! and [`crate::autodiff::Var`] implements it by recording onto a tape, so
//! the same code path yields both values and exact gradients.
//!
//! [`Var`]: crate::autodiff::Var

use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};

use num_traits::{Float, FromPrimitive};

pub trait Scalar:
    Copy
    + Debug
    + PartialOrd
    + Send
    + Sync
    + 'static
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    /// Lifts an `f64` constant.
    fn of(v: f64) -> Self;

    /// Primal value as `f64`.
    fn value(self) -> f64;

    /// Machine epsilon of the underlying storage.
    fn epsilon() -> f64;

    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn ln_1p(self) -> Self;
    fn tanh(self) -> Self;

    fn zero() -> Self {
        Self::of(0.0)
    }

    fn one() -> Self {
        Self::of(1.0)
    }

    fn is_finite(self) -> bool {
        self.value().is_finite()
    }

    /// `bias + Σ weights[i] * inputs[i]`.
    fn affine(bias: Self, weights: &[Self], inputs: &[Self]) -> Self {
        weights
            .iter()
            .zip(inputs)
            .fold(bias, |acc, (&w, &x)| acc + w * x)
    }

    /// Logistic sigmoid, evaluated without overflow for large |x|.
    fn sigmoid(self) -> Self {
        if self >= Self::zero() {
            Self::one() / (Self::one() + (-self).exp())
        } else {
            let e = self.exp();
            e / (Self::one() + e)
        }
    }

    /// `ln(1 + e^x)`, evaluated without overflow for large |x|.
    fn softplus(self) -> Self {
        if self > Self::zero() {
            self + (-self).exp().ln_1p()
        } else {
            self.exp().ln_1p()
        }
    }
}

impl<F> Scalar for F
where
    F: Float + FromPrimitive + Debug + Send + Sync + 'static,
{
    fn of(v: f64) -> Self {
        <F as FromPrimitive>::from_f64(v).expect("f64 is representable")
    }

    fn value(self) -> f64 {
        <F as num_traits::ToPrimitive>::to_f64(&self).unwrap_or(f64::NAN)
    }

    fn epsilon() -> f64 {
        <F as Float>::epsilon().value()
    }

    fn exp(self) -> Self {
        Float::exp(self)
    }

    fn ln(self) -> Self {
        Float::ln(self)
    }

    fn ln_1p(self) -> Self {
        Float::ln_1p(self)
    }

    fn tanh(self) -> Self {
        Float::tanh(self)
    }
}

/// Lifts a slice of `f64` into any scalar type.
pub fn lift<T: Scalar>(values: &[f64]) -> Vec<T> {
    values.iter().map(|&v| T::of(v)).collect()
}
