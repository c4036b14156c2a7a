//! Activation functions with first and second derivatives.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Sigmoid,
    Tanh,
    Linear,
    #[serde(rename = "relu")]
    ReLU,
    /// `e^x`. Every derivative is positive, but it overflows easily and is
    /// never picked by default.
    #[serde(rename = "exp")]
    Exponential,
}

impl Activation {
    pub const ALL: [Activation; 5] = [
        Activation::Sigmoid,
        Activation::Tanh,
        Activation::Linear,
        Activation::ReLU,
        Activation::Exponential,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Activation::Sigmoid => "sigmoid",
            Activation::Tanh => "tanh",
            Activation::Linear => "linear",
            Activation::ReLU => "relu",
            Activation::Exponential => "exp",
        }
    }

    pub fn eval<T: Scalar>(self, x: T) -> T {
        match self {
            Activation::Sigmoid => x.sigmoid(),
            Activation::Tanh => x.tanh(),
            Activation::Linear => x,
            Activation::ReLU => {
                if x > T::zero() {
                    x
                } else {
                    T::zero()
                }
            }
            Activation::Exponential => x.exp(),
        }
    }

    /// First derivative. ReLU uses 0 at the kink.
    pub fn d1<T: Scalar>(self, x: T) -> T {
        match self {
            Activation::Sigmoid => {
                let s = x.sigmoid();
                s * (T::one() - s)
            }
            Activation::Tanh => {
                let t = x.tanh();
                T::one() - t * t
            }
            Activation::Linear => T::one(),
            Activation::ReLU => {
                if x > T::zero() {
                    T::one()
                } else {
                    T::zero()
                }
            }
            Activation::Exponential => x.exp(),
        }
    }

    pub fn d2<T: Scalar>(self, x: T) -> T {
        match self {
            Activation::Sigmoid => {
                let s = x.sigmoid();
                s * (T::one() - s) * (T::one() - T::of(2.0) * s)
            }
            Activation::Tanh => {
                let t = x.tanh();
                T::of(-2.0) * t * (T::one() - t * t)
            }
            Activation::Linear | Activation::ReLU => T::zero(),
            Activation::Exponential => x.exp(),
        }
    }

    pub fn try_eval(self, x: f64) -> Result<f64> {
        check_finite(x).map(|x| self.eval(x))
    }

    pub fn try_d1(self, x: f64) -> Result<f64> {
        check_finite(x).map(|x| self.d1(x))
    }

    pub fn try_d2(self, x: f64) -> Result<f64> {
        check_finite(x).map(|x| self.d2(x))
    }
}

fn check_finite(x: f64) -> Result<f64> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(Error::Domain(x))
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sigmoid" => Ok(Activation::Sigmoid),
            "tanh" => Ok(Activation::Tanh),
            "linear" => Ok(Activation::Linear),
            "relu" => Ok(Activation::ReLU),
            "exp" | "exponential" => Ok(Activation::Exponential),
            other => Err(Error::Contract(format!("unknown activation '{other}'"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::{prop_assert, proptest};

    const H: f64 = 1e-6;

    fn central(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
        (f(x + h) - f(x - h)) / (2.0 * h)
    }

    fn dense_grid() -> impl Iterator<Item = f64> {
        (0..=4000).map(|i| -10.0 + i as f64 * 0.005)
    }

    #[test]
    fn tabulated_values() {
        assert_eq!(Activation::Sigmoid.eval(0.0), 0.5);
        assert_eq!(Activation::Linear.eval(3.2), 3.2);
        assert_eq!(Activation::ReLU.eval(-1.5), 0.0);
        assert_eq!(Activation::Sigmoid.d1(0.0), 0.25);
        assert_eq!(Activation::Linear.d1(7.0), 1.0);
        assert_eq!(Activation::Linear.d2(5.0), 0.0);
        assert_eq!(Activation::Sigmoid.d2(0.0), 0.0);
        assert_eq!(Activation::ReLU.d1(0.0), 0.0);
    }

    #[test]
    fn tanh_slope_at_origin_matches_finite_difference() {
        let fd = central(|x| Activation::Tanh.eval(x), 0.0, H);
        assert!((fd - 1.0).abs() < 1e-9);
        assert_eq!(Activation::Tanh.d1(0.0), 1.0);
    }

    #[test]
    fn sigmoid_curvature_negative_at_one() {
        let s = 1.0 / (1.0 + (-1.0_f64).exp());
        let expected = s * (1.0 - s) * (1.0 - 2.0 * s);
        let d2 = Activation::Sigmoid.d2(1.0);
        assert!(d2 < 0.0);
        assert!((d2 - expected).abs() < 1e-15);
        let fd = central(|x| Activation::Sigmoid.d1(x), 1.0, H);
        assert!((fd - d2).abs() < 1e-8);
    }

    #[test]
    fn ranges() {
        for x in dense_grid() {
            let s = Activation::Sigmoid.eval(x);
            assert!(s > 0.0 && s < 1.0);
            assert!(Activation::ReLU.eval(x) >= 0.0);
            assert!(Activation::Exponential.eval(x) > 0.0);
        }
    }

    #[test]
    fn first_derivative_nonnegative_everywhere() {
        for kind in Activation::ALL {
            for x in dense_grid() {
                assert!(kind.d1(x) >= 0.0, "{kind} at {x}");
            }
        }
    }

    #[test]
    fn first_derivative_matches_finite_difference() {
        for kind in Activation::ALL {
            for x in dense_grid() {
                if kind == Activation::ReLU && x.abs() < 2.0 * H {
                    continue;
                }
                let d = kind.d1(x);
                let fd = central(|t| kind.eval(t), x, H);
                assert!(
                    (d - fd).abs() <= 1e-6 * (1.0 + d.abs()),
                    "{kind} at {x}: {d} vs {fd}"
                );
            }
        }
    }

    #[test]
    fn second_derivative_matches_finite_difference_of_first() {
        for kind in [Activation::Sigmoid, Activation::Tanh, Activation::Exponential] {
            for x in dense_grid() {
                let d = kind.d2(x);
                let fd = central(|t| kind.d1(t), x, H);
                assert!((d - fd).abs() <= 1e-6 * (1.0 + d.abs()), "{kind} at {x}");
            }
        }
    }

    #[test]
    fn piecewise_linear_kinds_have_zero_curvature() {
        for x in dense_grid() {
            assert_eq!(Activation::Linear.d2(x), 0.0);
            assert_eq!(Activation::ReLU.d2(x), 0.0);
        }
    }

    #[test]
    fn sigmoid_curvature_changes_sign() {
        let values: Vec<f64> = dense_grid().map(|x| Activation::Sigmoid.d2(x)).collect();
        assert!(values.iter().any(|&v| v < 0.0));
        assert!(values.iter().any(|&v| v > 0.0));
        for x in dense_grid() {
            let s = Activation::Sigmoid.eval(x);
            let d2 = Activation::Sigmoid.d2(x);
            assert_eq!(d2 > 0.0, 1.0 - 2.0 * s > 0.0);
        }
    }

    /// k-th derivative by repeated central differences of `eval`.
    fn numeric_derivative(f: &impl Fn(f64) -> f64, x: f64, k: u32, h: f64) -> f64 {
        if k == 0 {
            return f(x);
        }
        (numeric_derivative(f, x + h, k - 1, h) - numeric_derivative(f, x - h, k - 1, h))
            / (2.0 * h)
    }

    #[test]
    fn exponential_derivatives_all_nonnegative() {
        let f = |x: f64| Activation::Exponential.eval(x);
        for i in 0..=100 {
            let x = -5.0 + i as f64 * 0.1;
            for k in 1..=4 {
                let d = numeric_derivative(&f, x, k, 1e-2);
                assert!(d >= 0.0, "order {k} at {x}: {d}");
            }
        }
    }

    #[test]
    fn non_finite_input_is_a_domain_error() {
        assert!(matches!(
            Activation::Sigmoid.try_eval(f64::NAN),
            Err(Error::Domain(_))
        ));
        assert!(Activation::Tanh.try_d1(f64::INFINITY).is_err());
        assert!(Activation::Tanh.try_d2(f64::NEG_INFINITY).is_err());
        assert_eq!(Activation::Linear.try_eval(2.0).unwrap(), 2.0);
    }

    #[test]
    fn serialized_names() {
        for kind in Activation::ALL {
            let json = serde_json::to_string(&kind).unwrap();
            assert_eq!(json, format!("\"{}\"", kind.name()));
            assert_eq!(kind.name().parse::<Activation>().unwrap(), kind);
        }
    }

    proptest! {
        #[test]
        fn derivatives_nonnegative_on_wide_range(x in -40.0f64..40.0) {
            for kind in Activation::ALL {
                prop_assert!(kind.d1(x) >= 0.0);
            }
            prop_assert!(Activation::Exponential.d2(x) >= 0.0);
        }
    }
}
