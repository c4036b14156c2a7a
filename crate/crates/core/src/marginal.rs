//! Single-input positive-weighted network and the bounded marginal CDF
//! built from it.
//!
//! Effective weights are `softplus(raw) + 1e-6`, biases are unconstrained,
//! hidden layers share one activation and the output layer is linear. The
//! raw network output `Ψ(y)` is nondecreasing; dividing
//! `Ψ(y) − Ψ(L)` by `Ψ(U) − Ψ(L)` turns it into a CDF on `[L, U]`.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::activations::Activation;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Added to `softplus(raw)` so effective weights stay strictly positive.
pub const WEIGHT_FLOOR: f64 = 1e-6;

/// Smallest admissible `Ψ(U) − Ψ(L)`.
pub const NORMALIZER_GUARD: f64 = 1e-12;

const INVERSE_TOLERANCE: f64 = 1e-10;
const INVERSE_MAX_ITERATIONS: usize = 200;

pub fn positivity_map<T: Scalar>(raw: T) -> T {
    raw.softplus() + T::of(WEIGHT_FLOOR)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub lower: f64,
    pub upper: f64,
}

impl Bounds {
    pub fn new(lower: f64, upper: f64) -> Result<Self> {
        let b = Bounds { lower, upper };
        b.validate()?;
        Ok(b)
    }

    pub fn unit() -> Self {
        Bounds { lower: 0.0, upper: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.lower.is_finite() && self.upper.is_finite() && self.lower < self.upper {
            Ok(())
        } else {
            Err(Error::InvalidBounds {
                lower: self.lower,
                upper: self.upper,
            })
        }
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, y: f64) -> bool {
        y >= self.lower && y <= self.upper
    }

    pub fn clamp(&self, y: f64) -> f64 {
        y.clamp(self.lower, self.upper)
    }
}

/// Fixed positive affine input transform `s = (y − offset) / scale`.
///
/// Folding it into the first layer keeps the network positive-weighted;
/// it only keeps hidden units out of saturation when targets live far
/// from the origin.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InputMap {
    pub offset: f64,
    pub scale: f64,
}

impl InputMap {
    pub fn identity() -> Self {
        InputMap { offset: 0.0, scale: 1.0 }
    }

    /// Maps `[L, U]` onto `[−1, 1]`.
    pub fn from_bounds(b: &Bounds) -> Self {
        InputMap {
            offset: 0.5 * (b.lower + b.upper),
            scale: 0.5 * b.width(),
        }
    }
}

impl Default for InputMap {
    fn default() -> Self {
        InputMap::identity()
    }
}

/// `Ψ(L)` and `Ψ(U) − Ψ(L)` for one set of bounds.
#[derive(Clone, Copy, Debug)]
pub struct Normalizer<T> {
    pub low: T,
    pub span: T,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MarginalNet<T> {
    layer_sizes: Vec<usize>,
    activation: Activation,
    input_map: InputMap,
    raw_weights: Vec<Vec<T>>,
    biases: Vec<Vec<T>>,
    weights: Vec<Vec<T>>,
}

/// Checks a `[1, h1, …, 1]` layout.
pub fn validate_layout(layer_sizes: &[usize]) -> Result<()> {
    if layer_sizes.len() < 2 {
        return Err(Error::Contract(
            "a marginal network needs at least an input and an output layer".into(),
        ));
    }
    if layer_sizes[0] != 1 || *layer_sizes.last().unwrap() != 1 {
        return Err(Error::Contract(format!(
            "marginal network layout must start and end with width 1, got {layer_sizes:?}"
        )));
    }
    if layer_sizes.contains(&0) {
        return Err(Error::Contract(format!(
            "layer widths must be positive, got {layer_sizes:?}"
        )));
    }
    Ok(())
}

/// Number of raw weights plus biases for a layout.
pub fn param_count(layer_sizes: &[usize]) -> usize {
    layer_sizes
        .windows(2)
        .map(|w| w[0] * w[1] + w[1])
        .sum()
}

impl<T: Scalar> MarginalNet<T> {
    pub fn new(
        layer_sizes: Vec<usize>,
        activation: Activation,
        raw_weights: Vec<Vec<T>>,
        biases: Vec<Vec<T>>,
    ) -> Result<Self> {
        validate_layout(&layer_sizes)?;
        let layers = layer_sizes.len() - 1;
        if raw_weights.len() != layers || biases.len() != layers {
            return Err(Error::Contract(format!(
                "expected {layers} weight and bias blocks, got {} and {}",
                raw_weights.len(),
                biases.len()
            )));
        }
        for (k, w) in layer_sizes.windows(2).enumerate() {
            if raw_weights[k].len() != w[0] * w[1] {
                return Err(Error::Dimension {
                    expected: w[0] * w[1],
                    got: raw_weights[k].len(),
                });
            }
            if biases[k].len() != w[1] {
                return Err(Error::Dimension {
                    expected: w[1],
                    got: biases[k].len(),
                });
            }
        }
        let weights = raw_weights
            .iter()
            .map(|layer| layer.iter().map(|&r| positivity_map(r)).collect())
            .collect();
        Ok(MarginalNet {
            layer_sizes,
            activation,
            input_map: InputMap::identity(),
            raw_weights,
            biases,
            weights,
        })
    }

    /// All raw weights and biases zero.
    pub fn zeros(layer_sizes: Vec<usize>, activation: Activation) -> Result<Self> {
        validate_layout(&layer_sizes)?;
        let raw = vec![T::zero(); param_count(&layer_sizes)];
        Self::from_flat(layer_sizes, activation, &raw)
    }

    /// Raw weights and biases drawn from `N(0, scale²)`.
    pub fn random<R: Rng + ?Sized>(
        layer_sizes: Vec<usize>,
        activation: Activation,
        scale: f64,
        rng: &mut R,
    ) -> Result<Self> {
        validate_layout(&layer_sizes)?;
        let raw: Vec<T> = (0..param_count(&layer_sizes))
            .map(|_| {
                let z: f64 = StandardNormal.sample(rng);
                T::of(scale * z)
            })
            .collect();
        Self::from_flat(layer_sizes, activation, &raw)
    }

    /// Builds from `[weights layer by layer (row-major), biases layer by layer]`.
    pub fn from_flat(layer_sizes: Vec<usize>, activation: Activation, raw: &[T]) -> Result<Self> {
        validate_layout(&layer_sizes)?;
        let expected = param_count(&layer_sizes);
        if raw.len() != expected {
            return Err(Error::Dimension {
                expected,
                got: raw.len(),
            });
        }
        let mut at = 0;
        let mut raw_weights = Vec::with_capacity(layer_sizes.len() - 1);
        for w in layer_sizes.windows(2) {
            raw_weights.push(raw[at..at + w[0] * w[1]].to_vec());
            at += w[0] * w[1];
        }
        let mut biases = Vec::with_capacity(layer_sizes.len() - 1);
        for w in layer_sizes.windows(2) {
            biases.push(raw[at..at + w[1]].to_vec());
            at += w[1];
        }
        Self::new(layer_sizes, activation, raw_weights, biases)
    }

    /// Inverse of [`MarginalNet::from_flat`].
    pub fn flatten(&self) -> Vec<T> {
        self.raw_weights
            .iter()
            .chain(self.biases.iter())
            .flat_map(|v| v.iter().copied())
            .collect()
    }

    pub fn with_input_map(mut self, map: InputMap) -> Self {
        self.input_map = map;
        self
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn input_map(&self) -> InputMap {
        self.input_map
    }

    pub fn raw_weights(&self) -> &[Vec<T>] {
        &self.raw_weights
    }

    pub fn biases(&self) -> &[Vec<T>] {
        &self.biases
    }

    /// Effective (positive) weights, row-major per layer.
    pub fn effective_weights(&self) -> &[Vec<T>] {
        &self.weights
    }

    fn layer_count(&self) -> usize {
        self.layer_sizes.len() - 1
    }

    pub fn forward(&self, y: T) -> Result<T> {
        let mut h = vec![(y - T::of(self.input_map.offset)) / T::of(self.input_map.scale)];
        for k in 0..self.layer_count() {
            let (fan_in, fan_out) = (self.layer_sizes[k], self.layer_sizes[k + 1]);
            let hidden = k + 1 < self.layer_count();
            let mut next = Vec::with_capacity(fan_out);
            for j in 0..fan_out {
                let row = &self.weights[k][j * fan_in..(j + 1) * fan_in];
                let a = T::affine(self.biases[k][j], row, &h);
                let out = if hidden { self.activation.eval(a) } else { a };
                if !out.is_finite() {
                    return Err(Error::Evaluation { layer: k + 1 });
                }
                next.push(out);
            }
            h = next;
        }
        Ok(h[0])
    }

    /// `(Ψ(y), dΨ/dy)`; the slope is carried forward layer by layer as the
    /// product of `diag(z'(a_k)) W_k`.
    pub fn forward_with_slope(&self, y: T) -> Result<(T, T)> {
        let inv_scale = T::of(1.0 / self.input_map.scale);
        let mut h = vec![(y - T::of(self.input_map.offset)) * inv_scale];
        let mut dh = vec![inv_scale];
        for k in 0..self.layer_count() {
            let (fan_in, fan_out) = (self.layer_sizes[k], self.layer_sizes[k + 1]);
            let hidden = k + 1 < self.layer_count();
            let mut next = Vec::with_capacity(fan_out);
            let mut dnext = Vec::with_capacity(fan_out);
            for j in 0..fan_out {
                let row = &self.weights[k][j * fan_in..(j + 1) * fan_in];
                let a = T::affine(self.biases[k][j], row, &h);
                let da = T::affine(T::zero(), row, &dh);
                let (out, dout) = if hidden {
                    (self.activation.eval(a), self.activation.d1(a) * da)
                } else {
                    (a, da)
                };
                if !out.is_finite() || !dout.is_finite() {
                    return Err(Error::Evaluation { layer: k + 1 });
                }
                next.push(out);
                dnext.push(dout);
            }
            h = next;
            dh = dnext;
        }
        Ok((h[0], dh[0]))
    }

    pub fn d_forward(&self, y: T) -> Result<T> {
        self.forward_with_slope(y).map(|(_, d)| d)
    }

    pub fn normalizer(&self, b: &Bounds) -> Result<Normalizer<T>> {
        let low = self.forward(T::of(b.lower))?;
        let high = self.forward(T::of(b.upper))?;
        let span = high - low;
        if !(span.value() >= NORMALIZER_GUARD) {
            return Err(Error::DegenerateMarginal {
                normalizer: span.value(),
            });
        }
        Ok(Normalizer { low, span })
    }

    /// Normalized CDF and density at `y` given a precomputed normalizer.
    /// Outside `[L, U]` the CDF is clamped to 0 or 1 and the density is 0.
    pub fn cdf_pdf_with(&self, norm: &Normalizer<T>, y: T, b: &Bounds) -> Result<(T, T)> {
        let v = y.value();
        if v < b.lower {
            return Ok((T::zero(), T::zero()));
        }
        if v > b.upper {
            return Ok((T::one(), T::zero()));
        }
        let (psi, slope) = self.forward_with_slope(y)?;
        let pdf = slope / norm.span;
        let cdf = if v == b.lower {
            T::zero()
        } else if v == b.upper {
            T::one()
        } else {
            (psi - norm.low) / norm.span
        };
        Ok((cdf, pdf))
    }

    pub fn cdf_with(&self, norm: &Normalizer<T>, y: T, b: &Bounds) -> Result<T> {
        let v = y.value();
        if v <= b.lower {
            return Ok(T::zero());
        }
        if v >= b.upper {
            return Ok(T::one());
        }
        Ok((self.forward(y)? - norm.low) / norm.span)
    }

    pub fn normalized_cdf(&self, y: T, b: &Bounds) -> Result<T> {
        let norm = self.normalizer(b)?;
        self.cdf_with(&norm, y, b)
    }

    pub fn normalized_pdf(&self, y: T, b: &Bounds) -> Result<T> {
        let norm = self.normalizer(b)?;
        self.cdf_pdf_with(&norm, y, b).map(|(_, pdf)| pdf)
    }

    /// Bisection for `y` with `|F(y) − p| ≤ 1e-10` (or a few ulps of `T`).
    pub fn inverse_cdf(&self, p: f64, b: &Bounds) -> Result<T> {
        let norm = self.normalizer(b)?;
        self.inverse_cdf_with(&norm, p, b)
    }

    pub fn inverse_cdf_with(&self, norm: &Normalizer<T>, p: f64, b: &Bounds) -> Result<T> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Contract(format!(
                "probability {p} is outside [0, 1]"
            )));
        }
        if p == 0.0 {
            return Ok(T::of(b.lower));
        }
        if p == 1.0 {
            return Ok(T::of(b.upper));
        }
        let tol = INVERSE_TOLERANCE.max(64.0 * T::epsilon());
        let (mut lo, mut hi) = (b.lower, b.upper);
        for _ in 0..INVERSE_MAX_ITERATIONS {
            let mid = 0.5 * (lo + hi);
            let gap = self.cdf_with(norm, T::of(mid), b)?.value() - p;
            if gap.abs() <= tol {
                return Ok(T::of(mid));
            }
            if gap < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            if mid == lo && mid == hi {
                break;
            }
        }
        Err(Error::Inversion {
            p,
            lower: lo,
            upper: hi,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::simpson;
    use proptest::prelude::{prop_assert, proptest};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const LN2: f64 = std::f64::consts::LN_2;

    fn sigmoid(x: f64) -> f64 {
        1.0 / (1.0 + (-x).exp())
    }

    fn one_hidden_zero() -> MarginalNet<f64> {
        MarginalNet::zeros(vec![1, 1, 1], Activation::Sigmoid).unwrap()
    }

    fn random_net(rng: &mut ChaCha8Rng, activation: Activation) -> MarginalNet<f64> {
        let width = rng.random_range(1..=6);
        let sizes = if rng.random_bool(0.5) {
            vec![1, width, 1]
        } else {
            vec![1, width, rng.random_range(1..=6), 1]
        };
        MarginalNet::random(sizes, activation, 1.0, rng).unwrap()
    }

    #[test]
    fn positivity_map_values() {
        assert!((positivity_map(0.0_f64) - (LN2 + 1e-6)).abs() < 1e-15);
        assert!((positivity_map(20.0_f64) - (20.0 + 2.061153622438558e-9 + 1e-6)).abs() < 1e-12);
        // softplus(-20) = ln(1 + e^-20)
        let expected = (-20.0_f64).exp().ln_1p() + 1e-6;
        assert!((positivity_map(-20.0_f64) - expected).abs() < 1e-20);
        assert!((positivity_map(-20.0_f64) - (2.061153618e-9 + 1e-6)).abs() < 1e-17);
        assert!(positivity_map(-800.0_f64) > 0.0);
    }

    #[test]
    fn hand_evaluated_two_layer_composition() {
        let net = one_hidden_zero();
        let w = LN2 + 1e-6;
        let expected = |y: f64| w * sigmoid(w * y);
        assert!((net.forward(0.0).unwrap() - expected(0.0)).abs() < 1e-15);
        assert!((net.forward(0.0).unwrap() - 0.3465736).abs() < 1e-6);
        for &y in &[-2.0, -0.3, 1.7] {
            assert!((net.forward(y).unwrap() - expected(y)).abs() < 1e-15);
        }
        let slope = net.d_forward(0.0).unwrap();
        assert!((slope - w * w * 0.25).abs() < 1e-15);
        assert!((slope - 0.1201133).abs() < 1e-6);
    }

    #[test]
    fn midpoint_cdf_matches_three_forward_calls() {
        let net = one_hidden_zero();
        let b = Bounds::new(-1.0, 1.0).unwrap();
        let w = LN2 + 1e-6;
        let psi = |y: f64| w * sigmoid(w * y);
        let expected = (psi(0.0) - psi(-1.0)) / (psi(1.0) - psi(-1.0));
        let got = net.normalized_cdf(0.0, &b).unwrap();
        assert!((got - expected).abs() < 1e-15);
        assert!((got - 0.5).abs() < 1e-12, "odd symmetry of the sigmoid");
    }

    #[test]
    fn linear_net_is_affine_with_product_slope() {
        let net: MarginalNet<f64> =
            MarginalNet::from_flat(vec![1, 1, 1], Activation::Linear, &[0.3, -1.2, 0.5, 0.1])
                .unwrap();
        let w1 = positivity_map(0.3);
        let w2 = positivity_map(-1.2);
        assert!((net.d_forward(0.7).unwrap() - w1 * w2).abs() < 1e-15);
        assert!(net.forward(1.0).unwrap() > net.forward(0.5).unwrap());
        let b = Bounds::new(2.0, 6.0).unwrap();
        for &y in &[2.0, 3.3, 6.0] {
            assert!((net.normalized_pdf(y, &b).unwrap() - 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn endpoints_are_exact_and_outside_is_clamped() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let net = random_net(&mut rng, Activation::Tanh);
        let b = Bounds::new(-2.0, 3.0).unwrap();
        assert_eq!(net.normalized_cdf(-2.0, &b).unwrap(), 0.0);
        assert_eq!(net.normalized_cdf(3.0, &b).unwrap(), 1.0);
        assert_eq!(net.normalized_cdf(-9.0, &b).unwrap(), 0.0);
        assert_eq!(net.normalized_cdf(9.0, &b).unwrap(), 1.0);
        assert_eq!(net.normalized_pdf(-9.0, &b).unwrap(), 0.0);
        assert_eq!(net.normalized_pdf(9.0, &b).unwrap(), 0.0);
        assert!(net.normalized_pdf(-2.0, &b).unwrap() > 0.0);
    }

    #[test]
    fn inverse_cdf_boundaries_and_uniform_case() {
        let net: MarginalNet<f64> = MarginalNet::zeros(vec![1, 2, 1], Activation::Linear).unwrap();
        let b = Bounds::unit();
        assert_eq!(net.inverse_cdf(0.0, &b).unwrap(), 0.0);
        assert_eq!(net.inverse_cdf(1.0, &b).unwrap(), 1.0);
        assert!((net.inverse_cdf(0.25, &b).unwrap() - 0.25).abs() < 1e-9);
        assert!(net.inverse_cdf(1.5, &b).is_err());
    }

    #[test]
    fn degenerate_normalizer_is_an_error() {
        let net: MarginalNet<f64> = MarginalNet::zeros(vec![1, 1, 1], Activation::Sigmoid).unwrap();
        // Far in the saturated tail the net is flat to machine precision.
        let b = Bounds::new(1e6, 1e6 + 1.0).unwrap();
        assert!(matches!(
            net.normalized_cdf(1e6 + 0.5, &b),
            Err(Error::DegenerateMarginal { .. })
        ));
    }

    #[test]
    fn overflow_reports_layer() {
        let net: MarginalNet<f64> =
            MarginalNet::zeros(vec![1, 2, 1], Activation::Exponential).unwrap();
        assert!(matches!(net.forward(1e4), Err(Error::Evaluation { layer: 1 })));
    }

    #[test]
    fn layout_validation() {
        assert!(MarginalNet::<f64>::zeros(vec![1], Activation::Sigmoid).is_err());
        assert!(MarginalNet::<f64>::zeros(vec![2, 3, 1], Activation::Sigmoid).is_err());
        assert!(MarginalNet::<f64>::zeros(vec![1, 0, 1], Activation::Sigmoid).is_err());
        assert!(MarginalNet::<f64>::from_flat(vec![1, 2, 1], Activation::Sigmoid, &[0.0; 3]).is_err());
        assert_eq!(param_count(&[1, 10, 10, 1]), 10 + 10 + 100 + 10 + 10 + 1);
    }

    #[test]
    fn monotone_on_random_draws() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let b = Bounds::new(-3.0, 3.0).unwrap();
        for _ in 0..500 {
            let activation = [Activation::Sigmoid, Activation::Tanh, Activation::ReLU, Activation::Linear]
                [rng.random_range(0..4)];
            let net = random_net(&mut rng, activation);
            let y1 = rng.random_range(-3.0..3.0);
            let y2 = rng.random_range(y1..=3.0);
            assert!(net.forward(y2).unwrap() >= net.forward(y1).unwrap());
            if activation == Activation::ReLU && net.normalizer(&b).is_err() {
                // every hidden unit is dead on the box
                continue;
            }
            let (c1, c2) = (net.normalized_cdf(y1, &b).unwrap(), net.normalized_cdf(y2, &b).unwrap());
            assert!(c1 <= c2);
            assert!((0.0..=1.0).contains(&c1) && (0.0..=1.0).contains(&c2));
            assert!(net.normalized_pdf(y1, &b).unwrap() >= 0.0);
        }
    }

    #[test]
    fn slope_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..300 {
            let activation = if rng.random_bool(0.5) { Activation::Sigmoid } else { Activation::Tanh };
            let net = random_net(&mut rng, activation);
            let y: f64 = rng.random_range(-3.0..3.0);
            let h = 1e-5;
            let fd = (net.forward(y + h).unwrap() - net.forward(y - h).unwrap()) / (2.0 * h);
            let d = net.d_forward(y).unwrap();
            assert!(d >= 0.0);
            assert!((d - fd).abs() <= 1e-5 * (1.0 + d.abs()), "{d} vs {fd}");

            let b = Bounds::new(-4.0, 4.0).unwrap();
            let h = 1e-5 * b.width();
            let pdf = net.normalized_pdf(y, &b).unwrap();
            let fd = (net.normalized_cdf(y + h, &b).unwrap() - net.normalized_cdf(y - h, &b).unwrap())
                / (2.0 * h);
            assert!((pdf - fd).abs() <= 1e-4 * pdf.abs().max(1e-3), "{pdf} vs {fd}");
        }
    }

    #[test]
    fn density_integrates_to_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for activation in [Activation::Sigmoid, Activation::Tanh] {
            for _ in 0..50 {
                let net = random_net(&mut rng, activation);
                let lower = rng.random_range(-3.0..0.0);
                let b = Bounds::new(lower, lower + rng.random_range(0.5..4.0)).unwrap();
                let pdf = |y: f64| net.normalized_pdf(y, &b).unwrap();
                let mass_256 = simpson(pdf, b.lower, b.upper, 256);
                assert!((mass_256 - 1.0).abs() <= 1e-3, "{activation}: {mass_256}");
                let mass_512 = simpson(pdf, b.lower, b.upper, 512);
                assert!((mass_512 - 1.0).abs() <= 1e-4, "{activation}: {mass_512}");
            }
        }
    }

    #[test]
    fn input_map_rescales_slope() {
        let net: MarginalNet<f64> = MarginalNet::zeros(vec![1, 3, 1], Activation::Sigmoid).unwrap();
        let b = Bounds::new(100.0, 140.0).unwrap();
        let mapped = net.clone().with_input_map(InputMap::from_bounds(&b));
        let (v, d) = mapped.forward_with_slope(125.0).unwrap();
        let (v0, d0) = net.forward_with_slope(0.25).unwrap();
        assert!((v - v0).abs() < 1e-15);
        assert!((d - d0 / 20.0).abs() < 1e-15);
    }

    #[test]
    fn flatten_inverts_from_flat() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let net = random_net(&mut rng, Activation::Sigmoid);
        let flat = net.flatten();
        let again = MarginalNet::from_flat(net.layer_sizes().to_vec(), Activation::Sigmoid, &flat).unwrap();
        assert_eq!(again, net);
    }

    proptest! {
        #[test]
        fn inverse_round_trip(seed in 0u64..10_000, p in 0.0f64..=1.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let net = random_net(&mut rng, Activation::Sigmoid);
            let b = Bounds::new(-2.0, 2.0).unwrap();
            let y = net.inverse_cdf(p, &b).unwrap();
            prop_assert!(b.contains(y));
            prop_assert!((net.normalized_cdf(y, &b).unwrap() - p).abs() <= 1e-9);
        }
    }
}
