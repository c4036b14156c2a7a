//! Multi-input positive-weighted network and the search for negative
//! mixed partials.
//!
//! A positive-weighted network with vector input is nondecreasing in every
//! coordinate, but its mixed second partials pick up `z''` terms, which are
//! negative for sigmoid and tanh on half the real line. Such a network
//! therefore cannot serve as a joint CDF. [`find_negative_witness`] makes
//! that concrete with a reproducible random search over one-hidden-layer
//! networks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::activations::Activation;
use crate::error::{Error, Result};
use crate::marginal::positivity_map;
use crate::scalar::Scalar;

/// Values above this threshold do not count as a witness.
pub const WITNESS_THRESHOLD: f64 = -1e-8;

#[derive(Clone, Debug, PartialEq)]
pub struct MisoNet<T> {
    layer_sizes: Vec<usize>,
    activations: Vec<Activation>,
    raw_weights: Vec<Vec<T>>,
    biases: Vec<Vec<T>>,
    weights: Vec<Vec<T>>,
}

impl<T: Scalar> MisoNet<T> {
    /// `layer_sizes` is `[D, h_1, …, h_K, 1]`; one activation per layer,
    /// output layer included.
    pub fn new(
        layer_sizes: Vec<usize>,
        activations: Vec<Activation>,
        raw_weights: Vec<Vec<T>>,
        biases: Vec<Vec<T>>,
    ) -> Result<Self> {
        if layer_sizes.len() < 2 || *layer_sizes.last().unwrap() != 1 || layer_sizes.contains(&0) {
            return Err(Error::Contract(format!(
                "invalid multi-input layout {layer_sizes:?}"
            )));
        }
        let layers = layer_sizes.len() - 1;
        if activations.len() != layers || raw_weights.len() != layers || biases.len() != layers {
            return Err(Error::Contract(format!(
                "expected {layers} activations, weight blocks and bias blocks"
            )));
        }
        for (k, w) in layer_sizes.windows(2).enumerate() {
            if raw_weights[k].len() != w[0] * w[1] || biases[k].len() != w[1] {
                return Err(Error::Dimension {
                    expected: w[0] * w[1] + w[1],
                    got: raw_weights[k].len() + biases[k].len(),
                });
            }
        }
        let weights = raw_weights
            .iter()
            .map(|l| l.iter().map(|&r| positivity_map(r)).collect())
            .collect();
        Ok(MisoNet {
            layer_sizes,
            activations,
            raw_weights,
            biases,
            weights,
        })
    }

    /// Raw weights and biases i.i.d. standard normal, one activation
    /// everywhere.
    pub fn random<R: Rng + ?Sized>(
        layer_sizes: Vec<usize>,
        activation: Activation,
        rng: &mut R,
    ) -> Result<Self> {
        let mut draw = |n: usize| -> Vec<T> {
            (0..n)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(rng);
                    T::of(z)
                })
                .collect()
        };
        let raw_weights = layer_sizes.windows(2).map(|w| draw(w[0] * w[1])).collect();
        let biases = layer_sizes.windows(2).map(|w| draw(w[1])).collect();
        let layers = layer_sizes.len().saturating_sub(1);
        Self::new(layer_sizes, vec![activation; layers], raw_weights, biases)
    }

    pub fn zeros(layer_sizes: Vec<usize>, activation: Activation) -> Result<Self> {
        let raw_weights = layer_sizes
            .windows(2)
            .map(|w| vec![T::zero(); w[0] * w[1]])
            .collect();
        let biases = layer_sizes.windows(2).map(|w| vec![T::zero(); w[1]]).collect();
        let layers = layer_sizes.len().saturating_sub(1);
        Self::new(layer_sizes, vec![activation; layers], raw_weights, biases)
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn activations(&self) -> &[Activation] {
        &self.activations
    }

    pub fn raw_weights(&self) -> &[Vec<T>] {
        &self.raw_weights
    }

    pub fn biases(&self) -> &[Vec<T>] {
        &self.biases
    }

    pub fn effective_weights(&self) -> &[Vec<T>] {
        &self.weights
    }

    fn check_input(&self, y: &[T]) -> Result<()> {
        if y.len() == self.input_dim() {
            Ok(())
        } else {
            Err(Error::Dimension {
                expected: self.input_dim(),
                got: y.len(),
            })
        }
    }

    /// Pre-activations of layer `k` given its input.
    fn pre_activations(&self, k: usize, input: &[T]) -> Vec<T> {
        let fan_in = self.layer_sizes[k];
        (0..self.layer_sizes[k + 1])
            .map(|j| {
                let row = &self.weights[k][j * fan_in..(j + 1) * fan_in];
                T::affine(self.biases[k][j], row, input)
            })
            .collect()
    }

    /// `Y_k = z(W_k⁺ Y_{k−1} + b_k)`, scalar output.
    pub fn forward(&self, y: &[T]) -> Result<T> {
        self.check_input(y)?;
        let mut h = y.to_vec();
        for k in 0..self.activations.len() {
            h = self
                .pre_activations(k, &h)
                .into_iter()
                .map(|a| self.activations[k].eval(a))
                .collect();
            if h.iter().any(|v| !v.is_finite()) {
                return Err(Error::Evaluation { layer: k + 1 });
            }
        }
        Ok(h[0])
    }

    /// Gradient with respect to the input, as the product of layer
    /// Jacobians `diag(z'(a_k)) W_k⁺`.
    pub fn gradient(&self, y: &[T]) -> Result<Vec<T>> {
        self.check_input(y)?;
        let dim = self.input_dim();
        let mut h = y.to_vec();
        // jac[j][p] = ∂h_j / ∂y_p
        let mut jac: Vec<Vec<T>> = (0..dim)
            .map(|j| (0..dim).map(|p| if p == j { T::one() } else { T::zero() }).collect())
            .collect();
        for k in 0..self.activations.len() {
            let fan_in = self.layer_sizes[k];
            let a = self.pre_activations(k, &h);
            let mut next_jac = Vec::with_capacity(a.len());
            for (j, &aj) in a.iter().enumerate() {
                let row = &self.weights[k][j * fan_in..(j + 1) * fan_in];
                let slope = self.activations[k].d1(aj);
                next_jac.push(
                    (0..dim)
                        .map(|p| {
                            let column: Vec<T> = jac.iter().map(|r| r[p]).collect();
                            slope * T::affine(T::zero(), row, &column)
                        })
                        .collect(),
                );
            }
            h = a.into_iter().map(|v| self.activations[k].eval(v)).collect();
            if h.iter().any(|v| !v.is_finite()) {
                return Err(Error::Evaluation { layer: k + 1 });
            }
            jac = next_jac;
        }
        Ok(jac.swap_remove(0))
    }

    /// Closed-form `∂²Γ/∂y_p∂y_q` for a network with exactly one hidden
    /// layer, `Γ = z₂(w₂⁺·z₁(W₁⁺y + b₁) + b₂)`:
    ///
    /// ```text
    /// z₂'(A) Σ_l w₂ₗ z₁''(aₗ) W₁ₗₚ W₁ₗ_q
    ///   + z₂''(A) (Σ_l w₂ₗ z₁'(aₗ) W₁ₗₚ)(Σ_l w₂ₗ z₁'(aₗ) W₁ₗ_q)
    /// ```
    pub fn mixed_partial(&self, y: &[T], p: usize, q: usize) -> Result<T> {
        if self.layer_sizes.len() != 3 {
            return Err(Error::Contract(format!(
                "closed-form mixed partial needs exactly one hidden layer, layout is {:?}",
                self.layer_sizes
            )));
        }
        self.check_input(y)?;
        let dim = self.input_dim();
        if p >= dim || q >= dim || p == q {
            return Err(Error::Contract(format!(
                "need two distinct coordinates below {dim}, got ({p}, {q})"
            )));
        }
        let (inner, outer) = (self.activations[0], self.activations[1]);
        let a = self.pre_activations(0, y);
        let h: Vec<T> = a.iter().map(|&v| inner.eval(v)).collect();
        let top = self.pre_activations(1, &h)[0];
        let w1 = &self.weights[0];
        let w2 = &self.weights[1];
        let mut curvature = T::zero();
        let mut slope_p = T::zero();
        let mut slope_q = T::zero();
        for (l, &al) in a.iter().enumerate() {
            let (wp, wq) = (w1[l * dim + p], w1[l * dim + q]);
            curvature = curvature + w2[l] * inner.d2(al) * wp * wq;
            let s = w2[l] * inner.d1(al);
            slope_p = slope_p + s * wp;
            slope_q = slope_q + s * wq;
        }
        Ok(outer.d1(top) * curvature + outer.d2(top) * slope_p * slope_q)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct WitnessConfig {
    pub activation: Activation,
    pub dim: usize,
    pub hidden: usize,
    pub seed: u64,
    pub max_trials: usize,
}

impl WitnessConfig {
    pub fn new(activation: Activation, dim: usize, seed: u64) -> Self {
        WitnessConfig {
            activation,
            dim,
            hidden: 4,
            seed,
            max_trials: 10_000,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct WitnessParams {
    pub layer_sizes: Vec<usize>,
    pub raw_weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Witness {
    pub trial: usize,
    pub params: WitnessParams,
    pub y: Vec<f64>,
    pub p: usize,
    pub q: usize,
    pub value: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct WitnessReport {
    pub activation: Activation,
    pub dim: usize,
    pub hidden: usize,
    pub seed: u64,
    /// Trials evaluated before stopping.
    pub trials: usize,
    /// Trials whose forward pass overflowed and were skipped.
    pub non_finite_trials: usize,
    pub witness: Option<Witness>,
}

impl WitnessReport {
    pub fn summary(&self) -> String {
        match &self.witness {
            Some(w) => format!(
                "{}: negative mixed partial {:.6e} at trial {} (d2/dy{} dy{})",
                self.activation,
                w.value,
                w.trial,
                w.p + 1,
                w.q + 1
            ),
            None => format!("{}: no witness in {} trials", self.activation, self.trials),
        }
    }
}

/// Random search for a one-hidden-layer positive-weighted network and an
/// input `y ∈ [−3, 3]^D` whose mixed partial is below
/// [`WITNESS_THRESHOLD`]. Deterministic in `config.seed`.
pub fn find_negative_witness(config: &WitnessConfig) -> Result<WitnessReport> {
    if config.dim < 2 || config.hidden == 0 {
        return Err(Error::Contract(
            "witness search needs dim >= 2 and a nonempty hidden layer".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let layout = vec![config.dim, config.hidden, 1];
    let mut non_finite = 0;
    for trial in 1..=config.max_trials {
        let net = MisoNet::<f64>::random(layout.clone(), config.activation, &mut rng)?;
        let y: Vec<f64> = (0..config.dim).map(|_| rng.random_range(-3.0..=3.0)).collect();
        let p = rng.random_range(0..config.dim);
        let q = (p + rng.random_range(1..config.dim)) % config.dim;
        let value = match net.mixed_partial(&y, p, q) {
            Ok(v) if v.is_finite() => v,
            _ => {
                non_finite += 1;
                continue;
            }
        };
        if value < WITNESS_THRESHOLD {
            return Ok(WitnessReport {
                activation: config.activation,
                dim: config.dim,
                hidden: config.hidden,
                seed: config.seed,
                trials: trial,
                non_finite_trials: non_finite,
                witness: Some(Witness {
                    trial,
                    params: WitnessParams {
                        layer_sizes: layout,
                        raw_weights: net.raw_weights().to_vec(),
                        biases: net.biases().to_vec(),
                    },
                    y,
                    p,
                    q,
                    value,
                }),
            });
        }
    }
    Ok(WitnessReport {
        activation: config.activation,
        dim: config.dim,
        hidden: config.hidden,
        seed: config.seed,
        trials: config.max_trials,
        non_finite_trials: non_finite,
        witness: None,
    })
}
