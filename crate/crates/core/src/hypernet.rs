//! Conditioning network: forecast features in, the full raw parameter
//! vector of a [`JdanModel`] out.
//!
//! The raw vector is laid out as: marginal 1 weights (layer by layer,
//! row-major), marginal 1 biases, marginal 2 …, then the correlation raws
//! in upper-triangular order. [`Architecture::materialize`] is total: any
//! finite raw vector yields a valid model.
//!
//! With `input_dim == 0` the network degenerates to a single bias vector,
//! i.e. the raw parameters are trained directly.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::activations::Activation;
use crate::copula::{pair_count, Correlations, JdanModel, MAX_DIM};
use crate::data::AffineMap;
use crate::error::{Error, Result};
use crate::marginal::{self, Bounds, InputMap, MarginalNet};
use crate::scalar::{lift, Scalar};

const INIT_RAW_SCALE: f64 = 0.1;
const OUTPUT_LAYER_GAIN: f64 = 0.1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarginalSpec {
    pub hidden: Vec<usize>,
    pub activation: Activation,
}

impl Default for MarginalSpec {
    fn default() -> Self {
        MarginalSpec {
            hidden: vec![10, 10],
            activation: Activation::Sigmoid,
        }
    }
}

fn default_hypernet_hidden() -> Vec<usize> {
    vec![64, 64]
}

fn default_hypernet_activation() -> Activation {
    Activation::Sigmoid
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Architecture {
    pub dim: usize,
    pub marginals: Vec<MarginalSpec>,
    pub bounds: Vec<Bounds>,
    /// Number of features; 0 trains the raw parameters directly.
    pub input_dim: usize,
    #[serde(default = "default_hypernet_hidden")]
    pub hypernet_hidden: Vec<usize>,
    #[serde(default = "default_hypernet_activation")]
    pub hypernet_activation: Activation,
}

impl Architecture {
    /// Default marginal and hypernetwork shapes.
    pub fn new(bounds: Vec<Bounds>, input_dim: usize) -> Self {
        Architecture {
            dim: bounds.len(),
            marginals: vec![MarginalSpec::default(); bounds.len()],
            bounds,
            input_dim,
            hypernet_hidden: default_hypernet_hidden(),
            hypernet_activation: default_hypernet_activation(),
        }
    }

    pub fn with_marginals(mut self, spec: MarginalSpec) -> Self {
        self.marginals = vec![spec; self.dim];
        self
    }

    pub fn with_hypernet(mut self, hidden: Vec<usize>, activation: Activation) -> Self {
        self.hypernet_hidden = hidden;
        self.hypernet_activation = activation;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(2..=MAX_DIM).contains(&self.dim) {
            return Err(Error::Contract(format!(
                "dimension must be between 2 and {MAX_DIM}, got {}",
                self.dim
            )));
        }
        if self.marginals.len() != self.dim || self.bounds.len() != self.dim {
            return Err(Error::Contract(format!(
                "dimension {} but {} marginal specs and {} bounds",
                self.dim,
                self.marginals.len(),
                self.bounds.len()
            )));
        }
        for b in &self.bounds {
            b.validate()?;
        }
        for d in 0..self.dim {
            marginal::validate_layout(&self.marginal_layout(d))?;
        }
        if self.input_dim > 0 && self.hypernet_hidden.contains(&0) {
            return Err(Error::Contract("hypernetwork widths must be positive".into()));
        }
        Ok(())
    }

    pub fn marginal_layout(&self, d: usize) -> Vec<usize> {
        let mut sizes = Vec::with_capacity(self.marginals[d].hidden.len() + 2);
        sizes.push(1);
        sizes.extend_from_slice(&self.marginals[d].hidden);
        sizes.push(1);
        sizes
    }

    /// Length of the raw parameter vector of one model.
    pub fn raw_len(&self) -> usize {
        (0..self.dim)
            .map(|d| marginal::param_count(&self.marginal_layout(d)))
            .sum::<usize>()
            + pair_count(self.dim)
    }

    /// Layer widths of the conditioning network, input to output.
    pub fn hypernet_layout(&self) -> Vec<usize> {
        let mut sizes = vec![self.input_dim];
        if self.input_dim > 0 {
            sizes.extend_from_slice(&self.hypernet_hidden);
        }
        sizes.push(self.raw_len());
        sizes
    }

    pub fn materialize<T: Scalar>(&self, raw: &[T]) -> Result<JdanModel<T>> {
        if raw.len() != self.raw_len() {
            return Err(Error::Dimension {
                expected: self.raw_len(),
                got: raw.len(),
            });
        }
        let mut at = 0;
        let mut marginals = Vec::with_capacity(self.dim);
        for d in 0..self.dim {
            let layout = self.marginal_layout(d);
            let n = marginal::param_count(&layout);
            let net = MarginalNet::from_flat(layout, self.marginals[d].activation, &raw[at..at + n])?
                .with_input_map(InputMap::from_bounds(&self.bounds[d]));
            marginals.push(net);
            at += n;
        }
        let correlations = Correlations::new(self.dim, raw[at..].to_vec())?;
        JdanModel::new(marginals, self.bounds.clone(), correlations)
    }

    /// Small random marginal raws, zero correlation raws: near-linear
    /// marginals and near-independence.
    pub fn initial_raw<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let n_marginal = self.raw_len() - pair_count(self.dim);
        let mut raw: Vec<f64> = (0..n_marginal)
            .map(|_| {
                let z: f64 = StandardNormal.sample(rng);
                INIT_RAW_SCALE * z
            })
            .collect();
        raw.resize(self.raw_len(), 0.0);
        raw
    }
}

/// Fully connected network; hidden layers share one activation and the
/// output layer is linear.
#[derive(Clone, Debug, PartialEq)]
pub struct ConditioningNet<T> {
    layer_sizes: Vec<usize>,
    activation: Activation,
    weights: Vec<Vec<T>>,
    biases: Vec<Vec<T>>,
}

pub fn param_count(layer_sizes: &[usize]) -> usize {
    layer_sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

impl<T: Scalar> ConditioningNet<T> {
    pub fn new(
        layer_sizes: Vec<usize>,
        activation: Activation,
        weights: Vec<Vec<T>>,
        biases: Vec<Vec<T>>,
    ) -> Result<Self> {
        if layer_sizes.len() < 2 || layer_sizes[1..].contains(&0) {
            return Err(Error::Contract(format!(
                "invalid conditioning layout {layer_sizes:?}"
            )));
        }
        let layers = layer_sizes.len() - 1;
        if weights.len() != layers || biases.len() != layers {
            return Err(Error::Contract(format!(
                "expected {layers} weight and bias blocks"
            )));
        }
        for (k, w) in layer_sizes.windows(2).enumerate() {
            if weights[k].len() != w[0] * w[1] || biases[k].len() != w[1] {
                return Err(Error::Dimension {
                    expected: w[0] * w[1] + w[1],
                    got: weights[k].len() + biases[k].len(),
                });
            }
        }
        Ok(ConditioningNet {
            layer_sizes,
            activation,
            weights,
            biases,
        })
    }

    /// Parameters in layer order, each layer as weights (row-major) then
    /// biases.
    pub fn from_flat(layer_sizes: Vec<usize>, activation: Activation, params: &[T]) -> Result<Self> {
        let expected = param_count(&layer_sizes);
        if params.len() != expected {
            return Err(Error::Dimension {
                expected,
                got: params.len(),
            });
        }
        let mut at = 0;
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for w in layer_sizes.windows(2) {
            weights.push(params[at..at + w[0] * w[1]].to_vec());
            at += w[0] * w[1];
            biases.push(params[at..at + w[1]].to_vec());
            at += w[1];
        }
        Self::new(layer_sizes, activation, weights, biases)
    }

    pub fn flatten(&self) -> Vec<T> {
        let mut out = Vec::with_capacity(param_count(&self.layer_sizes));
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend_from_slice(w);
            out.extend_from_slice(b);
        }
        out
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn weights(&self) -> &[Vec<T>] {
        &self.weights
    }

    pub fn biases(&self) -> &[Vec<T>] {
        &self.biases
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    pub fn forward(&self, x: &[T]) -> Result<Vec<T>> {
        if x.len() != self.input_dim() {
            return Err(Error::Dimension {
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        let layers = self.weights.len();
        let mut h = x.to_vec();
        for k in 0..layers {
            let fan_in = self.layer_sizes[k];
            let hidden = k + 1 < layers;
            h = (0..self.layer_sizes[k + 1])
                .map(|j| {
                    let a = T::affine(
                        self.biases[k][j],
                        &self.weights[k][j * fan_in..(j + 1) * fan_in],
                        &h,
                    );
                    if hidden {
                        self.activation.eval(a)
                    } else {
                        a
                    }
                })
                .collect();
            if h.iter().any(|v| !v.is_finite()) {
                return Err(Error::Evaluation { layer: k + 1 });
            }
        }
        Ok(h)
    }

    /// Model for standardized features `x`.
    pub fn model_for(&self, arch: &Architecture, x: &[T]) -> Result<JdanModel<T>> {
        arch.materialize(&self.forward(x)?)
    }
}

impl ConditioningNet<f64> {
    /// Uniform Glorot initialization for hidden layers with zero biases;
    /// the output layer weights get an extra 0.1 gain and its biases start
    /// at [`Architecture::initial_raw`].
    pub fn init(arch: &Architecture, seed: u64) -> Result<Self> {
        arch.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layout = arch.hypernet_layout();
        let layers = layout.len() - 1;
        let mut weights = Vec::with_capacity(layers);
        let mut biases = Vec::with_capacity(layers);
        for (k, w) in layout.windows(2).enumerate() {
            let limit = if w[0] == 0 {
                0.0
            } else {
                (6.0 / (w[0] + w[1]) as f64).sqrt()
            };
            let gain = if k + 1 == layers { OUTPUT_LAYER_GAIN } else { 1.0 };
            weights.push(
                (0..w[0] * w[1])
                    .map(|_| gain * rng.random_range(-limit..=limit))
                    .collect(),
            );
            biases.push(vec![0.0; w[1]]);
        }
        *biases.last_mut().unwrap() = arch.initial_raw(&mut rng);
        Self::new(layout, arch.hypernet_activation, weights, biases)
    }

    /// Unconditional net whose output is exactly `raw`.
    pub fn constant(arch: &Architecture, raw: Vec<f64>) -> Result<Self> {
        if raw.len() != arch.raw_len() {
            return Err(Error::Dimension {
                expected: arch.raw_len(),
                got: raw.len(),
            });
        }
        Self::new(vec![0, raw.len()], arch.hypernet_activation, vec![vec![]], vec![raw])
    }
}

/// Anything that produces a joint model for a raw feature vector.
pub trait Forecaster: Sync {
    fn dim(&self) -> usize;
    fn input_dim(&self) -> usize;
    fn model_for(&self, features: &[f64]) -> Result<JdanModel<f64>>;
}

impl Forecaster for JdanModel<f64> {
    fn dim(&self) -> usize {
        JdanModel::dim(self)
    }

    fn input_dim(&self) -> usize {
        0
    }

    fn model_for(&self, _features: &[f64]) -> Result<JdanModel<f64>> {
        Ok(self.clone())
    }
}

/// Trained conditioning network plus the feature standardization it
/// expects.
#[derive(Clone, Debug, PartialEq)]
pub struct ConditionalModel {
    pub architecture: Architecture,
    pub net: ConditioningNet<f64>,
    pub feature_scaling: Vec<AffineMap>,
}

impl ConditionalModel {
    pub fn standardize(&self, features: &[f64]) -> Result<Vec<f64>> {
        if features.len() != self.feature_scaling.len() {
            return Err(Error::Dimension {
                expected: self.feature_scaling.len(),
                got: features.len(),
            });
        }
        Ok(features
            .iter()
            .zip(&self.feature_scaling)
            .map(|(&v, m)| m.apply(v))
            .collect())
    }
}

impl Forecaster for ConditionalModel {
    fn dim(&self) -> usize {
        self.architecture.dim
    }

    fn input_dim(&self) -> usize {
        self.architecture.input_dim
    }

    fn model_for(&self, features: &[f64]) -> Result<JdanModel<f64>> {
        let x = self.standardize(features)?;
        self.net.model_for(&self.architecture, &lift(&x))
    }
}
