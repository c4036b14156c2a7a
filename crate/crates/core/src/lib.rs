//! Nonparametric multivariate conditional density forecasting.
//!
//! Each target dimension gets a monotone positive-weighted network whose
//! output, normalized over `[L_d, U_d]`, is a marginal CDF. A pairwise
//! correlation combiner joins the marginals into a joint CDF whose mixed
//! partial derivative (the joint density) is available in closed form and
//! is nonnegative for every parameter value. A conditioning network maps
//! features to the full parameter vector, and the whole stack is trained
//! by maximum likelihood with reverse-mode gradients.
//!
//! All numerical code is generic over [`Scalar`]; the `*64` aliases below
//! fix it to `f64`.

pub mod activations;
pub mod autodiff;
pub mod copula;
pub mod data;
pub mod error;
pub mod hypernet;
pub mod marginal;
pub mod metrics;
pub mod miso;
pub mod model_file;
pub mod quadrature;
pub mod scalar;
pub mod training;
pub mod verify;

pub use activations::Activation;
pub use copula::{Correlations, JdanModel};
pub use data::{CsvSpec, Dataset, Observation};
pub use error::{Error, Result};
pub use hypernet::{Architecture, ConditionalModel, ConditioningNet, Forecaster, MarginalSpec};
pub use marginal::{Bounds, InputMap, MarginalNet};
pub use metrics::MetricsReport;
pub use miso::{find_negative_witness, MisoNet, WitnessConfig, WitnessReport};
pub use model_file::{LoadedModel, ModelDocument};
pub use scalar::Scalar;
pub use training::{TrainConfig, TrainReport};

pub type MarginalNet64 = MarginalNet<f64>;
pub type MarginalNet32 = MarginalNet<f32>;
pub type Correlations64 = Correlations<f64>;
pub type JdanModel64 = JdanModel<f64>;
pub type JdanModel32 = JdanModel<f32>;
pub type MisoNet64 = MisoNet<f64>;
pub type ConditioningNet64 = ConditioningNet<f64>;
