//! JSON model documents (`"version": "jdan-v1"`).
//!
//! A document always carries a complete joint model in `marginals` and
//! `correlations`. Conditional models add a `conditioning` section with
//! the trained network; the joint model stored beside it is the forecast
//! at the mean feature vector. Checkpoints are documents with a
//! `training` section.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::activations::Activation;
use crate::copula::{Correlations, JdanModel};
use crate::data::{AffineMap, CsvSpec};
use crate::error::{Error, Result};
use crate::hypernet::{Architecture, ConditionalModel, ConditioningNet, Forecaster};
use crate::marginal::{Bounds, InputMap, MarginalNet};
use crate::training::AdamState;

pub const VERSION: &str = "jdan-v1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarginalSection {
    pub layer_sizes: Vec<usize>,
    pub activation: Activation,
    #[serde(default)]
    pub input_map: InputMap,
    /// Unconstrained weights, one vector per layer, row-major.
    pub raw_weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationSection {
    /// `atanh` of the coefficients, pairs (1,2), (1,3), …, (D−1,D).
    pub raw: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditioningSection {
    pub architecture: Architecture,
    pub layer_sizes: Vec<usize>,
    pub activation: Activation,
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
    pub feature_scaling: Vec<AffineMap>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingState {
    pub epoch: usize,
    pub optimizer: AdamState,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    pub version: String,
    pub dim: usize,
    pub bounds: Vec<Bounds>,
    pub marginals: Vec<MarginalSection>,
    pub correlations: CorrelationSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub conditioning: Option<ConditioningSection>,
    /// Columns the model was trained on.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data: Option<CsvSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub training: Option<TrainingState>,
}

/// A model read back from a document.
#[derive(Clone, Debug, PartialEq)]
pub enum LoadedModel {
    Joint(JdanModel<f64>),
    Conditional(ConditionalModel),
}

impl Forecaster for LoadedModel {
    fn dim(&self) -> usize {
        match self {
            LoadedModel::Joint(m) => m.dim(),
            LoadedModel::Conditional(m) => m.dim(),
        }
    }

    fn input_dim(&self) -> usize {
        match self {
            LoadedModel::Joint(_) => 0,
            LoadedModel::Conditional(m) => m.input_dim(),
        }
    }

    fn model_for(&self, features: &[f64]) -> Result<JdanModel<f64>> {
        match self {
            LoadedModel::Joint(m) => Forecaster::model_for(m, features),
            LoadedModel::Conditional(m) => m.model_for(features),
        }
    }
}

impl ModelDocument {
    pub fn from_joint(model: &JdanModel<f64>) -> Self {
        ModelDocument {
            version: VERSION.to_string(),
            dim: model.dim(),
            bounds: model.bounds().to_vec(),
            marginals: model
                .marginals()
                .iter()
                .map(|m| MarginalSection {
                    layer_sizes: m.layer_sizes().to_vec(),
                    activation: m.activation(),
                    input_map: m.input_map(),
                    raw_weights: m.raw_weights().to_vec(),
                    biases: m.biases().to_vec(),
                })
                .collect(),
            correlations: CorrelationSection {
                raw: model.correlations().raw().to_vec(),
            },
            conditioning: None,
            data: None,
            training: None,
        }
    }

    pub fn from_conditional(model: &ConditionalModel) -> Result<Self> {
        let mean_features: Vec<f64> = model.feature_scaling.iter().map(|m| m.invert(0.0)).collect();
        let mut doc = Self::from_joint(&model.model_for(&mean_features)?);
        doc.conditioning = Some(ConditioningSection {
            architecture: model.architecture.clone(),
            layer_sizes: model.net.layer_sizes().to_vec(),
            activation: model.net.activation(),
            weights: model.net.weights().to_vec(),
            biases: model.net.biases().to_vec(),
            feature_scaling: model.feature_scaling.clone(),
        });
        Ok(doc)
    }

    pub fn with_data(mut self, spec: CsvSpec) -> Self {
        self.data = Some(spec);
        self
    }

    pub fn joint(&self) -> Result<JdanModel<f64>> {
        self.check_version()?;
        if self.marginals.len() != self.dim || self.bounds.len() != self.dim {
            return Err(Error::Dimension {
                expected: self.dim,
                got: self.marginals.len().min(self.bounds.len()),
            });
        }
        let marginals = self
            .marginals
            .iter()
            .map(|s| {
                MarginalNet::new(s.layer_sizes.clone(), s.activation, s.raw_weights.clone(), s.biases.clone())
                    .map(|m| m.with_input_map(s.input_map))
            })
            .collect::<Result<Vec<_>>>()?;
        let correlations = Correlations::new(self.dim, self.correlations.raw.clone())?;
        JdanModel::new(marginals, self.bounds.clone(), correlations)
    }

    pub fn load(&self) -> Result<LoadedModel> {
        let joint = self.joint()?;
        let Some(c) = &self.conditioning else {
            return Ok(LoadedModel::Joint(joint));
        };
        c.architecture.validate()?;
        if c.architecture.dim != self.dim || c.architecture.bounds != self.bounds {
            return Err(Error::Contract(
                "conditioning architecture disagrees with the document bounds".into(),
            ));
        }
        if c.feature_scaling.len() != c.architecture.input_dim {
            return Err(Error::Dimension {
                expected: c.architecture.input_dim,
                got: c.feature_scaling.len(),
            });
        }
        if c.layer_sizes != c.architecture.hypernet_layout() {
            return Err(Error::Contract(format!(
                "conditioning layout {:?} does not match the architecture {:?}",
                c.layer_sizes,
                c.architecture.hypernet_layout()
            )));
        }
        let net = ConditioningNet::new(c.layer_sizes.clone(), c.activation, c.weights.clone(), c.biases.clone())?;
        Ok(LoadedModel::Conditional(ConditionalModel {
            architecture: c.architecture.clone(),
            net,
            feature_scaling: c.feature_scaling.clone(),
        }))
    }

    pub fn check_version(&self) -> Result<()> {
        if self.version == VERSION {
            Ok(())
        } else {
            Err(Error::Version(self.version.clone()))
        }
    }

    pub fn from_reader<R: Read>(reader: R) -> Result<Self> {
        let doc: ModelDocument = serde_json::from_reader(reader)?;
        doc.check_version()?;
        Ok(doc)
    }

    pub fn to_writer<W: Write>(&self, writer: W) -> Result<()> {
        serde_json::to_writer_pretty(writer, self)?;
        Ok(())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::from_reader(BufReader::new(File::open(path).map_err(Error::file(path))?))
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = BufWriter::new(File::create(path).map_err(Error::file(path))?);
        self.to_writer(&mut w)?;
        w.write_all(b"\n")?;
        w.flush()?;
        Ok(())
    }
}
