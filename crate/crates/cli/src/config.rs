use std::path::{Path, PathBuf};

use jdan_core::activations::Activation;
use jdan_core::data::CsvSpec;
use jdan_core::hypernet::MarginalSpec;
use jdan_core::marginal::Bounds;
use jdan_core::training::TrainConfig;
use jdan_core::{Error, Result};
use serde::Deserialize;

#[derive(Clone, Debug, Deserialize)]
pub struct DataSection {
    /// Relative paths are resolved against the config file's directory.
    pub path: PathBuf,
    #[serde(flatten)]
    pub columns: CsvSpec,
}

/// One spec shared by every dimension, or one per dimension.
#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum MarginalSpecs {
    Shared(MarginalSpec),
    PerDimension(Vec<MarginalSpec>),
}

impl Default for MarginalSpecs {
    fn default() -> Self {
        MarginalSpecs::Shared(MarginalSpec::default())
    }
}

impl MarginalSpecs {
    pub fn expand(&self, dim: usize) -> Result<Vec<MarginalSpec>> {
        match self {
            MarginalSpecs::Shared(s) => Ok(vec![s.clone(); dim]),
            MarginalSpecs::PerDimension(v) if v.len() == dim => Ok(v.clone()),
            MarginalSpecs::PerDimension(v) => Err(Error::Dimension {
                expected: dim,
                got: v.len(),
            }),
        }
    }
}

fn default_hidden() -> Vec<usize> {
    vec![64, 64]
}

fn default_activation() -> Activation {
    Activation::Sigmoid
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArchitectureSection {
    #[serde(default)]
    pub marginals: MarginalSpecs,
    #[serde(default = "default_hidden")]
    pub hypernet_hidden: Vec<usize>,
    #[serde(default = "default_activation")]
    pub hypernet_activation: Activation,
}

impl Default for ArchitectureSection {
    fn default() -> Self {
        ArchitectureSection {
            marginals: MarginalSpecs::default(),
            hypernet_hidden: default_hidden(),
            hypernet_activation: default_activation(),
        }
    }
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub model: Option<PathBuf>,
    pub report: Option<PathBuf>,
}

fn default_margin() -> f64 {
    0.05
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainFile {
    pub data: DataSection,
    /// Fitted on the training split when absent.
    #[serde(default)]
    pub bounds: Option<Vec<Bounds>>,
    #[serde(default = "default_margin")]
    pub bound_margin: f64,
    #[serde(default)]
    pub architecture: ArchitectureSection,
    #[serde(default)]
    pub training: TrainConfig,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl TrainFile {
    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(Error::file(path))?;
        let mut cfg: TrainFile = serde_json::from_str(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        if !cfg.data_path().is_file() {
            return Err(Error::Contract(format!(
                "data file {} does not exist",
                cfg.data_path().display()
            )));
        }
        cfg.training.validate()?;
        Ok(cfg)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn data_path(&self) -> PathBuf {
        self.resolve(&self.data.path)
    }
}
