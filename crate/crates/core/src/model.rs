//! Uniform fit/score interface over the two classifiers.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{Dataset, DatasetError};
use crate::mlp::{self, MlpArchitecture, MlpError, MlpParams, TrainConfig, DEFAULT_HIDDEN};
use crate::svm::{self, KernelSpec, SvmConfig, SvmError, SvmModel};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Mlp(#[from] MlpError),
    #[error(transparent)]
    Svm(#[from] SvmError),
}

impl ModelError {
    /// Training blew up numerically (as opposed to a usage error).
    pub fn is_divergence(&self) -> bool {
        matches!(self, ModelError::Mlp(MlpError::Divergence { .. }))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Ann,
    Svm,
}

impl ModelKind {
    pub fn label(self) -> &'static str {
        match self {
            ModelKind::Ann => "ANN",
            ModelKind::Svm => "SVM",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Classifier {
    Mlp {
        hidden: Vec<usize>,
        train: TrainConfig,
    },
    Svm {
        kernel: KernelSpec,
        config: SvmConfig,
    },
}

impl Classifier {
    pub fn default_mlp(train: TrainConfig) -> Self {
        Classifier::Mlp {
            hidden: DEFAULT_HIDDEN.to_vec(),
            train,
        }
    }

    pub fn default_svm() -> Self {
        Classifier::Svm {
            kernel: KernelSpec::default(),
            config: SvmConfig::default(),
        }
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            Classifier::Mlp { .. } => ModelKind::Ann,
            Classifier::Svm { .. } => ModelKind::Svm,
        }
    }

    /// Same classifier with its random state replaced.
    pub fn with_seed(&self, seed: u64) -> Self {
        let mut c = self.clone();
        match &mut c {
            Classifier::Mlp { train, .. } => train.seed = seed,
            Classifier::Svm { config, .. } => config.seed = seed,
        }
        c
    }

    pub fn architecture(&self, n_inputs: usize) -> Result<MlpArchitecture, ModelError> {
        match self {
            Classifier::Mlp { hidden, .. } => {
                let mut sizes = vec![n_inputs];
                sizes.extend(hidden);
                sizes.push(2);
                Ok(MlpArchitecture::new(sizes)?)
            }
            Classifier::Svm { .. } => Ok(MlpArchitecture::standard(n_inputs)?),
        }
    }

    pub fn fit(&self, train: &Dataset) -> Result<Fitted, ModelError> {
        match self {
            Classifier::Mlp { train: cfg, .. } => {
                let arch = self.architecture(train.n_features())?;
                let (p, _) = mlp::train(train, None, &arch, cfg)?;
                Ok(Fitted::Mlp(p))
            }
            Classifier::Svm { kernel, config } => {
                Ok(Fitted::Svm(svm::train_smo(train, kernel, config)?))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Fitted {
    Mlp(MlpParams),
    Svm(SvmModel),
}

impl Fitted {
    pub fn accuracy(&self, ds: &Dataset) -> Result<f64, ModelError> {
        Ok(match self {
            Fitted::Mlp(p) => p.evaluate(ds)?,
            Fitted::Svm(m) => m.evaluate(ds)?,
        })
    }
}
