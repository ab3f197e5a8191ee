//! Classifier strategies: linear SVM, RBF SVM, random forest. Each strategy
//! implements [`Classifier`] and is registered by name; trained artifacts
//! serialize inside a versioned [`ModelFile`] together with the reduction
//! transform fitted on the same fold and the feature-catalog version.

mod rf;
mod svm;

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::reduce::ReductionTransform;

pub use rf::{rf_train, RfModel, RfParams};
pub use svm::{svm_train, Kernel, SvmModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TrainedClassifier {
    Lsvm(SvmModel),
    Nlsvm(SvmModel),
    Rf(RfModel),
}

impl TrainedClassifier {
    pub fn kind_name(&self) -> &'static str {
        match self {
            TrainedClassifier::Lsvm(_) => "lsvm",
            TrainedClassifier::Nlsvm(_) => "nlsvm",
            TrainedClassifier::Rf(_) => "rf",
        }
    }

    pub fn input_dim(&self) -> usize {
        match self {
            TrainedClassifier::Lsvm(m) | TrainedClassifier::Nlsvm(m) => {
                m.support_vectors.first().map_or(0, Vec::len)
            }
            TrainedClassifier::Rf(m) => m.n_features,
        }
    }

    /// Confidence for class 1 in [0, 1].
    pub fn classify(&self, row: &[f64]) -> Result<f64> {
        let dim = self.input_dim();
        if dim != 0 && row.len() != dim {
            return Err(Error::Model(format!(
                "row has {} features, model expects {dim}",
                row.len()
            )));
        }
        Ok(match self {
            TrainedClassifier::Lsvm(m) | TrainedClassifier::Nlsvm(m) => m.predict_proba(row),
            TrainedClassifier::Rf(m) => m.predict_proba(row),
        })
    }
}

/// A classifier strategy: trains on reduced feature rows with 0/1 labels.
pub trait Classifier: Send + Sync {
    fn name(&self) -> &'static str;
    fn train(&self, rows: &[Vec<f64>], labels: &[u8], seed: u64) -> Result<TrainedClassifier>;
}

pub struct LsvmStrategy {
    pub c: f64,
}

impl Default for LsvmStrategy {
    fn default() -> Self {
        LsvmStrategy { c: 100.0 }
    }
}

impl Classifier for LsvmStrategy {
    fn name(&self) -> &'static str {
        "lsvm"
    }

    fn train(&self, rows: &[Vec<f64>], labels: &[u8], _seed: u64) -> Result<TrainedClassifier> {
        Ok(TrainedClassifier::Lsvm(svm_train(
            rows,
            labels,
            Kernel::Linear,
            self.c,
        )?))
    }
}

pub struct NlsvmStrategy {
    pub c: f64,
    pub sigma: f64,
    /// false: gamma-form exp(-sigma * d^2); true: bandwidth-form
    /// exp(-d^2 / (2 sigma^2)).
    pub bandwidth_form: bool,
}

impl Default for NlsvmStrategy {
    fn default() -> Self {
        NlsvmStrategy {
            c: 100.0,
            sigma: 0.01,
            bandwidth_form: false,
        }
    }
}

impl Classifier for NlsvmStrategy {
    fn name(&self) -> &'static str {
        "nlsvm"
    }

    fn train(&self, rows: &[Vec<f64>], labels: &[u8], _seed: u64) -> Result<TrainedClassifier> {
        let kernel = if self.bandwidth_form {
            Kernel::rbf_bandwidth(self.sigma)
        } else {
            Kernel::Rbf { gamma: self.sigma }
        };
        Ok(TrainedClassifier::Nlsvm(svm_train(
            rows, labels, kernel, self.c,
        )?))
    }
}

pub struct RfStrategy {
    pub n_trees: usize,
    pub nodesize: usize,
    pub mtry: usize,
}

impl Default for RfStrategy {
    fn default() -> Self {
        RfStrategy {
            n_trees: 900,
            nodesize: 5,
            mtry: 3,
        }
    }
}

impl Classifier for RfStrategy {
    fn name(&self) -> &'static str {
        "rf"
    }

    fn train(&self, rows: &[Vec<f64>], labels: &[u8], seed: u64) -> Result<TrainedClassifier> {
        let p = rows.first().map_or(0, Vec::len);
        let params = RfParams {
            n_trees: self.n_trees,
            nodesize: self.nodesize,
            mtry: self.mtry.min(p.max(1)),
            seed,
        };
        Ok(TrainedClassifier::Rf(rf_train(rows, labels, params)?))
    }
}

pub const CLASSIFIER_NAMES: [&str; 3] = ["lsvm", "nlsvm", "rf"];

/// Look up a classifier strategy by name with the published hyperparameters.
pub fn classifier_by_name(name: &str) -> Result<Box<dyn Classifier>> {
    match name {
        "lsvm" => Ok(Box::new(LsvmStrategy::default())),
        "nlsvm" => Ok(Box::new(NlsvmStrategy::default())),
        "rf" => Ok(Box::new(RfStrategy::default())),
        _ => Err(Error::UnknownStrategy {
            family: "classifier",
            name: name.to_string(),
            known: CLASSIFIER_NAMES.to_vec(),
        }),
    }
}

pub const MODEL_FILE_VERSION: u32 = 1;

/// On-disk trained pipeline: the reduction fitted on a training fold plus the
/// classifier trained on its output, tagged with the feature-catalog version.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub version: u32,
    pub catalog_version: String,
    pub reduction: ReductionTransform,
    pub classifier: TrainedClassifier,
}

impl ModelFile {
    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        fs::write(path, text).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<ModelFile> {
        let text = fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let model: ModelFile = serde_json::from_str(&text)?;
        if model.version != MODEL_FILE_VERSION {
            return Err(Error::Model(format!(
                "model file version {} unsupported (expected {MODEL_FILE_VERSION})",
                model.version
            )));
        }
        Ok(model)
    }

    /// Reduce a raw catalog row and classify it. Refuses rows extracted with
    /// a different catalog version.
    pub fn predict(&self, catalog_version: &str, raw_row: &[f64]) -> Result<f64> {
        if catalog_version != self.catalog_version {
            return Err(Error::Model(format!(
                "catalog version mismatch: features '{catalog_version}' vs model '{}'",
                self.catalog_version
            )));
        }
        let reduced = self.reduction.apply(raw_row)?;
        self.classifier.classify(&reduced)
    }
}
