//! Cross-validation driver: per fold, every fitted parameter (standardizer,
//! reduction, classifier, network) is derived from training rows only; the
//! fold id is stamped on the fitted transform as an audit trail.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::folds::{make_folds, FoldPlan, StudyKey};
use super::metrics::{accuracy, average_roc, roc_and_auc, Confusion};
use crate::classify::{Classifier, ModelFile, MODEL_FILE_VERSION};
use crate::deepnet::{study_tensor, train as train_net, NetworkSpec, TrainConfig};
use crate::error::{Error, Result};
use crate::reduce::Reduction;
use crate::volume::{FeatureTable, StudyRecord};

pub const ROC_GRID_STEP: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub study_id: String,
    pub probability: f64,
    pub label: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold_id: usize,
    pub train_ids: Vec<String>,
    pub test_ids: Vec<String>,
    pub accuracy: f64,
    pub confusion: Confusion,
    pub auc: f64,
    pub roc: Vec<(f64, f64)>,
    pub predictions: Vec<PredictionRecord>,
    /// Serialized trained pipeline (radiomics path only).
    pub model: Option<ModelFile>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub model_name: String,
    pub folds: Vec<FoldResult>,
    pub mean_accuracy: f64,
    pub std_accuracy: f64,
    pub mean_auc: f64,
    pub std_auc: f64,
    /// (fpr, mean tpr, std tpr) on the fixed grid.
    pub mean_roc: Vec<(f64, f64, f64)>,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn assemble(model_name: String, folds: Vec<FoldResult>) -> Result<EvalReport> {
    let accs: Vec<f64> = folds.iter().map(|f| f.accuracy).collect();
    let aucs: Vec<f64> = folds.iter().map(|f| f.auc).collect();
    let (mean_accuracy, std_accuracy) = mean_std(&accs);
    let (mean_auc, std_auc) = mean_std(&aucs);
    let curves: Vec<Vec<(f64, f64)>> = folds.iter().map(|f| f.roc.clone()).collect();
    let mean_roc = average_roc(&curves, ROC_GRID_STEP)?;
    Ok(EvalReport {
        model_name,
        folds,
        mean_accuracy,
        std_accuracy,
        mean_auc,
        std_auc,
        mean_roc,
    })
}

fn in_fold<T>(fold: usize, r: Result<T>) -> Result<T> {
    r.map_err(|e| Error::InFold {
        fold,
        source: Box::new(e),
    })
}

/// 6-fold (or k-fold) CV of a radiomics pipeline over a precomputed feature
/// table. `keys` must align with the table's study ids.
#[allow(clippy::too_many_arguments)]
pub fn run_crossval_radiomics(
    table: &FeatureTable,
    keys: &[StudyKey],
    reduction: &dyn Reduction,
    classifier: &dyn Classifier,
    catalog_version: &str,
    k: usize,
    seed: u64,
) -> Result<EvalReport> {
    let plan = plan_for(table, keys, k, seed)?;
    let index: HashMap<&str, usize> = table
        .study_ids()
        .iter()
        .enumerate()
        .map(|(i, id)| (id.as_str(), i))
        .collect();
    let label_of: HashMap<&str, u8> = keys.iter().map(|s| (s.id.as_str(), s.label)).collect();
    let folds: Vec<FoldResult> = plan
        .folds
        .par_iter()
        .map(|fold| -> Result<FoldResult> {
            let f = fold.fold_id;
            let rows_of = |ids: &[String]| -> Result<(Vec<Vec<f64>>, Vec<u8>)> {
                let mut rows = Vec::with_capacity(ids.len());
                let mut labels = Vec::with_capacity(ids.len());
                for id in ids {
                    let &i = index.get(id.as_str()).ok_or_else(|| {
                        Error::Eval(format!("study '{id}' missing from feature table"))
                    })?;
                    rows.push(table.row(i).to_vec());
                    labels.push(label_of[id.as_str()]);
                }
                Ok((rows, labels))
            };
            let (train_rows, train_labels) = in_fold(f, rows_of(&fold.train_ids))?;
            let (test_rows, test_labels) = in_fold(f, rows_of(&fold.test_ids))?;
            let labels_f: Vec<f64> = train_labels.iter().map(|&l| l as f64).collect();
            let mut transform = in_fold(f, reduction.fit(&train_rows, &labels_f))?;
            transform.fold_id = Some(f);
            let reduced_train = in_fold(f, transform.apply_rows(&train_rows))?;
            let trained = in_fold(
                f,
                classifier.train(&reduced_train, &train_labels, seed.wrapping_add(f as u64)),
            )?;
            let mut probs = Vec::with_capacity(test_rows.len());
            for row in &test_rows {
                let z = in_fold(f, transform.apply(row))?;
                probs.push(in_fold(f, trained.classify(&z))?);
            }
            let (acc, confusion) = in_fold(f, accuracy(&probs, &test_labels, 0.5))?;
            let (roc, auc) = in_fold(f, roc_and_auc(&probs, &test_labels))?;
            let predictions = fold
                .test_ids
                .iter()
                .zip(&probs)
                .zip(&test_labels)
                .map(|((id, &p), &y)| PredictionRecord {
                    study_id: id.clone(),
                    probability: p,
                    label: y,
                })
                .collect();
            Ok(FoldResult {
                fold_id: f,
                train_ids: fold.train_ids.clone(),
                test_ids: fold.test_ids.clone(),
                accuracy: acc,
                confusion,
                auc,
                roc,
                predictions,
                model: Some(ModelFile {
                    version: MODEL_FILE_VERSION,
                    catalog_version: catalog_version.to_string(),
                    reduction: transform,
                    classifier: trained,
                }),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    assemble(
        format!("radiomics+{}+{}", reduction.name(), classifier.name()),
        folds,
    )
}

fn plan_for(table: &FeatureTable, keys: &[StudyKey], k: usize, seed: u64) -> Result<FoldPlan> {
    if table.nrows() != keys.len() {
        return Err(Error::Eval(format!(
            "{} feature rows vs {} study keys",
            table.nrows(),
            keys.len()
        )));
    }
    make_folds(keys, k, seed)
}

/// 6-fold CV of the ConvNet over raw study volumes.
pub fn run_crossval_deepnet(
    studies: &[StudyRecord],
    spec: &NetworkSpec,
    cfg: &TrainConfig,
    k: usize,
    seed: u64,
) -> Result<EvalReport> {
    let keys: Vec<StudyKey> = studies.iter().map(StudyKey::from_study).collect();
    let plan = make_folds(&keys, k, seed)?;
    let index: HashMap<&str, usize> = studies
        .iter()
        .enumerate()
        .map(|(i, s)| (s.id.as_str(), i))
        .collect();
    let folds: Vec<FoldResult> = plan
        .folds
        .iter()
        .map(|fold| -> Result<FoldResult> {
            let f = fold.fold_id;
            let gather = |ids: &[String]| -> Result<(Vec<_>, Vec<u8>)> {
                let mut tensors = Vec::with_capacity(ids.len());
                let mut labels = Vec::with_capacity(ids.len());
                for id in ids {
                    let s = &studies[index[id.as_str()]];
                    tensors.push(study_tensor(s)?);
                    labels.push(s.label);
                }
                Ok((tensors, labels))
            };
            let (train_x, train_y) = in_fold(f, gather(&fold.train_ids))?;
            let (test_x, test_y) = in_fold(f, gather(&fold.test_ids))?;
            let fold_cfg = TrainConfig {
                seed: cfg.seed.wrapping_add(f as u64),
                ..*cfg
            };
            let (net, _) = in_fold(f, train_net(spec.clone(), &train_x, &train_y, &fold_cfg))?;
            let probs: Vec<f64> = test_x
                .iter()
                .map(|t| net.predict(t))
                .collect::<Result<_>>()?;
            let (acc, confusion) = in_fold(f, accuracy(&probs, &test_y, 0.5))?;
            let (roc, auc) = in_fold(f, roc_and_auc(&probs, &test_y))?;
            let predictions = fold
                .test_ids
                .iter()
                .zip(&probs)
                .zip(&test_y)
                .map(|((id, &p), &y)| PredictionRecord {
                    study_id: id.clone(),
                    probability: p,
                    label: y,
                })
                .collect();
            Ok(FoldResult {
                fold_id: f,
                train_ids: fold.train_ids.clone(),
                test_ids: fold.test_ids.clone(),
                accuracy: acc,
                confusion,
                auc,
                roc,
                predictions,
                model: None,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    assemble("deepnet".to_string(), folds)
}
