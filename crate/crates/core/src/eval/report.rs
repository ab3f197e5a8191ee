//! EvalReport exports: per-fold metrics CSV, averaged ROC CSV, and a text
//! summary table.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::crossval::EvalReport;
use crate::error::{Error, Result};

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// One row per (model, fold): model, fold, accuracy, auc.
pub fn write_metrics_csv(path: &Path, reports: &[EvalReport]) -> Result<()> {
    let mut text = String::from("model,fold,accuracy,auc\n");
    for report in reports {
        for fold in &report.folds {
            let _ = writeln!(
                text,
                "{},{},{:?},{:?}",
                report.model_name, fold.fold_id, fold.accuracy, fold.auc
            );
        }
    }
    write_text(path, &text)
}

/// One row per (model, grid point): model, fpr, mean_tpr, std_tpr.
pub fn write_roc_csv(path: &Path, reports: &[EvalReport]) -> Result<()> {
    let mut text = String::from("model,fpr,mean_tpr,std_tpr\n");
    for report in reports {
        for &(fpr, mean, std) in &report.mean_roc {
            let _ = writeln!(text, "{},{fpr:?},{mean:?},{std:?}", report.model_name);
        }
    }
    write_text(path, &text)
}

/// Fixed-width table of mean +/- std accuracy and AUC per model.
pub fn summary_text(reports: &[EvalReport]) -> String {
    let mut text = String::new();
    let _ = writeln!(text, "{:<32} {:>17} {:>17}", "model", "accuracy", "auc");
    for r in reports {
        let _ = writeln!(
            text,
            "{:<32} {:>7.3} +/- {:>5.3} {:>7.3} +/- {:>5.3}",
            r.model_name, r.mean_accuracy, r.std_accuracy, r.mean_auc, r.std_auc
        );
    }
    text
}

pub fn write_summary(path: &Path, reports: &[EvalReport]) -> Result<()> {
    write_text(path, &summary_text(reports))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::crossval::{FoldResult, PredictionRecord};
    use crate::eval::metrics::Confusion;

    fn fake_report(name: &str) -> EvalReport {
        let fold = |id: usize, acc: f64, auc: f64| FoldResult {
            fold_id: id,
            train_ids: vec![],
            test_ids: vec![],
            accuracy: acc,
            confusion: Confusion {
                tp: 1,
                fp: 0,
                tn: 1,
                fn_: 0,
            },
            auc,
            roc: vec![(0.0, 0.0), (1.0, 1.0)],
            predictions: vec![PredictionRecord {
                study_id: "s".into(),
                probability: 0.5,
                label: 1,
            }],
            model: None,
        };
        EvalReport {
            model_name: name.into(),
            folds: vec![fold(0, 0.8, 0.9), fold(1, 0.6, 0.7)],
            mean_accuracy: 0.7,
            std_accuracy: 0.1,
            mean_auc: 0.8,
            std_auc: 0.1,
            mean_roc: vec![(0.0, 0.0, 0.0), (1.0, 1.0, 0.0)],
        }
    }

    #[test]
    fn metrics_csv_one_row_per_fold() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("metrics.csv");
        write_metrics_csv(&path, &[fake_report("m1"), fake_report("m2")]).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 5);
        assert!(text.contains("m1,0,0.8,0.9"));
        assert!(text.contains("m2,1,0.6,0.7"));
    }

    #[test]
    fn roc_csv_covers_grid() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("roc.csv");
        write_roc_csv(&path, &[fake_report("m")]).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("model,fpr,mean_tpr,std_tpr\n"));
        assert!(text.contains("m,0.0,0.0,0.0"));
    }

    #[test]
    fn summary_lists_each_model() {
        let s = summary_text(&[fake_report("radiomics+lasso+nlsvm")]);
        assert!(s.contains("radiomics+lasso+nlsvm"));
        assert!(s.contains("0.700 +/- 0.100"));
    }
}
