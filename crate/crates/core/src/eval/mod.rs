//! Matched 6-fold cross-validation protocol: fold construction, accuracy,
//! ROC/AUC, t-tests, the cross-validation driver, and report exports.

mod crossval;
mod folds;
mod metrics;
mod report;
mod ttest;

pub use crossval::{
    run_crossval_deepnet, run_crossval_radiomics, EvalReport, FoldResult, PredictionRecord,
    ROC_GRID_STEP,
};
pub use folds::{make_folds, Fold, FoldPlan, StudyKey};
pub use metrics::{accuracy, average_roc, mann_whitney_auc, roc_and_auc, Confusion};
pub use report::{summary_text, write_metrics_csv, write_roc_csv, write_summary};
pub use ttest::{one_sample_ttest, paired_ttest, TTestResult};
