//! Feature reduction strategies: identity, LASSO selection, PCA extraction.
//!
//! Each strategy implements [`Reduction`] and is registered by name; the
//! fitted artifact is a serializable [`ReductionTransform`] applied row by
//! row at prediction time. Standardization (fit on training rows only) is
//! always the first step.

mod eigen;
mod lasso;
mod pca;
mod standardize;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use eigen::symmetric_eigen;
pub use lasso::{lasso_fit, lasso_max_lambda, lasso_path_fit, LassoFit};
pub use pca::{pca_fit, PcaSelection};
pub use standardize::{standardize_fit, Standardizer};

/// A fitted, serializable reduction. `fold_id` records the training fold the
/// transform was fitted on (leakage audit trail).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReductionTransform {
    pub standardizer: Standardizer,
    pub kind: TransformKind,
    pub fold_id: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TransformKind {
    Identity,
    Lasso {
        selected: Vec<usize>,
        coefficients: Vec<f64>,
        lambda: f64,
    },
    Pca {
        /// Row-major components: components[i] is the i-th principal axis.
        components: Vec<Vec<f64>>,
        explained_variance: Vec<f64>,
    },
}

impl ReductionTransform {
    pub fn kind_name(&self) -> &'static str {
        match self.kind {
            TransformKind::Identity => "identity",
            TransformKind::Lasso { .. } => "lasso",
            TransformKind::Pca { .. } => "pca",
        }
    }

    pub fn output_dim(&self) -> usize {
        match &self.kind {
            TransformKind::Identity => self.standardizer.dim(),
            TransformKind::Lasso { selected, .. } => selected.len(),
            TransformKind::Pca { components, .. } => components.len(),
        }
    }

    pub fn apply(&self, row: &[f64]) -> Result<Vec<f64>> {
        let z = self.standardizer.apply(row)?;
        Ok(match &self.kind {
            TransformKind::Identity => z,
            TransformKind::Lasso { selected, .. } => {
                selected.iter().map(|&j| z[j]).collect()
            }
            TransformKind::Pca { components, .. } => components
                .iter()
                .map(|axis| axis.iter().zip(&z).map(|(a, b)| a * b).sum())
                .collect(),
        })
    }

    pub fn apply_rows(&self, rows: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        rows.iter().map(|r| self.apply(r)).collect()
    }
}

/// A reduction strategy: fits a [`ReductionTransform`] on training rows.
pub trait Reduction: Send + Sync {
    fn name(&self) -> &'static str;
    fn fit(&self, rows: &[Vec<f64>], labels: &[f64]) -> Result<ReductionTransform>;
}

pub struct IdentityReduction;

impl Reduction for IdentityReduction {
    fn name(&self) -> &'static str {
        "identity"
    }

    fn fit(&self, rows: &[Vec<f64>], _labels: &[f64]) -> Result<ReductionTransform> {
        Ok(ReductionTransform {
            standardizer: standardize_fit(rows)?,
            kind: TransformKind::Identity,
            fold_id: None,
        })
    }
}

pub struct LassoReduction {
    /// None selects lambda by inner 3-fold cross-validation.
    pub lambda: Option<f64>,
}

impl Reduction for LassoReduction {
    fn name(&self) -> &'static str {
        "lasso"
    }

    fn fit(&self, rows: &[Vec<f64>], labels: &[f64]) -> Result<ReductionTransform> {
        let standardizer = standardize_fit(rows)?;
        let z = standardizer.apply_rows(rows)?;
        let fit = lasso_path_fit(&z, labels, self.lambda)?;
        Ok(ReductionTransform {
            standardizer,
            kind: TransformKind::Lasso {
                selected: fit.selected,
                coefficients: fit.coefficients,
                lambda: fit.lambda,
            },
            fold_id: None,
        })
    }
}

pub struct PcaReduction {
    pub selection: PcaSelection,
}

impl Reduction for PcaReduction {
    fn name(&self) -> &'static str {
        "pca"
    }

    fn fit(&self, rows: &[Vec<f64>], _labels: &[f64]) -> Result<ReductionTransform> {
        let standardizer = standardize_fit(rows)?;
        let z = standardizer.apply_rows(rows)?;
        let fit = pca_fit(&z, self.selection)?;
        Ok(ReductionTransform {
            standardizer,
            kind: TransformKind::Pca {
                components: fit.components,
                explained_variance: fit.explained_variance,
            },
            fold_id: None,
        })
    }
}

pub const REDUCTION_NAMES: [&str; 3] = ["identity", "lasso", "pca"];

/// Look up a reduction strategy by name with its default parameters.
pub fn reduction_by_name(name: &str) -> Result<Box<dyn Reduction>> {
    match name {
        "identity" => Ok(Box::new(IdentityReduction)),
        "lasso" => Ok(Box::new(LassoReduction { lambda: None })),
        "pca" => Ok(Box::new(PcaReduction {
            selection: PcaSelection::VarianceFraction(0.95),
        })),
        _ => Err(Error::UnknownStrategy {
            family: "reduction",
            name: name.to_string(),
            known: REDUCTION_NAMES.to_vec(),
        }),
    }
}
