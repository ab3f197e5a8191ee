use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-column mean/std (population convention) fitted on training rows.
/// Zero-variance columns get std 1 and are flagged; they standardize to 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    means: Vec<f64>,
    stds: Vec<f64>,
    constant: Vec<bool>,
}

impl Standardizer {
    pub fn dim(&self) -> usize {
        self.means.len()
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn stds(&self) -> &[f64] {
        &self.stds
    }

    pub fn constant_columns(&self) -> &[bool] {
        &self.constant
    }

    pub fn apply(&self, row: &[f64]) -> Result<Vec<f64>> {
        if row.len() != self.means.len() {
            return Err(Error::InvalidArgument(format!(
                "row has {} columns, standardizer fitted on {}",
                row.len(),
                self.means.len()
            )));
        }
        Ok(row
            .iter()
            .enumerate()
            .map(|(j, &v)| {
                if self.constant[j] {
                    0.0
                } else {
                    (v - self.means[j]) / self.stds[j]
                }
            })
            .collect())
    }

    pub fn apply_rows(&self, rows: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        rows.iter().map(|r| self.apply(r)).collect()
    }
}

pub fn standardize_fit(rows: &[Vec<f64>]) -> Result<Standardizer> {
    if rows.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "standardize_fit needs >= 2 rows, got {}",
            rows.len()
        )));
    }
    let p = rows[0].len();
    if rows.iter().any(|r| r.len() != p) {
        return Err(Error::InvalidArgument("ragged rows".into()));
    }
    let n = rows.len() as f64;
    let mut means = vec![0.0; p];
    for row in rows {
        for (m, &v) in means.iter_mut().zip(row) {
            if !v.is_finite() {
                return Err(Error::NonFinite(format!("feature value {v}")));
            }
            *m += v / n;
        }
    }
    let mut vars = vec![0.0; p];
    for row in rows {
        for ((var, &m), &v) in vars.iter_mut().zip(&means).zip(row) {
            let d = v - m;
            *var += d * d / n;
        }
    }
    let constant: Vec<bool> = vars.iter().map(|&v| v <= 0.0).collect();
    let stds: Vec<f64> = vars
        .iter()
        .zip(&constant)
        .map(|(&v, &c)| if c { 1.0 } else { v.sqrt() })
        .collect();
    Ok(Standardizer {
        means,
        stds,
        constant,
    })
}
