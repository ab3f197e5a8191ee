//! One-sample and paired t-tests with two-sided p-values from the Student-t
//! CDF. Zero-variance samples are flagged degenerate instead of dividing by
//! zero.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTestResult {
    pub t: f64,
    pub p: f64,
    pub df: f64,
    pub degenerate: bool,
}

pub fn one_sample_ttest(x: &[f64], mu0: f64) -> Result<TTestResult> {
    let n = x.len();
    if n < 2 {
        return Err(Error::Eval(format!("t-test needs >= 2 samples, got {n}")));
    }
    let nf = n as f64;
    let mean = x.iter().sum::<f64>() / nf;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (nf - 1.0);
    let df = nf - 1.0;
    // constant sample: zero variance regardless of summation rounding
    if x.iter().all(|&v| v == x[0]) {
        let same = x[0] == mu0;
        return Ok(TTestResult {
            t: 0.0,
            p: if same { 1.0 } else { 0.0 },
            df,
            degenerate: true,
        });
    }
    let t = (mean - mu0) / (var / nf).sqrt();
    let dist = StudentsT::new(0.0, 1.0, df)
        .map_err(|e| Error::Eval(format!("t-distribution: {e}")))?;
    let p = 2.0 * (1.0 - dist.cdf(t.abs()));
    Ok(TTestResult {
        t,
        p,
        df,
        degenerate: false,
    })
}

/// Paired test: one-sample test of the differences against zero.
pub fn paired_ttest(a: &[f64], b: &[f64]) -> Result<TTestResult> {
    if a.len() != b.len() {
        return Err(Error::Eval(format!(
            "paired t-test lengths differ: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    one_sample_ttest(&diffs, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn identical_paired_samples_degenerate_p_one() {
        let a = [0.6, 0.7, 0.8];
        let r = paired_ttest(&a, &a).unwrap();
        assert!(r.degenerate);
        assert_eq!(r.t, 0.0);
        assert_eq!(r.p, 1.0);
    }

    #[test]
    fn constant_at_null_degenerate_p_one() {
        let r = one_sample_ttest(&[0.5; 6], 0.5).unwrap();
        assert!(r.degenerate);
        assert_eq!(r.p, 1.0);
    }

    #[test]
    fn constant_off_null_degenerate_p_zero() {
        let r = one_sample_ttest(&[0.7; 6], 0.5).unwrap();
        assert!(r.degenerate);
        assert_eq!(r.p, 0.0);
    }

    #[test]
    fn reference_case_matches_high_precision_oracle() {
        // frozen before implementation with a 50-digit reference computation:
        // x = {0.6,0.7,0.8,0.6,0.7,0.7}, mu0 = 0.5, df = 5
        let r = one_sample_ttest(&[0.6, 0.7, 0.8, 0.6, 0.7, 0.7], 0.5).unwrap();
        assert_relative_eq!(r.t, 5.9655875900130, epsilon = 1e-10);
        assert_relative_eq!(r.p, 0.0018942471146004, epsilon = 1e-6);
        assert_eq!(r.df, 5.0);
        assert!(!r.degenerate);
    }

    #[test]
    fn symmetric_sample_t_zero_p_one() {
        let r = one_sample_ttest(&[0.4, 0.6, 0.3, 0.7], 0.5).unwrap();
        assert_relative_eq!(r.t, 0.0, epsilon = 1e-12);
        assert_relative_eq!(r.p, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn too_few_samples_rejected() {
        assert!(one_sample_ttest(&[0.5], 0.5).is_err());
        assert!(paired_ttest(&[0.5, 0.6], &[0.5]).is_err());
    }
}
