//! Accuracy with confusion counts, ROC / AUC by grouped threshold sweep, and
//! vertical ROC averaging on a fixed FPR grid.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

/// (TP + TN) / n at the given probability threshold.
pub fn accuracy(probs: &[f64], labels: &[u8], threshold: f64) -> Result<(f64, Confusion)> {
    if probs.is_empty() || probs.len() != labels.len() {
        return Err(Error::Eval(format!(
            "{} predictions vs {} labels",
            probs.len(),
            labels.len()
        )));
    }
    let mut c = Confusion {
        tp: 0,
        fp: 0,
        tn: 0,
        fn_: 0,
    };
    for (&p, &y) in probs.iter().zip(labels) {
        match (p > threshold, y == 1) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, false) => c.tn += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    let acc = (c.tp + c.tn) as f64 / probs.len() as f64;
    Ok((acc, c))
}

/// ROC points from (0,0) to (1,1) by descending-score threshold sweep with
/// ties grouped, and the trapezoid AUC.
pub fn roc_and_auc(scores: &[f64], labels: &[u8]) -> Result<(Vec<(f64, f64)>, f64)> {
    if scores.len() != labels.len() {
        return Err(Error::Eval(format!(
            "{} scores vs {} labels",
            scores.len(),
            labels.len()
        )));
    }
    let pos = labels.iter().filter(|&&y| y == 1).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::Eval("roc needs both classes".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut points = vec![(0.0, 0.0)];
    let mut auc = 0.0;
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            if labels[order[j]] == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
            j += 1;
        }
        let prev = *points.last().expect("non-empty");
        let next = (fp as f64 / neg as f64, tp as f64 / pos as f64);
        auc += (next.0 - prev.0) * (next.1 + prev.1) / 2.0;
        points.push(next);
        i = j;
    }
    Ok((points, auc))
}

/// AUC as the Mann-Whitney pairwise statistic, ties counted one half.
pub fn mann_whitney_auc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    let pos: Vec<f64> = scores
        .iter()
        .zip(labels)
        .filter(|(_, &y)| y == 1)
        .map(|(&s, _)| s)
        .collect();
    let neg: Vec<f64> = scores
        .iter()
        .zip(labels)
        .filter(|(_, &y)| y == 0)
        .map(|(&s, _)| s)
        .collect();
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::Eval("mann-whitney needs both classes".into()));
    }
    let mut wins = 0.0;
    for &p in &pos {
        for &n in &neg {
            wins += if p > n {
                1.0
            } else if p == n {
                0.5
            } else {
                0.0
            };
        }
    }
    Ok(wins / (pos.len() * neg.len()) as f64)
}

/// Linear interpolation of a ROC polyline at the given FPR; vertical jumps
/// take the upper TPR.
fn interpolate(curve: &[(f64, f64)], fpr: f64) -> f64 {
    let mut best = 0.0f64;
    for w in curve.windows(2) {
        let (x0, y0) = w[0];
        let (x1, y1) = w[1];
        if fpr >= x0 && fpr <= x1 {
            let y = if x1 == x0 {
                y0.max(y1)
            } else {
                y0 + (y1 - y0) * (fpr - x0) / (x1 - x0)
            };
            best = best.max(y);
        }
    }
    best
}

/// Vertical averaging: mean and population std of TPR per FPR grid point.
/// Returns (fpr, mean_tpr, std_tpr) triples on a grid of the given step.
pub fn average_roc(curves: &[Vec<(f64, f64)>], grid_step: f64) -> Result<Vec<(f64, f64, f64)>> {
    if curves.len() < 2 {
        return Err(Error::Eval(format!(
            "average_roc needs >= 2 curves, got {}",
            curves.len()
        )));
    }
    if !(grid_step > 0.0 && grid_step <= 1.0) {
        return Err(Error::Eval(format!("bad grid step {grid_step}")));
    }
    let n_points = (1.0 / grid_step).round() as usize + 1;
    let mut out = Vec::with_capacity(n_points);
    for g in 0..n_points {
        let fpr = (g as f64 * grid_step).min(1.0);
        let tprs: Vec<f64> = curves.iter().map(|c| interpolate(c, fpr)).collect();
        let mean = tprs.iter().sum::<f64>() / tprs.len() as f64;
        let var = tprs.iter().map(|t| (t - mean) * (t - mean)).sum::<f64>() / tprs.len() as f64;
        out.push((fpr, mean, var.sqrt()));
    }
    Ok(out)
}
