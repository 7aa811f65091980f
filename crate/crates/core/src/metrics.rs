//! Evaluation measures.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::data::PredictionMatrix;
use crate::error::{check_dim, Error, Result};
use crate::mapping::CondIndParams;

/// Mean of the per-class recalls, in `[0, 1]`.
pub fn balanced_accuracy(pred: &[u8], truth: &[u8]) -> Result<f64> {
    check_dim("predictions", truth.len(), pred.len())?;
    let mut counts = [[0usize; 2]; 2]; // [true class][correct?]
    for (&p, &t) in pred.iter().zip(truth) {
        counts[t as usize][(p == t) as usize] += 1;
    }
    let total = |c: usize| counts[c][0] + counts[c][1];
    if total(0) == 0 || total(1) == 0 {
        return Err(Error::InvalidData(
            "balanced accuracy needs both classes in the ground truth".into(),
        ));
    }
    Ok(0.5 * counts[0][1] as f64 / total(0) as f64 + 0.5 * counts[1][1] as f64 / total(1) as f64)
}

/// Pearson correlation between the columns of `data`, restricted to rows
/// whose label equals `class`. Columns that are constant within the class
/// get zero correlation, including on the diagonal.
pub fn conditional_correlation(
    data: &PredictionMatrix,
    labels: &[u8],
    class: u8,
) -> Result<DMatrix<f64>> {
    check_dim("labels", data.n_rows(), labels.len())?;
    let d = data.n_cols();
    let rows: Vec<&[u8]> = data
        .rows()
        .zip(labels)
        .filter(|(_, &l)| l == class)
        .map(|(r, _)| r)
        .collect();
    if rows.len() < 2 {
        return Err(Error::InvalidData(format!(
            "class {class} has {} rows, need at least 2",
            rows.len()
        )));
    }
    let n = rows.len() as f64;
    let mut ones = vec![0usize; d];
    let mut both = DMatrix::<usize>::zeros(d, d);
    for r in &rows {
        for i in 0..d {
            if r[i] == 1 {
                ones[i] += 1;
                for j in i..d {
                    if r[j] == 1 {
                        both[(i, j)] += 1;
                    }
                }
            }
        }
    }
    let mean: Vec<f64> = ones.iter().map(|&c| c as f64 / n).collect();
    let var: Vec<f64> = mean.iter().map(|m| m * (1.0 - m)).collect();
    for (i, v) in var.iter().enumerate() {
        if *v == 0.0 {
            log::warn!("column {i} is constant within class {class}; correlation set to 0");
        }
    }
    let mut corr = DMatrix::zeros(d, d);
    for i in 0..d {
        for j in i..d {
            if var[i] == 0.0 || var[j] == 0.0 {
                continue;
            }
            let cov = both[(i, j)] as f64 / n - mean[i] * mean[j];
            let c = if i == j { 1.0 } else { cov / (var[i] * var[j]).sqrt() };
            corr[(i, j)] = c;
            corr[(j, i)] = c;
        }
    }
    Ok(corr)
}

/// Largest absolute off-diagonal entry.
pub fn max_abs_off_diagonal(m: &DMatrix<f64>) -> f64 {
    let mut best = 0.0f64;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if i != j {
                best = best.max(m[(i, j)].abs());
            }
        }
    }
    best
}

pub fn mean_abs_off_diagonal(m: &DMatrix<f64>) -> f64 {
    let d = m.nrows();
    if d < 2 {
        return 0.0;
    }
    let total: f64 = (0..d)
        .flat_map(|i| (0..d).filter(move |&j| j != i).map(move |j| (i, j)))
        .map(|(i, j)| m[(i, j)].abs())
        .sum();
    total / (d * (d - 1)) as f64
}

pub fn matrix_to_csv(m: &DMatrix<f64>) -> String {
    let mut out = String::new();
    for i in 0..m.nrows() {
        let row: Vec<String> = m.row(i).iter().map(|v| format!("{v:.6}")).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecoveryReport {
    /// Mean absolute error over all `ψ` and `η` entries.
    pub mae: f64,
    pub max_error: f64,
    pub prior_error: f64,
    /// Whether the label-flipped estimate was the closer one.
    pub flipped: bool,
}

fn recovery_errors(est: &CondIndParams, truth: &CondIndParams) -> (f64, f64) {
    let errs: Vec<f64> = est
        .psi
        .iter()
        .chain(&est.eta)
        .zip(truth.psi.iter().chain(&truth.eta))
        .map(|(a, b)| (a - b).abs())
        .collect();
    let mae = errs.iter().sum::<f64>() / errs.len() as f64;
    (mae, errs.into_iter().fold(0.0, f64::max))
}

/// Compares an estimate against ground truth, allowing for the global label flip.
pub fn parameter_recovery_report(
    estimate: &CondIndParams,
    truth: &CondIndParams,
) -> Result<RecoveryReport> {
    check_dim("estimate", truth.dim(), estimate.dim())?;
    let (mae, max_error) = recovery_errors(estimate, truth);
    let flipped_est = estimate.flipped();
    let (fmae, fmax) = recovery_errors(&flipped_est, truth);
    Ok(if fmae < mae {
        RecoveryReport {
            mae: fmae,
            max_error: fmax,
            prior_error: (flipped_est.pi - truth.pi).abs(),
            flipped: true,
        }
    } else {
        RecoveryReport {
            mae,
            max_error,
            prior_error: (estimate.pi - truth.pi).abs(),
            flipped: false,
        }
    })
}
