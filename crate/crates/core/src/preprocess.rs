//! Feature standardization and ±1 label coding, exactly as the solvers assume:
//! every feature column is zero-centered and scaled to unit Euclidean norm,
//! and the indicator matrix Y is column-wise zero-centered.

use ndarray::{Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-column center and scale fitted on a training matrix.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Standardizer {
    pub centers: Vec<f64>,
    pub scales: Vec<f64>,
}

impl Standardizer {
    pub fn width(&self) -> usize {
        self.centers.len()
    }

    /// Restrict to a subset of columns (statistics are column-local).
    pub fn select(&self, columns: &[usize]) -> Standardizer {
        Standardizer {
            centers: columns.iter().map(|&j| self.centers[j]).collect(),
            scales: columns.iter().map(|&j| self.scales[j]).collect(),
        }
    }
}

const CONSTANT_COLUMN_EPS: f64 = 1e-12;

/// Center each column and scale it to unit Euclidean norm. Constant columns
/// get scale 1 so they map to all zeros instead of NaN.
pub fn standardize_fit(x: &ArrayView2<f64>) -> Result<(Array2<f64>, Standardizer)> {
    let n = x.nrows();
    if n < 2 {
        return Err(Error::InvalidParam(format!(
            "standardization needs at least 2 samples, got {n}"
        )));
    }
    let h = x.ncols();
    let mut centers = vec![0.0; h];
    let mut scales = vec![1.0; h];
    let mut out = x.to_owned();
    for (j, mut col) in out.axis_iter_mut(Axis(1)).enumerate() {
        let mean = col.sum() / n as f64;
        col.mapv_inplace(|v| v - mean);
        let norm = col.iter().map(|v| v * v).sum::<f64>().sqrt();
        let scale = if norm < CONSTANT_COLUMN_EPS { 1.0 } else { norm };
        col.mapv_inplace(|v| v / scale);
        centers[j] = mean;
        scales[j] = scale;
    }
    Ok((out, Standardizer { centers, scales }))
}

/// Apply training statistics to a matrix of the same width.
pub fn standardize_apply(x: &ArrayView2<f64>, s: &Standardizer) -> Result<Array2<f64>> {
    if x.ncols() != s.width() {
        return Err(Error::DimensionMismatch {
            context: "standardize_apply column count",
            got: x.ncols(),
            expected: s.width(),
        });
    }
    let mut out = x.to_owned();
    for (j, mut col) in out.axis_iter_mut(Axis(1)).enumerate() {
        let (c, sc) = (s.centers[j], s.scales[j]);
        col.mapv_inplace(|v| (v - c) / sc);
    }
    Ok(out)
}

/// ±1 class indicator matrix with zero-centered columns.
#[derive(Debug, Clone)]
pub struct LabelEncoding {
    /// N×C, centered.
    pub y: Array2<f64>,
    /// Column means of the raw ±1 coding; added back to scores at prediction
    /// time so class priors survive the centering.
    pub column_means: Vec<f64>,
}

impl LabelEncoding {
    /// True when some class is absent (or owns every sample), which makes the
    /// centered column identically zero. Callers should warn on this.
    pub fn degenerate(&self) -> bool {
        self.column_means
            .iter()
            .any(|m| (m.abs() - 1.0).abs() < 1e-12)
    }
}

/// `Y[n,c] = +1` if `labels[n] == c` else `-1`, then each column is centered.
pub fn encode_labels(labels: &[usize], num_classes: usize) -> Result<LabelEncoding> {
    if num_classes == 0 {
        return Err(Error::InvalidParam("need at least one class".into()));
    }
    for &y in labels {
        if y >= num_classes {
            return Err(Error::InvalidParam(format!(
                "label {y} out of range [0, {num_classes})"
            )));
        }
    }
    let n = labels.len();
    let mut y = Array2::from_elem((n, num_classes), -1.0);
    for (i, &lab) in labels.iter().enumerate() {
        y[(i, lab)] = 1.0;
    }
    let mut column_means = vec![0.0; num_classes];
    for (c, mean) in column_means.iter_mut().enumerate() {
        *mean = y.column(c).sum() / n as f64;
        let m = *mean;
        y.column_mut(c).mapv_inplace(|v| v - m);
    }
    Ok(LabelEncoding { y, column_means })
}
