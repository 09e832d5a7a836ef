//! Apply a kernel bank to a dataset, producing the feature matrix and the
//! kernel-to-column group map the pruning math depends on.

use ndarray::{Array2, Zip};

use crate::data_io::TimeSeriesDataset;
use crate::error::{Error, Result};
use crate::kernel_bank::{KernelBank, ModelKind, RocketKernel};

/// N×H feature matrix plus the mapping from kernel groups to columns.
///
/// For `rocket-ppv-max`, group g owns columns {2g, 2g+1} (PPV then MAX);
/// otherwise group g owns column {g}.
#[derive(Debug, Clone)]
pub struct FeatureMatrix {
    pub x: Array2<f64>,
    pub group_map: Vec<Vec<usize>>,
    pub model_kind: ModelKind,
}

impl FeatureMatrix {
    pub fn num_samples(&self) -> usize {
        self.x.nrows()
    }

    pub fn num_features(&self) -> usize {
        self.x.ncols()
    }

    pub fn num_groups(&self) -> usize {
        self.group_map.len()
    }
}

fn output_len(series_len: usize, kernel: &RocketKernel) -> Result<usize> {
    let padded = series_len + 2 * kernel.padding;
    let span = kernel.effective_span();
    if span > padded {
        return Err(Error::KernelTooLarge { span, padded });
    }
    Ok(padded - span + 1)
}

/// Dilated 1-D convolution with symmetric zero padding.
///
/// `out[i] = bias + Σ_j weights[j] · padded_series[i + j·dilation]`.
pub fn convolve1d(series: &[f64], kernel: &RocketKernel) -> Result<Vec<f64>> {
    let mut out = vec![kernel.bias; output_len(series.len(), kernel)?];
    convolve1d_into(series, kernel, &mut out);
    Ok(out)
}

/// `out` must already hold `output_len` copies of the bias.
fn convolve1d_into(series: &[f64], kernel: &RocketKernel, out: &mut [f64]) {
    let l = series.len() as isize;
    let pad = kernel.padding as isize;
    let d = kernel.dilation as isize;
    let m = out.len() as isize;
    for (j, &w) in kernel.weights.iter().enumerate() {
        // out[i] += w * series[i - pad + j*d] wherever the index is in range;
        // for fixed j the series index is contiguous in i.
        let off = j as isize * d - pad;
        let lo = (-off).max(0);
        let hi = (l - off).min(m);
        if lo >= hi {
            continue;
        }
        let src = &series[(lo + off) as usize..(hi + off) as usize];
        let dst = &mut out[lo as usize..hi as usize];
        for (o, &s) in dst.iter_mut().zip(src) {
            *o += w * s;
        }
    }
}

/// Fraction of entries strictly greater than zero.
pub fn ppv(conv_output: &[f64]) -> Result<f64> {
    if conv_output.is_empty() {
        return Err(Error::InvalidParam("ppv of an empty vector".into()));
    }
    let positives = conv_output.iter().filter(|&&v| v > 0.0).count();
    Ok(positives as f64 / conv_output.len() as f64)
}

/// Maximum entry.
pub fn max_feature(conv_output: &[f64]) -> Result<f64> {
    if conv_output.is_empty() {
        return Err(Error::InvalidParam("max of an empty vector".into()));
    }
    Ok(conv_output.iter().copied().fold(f64::NEG_INFINITY, f64::max))
}

fn fill_row(series: &[f64], bank: &KernelBank, row: &mut [f64], buf: &mut Vec<f64>) -> Result<()> {
    let fpk = bank.features_per_kernel();
    for (i, kernel) in bank.kernels.iter().enumerate() {
        let len = output_len(series.len(), kernel)?;
        buf.clear();
        buf.resize(len, kernel.bias);
        convolve1d_into(series, kernel, buf);
        let mut positives = 0usize;
        let mut max = f64::NEG_INFINITY;
        for &v in buf.iter() {
            if v > 0.0 {
                positives += 1;
            }
            if v > max {
                max = v;
            }
        }
        row[fpk * i] = positives as f64 / len as f64;
        if fpk == 2 {
            row[2 * i + 1] = max;
        }
    }
    Ok(())
}

/// Convolve every (sample, kernel) pair and pool into features.
///
/// Work is parallel over samples and bit-identical to a serial pass.
pub fn build_feature_matrix(data: &TimeSeriesDataset, bank: &KernelBank) -> Result<FeatureMatrix> {
    let n = data.num_samples();
    let l = data.series_len();
    for kernel in &bank.kernels {
        output_len(l, kernel)?; // fail before allocating the matrix
    }
    let h = bank.num_features();
    let mut x = Array2::<f64>::zeros((n, h));
    Zip::from(x.rows_mut())
        .and(data.series.rows())
        .par_for_each(|mut row, series| {
            let mut buf = Vec::new();
            fill_row(
                series.as_slice().expect("row-major"),
                bank,
                row.as_slice_mut().expect("row-major"),
                &mut buf,
            )
            .expect("kernel fit pre-validated");
        });

    let fpk = bank.features_per_kernel();
    let group_map: Vec<Vec<usize>> = (0..bank.num_groups())
        .map(|g| (fpk * g..fpk * (g + 1)).collect())
        .collect();
    Ok(FeatureMatrix {
        x,
        group_map,
        model_kind: bank.model_kind,
    })
}

/// Cache a feature matrix so pruning experiments can skip re-transformation.
/// Header: `N H model_kind`, a line of group column counts, then N tab-separated rows.
pub fn save_feature_matrix(fm: &FeatureMatrix, path: &std::path::Path) -> Result<()> {
    use std::fmt::Write as _;
    let mut out = String::new();
    let _ = writeln!(out, "{} {} {}", fm.num_samples(), fm.num_features(), fm.model_kind);
    let sizes: Vec<String> = fm.group_map.iter().map(|g| g.len().to_string()).collect();
    let _ = writeln!(out, "{}", sizes.join(" "));
    for row in fm.x.rows() {
        let mut first = true;
        for v in row {
            if !first {
                out.push('\t');
            }
            let _ = write!(out, "{v}");
            first = false;
        }
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_feature_matrix(path: &std::path::Path) -> Result<FeatureMatrix> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let bad = |msg: &str| Error::BadBundle(format!("{}: {msg}", path.display()));
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| bad("missing header"))?;
    let head: Vec<&str> = header.split_whitespace().collect();
    if head.len() != 3 {
        return Err(bad("header must be `N H model_kind`"));
    }
    let n: usize = head[0].parse().map_err(|_| bad("bad N"))?;
    let h: usize = head[1].parse().map_err(|_| bad("bad H"))?;
    let model_kind: ModelKind = head[2].parse()?;
    let sizes_line = lines.next().ok_or_else(|| bad("missing group sizes"))?;
    let mut group_map = Vec::new();
    let mut col = 0usize;
    for tok in sizes_line.split_whitespace() {
        let len: usize = tok.parse().map_err(|_| bad("bad group size"))?;
        group_map.push((col..col + len).collect::<Vec<usize>>());
        col += len;
    }
    if col != h {
        return Err(bad("group sizes do not cover H columns"));
    }
    let mut values = Vec::with_capacity(n * h);
    for line in lines.filter(|l| !l.trim().is_empty()) {
        for tok in line.split('\t') {
            values.push(tok.parse::<f64>().map_err(|_| bad("bad value"))?);
        }
    }
    if values.len() != n * h {
        return Err(bad("matrix size does not match header"));
    }
    let x = Array2::from_shape_vec((n, h), values).expect("size checked");
    Ok(FeatureMatrix {
        x,
        group_map,
        model_kind,
    })
}
