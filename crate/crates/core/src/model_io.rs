//! Pruned-model bundle: a directory holding the kept kernels, the
//! per-column standardizer, the weight matrix and metadata, so a pruned
//! model can be re-evaluated without regeneration.

use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::data_io::TimeSeriesDataset;
use crate::error::{Error, Result};
use crate::kernel_bank::{load_bank, save_bank, KernelBank, ModelKind};
use crate::preprocess::{standardize_apply, Standardizer};
use crate::ridge::{accuracy, argmax_rows, predict_scores};
use crate::transform::build_feature_matrix;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BundleMeta {
    pub dataset: String,
    pub model_kind: ModelKind,
    pub seed: u64,
    /// Which classifier the weights belong to.
    pub stage: String,
    pub selected_groups: Vec<usize>,
    pub class_offsets: Vec<f64>,
    pub alpha: Option<f64>,
    pub original_label_values: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct ModelBundle {
    pub bank: KernelBank,
    /// Standardizer over the surviving feature columns, in bank order.
    pub standardizer: Standardizer,
    /// Ĥ×C weights over the standardized surviving columns.
    pub weights: Array2<f64>,
    pub meta: BundleMeta,
}

fn write_tsv_matrix(path: &Path, m: &Array2<f64>) -> Result<()> {
    use std::fmt::Write as _;
    let mut out = String::new();
    for row in m.rows() {
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

fn read_tsv_matrix(path: &Path) -> Result<Array2<f64>> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut values = Vec::new();
    let mut rows = 0usize;
    let mut width = None;
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        let mut count = 0;
        for tok in line.split('\t') {
            values.push(tok.parse::<f64>().map_err(|_| {
                Error::BadBundle(format!("bad matrix value `{tok}` in {}", path.display()))
            })?);
            count += 1;
        }
        match width {
            None => width = Some(count),
            Some(w) if w != count => {
                return Err(Error::BadBundle(format!("ragged matrix in {}", path.display())))
            }
            _ => {}
        }
        rows += 1;
    }
    let w = width.ok_or_else(|| Error::BadBundle(format!("empty matrix in {}", path.display())))?;
    Array2::from_shape_vec((rows, w), values)
        .map_err(|_| Error::BadBundle("matrix shape mismatch".into()))
}

pub fn save_bundle(bundle: &ModelBundle, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    save_bank(&bundle.bank, &dir.join("bank.txt"))?;
    let std_mat = Array2::from_shape_fn((bundle.standardizer.width(), 2), |(i, j)| {
        if j == 0 {
            bundle.standardizer.centers[i]
        } else {
            bundle.standardizer.scales[i]
        }
    });
    write_tsv_matrix(&dir.join("standardizer.tsv"), &std_mat)?;
    write_tsv_matrix(&dir.join("weights.tsv"), &bundle.weights)?;
    let meta = serde_json::to_string_pretty(&bundle.meta)?;
    std::fs::write(dir.join("meta.json"), meta).map_err(|source| Error::Io {
        path: dir.join("meta.json"),
        source,
    })?;
    Ok(())
}

pub fn load_bundle(dir: &Path) -> Result<ModelBundle> {
    let bank = load_bank(&dir.join("bank.txt"))?;
    let std_mat = read_tsv_matrix(&dir.join("standardizer.tsv"))?;
    if std_mat.ncols() != 2 {
        return Err(Error::BadBundle("standardizer.tsv must have two columns".into()));
    }
    let standardizer = Standardizer {
        centers: std_mat.column(0).to_vec(),
        scales: std_mat.column(1).to_vec(),
    };
    let weights = read_tsv_matrix(&dir.join("weights.tsv"))?;
    let meta_text = std::fs::read_to_string(dir.join("meta.json")).map_err(|source| Error::Io {
        path: dir.join("meta.json"),
        source,
    })?;
    let meta: BundleMeta = serde_json::from_str(&meta_text)?;
    if weights.nrows() != bank.num_features() {
        return Err(Error::BadBundle(format!(
            "weight rows ({}) do not match bank features ({})",
            weights.nrows(),
            bank.num_features()
        )));
    }
    if standardizer.width() != bank.num_features() {
        return Err(Error::BadBundle("standardizer width does not match bank".into()));
    }
    Ok(ModelBundle {
        bank,
        standardizer,
        weights,
        meta,
    })
}

/// Transform a dataset with the bundle's (pruned) bank and score it.
pub fn evaluate_bundle(bundle: &ModelBundle, data: &TimeSeriesDataset) -> Result<f64> {
    let fm = build_feature_matrix(data, &bundle.bank)?;
    if fm.num_features() != bundle.weights.nrows() {
        return Err(Error::DimensionMismatch {
            context: "bundle feature width",
            got: fm.num_features(),
            expected: bundle.weights.nrows(),
        });
    }
    let xs = standardize_apply(&fm.x.view(), &bundle.standardizer)?;
    let scores = predict_scores(&xs.view(), &bundle.weights.view(), &bundle.meta.class_offsets)?;
    let predicted = argmax_rows(&scores.view());

    // labels in the dataset are already mapped; remap through the bundle's
    // token table when the orders differ
    let mapped: Result<Vec<usize>> = data
        .labels
        .iter()
        .map(|&y| {
            let token = &data.original_label_values[y];
            bundle
                .meta
                .original_label_values
                .iter()
                .position(|t| t == token)
                .ok_or_else(|| Error::UnknownLabel { token: token.clone() })
        })
        .collect();
    Ok(accuracy(&predicted, &mapped?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel_bank::generate_rocket;
    use crate::synthetic::labeled_waves;

    #[test]
    fn bundle_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let bank = generate_rocket(6, 40, 3, ModelKind::RocketPpvMax).unwrap();
        let weights = Array2::from_shape_fn((12, 2), |(i, j)| (i * 2 + j) as f64 * 0.25 - 1.0);
        let bundle = ModelBundle {
            bank,
            standardizer: Standardizer {
                centers: vec![0.5; 12],
                scales: vec![1.25; 12],
            },
            weights,
            meta: BundleMeta {
                dataset: "toy".into(),
                model_kind: ModelKind::RocketPpvMax,
                seed: 3,
                stage: "stage1".into(),
                selected_groups: vec![0, 1, 2, 3, 4, 5],
                class_offsets: vec![0.0, 0.0],
                alpha: None,
                original_label_values: vec!["0".into(), "1".into()],
            },
        };
        save_bundle(&bundle, dir.path()).unwrap();
        let loaded = load_bundle(dir.path()).unwrap();
        assert_eq!(loaded.weights, bundle.weights);
        assert_eq!(loaded.standardizer.centers, bundle.standardizer.centers);
        assert_eq!(loaded.meta.selected_groups, bundle.meta.selected_groups);

        let data = labeled_waves(8, 40, 2, 5);
        let acc = evaluate_bundle(&loaded, &data).unwrap();
        assert!((0.0..=1.0).contains(&acc));
    }

    #[test]
    fn mismatched_series_length_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let bank = generate_rocket(64, 200, 3, ModelKind::RocketPpv).unwrap();
        let bundle = ModelBundle {
            bank,
            standardizer: Standardizer {
                centers: vec![0.0; 64],
                scales: vec![1.0; 64],
            },
            weights: Array2::zeros((64, 2)),
            meta: BundleMeta {
                dataset: "toy".into(),
                model_kind: ModelKind::RocketPpv,
                seed: 0,
                stage: "stage1".into(),
                selected_groups: (0..64).collect(),
                class_offsets: vec![0.0, 0.0],
                alpha: None,
                original_label_values: vec!["0".into(), "1".into()],
            },
        };
        save_bundle(&bundle, dir.path()).unwrap();
        let loaded = load_bundle(dir.path()).unwrap();
        // short series: kernels with large dilations cannot fit
        let data = labeled_waves(4, 12, 2, 6);
        assert!(evaluate_bundle(&loaded, &data).is_err());
    }
}
