//! UCR-archive TSV loading.
//!
//! One record per line: the first field is the class label token, the rest
//! are real values. The delimiter (tab or comma) is detected from the first
//! line. Missing values (`NaN` or empty fields) become `0.0`.

use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;

use crate::error::{Error, Result};

/// N labeled, equal-length, real-valued series with dense class labels.
#[derive(Debug, Clone)]
pub struct TimeSeriesDataset {
    pub name: String,
    /// N×L, one row per sample. Every entry is finite.
    pub series: Array2<f64>,
    /// Dense labels in `[0, num_classes)`.
    pub labels: Vec<usize>,
    pub num_classes: usize,
    /// Internal class index -> raw label token, in first-appearance order.
    pub original_label_values: Vec<String>,
}

impl TimeSeriesDataset {
    pub fn num_samples(&self) -> usize {
        self.series.nrows()
    }

    pub fn series_len(&self) -> usize {
        self.series.ncols()
    }

    /// Optional per-series z-normalization. Series are consumed as loaded by
    /// default; this is exposed as an explicit opt-in. Constant series are
    /// centered only.
    pub fn znormalize_per_series(&mut self) {
        let l = self.series_len() as f64;
        for mut row in self.series.rows_mut() {
            let mean = row.sum() / l;
            row.mapv_inplace(|v| v - mean);
            let var = row.iter().map(|v| v * v).sum::<f64>() / l;
            if var > 1e-24 {
                let std = var.sqrt();
                row.mapv_inplace(|v| v / std);
            }
        }
    }
}

fn read_lines(path: &Path) -> Result<Vec<String>> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(text
        .lines()
        .map(|l| l.trim_end_matches('\r').to_string())
        .filter(|l| !l.trim().is_empty())
        .collect())
}

fn parse_value(token: &str, path: &Path, line: usize) -> Result<f64> {
    let t = token.trim();
    if t.is_empty() {
        return Ok(0.0); // missing field
    }
    match t.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        Ok(_) => Ok(0.0), // NaN / inf tokens are treated as missing
        Err(_) => Err(Error::BadToken {
            path: path.to_path_buf(),
            line,
            what: "value",
            token: t.to_string(),
        }),
    }
}

/// `mapping`: when `Some`, raw label tokens must already be present in it
/// (test splits reuse the training mapping); when `None`, a fresh mapping is
/// built in first-appearance order.
fn load_with_mapping(
    path: &Path,
    name: &str,
    mapping: Option<&[String]>,
) -> Result<TimeSeriesDataset> {
    let lines = read_lines(path)?;
    if lines.is_empty() {
        return Err(Error::EmptyFile {
            path: path.to_path_buf(),
        });
    }
    let delim = if lines[0].contains('\t') { '\t' } else { ',' };

    let mut label_values: Vec<String> = mapping.map(|m| m.to_vec()).unwrap_or_default();
    let frozen = mapping.is_some();
    let mut labels = Vec::with_capacity(lines.len());
    let mut values: Vec<f64> = Vec::new();
    let mut width: Option<usize> = None;

    for (i, line) in lines.iter().enumerate() {
        let lineno = i + 1;
        let mut fields = line.split(delim);
        let label_token = fields.next().unwrap_or("").trim();
        if label_token.is_empty() {
            return Err(Error::BadToken {
                path: path.to_path_buf(),
                line: lineno,
                what: "label",
                token: String::new(),
            });
        }
        let class = match label_values.iter().position(|v| v == label_token) {
            Some(c) => c,
            None if frozen => {
                return Err(Error::UnknownLabel {
                    token: label_token.to_string(),
                })
            }
            None => {
                label_values.push(label_token.to_string());
                label_values.len() - 1
            }
        };
        labels.push(class);

        let mut count = 0usize;
        for tok in fields {
            values.push(parse_value(tok, path, lineno)?);
            count += 1;
        }
        match width {
            None => {
                if count < 2 {
                    return Err(Error::SeriesTooShort { len: count, min: 2 });
                }
                width = Some(count);
            }
            Some(w) if w != count => {
                return Err(Error::RaggedRecord {
                    path: path.to_path_buf(),
                    line: lineno,
                    got: count,
                    expected: w,
                });
            }
            Some(_) => {}
        }
    }

    let n = labels.len();
    let l = width.unwrap();
    let series = Array2::from_shape_vec((n, l), values).expect("shape checked above");
    Ok(TimeSeriesDataset {
        name: name.to_string(),
        series,
        labels,
        num_classes: label_values.len(),
        original_label_values: label_values,
    })
}

/// Load a single UCR-format file, building the label mapping from this file.
pub fn load_ucr_tsv(path: &Path) -> Result<TimeSeriesDataset> {
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    load_with_mapping(path, &name, None)
}

/// Load `<dir>/<name>/<name>_TRAIN.tsv` and `<name>_TEST.tsv`.
///
/// The test split reuses the training label mapping; a test label absent
/// from training is an error.
pub fn train_test_pair(dir: &Path, name: &str) -> Result<(TimeSeriesDataset, TimeSeriesDataset)> {
    let train_path: PathBuf = dir.join(name).join(format!("{name}_TRAIN.tsv"));
    let test_path: PathBuf = dir.join(name).join(format!("{name}_TEST.tsv"));
    let train = load_with_mapping(&train_path, name, None)?;
    let mut test = load_with_mapping(&test_path, name, Some(&train.original_label_values))?;
    test.num_classes = train.num_classes;
    Ok((train, test))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_tmp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    pub(crate) fn data_dir() -> PathBuf {
        Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/ucr")
    }

    #[test]
    fn parses_two_line_file() {
        let f = write_tmp("1\t0.5\t-0.2\n2\t1.0\t0.0\n");
        let d = load_ucr_tsv(f.path()).unwrap();
        assert_eq!(d.num_samples(), 2);
        assert_eq!(d.series_len(), 2);
        assert_eq!(d.num_classes, 2);
        assert_eq!(d.labels, vec![0, 1]);
        assert_eq!(d.series[(0, 0)], 0.5);
        assert_eq!(d.series[(1, 1)], 0.0);
    }

    #[test]
    fn comma_delimiter_is_autodetected() {
        let f = write_tmp("a,1.0,2.0\nb,3.0,4.0\na,5.0,6.0\n");
        let d = load_ucr_tsv(f.path()).unwrap();
        assert_eq!(d.labels, vec![0, 1, 0]);
        assert_eq!(d.original_label_values, vec!["a", "b"]);
    }

    #[test]
    fn nan_and_empty_become_zero() {
        let f = write_tmp("1\t0.5\tNaN\t2.0\n1\t\t1.0\t-inf\n");
        let d = load_ucr_tsv(f.path()).unwrap();
        assert_eq!(d.series[(0, 1)], 0.0);
        assert_eq!(d.series[(1, 0)], 0.0);
        assert_eq!(d.series[(1, 2)], 0.0);
        assert!(d.series.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn label_mapping_is_first_appearance_order() {
        let f = write_tmp("5\t1\t2\n3\t1\t2\n5\t1\t2\n9\t1\t2\n");
        let d = load_ucr_tsv(f.path()).unwrap();
        assert_eq!(d.original_label_values, vec!["5", "3", "9"]);
        assert_eq!(d.labels, vec![0, 1, 0, 2]);
    }

    #[test]
    fn rejects_ragged_records() {
        let f = write_tmp("1\t0.5\t-0.2\n2\t1.0\n");
        assert!(matches!(
            load_ucr_tsv(f.path()),
            Err(Error::RaggedRecord { line: 2, .. })
        ));
    }

    #[test]
    fn rejects_bad_value_token() {
        let f = write_tmp("1\t0.5\toops\n");
        assert!(matches!(load_ucr_tsv(f.path()), Err(Error::BadToken { .. })));
    }

    #[test]
    fn rejects_empty_file() {
        let f = write_tmp("\n\n");
        assert!(matches!(load_ucr_tsv(f.path()), Err(Error::EmptyFile { .. })));
    }

    #[test]
    fn loading_is_deterministic() {
        let f = write_tmp("1\t0.25\t-0.125\n2\t1e-3\t7.5\n");
        let a = load_ucr_tsv(f.path()).unwrap();
        let b = load_ucr_tsv(f.path()).unwrap();
        assert_eq!(a.series, b.series);
        assert_eq!(a.labels, b.labels);
    }

    #[test]
    fn znormalization_centers_and_scales_rows() {
        let f = write_tmp("1\t2.0\t4.0\t6.0\n2\t5.0\t5.0\t5.0\n");
        let mut d = load_ucr_tsv(f.path()).unwrap();
        d.znormalize_per_series();
        let row0: Vec<f64> = d.series.row(0).to_vec();
        assert!(row0.iter().sum::<f64>().abs() < 1e-12);
        let var: f64 = row0.iter().map(|v| v * v).sum::<f64>() / 3.0;
        assert!((var - 1.0).abs() < 1e-12);
        // constant series only gets centered
        assert!(d.series.row(1).iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn gunpoint_train_shape() {
        let d = load_ucr_tsv(&data_dir().join("GunPoint/GunPoint_TRAIN.tsv")).unwrap();
        assert_eq!(d.num_samples(), 50);
        assert_eq!(d.series_len(), 150);
        assert_eq!(d.num_classes, 2);
        assert!(d.labels.iter().all(|&y| y < 2));
    }

    #[test]
    fn coffee_pair_shapes() {
        let (train, test) = train_test_pair(&data_dir(), "Coffee").unwrap();
        assert_eq!(train.num_samples(), 28);
        assert_eq!(test.num_samples(), 28);
        assert_eq!(train.num_classes, 2);
        assert_eq!(test.num_classes, 2);
    }

    #[test]
    fn missing_dataset_is_an_error() {
        assert!(matches!(
            train_test_pair(&data_dir(), "NoSuchDataset"),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn unseen_test_label_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let ds = dir.path().join("Toy");
        std::fs::create_dir_all(&ds).unwrap();
        std::fs::write(ds.join("Toy_TRAIN.tsv"), "1\t0.0\t1.0\n2\t1.0\t0.0\n").unwrap();
        std::fs::write(ds.join("Toy_TEST.tsv"), "3\t0.0\t1.0\n").unwrap();
        assert!(matches!(
            train_test_pair(dir.path(), "Toy"),
            Err(Error::UnknownLabel { .. })
        ));
    }
}
