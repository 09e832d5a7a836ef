//! Deterministic synthetic problem generators for tests and benchmarks.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data_io::TimeSeriesDataset;

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen::<f64>();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// A regression problem whose targets depend on a small planted subset of
/// single-column groups: `Y = X[:, planted] · coef + σ·noise`, with X
/// standardized columnwise. Returns `(X, Y, planted_group_ids)`.
pub fn planted_group_problem(
    n: usize,
    num_groups: usize,
    informative: usize,
    noise: f64,
    seed: u64,
) -> (Array2<f64>, Array2<f64>, Vec<usize>) {
    assert!(informative <= num_groups);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x_raw = Array2::from_shape_fn((n, num_groups), |_| normal(&mut rng));
    let (x, _) = crate::preprocess::standardize_fit(&x_raw.view()).expect("n >= 2");

    // planted groups spread across the index range
    let planted: Vec<usize> = (0..informative)
        .map(|i| i * num_groups / informative)
        .collect();
    let mut y = Array2::zeros((n, 1));
    for (rank, &g) in planted.iter().enumerate() {
        let coef = 2.0 + rank as f64; // well separated from the noise floor
        for i in 0..n {
            y[(i, 0)] += coef * x[(i, g)];
        }
    }
    for v in y.iter_mut() {
        *v += noise * normal(&mut rng);
    }
    (x, y, planted)
}

/// A labeled dataset of noisy class-dependent waveforms, for end-to-end runs
/// that need a dataset of a specific size without touching the archive data.
pub fn labeled_waves(
    n: usize,
    series_len: usize,
    num_classes: usize,
    seed: u64,
) -> TimeSeriesDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut series = Array2::zeros((n, series_len));
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let class = i % num_classes;
        labels.push(class);
        let freq = 1.0 + class as f64;
        let phase = rng.gen::<f64>() * std::f64::consts::PI;
        for j in 0..series_len {
            let t = j as f64 / series_len as f64;
            let wave = (2.0 * std::f64::consts::PI * freq * t + phase).sin();
            let bump = if class % 2 == 0 { 0.4 * (4.0 * t - 2.0).tanh() } else { 0.0 };
            series[(i, j)] = wave + bump + 0.3 * normal(&mut rng);
        }
    }
    TimeSeriesDataset {
        name: format!("waves-{n}x{series_len}"),
        series,
        labels,
        num_classes,
        original_label_values: (0..num_classes).map(|c| c.to_string()).collect(),
    }
}
