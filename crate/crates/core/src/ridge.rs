//! ℓ2-regularized multi-output linear classifier: closed-form fit, efficient
//! leave-one-out model selection, and argmax prediction. Used standalone for
//! the unpruned baselines and as the optional refit stage after pruning.

use ndarray::{Array1, Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::linalg::{add_scaled_identity, all_finite, Cholesky};
use crate::preprocess::{encode_labels, standardize_fit, Standardizer};

/// Fitted classifier over a (possibly column-restricted) feature space.
#[derive(Debug, Clone)]
pub struct RidgeModel {
    /// Ĥ×C weights over the standardized kept columns.
    pub weights: Array2<f64>,
    pub alpha: f64,
    /// Standardizer for the kept columns.
    pub standardizer: Standardizer,
    /// Indices of the kept columns in the full feature space.
    pub kept_columns: Vec<usize>,
    /// Added to scores; carries the class priors removed by Y-centering.
    pub class_offsets: Vec<f64>,
}

impl RidgeModel {
    /// Predict labels for a raw (unstandardized, full-width) feature matrix.
    pub fn predict(&self, x_raw: &ArrayView2<f64>) -> Result<Vec<usize>> {
        let selected = select_columns(x_raw, &self.kept_columns)?;
        let std = crate::preprocess::standardize_apply(&selected.view(), &self.standardizer)?;
        let scores = predict_scores(&std.view(), &self.weights.view(), &self.class_offsets)?;
        Ok(argmax_rows(&scores.view()))
    }
}

/// Copy the given columns of `x`, in order.
pub fn select_columns(x: &ArrayView2<f64>, columns: &[usize]) -> Result<Array2<f64>> {
    for &j in columns {
        if j >= x.ncols() {
            return Err(Error::DimensionMismatch {
                context: "column selection",
                got: j,
                expected: x.ncols(),
            });
        }
    }
    let mut out = Array2::zeros((x.nrows(), columns.len()));
    for (t, &j) in columns.iter().enumerate() {
        out.column_mut(t).assign(&x.column(j));
    }
    Ok(out)
}

/// `W = (ρ1·I + XᵀX)⁻¹ XᵀY`, via the N×N dual system when N < Ĥ.
pub fn fit_ridge(x: &ArrayView2<f64>, y: &ArrayView2<f64>, rho1: f64) -> Result<Array2<f64>> {
    if !all_finite(x) || !all_finite(y) {
        return Err(Error::NonFinite("ridge inputs"));
    }
    if !(rho1 >= 0.0) {
        return Err(Error::InvalidParam(format!("rho1 must be >= 0, got {rho1}")));
    }
    let (n, h) = (x.nrows(), x.ncols());
    if y.nrows() != n {
        return Err(Error::DimensionMismatch {
            context: "ridge targets rows",
            got: y.nrows(),
            expected: n,
        });
    }
    if n < h {
        // dual: W = Xᵀ (ρ1·I + XXᵀ)⁻¹ Y
        let k = add_scaled_identity(x.dot(&x.t()), rho1);
        let z = Cholesky::new(&k.view())?.solve(y)?;
        Ok(x.t().dot(&z))
    } else {
        let g = add_scaled_identity(x.t().dot(x), rho1);
        let xty = x.t().dot(y);
        Cholesky::new(&g.view())?.solve(&xty.view())
    }
}

/// The implementation-fixed default grid: 10 points log-spaced on [1e-3, 1e3].
pub fn default_alpha_grid() -> Vec<f64> {
    let n = 10;
    (0..n)
        .map(|i| 10f64.powf(-3.0 + 6.0 * i as f64 / (n - 1) as f64))
        .collect()
}

/// Closed-form leave-one-out errors for every alpha in the grid.
///
/// Uses the hat-matrix identity `e_n / (1 - h_n)`; the returned pair is the
/// best alpha (minimum mean squared LOO error, ties toward the larger alpha)
/// and the per-alpha LOO MSEs in the order of the sorted grid.
pub fn loocv_select_alpha(
    x: &ArrayView2<f64>,
    y: &ArrayView2<f64>,
    grid: &[f64],
) -> Result<(f64, Vec<f64>)> {
    let n = x.nrows();
    if n < 2 {
        return Err(Error::InvalidParam(
            "leave-one-out needs at least 2 samples".into(),
        ));
    }
    if grid.is_empty() || grid.iter().any(|&a| !(a > 0.0) || !a.is_finite()) {
        return Err(Error::InvalidParam(
            "alpha grid must be non-empty and strictly positive".into(),
        ));
    }
    let mut alphas = grid.to_vec();
    alphas.sort_by(|a, b| a.partial_cmp(b).unwrap());

    let h = x.ncols();
    let dual = n < h;
    // shared across alphas
    let gram = if dual { x.dot(&x.t()) } else { x.t().dot(x) };
    let xty = if dual { None } else { Some(x.t().dot(y)) };

    let mut mses = Vec::with_capacity(alphas.len());
    for &alpha in &alphas {
        let (errors, hat) = if dual {
            // h_n = (K_nn - [K (αI+K)⁻¹ K]_nn)/α ; e = Y - K (αI+K)⁻¹ Y
            let m = add_scaled_identity(gram.clone(), alpha);
            let chol = Cholesky::new(&m.view())?;
            let s = chol.solve(&gram.view())?; // (αI+K)⁻¹K
            let t = chol.solve(y)?; // (αI+K)⁻¹Y
            let e = y.to_owned() - gram.dot(&t);
            let mut hat = Array1::zeros(n);
            for i in 0..n {
                let ks: f64 = gram.row(i).iter().zip(s.column(i)).map(|(a, b)| a * b).sum();
                hat[i] = (gram[(i, i)] - ks) / alpha;
            }
            (e, hat)
        } else {
            let g = add_scaled_identity(gram.clone(), alpha);
            let chol = Cholesky::new(&g.view())?;
            let w = chol.solve(&xty.as_ref().unwrap().view())?;
            let e = y.to_owned() - x.dot(&w);
            let z = chol.solve(&x.t())?; // (αI+XᵀX)⁻¹Xᵀ, h×n
            let mut hat = Array1::zeros(n);
            for i in 0..n {
                hat[i] = x.row(i).iter().zip(z.column(i)).map(|(a, b)| a * b).sum();
            }
            (e, hat)
        };
        let mut sse = 0.0;
        for i in 0..n {
            let denom = 1.0 - hat[i];
            if !(denom > 0.0) {
                return Err(Error::NonFinite("leave-one-out hat diagonal"));
            }
            for &e in errors.row(i) {
                let loo = e / denom;
                sse += loo * loo;
            }
        }
        mses.push(sse / (n as f64 * y.ncols() as f64));
    }

    let mut best = 0;
    for i in 1..alphas.len() {
        if mses[i] <= mses[best] {
            best = i; // ties go to the larger alpha
        }
    }
    Ok((alphas[best], mses))
}

/// `X·W` plus per-class offsets.
pub fn predict_scores(
    x: &ArrayView2<f64>,
    w: &ArrayView2<f64>,
    offsets: &[f64],
) -> Result<Array2<f64>> {
    if x.ncols() != w.nrows() {
        return Err(Error::DimensionMismatch {
            context: "prediction width",
            got: x.ncols(),
            expected: w.nrows(),
        });
    }
    if offsets.len() != w.ncols() {
        return Err(Error::DimensionMismatch {
            context: "prediction offsets",
            got: offsets.len(),
            expected: w.ncols(),
        });
    }
    let mut scores = x.dot(w);
    for (c, &o) in offsets.iter().enumerate() {
        if o != 0.0 {
            scores.column_mut(c).mapv_inplace(|v| v + o);
        }
    }
    Ok(scores)
}

/// Row-wise argmax, ties toward the smallest class index.
pub fn argmax_rows(scores: &ArrayView2<f64>) -> Vec<usize> {
    scores
        .rows()
        .into_iter()
        .map(|row| {
            let mut best = 0;
            let mut best_v = f64::NEG_INFINITY;
            for (c, &v) in row.iter().enumerate() {
                if v > best_v {
                    best_v = v;
                    best = c;
                }
            }
            best
        })
        .collect()
}

pub fn accuracy(predicted: &[usize], truth: &[usize]) -> f64 {
    debug_assert_eq!(predicted.len(), truth.len());
    if predicted.is_empty() {
        return 0.0;
    }
    let hits = predicted.iter().zip(truth).filter(|(a, b)| a == b).count();
    hits as f64 / predicted.len() as f64
}

/// Standardize the selected raw columns, pick alpha by leave-one-out, and fit.
/// With `kept_columns` spanning everything this is the unpruned baseline.
pub fn fit_classifier(
    x_raw: &ArrayView2<f64>,
    labels: &[usize],
    num_classes: usize,
    kept_columns: Vec<usize>,
    alpha_grid: &[f64],
) -> Result<RidgeModel> {
    let selected = select_columns(x_raw, &kept_columns)?;
    let (xs, standardizer) = standardize_fit(&selected.view())?;
    let enc = encode_labels(labels, num_classes)?;
    let (alpha, _) = loocv_select_alpha(&xs.view(), &enc.y.view(), alpha_grid)?;
    let weights = fit_ridge(&xs.view(), &enc.y.view(), alpha)?;
    Ok(RidgeModel {
        weights,
        alpha,
        standardizer,
        kept_columns,
        class_offsets: enc.column_means,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::fro_norm;
    use ndarray::{array, Axis};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(n: usize, m: usize, seed: u64) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Array2::from_shape_fn((n, m), |_| rng.gen::<f64>() * 2.0 - 1.0)
    }

    #[test]
    fn identity_design_halves_targets_at_unit_alpha() {
        let x = Array2::<f64>::eye(4);
        let y = random_matrix(4, 2, 1);
        let w = fit_ridge(&x.view(), &y.view(), 1.0).unwrap();
        for (a, b) in w.iter().zip(y.iter()) {
            assert!((a - b / 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn identity_design_recovers_targets_as_alpha_vanishes() {
        let x = Array2::<f64>::eye(4);
        let y = random_matrix(4, 2, 2);
        let w = fit_ridge(&x.view(), &y.view(), 1e-12).unwrap();
        for (a, b) in w.iter().zip(y.iter()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn primal_and_dual_forms_agree() {
        let x = random_matrix(6, 4, 3);
        let y = random_matrix(6, 2, 4);
        let primal = fit_ridge(&x.view(), &y.view(), 0.5).unwrap();
        // force the dual path by fitting the transposed problem shape
        let k = add_scaled_identity(x.dot(&x.t()), 0.5);
        let z = Cholesky::new(&k.view()).unwrap().solve(&y.view()).unwrap();
        let dual = x.t().dot(&z);
        for (a, b) in primal.iter().zip(dual.iter()) {
            assert!((a - b).abs() < 1e-9, "primal {a} vs dual {b}");
        }
    }

    #[test]
    fn normal_equation_residual_is_small() {
        for seed in 0..5 {
            let x = random_matrix(12, 7, seed);
            let y = random_matrix(12, 3, seed + 100);
            let rho = 0.3;
            let w = fit_ridge(&x.view(), &y.view(), rho).unwrap();
            let lhs = add_scaled_identity(x.t().dot(&x), rho).dot(&w);
            let rhs = x.t().dot(&y);
            let resid = fro_norm(&(&lhs - &rhs).view());
            assert!(resid <= 1e-8 * fro_norm(&rhs.view()));
        }
    }

    #[test]
    fn weight_norm_shrinks_as_alpha_grows() {
        let x = random_matrix(20, 6, 8);
        let y = random_matrix(20, 2, 9);
        let mut last = f64::INFINITY;
        for alpha in [0.01, 0.1, 1.0, 10.0, 100.0] {
            let w = fit_ridge(&x.view(), &y.view(), alpha).unwrap();
            let norm = fro_norm(&w.view());
            assert!(norm <= last + 1e-12);
            last = norm;
        }
    }

    /// Oracle: leave one sample out, refit, and measure the held-out error.
    fn naive_loo_mse(x: &Array2<f64>, y: &Array2<f64>, alpha: f64) -> f64 {
        let n = x.nrows();
        let mut sse = 0.0;
        for leave in 0..n {
            let keep: Vec<usize> = (0..n).filter(|&i| i != leave).collect();
            let xs = x.select(Axis(0), &keep);
            let ys = y.select(Axis(0), &keep);
            let w = fit_ridge(&xs.view(), &ys.view(), alpha).unwrap();
            let pred = x.row(leave).insert_axis(Axis(0)).dot(&w);
            for (p, t) in pred.iter().zip(y.row(leave).iter()) {
                sse += (t - p) * (t - p);
            }
        }
        sse / (n as f64 * y.ncols() as f64)
    }

    #[test]
    fn closed_form_loo_matches_naive_refits() {
        for &(n, h, seed) in &[(10usize, 4usize, 5u64), (8, 12, 6), (15, 15, 7)] {
            let x = random_matrix(n, h, seed);
            let y = random_matrix(n, 2, seed + 50);
            let grid = default_alpha_grid();
            let (_, mses) = loocv_select_alpha(&x.view(), &y.view(), &grid).unwrap();
            for (i, &alpha) in grid.iter().enumerate() {
                let naive = naive_loo_mse(&x, &y, alpha);
                let rel = (mses[i] - naive).abs() / naive.max(1e-12);
                assert!(rel < 1e-6, "n={n} h={h} alpha={alpha}: {} vs {naive}", mses[i]);
            }
        }
    }

    #[test]
    fn single_point_grid_returns_that_point() {
        let x = random_matrix(6, 3, 11);
        let y = random_matrix(6, 2, 12);
        let (best, mses) = loocv_select_alpha(&x.view(), &y.view(), &[0.7]).unwrap();
        assert_eq!(best, 0.7);
        assert_eq!(mses.len(), 1);
    }

    #[test]
    fn ties_break_toward_the_larger_alpha() {
        // all-zero targets make every alpha tie at zero error
        let x = random_matrix(6, 3, 13);
        let y = Array2::<f64>::zeros((6, 2));
        let (best, _) = loocv_select_alpha(&x.view(), &y.view(), &[0.1, 1.0]).unwrap();
        assert_eq!(best, 1.0);
    }

    #[test]
    fn degenerate_grid_is_rejected() {
        let x = random_matrix(4, 2, 14);
        let y = random_matrix(4, 1, 15);
        assert!(loocv_select_alpha(&x.view(), &y.view(), &[]).is_err());
        assert!(loocv_select_alpha(&x.view(), &y.view(), &[0.0]).is_err());
        assert!(loocv_select_alpha(&x.view(), &y.view(), &[-1.0]).is_err());
    }

    #[test]
    fn argmax_prediction_basics() {
        let scores = array![[0.2, 0.9, -0.3]];
        assert_eq!(argmax_rows(&scores.view()), vec![1]);
        let tied = array![[0.5, 0.5]];
        assert_eq!(argmax_rows(&tied.view()), vec![0]);
    }

    #[test]
    fn prediction_is_invariant_to_positive_scaling() {
        let x = random_matrix(10, 4, 16);
        let w = random_matrix(4, 3, 17);
        let zeros = vec![0.0; 3];
        let base = argmax_rows(&predict_scores(&x.view(), &w.view(), &zeros).unwrap().view());
        let scaled = w.mapv(|v| v * 3.5);
        let same = argmax_rows(
            &predict_scores(&x.view(), &scaled.view(), &zeros)
                .unwrap()
                .view(),
        );
        assert_eq!(base, same);
    }

    #[test]
    fn zero_feature_columns_with_zero_weights_change_nothing() {
        let x = random_matrix(10, 4, 18);
        let w = random_matrix(4, 3, 19);
        let zeros = vec![0.0; 3];
        let base = argmax_rows(&predict_scores(&x.view(), &w.view(), &zeros).unwrap().view());

        let mut x2 = Array2::zeros((10, 6));
        x2.slice_mut(ndarray::s![.., ..4]).assign(&x);
        let mut w2 = Array2::zeros((6, 3));
        w2.slice_mut(ndarray::s![..4, ..]).assign(&w);
        let padded = argmax_rows(&predict_scores(&x2.view(), &w2.view(), &zeros).unwrap().view());
        assert_eq!(base, padded);
    }

    #[test]
    fn width_mismatch_is_an_error() {
        let x = random_matrix(3, 4, 20);
        let w = random_matrix(5, 2, 21);
        assert!(predict_scores(&x.view(), &w.view(), &[0.0, 0.0]).is_err());
    }
}
