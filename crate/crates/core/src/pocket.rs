//! The two-stage pruner. Stage 1 performs group-sparse feature selection
//! with a fixed penalty ratio k, so the W-update system is constant and its
//! inverse is precomputed once — via the Woodbury identity on the N×N system
//! when N < H. Stage 2 optionally refits a leave-one-out-tuned ridge
//! classifier on the surviving features.

use ndarray::{Array2, ArrayView2};

use crate::admm::{finish, threshold_step, IterationRecord, PruneResult};
use crate::error::{Error, Result};
pub use crate::groups::relative_threshold;
use crate::groups::GroupLayout;
use crate::linalg::{add_scaled_identity, all_finite, fro_norm, Cholesky};
use crate::preprocess::{encode_labels, standardize_fit};
use crate::ridge::{self, RidgeModel};

/// Number of kernels to keep, absolute or as a fraction of G.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Remain {
    Count(usize),
    Fraction(f64),
}

impl Remain {
    /// Fractions resolve as round(fraction·G), clamped to [1, G−1].
    pub fn resolve(&self, num_groups: usize) -> Result<usize> {
        match *self {
            Remain::Count(m) => {
                if m == 0 || m >= num_groups {
                    Err(Error::InvalidParam(format!(
                        "remain count must satisfy 1 <= m < G, got m={m}, G={num_groups}"
                    )))
                } else {
                    Ok(m)
                }
            }
            Remain::Fraction(f) => {
                if !(f > 0.0 && f < 1.0) {
                    return Err(Error::InvalidParam(format!(
                        "remain rate must lie strictly between 0 and 1, got {f}"
                    )));
                }
                let m = (f * num_groups as f64).round() as usize;
                Ok(m.clamp(1, num_groups - 1))
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct PocketConfig {
    pub remain: Remain,
    /// Fixed ratio of the coupling penalty to the fit penalty.
    pub k: f64,
    pub iterations: usize,
    /// Optional early stop on ‖W−Θ‖_F ≤ tol·‖W‖_F. Off by default.
    pub early_stop_tol: Option<f64>,
    pub run_stage2: bool,
    pub stage2_alphas: Vec<f64>,
}

impl Default for PocketConfig {
    fn default() -> Self {
        Self {
            remain: Remain::Fraction(0.5),
            k: 1.0,
            iterations: 50,
            early_stop_tol: None,
            run_stage2: true,
            stage2_alphas: ridge::default_alpha_grid(),
        }
    }
}

/// `(k·I_H + XᵀX)⁻¹` by direct H×H factorization.
pub fn gram_inverse_direct(x: &ArrayView2<f64>, k: f64) -> Result<Array2<f64>> {
    let g = add_scaled_identity(x.t().dot(x), k);
    Cholesky::new(&g.view())?.inverse()
}

/// `(k·I_H + XᵀX)⁻¹ = (1/k)·[I_H − Xᵀ(k·I_N + XXᵀ)⁻¹X]`.
pub fn gram_inverse_woodbury(x: &ArrayView2<f64>, k: f64) -> Result<Array2<f64>> {
    if !(k > 0.0) {
        return Err(Error::InvalidParam(format!(
            "the Woodbury path needs k > 0, got {k}"
        )));
    }
    let m = add_scaled_identity(x.dot(&x.t()), k);
    let minv = Cholesky::new(&m.view())?.inverse()?;
    let h = x.ncols();
    let mut a = Array2::eye(h) - x.t().dot(&minv).dot(x);
    a.mapv_inplace(|v| v / k);
    Ok(a)
}

enum WUpdate {
    /// Stores (k·I_N + XXᵀ)⁻¹; applies the Woodbury identity per iteration.
    Woodbury { minv: Array2<f64> },
    /// Stores the dense H×H inverse.
    Direct { a_inv: Array2<f64>, k: f64 },
}

/// Stage 1: group-wise feature selection with a single precomputed inverse.
///
/// Precomputes `(k·I + XᵀX)⁻¹` once, then iterates the W multiply, the
/// dynamic threshold, the group soft-threshold and the scaled dual update.
/// Exactly one matrix factorization is performed regardless of T.
pub fn stage1(
    x: &ArrayView2<f64>,
    y: &ArrayView2<f64>,
    layout: &GroupLayout,
    cfg: &PocketConfig,
) -> Result<PruneResult> {
    let (n, h) = (x.nrows(), x.ncols());
    let c = y.ncols();
    if h != layout.num_rows() {
        return Err(Error::DimensionMismatch {
            context: "feature count vs group layout",
            got: h,
            expected: layout.num_rows(),
        });
    }
    if y.nrows() != n {
        return Err(Error::DimensionMismatch {
            context: "target rows",
            got: y.nrows(),
            expected: n,
        });
    }
    if !(cfg.k > 0.0) || !cfg.k.is_finite() {
        return Err(Error::InvalidParam(format!("k must be positive, got {}", cfg.k)));
    }
    if cfg.iterations == 0 {
        return Err(Error::InvalidParam("need at least one iteration".into()));
    }
    let m = cfg.remain.resolve(layout.num_groups())?;
    let k = cfg.k;

    let precompute_start = std::time::Instant::now();
    let xty = x.t().dot(y);
    // exactly one factorization, reused every iteration
    let update = if n < h {
        let m_mat = add_scaled_identity(x.dot(&x.t()), k);
        let minv = Cholesky::new(&m_mat.view())?.inverse()?;
        WUpdate::Woodbury { minv }
    } else {
        let g_mat = add_scaled_identity(x.t().dot(x), k);
        let a_inv = Cholesky::new(&g_mat.view())?.inverse()?;
        WUpdate::Direct { a_inv, k }
    };
    let factorizations = 1usize;
    let factorize_seconds = precompute_start.elapsed().as_secs_f64();

    // W = A·[k(Θ+U) + XᵀY] = k·A·(Θ+U) + A·XᵀY; the second term is constant
    let p0 = match &update {
        WUpdate::Woodbury { minv } => {
            let bx = minv.dot(&x.dot(&xty));
            (&xty - &x.t().dot(&bx)) / k
        }
        WUpdate::Direct { a_inv, .. } => a_inv.dot(&xty),
    };

    let mut theta = Array2::<f64>::zeros((h, c));
    let mut u = Array2::<f64>::zeros((h, c));
    let mut trace: Vec<IterationRecord> = Vec::with_capacity(cfg.iterations);
    let mut w = Array2::<f64>::zeros((h, c));
    let iterate_start = std::time::Instant::now();

    for iter in 1..=cfg.iterations {
        w = if iter == 1 {
            p0.clone() // Θ = U = 0
        } else {
            let tu = &theta + &u;
            // k·A·(Θ+U): the Woodbury form needs no scaling by k
            let katu = match &update {
                WUpdate::Woodbury { minv } => {
                    let z = minv.dot(&x.dot(&tu));
                    tu - x.t().dot(&z)
                }
                WUpdate::Direct { a_inv, k } => a_inv.dot(&tu) * *k,
            };
            katu + &p0
        };
        if !all_finite(&w.view()) {
            return Err(Error::NonFinite("stage-1 iterate"));
        }

        let out = threshold_step(&w, &mut theta, &mut u, layout, m, iter)?;
        let gap = out.record.norm_gap;
        trace.push(out.record);
        if out.stop {
            break; // degenerate threshold
        }
        if let Some(tol) = cfg.early_stop_tol {
            if gap <= tol * fro_norm(&w.view()) {
                break;
            }
        }
    }

    let iterate_seconds = iterate_start.elapsed().as_secs_f64();
    finish(
        w,
        theta,
        u,
        layout,
        m,
        trace,
        factorizations,
        factorize_seconds,
        iterate_seconds,
    )
}

/// Standardize raw features, encode labels, run stage 1, and refit in
/// stage 2 when the config asks for it.
pub fn prune(
    x_raw: &ArrayView2<f64>,
    labels: &[usize],
    num_classes: usize,
    layout: &GroupLayout,
    cfg: &PocketConfig,
) -> Result<(PruneResult, Option<RidgeModel>)> {
    let (xs, _) = standardize_fit(x_raw)?;
    let enc = encode_labels(labels, num_classes)?;
    let result = stage1(&xs.view(), &enc.y.view(), layout, cfg)?;
    let refit = if cfg.run_stage2 {
        Some(stage2(
            x_raw,
            &result.selected_groups,
            layout,
            labels,
            num_classes,
            &cfg.stage2_alphas,
        )?)
    } else {
        None
    };
    Ok((result, refit))
}

/// Stage 2: restrict features to the surviving groups and refit a ridge
/// classifier with leave-one-out-selected alpha on the raw columns.
pub fn stage2(
    x_raw: &ArrayView2<f64>,
    selection: &[usize],
    layout: &GroupLayout,
    labels: &[usize],
    num_classes: usize,
    alpha_grid: &[f64],
) -> Result<RidgeModel> {
    if selection.is_empty() {
        return Err(Error::EmptySelection);
    }
    let columns = layout.rows_of(selection);
    ridge::fit_classifier(x_raw, labels, num_classes, columns, alpha_grid)
}
