//! Stratified K-fold cross-validation for the solver hyperparameters
//! (k for the two-stage pruner, (ρ1, ρ2) for the baseline), with the
//! degenerate-fold fallback for datasets too small to stratify.

use std::fmt;

use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::admm::{admm_prune, AdmmParams};
use crate::error::{Error, Result};
use crate::groups::GroupLayout;
use crate::pocket::{stage1, PocketConfig, Remain};
use crate::preprocess::{encode_labels, standardize_apply, standardize_fit};
use crate::ridge::{accuracy, argmax_rows, predict_scores, select_columns};

#[derive(Debug, Clone, Copy)]
pub struct CvPlan {
    pub folds: usize,
    pub seed: u64,
}

impl Default for CvPlan {
    fn default() -> Self {
        Self { folds: 5, seed: 0 }
    }
}

/// A point of the hyperparameter grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HyperPoint {
    K(f64),
    Rho { rho1: f64, rho2: f64 },
}

impl fmt::Display for HyperPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HyperPoint::K(k) => write!(f, "k={k}"),
            HyperPoint::Rho { rho1, rho2 } => write!(f, "rho1={rho1};rho2={rho2}"),
        }
    }
}

pub fn default_k_grid() -> Vec<f64> {
    vec![0.01, 0.1, 1.0, 10.0, 100.0, 1000.0]
}

pub fn default_rho_values() -> Vec<f64> {
    vec![0.01, 0.1, 1.0, 10.0, 100.0]
}

pub fn pocket_grid(ks: &[f64]) -> Vec<HyperPoint> {
    ks.iter().map(|&k| HyperPoint::K(k)).collect()
}

/// The square grid over one list of values for both penalties.
pub fn admm_grid(values: &[f64]) -> Vec<HyperPoint> {
    let mut grid = Vec::with_capacity(values.len() * values.len());
    for &rho1 in values {
        for &rho2 in values {
            grid.push(HyperPoint::Rho { rho1, rho2 });
        }
    }
    grid
}

#[derive(Debug, Clone)]
pub struct PointSummary {
    pub point: HyperPoint,
    /// Accuracy of the fitted pruned classifier on each fold's training part.
    pub fold_train_acc: Vec<f64>,
    /// Accuracy on each held-out fold.
    pub fold_val_acc: Vec<f64>,
    pub mean_train_acc: f64,
    pub mean_val_acc: f64,
}

#[derive(Debug, Clone)]
pub struct CvOutcome {
    pub best: HyperPoint,
    pub points: Vec<PointSummary>,
    pub folds_used: usize,
    /// Set when stratification was impossible and the documented fallback
    /// point was returned without running any folds.
    pub bypassed: bool,
}

/// Deterministic stratified folds: per class, indices are shuffled by the
/// seeded generator and dealt round-robin. Returns the held-out index sets.
pub fn stratified_folds(labels: &[usize], num_classes: usize, folds: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out: Vec<Vec<usize>> = vec![Vec::new(); folds];
    let mut next_fold = 0usize;
    for c in 0..num_classes {
        let mut members: Vec<usize> = labels
            .iter()
            .enumerate()
            .filter(|(_, &y)| y == c)
            .map(|(i, _)| i)
            .collect();
        members.shuffle(&mut rng);
        for idx in members {
            out[next_fold].push(idx);
            next_fold = (next_fold + 1) % folds;
        }
    }
    for fold in &mut out {
        fold.sort_unstable();
    }
    out
}

fn fallback_point(grid: &[HyperPoint]) -> HyperPoint {
    match grid.first() {
        Some(HyperPoint::K(_)) | None => HyperPoint::K(1.0),
        Some(HyperPoint::Rho { .. }) => {
            let mut best = None;
            for p in grid {
                if let HyperPoint::Rho { rho1, rho2 } = *p {
                    best = match best {
                        None => Some((rho1, rho2)),
                        Some(b) if (rho1, rho2) < b => Some((rho1, rho2)),
                        Some(b) => Some(b),
                    };
                }
            }
            let (rho1, rho2) = best.unwrap();
            HyperPoint::Rho { rho1, rho2 }
        }
    }
}

/// Prefer the point closest to k = 1 among ties (then the smaller k); for the
/// two-penalty grid, the lexicographically smaller pair.
fn tie_rank(p: &HyperPoint) -> (f64, f64) {
    match *p {
        HyperPoint::K(k) => (k.log10().abs(), k),
        HyperPoint::Rho { rho1, rho2 } => (rho1, rho2),
    }
}

fn solve_cell(
    x_tr: &ArrayView2<f64>,
    y_tr: &ArrayView2<f64>,
    layout: &GroupLayout,
    point: HyperPoint,
    remain: usize,
    iterations: usize,
) -> Result<crate::admm::PruneResult> {
    match point {
        HyperPoint::K(k) => {
            let cfg = PocketConfig {
                remain: Remain::Count(remain),
                k,
                iterations,
                early_stop_tol: None,
                run_stage2: false,
                stage2_alphas: Vec::new(),
            };
            stage1(x_tr, y_tr, layout, &cfg)
        }
        HyperPoint::Rho { rho1, rho2 } => admm_prune(
            x_tr,
            y_tr,
            layout,
            &AdmmParams {
                rho1,
                rho2,
                remain,
                iterations,
            },
        ),
    }
}

/// Stratified K-fold selection over the grid.
///
/// Each cell standardizes on the fold-training part, runs the requested
/// pruner, and scores the pruned stage-1 classifier on both the training
/// part and the held-out part (features standardized with the training
/// statistics). Cells run in parallel; the reduction (mean over folds, then
/// argmax over points) is order-independent.
pub fn cv_select(
    x_raw: &ArrayView2<f64>,
    labels: &[usize],
    num_classes: usize,
    layout: &GroupLayout,
    remain: usize,
    iterations: usize,
    grid: &[HyperPoint],
    plan: &CvPlan,
) -> Result<CvOutcome> {
    if grid.is_empty() {
        return Err(Error::InvalidParam("empty hyperparameter grid".into()));
    }
    let n = x_raw.nrows();
    if n < plan.folds {
        return Err(Error::InvalidParam(format!(
            "{n} samples cannot fill {} folds",
            plan.folds
        )));
    }
    let mut class_counts = vec![0usize; num_classes];
    for &y in labels {
        class_counts[y] += 1;
    }
    let min_class = class_counts.iter().copied().min().unwrap_or(0);
    let folds_used = plan.folds.min(min_class);
    if folds_used < 2 {
        // a class with a single sample: selection would be noise
        return Ok(CvOutcome {
            best: fallback_point(grid),
            points: Vec::new(),
            folds_used: 0,
            bypassed: true,
        });
    }

    let folds = stratified_folds(labels, num_classes, folds_used, plan.seed);
    let jobs: Vec<(usize, usize)> = (0..grid.len())
        .flat_map(|p| (0..folds_used).map(move |f| (p, f)))
        .collect();

    let cells: Vec<Result<(usize, usize, f64, f64)>> = jobs
        .par_iter()
        .map(|&(p, f)| {
            let val_idx = &folds[f];
            let train_idx: Vec<usize> = (0..n).filter(|i| !val_idx.contains(i)).collect();
            let x_tr_raw = x_raw.select(Axis(0), &train_idx);
            let x_val_raw = x_raw.select(Axis(0), val_idx);
            let y_tr: Vec<usize> = train_idx.iter().map(|&i| labels[i]).collect();
            let y_val: Vec<usize> = val_idx.iter().map(|&i| labels[i]).collect();

            let (xs, std) = standardize_fit(&x_tr_raw.view())?;
            let enc = encode_labels(&y_tr, num_classes)?;
            let res = solve_cell(&xs.view(), &enc.y.view(), layout, grid[p], remain, iterations)?;

            let cols = layout.rows_of(&res.selected_groups);
            let score = |m: &Array2<f64>| -> Result<Vec<usize>> {
                let sel = select_columns(&m.view(), &cols)?;
                let s = predict_scores(&sel.view(), &res.w_pruned.view(), &enc.column_means)?;
                Ok(argmax_rows(&s.view()))
            };
            let train_acc = accuracy(&score(&xs)?, &y_tr);
            let x_val = standardize_apply(&x_val_raw.view(), &std)?;
            let val_acc = accuracy(&score(&x_val)?, &y_val);
            Ok((p, f, train_acc, val_acc))
        })
        .collect();

    let mut train_acc = vec![vec![0.0; folds_used]; grid.len()];
    let mut val_acc = vec![vec![0.0; folds_used]; grid.len()];
    for cell in cells {
        let (p, f, tr, va) = cell?;
        train_acc[p][f] = tr;
        val_acc[p][f] = va;
    }

    let points: Vec<PointSummary> = grid
        .iter()
        .enumerate()
        .map(|(p, &point)| {
            let mean_train_acc = train_acc[p].iter().sum::<f64>() / folds_used as f64;
            let mean_val_acc = val_acc[p].iter().sum::<f64>() / folds_used as f64;
            PointSummary {
                point,
                fold_train_acc: train_acc[p].clone(),
                fold_val_acc: val_acc[p].clone(),
                mean_train_acc,
                mean_val_acc,
            }
        })
        .collect();

    let mut best = 0usize;
    for i in 1..points.len() {
        let (bi, bb) = (points[i].mean_val_acc, points[best].mean_val_acc);
        if bi > bb + 1e-15 {
            best = i;
        } else if (bi - bb).abs() <= 1e-15 {
            let (ra, rb) = (tie_rank(&points[i].point), tie_rank(&points[best].point));
            if ra < rb {
                best = i;
            }
        }
    }

    Ok(CvOutcome {
        best: points[best].point,
        points,
        folds_used,
        bypassed: false,
    })
}
