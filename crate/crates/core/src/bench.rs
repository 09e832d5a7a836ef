//! Experiment harness behind the CLI: full prune/evaluate runs with
//! repeat aggregation, timing instrumentation, pruning-rate sweeps with
//! random and reduced-kernel baselines, and report/trace artifacts.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::time::Instant;

use ndarray::ArrayView2;
use rand::{seq::SliceRandom, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::admm::{admm_prune, AdmmParams, IterationRecord, PruneResult};
use crate::data_io::{load_ucr_tsv, train_test_pair, TimeSeriesDataset};
use crate::error::{Error, Result};
use crate::groups::GroupLayout;
use crate::hyper_cv::{admm_grid, cv_select, pocket_grid, CvOutcome, CvPlan, HyperPoint};
use crate::kernel_bank::{generate_minirocket, generate_rocket, prune_bank, KernelBank, ModelKind};
use crate::model_io::{save_bundle, BundleMeta, ModelBundle};
use crate::pocket::{stage1, stage2, PocketConfig, Remain};
use crate::preprocess::{encode_labels, standardize_apply, standardize_fit, LabelEncoding, Standardizer};
use crate::ridge::{self, accuracy, argmax_rows, predict_scores, select_columns};
use crate::transform::{build_feature_matrix, FeatureMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolveMethod {
    Pocket,
    Admm,
}

impl std::fmt::Display for SolveMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SolveMethod::Pocket => f.write_str("pocket"),
            SolveMethod::Admm => f.write_str("admm"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct PruneCommand {
    pub dataset_dir: PathBuf,
    pub dataset: String,
    pub model: ModelKind,
    pub num_kernels: usize,
    pub remain: Remain,
    pub method: SolveMethod,
    pub iterations: usize,
    pub k_grid: Vec<f64>,
    pub rho_values: Vec<f64>,
    /// Skip cross-validation and use these values directly.
    pub fixed_k: Option<f64>,
    pub fixed_rho: Option<(f64, f64)>,
    pub no_stage2: bool,
    pub repeats: usize,
    pub seed: u64,
    pub cv_folds: usize,
    pub out: Option<PathBuf>,
    pub write_trace: bool,
    pub remain_rate_substituted: bool,
    /// Per-series z-normalization before the transform (off by default).
    pub znorm: bool,
}

impl PruneCommand {
    pub fn new(dataset_dir: impl Into<PathBuf>, dataset: impl Into<String>) -> Self {
        Self {
            dataset_dir: dataset_dir.into(),
            dataset: dataset.into(),
            model: ModelKind::RocketPpvMax,
            num_kernels: 10_000,
            remain: Remain::Fraction(0.5),
            method: SolveMethod::Pocket,
            iterations: 50,
            k_grid: crate::hyper_cv::default_k_grid(),
            rho_values: crate::hyper_cv::default_rho_values(),
            fixed_k: None,
            fixed_rho: None,
            no_stage2: false,
            repeats: 10,
            seed: 0,
            cv_folds: 5,
            out: None,
            write_trace: false,
            remain_rate_substituted: false,
            znorm: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct AccuracySummary {
    pub per_repeat: Vec<f64>,
    pub mean: f64,
    /// Sample standard deviation; 0 for a single repeat.
    pub std: f64,
}

pub fn summarize(per_repeat: &[f64]) -> AccuracySummary {
    let n = per_repeat.len();
    let mean = if n == 0 {
        0.0
    } else {
        per_repeat.iter().sum::<f64>() / n as f64
    };
    let std = if n > 1 {
        let ss: f64 = per_repeat.iter().map(|v| (v - mean) * (v - mean)).sum();
        (ss / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    AccuracySummary {
        per_repeat: per_repeat.to_vec(),
        mean,
        std,
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Timing {
    pub cv_seconds: f64,
    pub refit_seconds: f64,
    pub stage2_seconds: f64,
    pub sum_seconds: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RunReport {
    pub dataset: String,
    pub model: ModelKind,
    pub method: String,
    pub num_kernels: usize,
    pub remain_m: usize,
    pub remain_rate: f64,
    pub remain_rate_substituted: bool,
    pub repeats: usize,
    pub seeds: Vec<u64>,
    pub selected_hyper: Vec<String>,
    pub refit_factorizations: Vec<usize>,
    pub unpruned: AccuracySummary,
    pub stage1: AccuracySummary,
    pub stage2: Option<AccuracySummary>,
    pub degenerate_repeats: Vec<usize>,
    pub timing: Timing,
}

/// Test accuracy of the stage-1 classifier: standardized surviving columns
/// against the pruned weight rows, plus the class offsets.
fn stage1_accuracy(
    res: &PruneResult,
    layout: &GroupLayout,
    standardizer: &Standardizer,
    x_raw: &ArrayView2<f64>,
    labels: &[usize],
    offsets: &[f64],
) -> Result<f64> {
    let xs = standardize_apply(x_raw, standardizer)?;
    let cols = layout.rows_of(&res.selected_groups);
    let sel = select_columns(&xs.view(), &cols)?;
    let scores = predict_scores(&sel.view(), &res.w_pruned.view(), offsets)?;
    Ok(accuracy(&argmax_rows(&scores.view()), labels))
}

fn generate_bank(cmd: &PruneCommand, train: &TimeSeriesDataset, seed: u64) -> Result<KernelBank> {
    match cmd.model {
        ModelKind::MiniRocket => generate_minirocket(cmd.num_kernels, train, seed),
        kind => generate_rocket(cmd.num_kernels, train.series_len(), seed, kind),
    }
}

fn solve_full(
    cmd: &PruneCommand,
    point: HyperPoint,
    xs: &ArrayView2<f64>,
    enc: &LabelEncoding,
    layout: &GroupLayout,
    m: usize,
) -> Result<PruneResult> {
    match point {
        HyperPoint::K(k) => stage1(
            xs,
            &enc.y.view(),
            layout,
            &PocketConfig {
                remain: Remain::Count(m),
                k,
                iterations: cmd.iterations,
                early_stop_tol: None,
                run_stage2: false,
                stage2_alphas: Vec::new(),
            },
        ),
        HyperPoint::Rho { rho1, rho2 } => admm_prune(
            xs,
            &enc.y.view(),
            layout,
            &AdmmParams {
                rho1,
                rho2,
                remain: m,
                iterations: cmd.iterations,
            },
        ),
    }
}

struct RepeatArtifacts {
    bundle: ModelBundle,
    trace: Vec<IterationRecord>,
    cv: Option<CvOutcome>,
}

struct RepeatOutcome {
    unpruned_acc: f64,
    stage1_acc: f64,
    stage2_acc: Option<f64>,
    selected_hyper: HyperPoint,
    degenerate: bool,
    factorizations: usize,
    cv_seconds: f64,
    refit_seconds: f64,
    stage2_seconds: f64,
    artifacts: RepeatArtifacts,
}

fn run_repeat(
    cmd: &PruneCommand,
    train: &TimeSeriesDataset,
    test: &TimeSeriesDataset,
    seed: u64,
) -> Result<RepeatOutcome> {
    let bank = generate_bank(cmd, train, seed)?;
    let layout = GroupLayout::for_model(bank.model_kind, bank.num_groups());
    let m = cmd.remain.resolve(bank.num_groups())?;

    let fm_train: FeatureMatrix = build_feature_matrix(train, &bank)?;
    let fm_test: FeatureMatrix = build_feature_matrix(test, &bank)?;

    // unpruned baseline
    let all_cols: Vec<usize> = (0..fm_train.num_features()).collect();
    let baseline = ridge::fit_classifier(
        &fm_train.x.view(),
        &train.labels,
        train.num_classes,
        all_cols,
        &ridge::default_alpha_grid(),
    )?;
    let unpruned_acc = accuracy(&baseline.predict(&fm_test.x.view())?, &test.labels);

    // hyperparameter selection
    let fixed_point = match cmd.method {
        SolveMethod::Pocket => cmd.fixed_k.map(HyperPoint::K),
        SolveMethod::Admm => cmd.fixed_rho.map(|(rho1, rho2)| HyperPoint::Rho { rho1, rho2 }),
    };
    let cv_start = Instant::now();
    let (point, cv_outcome) = match fixed_point {
        Some(p) => (p, None),
        None => {
            let grid = match cmd.method {
                SolveMethod::Pocket => pocket_grid(&cmd.k_grid),
                SolveMethod::Admm => admm_grid(&cmd.rho_values),
            };
            let outcome = cv_select(
                &fm_train.x.view(),
                &train.labels,
                train.num_classes,
                &layout,
                m,
                cmd.iterations,
                &grid,
                &CvPlan {
                    folds: cmd.cv_folds,
                    seed,
                },
            )?;
            (outcome.best, Some(outcome))
        }
    };
    let cv_seconds = cv_start.elapsed().as_secs_f64();

    // refit on the full training split
    let refit_start = Instant::now();
    let (xs, standardizer) = standardize_fit(&fm_train.x.view())?;
    let enc = encode_labels(&train.labels, train.num_classes)?;
    if enc.degenerate() {
        eprintln!(
            "warning: {}: a class is absent or owns every sample; its centered indicator column is zero",
            cmd.dataset
        );
    }
    let res = solve_full(cmd, point, &xs.view(), &enc, &layout, m)?;
    let refit_seconds = refit_start.elapsed().as_secs_f64();

    let stage1_acc = stage1_accuracy(
        &res,
        &layout,
        &standardizer,
        &fm_test.x.view(),
        &test.labels,
        &enc.column_means,
    )?;

    // optional element-wise refit
    let stage2_start = Instant::now();
    let stage2_model = if cmd.no_stage2 {
        None
    } else {
        Some(stage2(
            &fm_train.x.view(),
            &res.selected_groups,
            &layout,
            &train.labels,
            train.num_classes,
            &ridge::default_alpha_grid(),
        )?)
    };
    let stage2_seconds = stage2_start.elapsed().as_secs_f64();
    let stage2_acc = match &stage2_model {
        Some(model) => Some(accuracy(&model.predict(&fm_test.x.view())?, &test.labels)),
        None => None,
    };

    // deployable bundle for the last repeat
    let keep: BTreeSet<usize> = res.selected_groups.iter().copied().collect();
    let pruned = prune_bank(&bank, &keep)?;
    let cols = layout.rows_of(&res.selected_groups);
    let bundle = match &stage2_model {
        Some(model) => ModelBundle {
            bank: pruned,
            standardizer: model.standardizer.clone(),
            weights: model.weights.clone(),
            meta: BundleMeta {
                dataset: cmd.dataset.clone(),
                model_kind: cmd.model,
                seed,
                stage: "stage2".into(),
                selected_groups: res.selected_groups.clone(),
                class_offsets: model.class_offsets.clone(),
                alpha: Some(model.alpha),
                original_label_values: train.original_label_values.clone(),
            },
        },
        None => ModelBundle {
            bank: pruned,
            standardizer: standardizer.select(&cols),
            weights: res.w_pruned.clone(),
            meta: BundleMeta {
                dataset: cmd.dataset.clone(),
                model_kind: cmd.model,
                seed,
                stage: "stage1".into(),
                selected_groups: res.selected_groups.clone(),
                class_offsets: enc.column_means.clone(),
                alpha: None,
                original_label_values: train.original_label_values.clone(),
            },
        },
    };

    Ok(RepeatOutcome {
        unpruned_acc,
        stage1_acc,
        stage2_acc,
        selected_hyper: point,
        degenerate: res.degenerate,
        factorizations: res.factorizations,
        cv_seconds,
        refit_seconds,
        stage2_seconds,
        artifacts: RepeatArtifacts {
            bundle,
            trace: res.trace,
            cv: cv_outcome,
        },
    })
}

/// One full experiment: per repeat — fresh kernels, transform, CV (unless
/// fixed hyperparameters were given), prune, evaluate stage 1 and optionally
/// stage 2 on the test split. Writes artifacts for the last repeat.
pub fn run_prune(cmd: &PruneCommand) -> Result<RunReport> {
    if cmd.repeats == 0 {
        return Err(Error::InvalidParam("need at least one repeat".into()));
    }
    let (mut train, mut test) = train_test_pair(&cmd.dataset_dir, &cmd.dataset)?;
    if cmd.znorm {
        train.znormalize_per_series();
        test.znormalize_per_series();
    }

    let mut unpruned = Vec::new();
    let mut s1 = Vec::new();
    let mut s2 = Vec::new();
    let mut hypers = Vec::new();
    let mut factorizations = Vec::new();
    let mut degenerate_repeats = Vec::new();
    let mut seeds = Vec::new();
    let mut cv_seconds = 0.0;
    let mut refit_seconds = 0.0;
    let mut stage2_seconds = 0.0;
    let mut last_artifacts = None;

    for r in 0..cmd.repeats {
        let seed = cmd.seed.wrapping_add(r as u64);
        seeds.push(seed);
        let out = run_repeat(cmd, &train, &test, seed)?;
        unpruned.push(out.unpruned_acc);
        s1.push(out.stage1_acc);
        if let Some(a) = out.stage2_acc {
            s2.push(a);
        }
        hypers.push(out.selected_hyper.to_string());
        factorizations.push(out.factorizations);
        if out.degenerate {
            degenerate_repeats.push(r);
        }
        cv_seconds += out.cv_seconds;
        refit_seconds += out.refit_seconds;
        stage2_seconds += out.stage2_seconds;
        last_artifacts = Some(out.artifacts);
    }

    let report = RunReport {
        dataset: cmd.dataset.clone(),
        model: cmd.model,
        method: cmd.method.to_string(),
        num_kernels: cmd.num_kernels,
        remain_m: cmd.remain.resolve(cmd.num_kernels)?,
        remain_rate: cmd.remain.resolve(cmd.num_kernels)? as f64 / cmd.num_kernels as f64,
        remain_rate_substituted: cmd.remain_rate_substituted,
        repeats: cmd.repeats,
        seeds,
        selected_hyper: hypers,
        refit_factorizations: factorizations,
        unpruned: summarize(&unpruned),
        stage1: summarize(&s1),
        stage2: if s2.is_empty() { None } else { Some(summarize(&s2)) },
        degenerate_repeats,
        timing: Timing {
            cv_seconds,
            refit_seconds,
            stage2_seconds,
            sum_seconds: cv_seconds + refit_seconds + stage2_seconds,
        },
    };

    if let Some(dir) = &cmd.out {
        std::fs::create_dir_all(dir).map_err(|source| Error::Io {
            path: dir.clone(),
            source,
        })?;
        write_report(&report, &dir.join("report.json"))?;
        if let Some(art) = last_artifacts {
            save_bundle(&art.bundle, &dir.join("model"))?;
            if cmd.write_trace {
                write_trace_csv(&art.trace, &dir.join("trace.csv"))?;
            }
            if let Some(cv) = &art.cv {
                write_cv_csv(cv, &dir.join("cv_report.csv"))?;
            }
        }
    }
    Ok(report)
}

/// Serialize a report; identical runs produce byte-identical files apart
/// from the wall-clock timing block.
pub fn write_report(report: &RunReport, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(report)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_trace_csv(trace: &[IterationRecord], path: &Path) -> Result<()> {
    use std::fmt::Write as _;
    let mut out =
        String::from("iter,norm_gap,relative_threshold,reciprocal_relative_threshold,threshold\n");
    for rec in trace {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            rec.iter,
            rec.norm_gap,
            rec.relative_threshold,
            rec.reciprocal_relative_threshold,
            rec.threshold
        );
    }
    std::fs::write(path, out).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_cv_csv(cv: &CvOutcome, path: &Path) -> Result<()> {
    use std::fmt::Write as _;
    let mut out = String::from("point,fold,train_accuracy,val_accuracy\n");
    for p in &cv.points {
        for f in 0..p.fold_val_acc.len() {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                p.point, f, p.fold_train_acc[f], p.fold_val_acc[f]
            );
        }
    }
    for p in &cv.points {
        let _ = writeln!(out, "{},mean,{},{}", p.point, p.mean_train_acc, p.mean_val_acc);
    }
    let _ = writeln!(out, "best,,,{}", cv.best);
    std::fs::write(path, out).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

#[derive(Debug, Clone)]
pub struct SweepCommand {
    pub base: PruneCommand,
    pub rates: Vec<f64>,
    pub baseline_random: bool,
    pub baseline_scratch: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepEntry {
    pub report: RunReport,
    /// Uniformly random kept set of the same size, stage-2-style refit.
    pub random_baseline: Option<AccuracySummary>,
    /// Model trained from scratch with only m kernels.
    pub scratch_baseline: Option<AccuracySummary>,
}

/// One prune run per rate, plus optional random-pruning and reduced-kernel
/// baselines computed with the same seeds.
pub fn run_sweep(cmd: &SweepCommand) -> Result<Vec<SweepEntry>> {
    if cmd.rates.is_empty() {
        return Err(Error::InvalidParam("empty rate list".into()));
    }
    let (mut train, mut test) = train_test_pair(&cmd.base.dataset_dir, &cmd.base.dataset)?;
    if cmd.base.znorm {
        train.znormalize_per_series();
        test.znormalize_per_series();
    }
    let mut entries = Vec::new();
    for &rate in &cmd.rates {
        let mut sub = cmd.base.clone();
        if rate == 1.0 {
            // an externally supplied "keep everything" rate: eliminate half
            sub.remain = Remain::Fraction(0.5);
            sub.remain_rate_substituted = true;
        } else {
            sub.remain = Remain::Fraction(rate);
        }
        let report = run_prune(&sub)?;

        let m = sub.remain.resolve(sub.num_kernels)?;
        let random_baseline = if cmd.baseline_random {
            let mut accs = Vec::new();
            for r in 0..sub.repeats {
                let seed = sub.seed.wrapping_add(r as u64);
                accs.push(random_prune_accuracy(&sub, &train, &test, seed, m)?);
            }
            Some(summarize(&accs))
        } else {
            None
        };
        let scratch_baseline = if cmd.baseline_scratch {
            let mut accs = Vec::new();
            for r in 0..sub.repeats {
                let seed = sub.seed.wrapping_add(r as u64);
                accs.push(scratch_accuracy(&sub, &train, &test, seed, m)?);
            }
            Some(summarize(&accs))
        } else {
            None
        };
        entries.push(SweepEntry {
            report,
            random_baseline,
            scratch_baseline,
        });
    }
    Ok(entries)
}

/// Keep a uniformly random set of m groups and refit a ridge classifier on
/// their columns.
fn random_prune_accuracy(
    cmd: &PruneCommand,
    train: &TimeSeriesDataset,
    test: &TimeSeriesDataset,
    seed: u64,
    m: usize,
) -> Result<f64> {
    let bank = generate_bank(cmd, train, seed)?;
    let layout = GroupLayout::for_model(bank.model_kind, bank.num_groups());
    let fm_train = build_feature_matrix(train, &bank)?;
    let fm_test = build_feature_matrix(test, &bank)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x52414e44);
    let mut ids: Vec<usize> = (0..bank.num_groups()).collect();
    ids.shuffle(&mut rng);
    let mut keep: Vec<usize> = ids.into_iter().take(m).collect();
    keep.sort_unstable();
    let model = stage2(
        &fm_train.x.view(),
        &keep,
        &layout,
        &train.labels,
        train.num_classes,
        &ridge::default_alpha_grid(),
    )?;
    Ok(accuracy(&model.predict(&fm_test.x.view())?, &test.labels))
}

/// Train from scratch with only m kernels.
fn scratch_accuracy(
    cmd: &PruneCommand,
    train: &TimeSeriesDataset,
    test: &TimeSeriesDataset,
    seed: u64,
    m: usize,
) -> Result<f64> {
    let mut reduced = cmd.clone();
    reduced.num_kernels = m;
    let bank = generate_bank(&reduced, train, seed ^ 0x5343)?;
    let fm_train = build_feature_matrix(train, &bank)?;
    let fm_test = build_feature_matrix(test, &bank)?;
    let model = ridge::fit_classifier(
        &fm_train.x.view(),
        &train.labels,
        train.num_classes,
        (0..fm_train.num_features()).collect(),
        &ridge::default_alpha_grid(),
    )?;
    Ok(accuracy(&model.predict(&fm_test.x.view())?, &test.labels))
}

/// Load a saved bundle and report its argmax accuracy on the dataset's test
/// split.
pub fn run_eval(bundle_dir: &Path, dataset_dir: &Path, dataset: &str) -> Result<f64> {
    let bundle = crate::model_io::load_bundle(bundle_dir)?;
    let test_path = dataset_dir
        .join(dataset)
        .join(format!("{dataset}_TEST.tsv"));
    let test = load_ucr_tsv(&test_path)?;
    crate::model_io::evaluate_bundle(&bundle, &test)
}
