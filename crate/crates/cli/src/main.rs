//! Benchmark harness: transform, prune, evaluate, sweep and report.

use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use rocket_prune::bench::{
    run_eval, run_prune, run_sweep, PruneCommand, RunReport, SolveMethod, SweepCommand,
};
use rocket_prune::kernel_bank::ModelKind;
use rocket_prune::pocket::Remain;

#[derive(Parser)]
#[command(name = "rocket-prune", version, about = "Prune random convolution kernels and benchmark the result")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Prune a model on one dataset and report accuracies and timings.
    Prune(PruneArgs),
    /// Run a pruning-rate sweep, optionally with random/reduced-kernel baselines.
    Sweep(SweepArgs),
    /// Evaluate a saved model bundle on a dataset's test split.
    Eval(EvalArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Directory holding `<name>/<name>_TRAIN.tsv` and `<name>_TEST.tsv`.
    #[arg(long, default_value = "data/ucr")]
    dataset_dir: PathBuf,

    #[arg(long)]
    dataset: String,

    #[arg(long, default_value = "rocket-ppv-max")]
    model: String,

    #[arg(long, default_value_t = 10_000)]
    num_kernels: usize,

    /// Pruning method.
    #[arg(long, default_value = "pocket")]
    method: String,

    /// Solver iterations.
    #[arg(long, default_value_t = 50)]
    iters: usize,

    /// Candidate k values for 5-fold cross-validation (comma separated).
    #[arg(long, value_delimiter = ',')]
    k_grid: Option<Vec<f64>>,

    /// Candidate penalty values; the baseline searches their square (comma separated).
    #[arg(long, value_delimiter = ',')]
    rho_grid: Option<Vec<f64>>,

    /// Fix k and skip cross-validation.
    #[arg(long)]
    k: Option<f64>,

    /// Fix rho1 and skip cross-validation (requires --rho2).
    #[arg(long)]
    rho1: Option<f64>,

    #[arg(long)]
    rho2: Option<f64>,

    /// Skip the element-wise refit stage.
    #[arg(long)]
    no_stage2: bool,

    #[arg(long, default_value_t = 10)]
    repeats: usize,

    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Worker threads (defaults to the number of cores).
    #[arg(long)]
    threads: Option<usize>,

    /// Output directory for report.json, trace.csv and the model bundle.
    #[arg(long)]
    out: Option<PathBuf>,

    /// Write the per-iteration convergence trace.
    #[arg(long)]
    trace: bool,

    #[arg(long, default_value_t = 5)]
    cv_folds: usize,

    /// Z-normalize each series before the transform (raw values by default).
    #[arg(long)]
    znorm: bool,
}

#[derive(Args)]
struct PruneArgs {
    #[command(flatten)]
    common: CommonArgs,

    /// Number of kernels to keep.
    #[arg(long, conflicts_with = "remain_rate")]
    remain: Option<usize>,

    /// Fraction of kernels to keep, strictly between 0 and 1.
    #[arg(long)]
    remain_rate: Option<f64>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: CommonArgs,

    /// Remain rates to sweep (comma separated). A rate of exactly 1.0 is
    /// substituted by 0.5 and flagged in the report.
    #[arg(long, value_delimiter = ',')]
    rates: Vec<f64>,

    /// Also evaluate uniformly random pruning at each rate.
    #[arg(long)]
    baseline_random: bool,

    /// Also evaluate a model trained from scratch with m kernels.
    #[arg(long)]
    baseline_scratch: bool,
}

#[derive(Args)]
struct EvalArgs {
    /// Saved model bundle directory.
    #[arg(long)]
    bundle: PathBuf,

    #[arg(long, default_value = "data/ucr")]
    dataset_dir: PathBuf,

    #[arg(long)]
    dataset: String,
}

fn build_command(common: &CommonArgs, remain: Remain) -> anyhow::Result<PruneCommand> {
    let model: ModelKind = common.model.parse()?;
    let method = match common.method.as_str() {
        "pocket" => SolveMethod::Pocket,
        "admm" => SolveMethod::Admm,
        other => bail!("unknown method `{other}` (expected pocket or admm)"),
    };
    if common.rho1.is_some() != common.rho2.is_some() {
        bail!("--rho1 and --rho2 must be given together");
    }
    let mut cmd = PruneCommand::new(common.dataset_dir.clone(), common.dataset.clone());
    cmd.model = model;
    cmd.num_kernels = common.num_kernels;
    cmd.remain = remain;
    cmd.method = method;
    cmd.iterations = common.iters;
    if let Some(grid) = &common.k_grid {
        cmd.k_grid = grid.clone();
    }
    if let Some(grid) = &common.rho_grid {
        cmd.rho_values = grid.clone();
    }
    cmd.fixed_k = common.k;
    cmd.fixed_rho = common.rho1.map(|r1| (r1, common.rho2.unwrap()));
    cmd.no_stage2 = common.no_stage2;
    cmd.repeats = common.repeats;
    cmd.seed = common.seed;
    cmd.cv_folds = common.cv_folds;
    cmd.out = common.out.clone();
    cmd.write_trace = common.trace;
    cmd.znorm = common.znorm;
    Ok(cmd)
}

fn print_report(report: &RunReport) {
    println!(
        "{} / {} / {}: kernels {} -> {} (rate {:.4}{})",
        report.dataset,
        report.model,
        report.method,
        report.num_kernels,
        report.remain_m,
        report.remain_rate,
        if report.remain_rate_substituted {
            ", substituted"
        } else {
            ""
        }
    );
    println!(
        "  unpruned: {:.2}% ± {:.2}",
        100.0 * report.unpruned.mean,
        100.0 * report.unpruned.std
    );
    println!(
        "  stage 1 : {:.2}% ± {:.2}",
        100.0 * report.stage1.mean,
        100.0 * report.stage1.std
    );
    if let Some(s2) = &report.stage2 {
        println!("  stage 2 : {:.2}% ± {:.2}", 100.0 * s2.mean, 100.0 * s2.std);
    }
    println!(
        "  time: cv {:.2}s + refit {:.2}s + stage2 {:.2}s = {:.2}s; hyper {}",
        report.timing.cv_seconds,
        report.timing.refit_seconds,
        report.timing.stage2_seconds,
        report.timing.sum_seconds,
        report.selected_hyper.first().map(String::as_str).unwrap_or("-")
    );
    if !report.degenerate_repeats.is_empty() {
        println!(
            "  warning: ties/zero norms left fewer than m groups in repeats {:?}",
            report.degenerate_repeats
        );
    }
}

fn main() -> anyhow::Result<()> {
    let cli = Cli::parse();

    let threads = match &cli.command {
        Command::Prune(a) => a.common.threads,
        Command::Sweep(a) => a.common.threads,
        Command::Eval(_) => None,
    };
    if let Some(t) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .context("failed to size the worker pool")?;
    }

    match cli.command {
        Command::Prune(args) => {
            let remain = match (args.remain, args.remain_rate) {
                (Some(m), None) => Remain::Count(m),
                (None, Some(r)) => {
                    if !(r > 0.0 && r < 1.0) {
                        bail!("--remain-rate must lie strictly between 0 and 1, got {r}");
                    }
                    Remain::Fraction(r)
                }
                (None, None) => Remain::Fraction(0.5),
                (Some(_), Some(_)) => unreachable!("clap conflicts_with"),
            };
            let cmd = build_command(&args.common, remain)?;
            let report = run_prune(&cmd)?;
            print_report(&report);
        }
        Command::Sweep(args) => {
            if args.rates.is_empty() {
                bail!("--rates must list at least one remain rate");
            }
            for &r in &args.rates {
                if !(r > 0.0 && r <= 1.0) {
                    bail!("sweep rates must lie in (0, 1], got {r}");
                }
            }
            let base = build_command(&args.common, Remain::Fraction(0.5))?;
            let sweep = SweepCommand {
                base,
                rates: args.rates.clone(),
                baseline_random: args.baseline_random,
                baseline_scratch: args.baseline_scratch,
            };
            let entries = run_sweep(&sweep)?;
            for entry in &entries {
                print_report(&entry.report);
                if let Some(rb) = &entry.random_baseline {
                    println!("  random  : {:.2}% ± {:.2}", 100.0 * rb.mean, 100.0 * rb.std);
                }
                if let Some(sb) = &entry.scratch_baseline {
                    println!("  scratch : {:.2}% ± {:.2}", 100.0 * sb.mean, 100.0 * sb.std);
                }
            }
            if let Some(dir) = &args.common.out {
                std::fs::create_dir_all(dir)?;
                let mut text = serde_json::to_string_pretty(&entries)?;
                text.push('\n');
                std::fs::write(dir.join("sweep.json"), text)?;
            }
        }
        Command::Eval(args) => {
            let acc = run_eval(&args.bundle, &args.dataset_dir, &args.dataset)?;
            println!("{}: accuracy {:.4}", args.dataset, acc);
        }
    }
    Ok(())
}
