//! `eitlab` — command line front end for the EIT laboratory.
//!
//! Subcommands cover the whole experimental loop: `generate` datasets,
//! `train`/`eval` runs, `sweep-noise`/`sweep-samples` studies, `fit-laws`
//! on sweep records, the fixed `phantom` study, and `export-csv`.
//!
//! Run configuration can come from a JSON file (`--config run.json`) or be
//! assembled from flags; flags override file values field by field. Relative
//! run directories are resolved under `$EITLAB_RUN_ROOT` when it is set.
//!
//! Exit codes: 0 success, 1 configuration/format/IO error, 2 numerical
//! failure (solver stagnation, diverged training, non-finite values).

use std::fs;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use eit_core::conductivity::PhantomKind;
use eit_core::dataset::{generate_dataset, verify_dataset, DatasetConfig, Distribution};
use eit_core::metrics::FitKind;
use eit_core::noise::NoiseLaw;
use eit_core::pipeline::{
    self, fit_records, parse_records_csv, resolve_run_dir, run_eval, run_phantom, run_training,
    sweep_eval_noise, sweep_matched_noise, sweep_sample_counts, RunConfig, SweepAxis,
};
use eit_core::{Error, Result};

pub const RUN_ROOT_ENV: &str = "EITLAB_RUN_ROOT";

#[derive(Parser)]
#[command(
    name = "eitlab",
    version,
    about = "Desk-scale EIT laboratory: simulate boundary data, train a neural inverse solver, \
             and reproduce its scaling behavior"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate (or resume generating) a dataset directory.
    Generate(GenerateArgs),
    /// Train (or resume) a run; artifacts land in the run directory.
    Train(TrainArgs),
    /// Evaluate a trained run on its test split under the configured noise.
    Eval(EvalArgs),
    /// Evaluate one checkpoint across test-noise levels, or train one run
    /// per level with --matched.
    SweepNoise(SweepNoiseArgs),
    /// Train and evaluate one run per training-set size.
    SweepSamples(SweepSamplesArgs),
    /// Fit a scaling law to sweep records and print the result as JSON.
    FitLaws(FitLawsArgs),
    /// Simulate the heart-and-lungs phantom end to end.
    Phantom(PhantomArgs),
    /// Print a result CSV from a run directory (optionally copy it).
    ExportCsv(ExportCsvArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// Dataset directory to create or resume.
    #[arg(long)]
    out: String,
    /// Conductivity family: shape, three_phase, lognormal, or homogeneous.
    #[arg(long, default_value = "shape")]
    distribution: String,
    #[arg(long, default_value_t = 200)]
    train: usize,
    #[arg(long, default_value_t = 50)]
    valid: usize,
    #[arg(long, default_value_t = 50)]
    test: usize,
    /// Conductivity pixel grid size N (the grid covers (−1,1)²).
    #[arg(long, default_value_t = 32)]
    grid_n: usize,
    /// Boundary mode cutoff J; kernels live on the (2J)² torus grid.
    #[arg(long, default_value_t = 16)]
    modes_j: usize,
    /// FEM mesh refinement (the boundary carries 6R nodes).
    #[arg(long, default_value_t = 32)]
    mesh_rings: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Only verify an existing dataset against its manifest.
    #[arg(long)]
    verify: bool,
}

/// Run configuration shared by train/eval/sweeps: a JSON file, flags, or
/// both (flags win field by field).
#[derive(Args)]
struct RunArgs {
    /// JSON run configuration (see `run.json` in any run directory).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dataset directory (required when no --config is given).
    #[arg(long)]
    dataset: Option<String>,
    /// Run directory (required when no --config is given).
    #[arg(long)]
    out: Option<String>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    weight_decay: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Train on only the first K samples of the train split.
    #[arg(long)]
    train_count: Option<usize>,
    #[arg(long)]
    delta_train: Option<f64>,
    #[arg(long)]
    delta_test: Option<f64>,
    /// gaussian or uniform_bounded.
    #[arg(long)]
    noise_law_train: Option<String>,
    /// gaussian or uniform_bounded.
    #[arg(long)]
    noise_law_test: Option<String>,
    /// Independent test-noise redraws per evaluation.
    #[arg(long)]
    eval_reps: Option<usize>,
    #[arg(long)]
    layers: Option<usize>,
    /// Retained Fourier modes per dimension (even).
    #[arg(long)]
    modes: Option<usize>,
    /// Hidden channel width.
    #[arg(long)]
    width: Option<usize>,
    #[arg(long)]
    mlp_width: Option<usize>,
}

impl RunArgs {
    fn build(&self) -> Result<RunConfig> {
        let mut run = match &self.config {
            Some(path) => serde_json::from_str(&fs::read_to_string(path)?)?,
            None => {
                let dataset = self.dataset.clone().ok_or_else(|| {
                    Error::invalid("either --config or both --dataset and --out are required")
                })?;
                let out = self.out.clone().ok_or_else(|| {
                    Error::invalid("either --config or both --dataset and --out are required")
                })?;
                RunConfig::desk(dataset, out)
            }
        };
        if let Some(v) = &self.dataset {
            run.dataset_dir = v.clone();
        }
        if let Some(v) = &self.out {
            run.out_dir = v.clone();
        }
        if let Some(v) = self.epochs {
            run.train.epochs = v;
        }
        if let Some(v) = self.batch_size {
            run.train.batch_size = v;
        }
        if let Some(v) = self.lr {
            run.train.lr = v;
        }
        if let Some(v) = self.weight_decay {
            run.train.weight_decay = v;
        }
        if let Some(v) = self.seed {
            run.train.seed = v;
        }
        if self.train_count.is_some() {
            run.train_count = self.train_count;
        }
        if let Some(v) = self.delta_train {
            run.delta_train = v;
        }
        if let Some(v) = self.delta_test {
            run.delta_test = v;
        }
        if let Some(law) = &self.noise_law_train {
            run.noise_law_train = NoiseLaw::parse(law)?;
        }
        if let Some(law) = &self.noise_law_test {
            run.noise_law_test = NoiseLaw::parse(law)?;
        }
        if let Some(v) = self.eval_reps {
            run.eval_reps = v;
        }
        if let Some(v) = self.layers {
            run.fno.layers = v;
        }
        if let Some(v) = self.modes {
            run.fno.modes = v;
        }
        if let Some(v) = self.width {
            run.fno.width = v;
        }
        if let Some(v) = self.mlp_width {
            run.fno.mlp_width = v;
        }
        let root = std::env::var(RUN_ROOT_ENV).ok();
        run.out_dir =
            resolve_run_dir(&run.out_dir, root.as_deref()).to_string_lossy().into_owned();
        Ok(run)
    }
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Run at most this many additional epochs, then stop (resumable).
    #[arg(long)]
    epoch_budget: Option<usize>,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Args)]
struct SweepNoiseArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Test-noise levels, e.g. --deltas 0,0.03,0.1,0.3
    #[arg(long, value_delimiter = ',', required = true)]
    deltas: Vec<f64>,
    /// Train one run per δ with matched train/test noise instead of
    /// re-evaluating a single checkpoint.
    #[arg(long)]
    matched: bool,
    /// Seeds for --matched (default: the run seed).
    #[arg(long, value_delimiter = ',')]
    seeds: Vec<u64>,
}

#[derive(Args)]
struct SweepSamplesArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Training-set sizes, e.g. --counts 25,50,100,200
    #[arg(long, value_delimiter = ',', required = true)]
    counts: Vec<usize>,
}

#[derive(Args)]
struct FitLawsArgs {
    /// Records CSV produced by eval or a sweep.
    #[arg(long)]
    records: PathBuf,
    /// test-noise or train-count.
    #[arg(long)]
    axis: String,
    /// power, log, or sample-power.
    #[arg(long)]
    kind: String,
    /// Also write the fit result JSON here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PhantomArgs {
    /// realistic (heart 6.3, lungs 0.4) or shape_contrast (all organs 100).
    #[arg(long, default_value = "realistic")]
    kind: String,
    #[arg(long, default_value_t = 32)]
    grid_n: usize,
    #[arg(long, default_value_t = 16)]
    modes_j: usize,
    #[arg(long, default_value_t = 32)]
    mesh_rings: usize,
    /// Reconstruct with this trained checkpoint (best.eitc of a run).
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Output directory for the phantom artifacts.
    #[arg(long)]
    out: String,
}

#[derive(Args)]
struct ExportCsvArgs {
    /// Run directory holding the CSV.
    #[arg(long)]
    run: String,
    /// Which file: metrics, per_sample, history, noise_sweep, matched_sweep,
    /// or samples_sweep.
    #[arg(long, default_value = "metrics")]
    file: String,
    /// Copy the CSV here as well as printing it.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_axis(axis: &str) -> Result<SweepAxis> {
    match axis {
        "test-noise" => Ok(SweepAxis::TestNoise),
        "train-count" => Ok(SweepAxis::TrainCount),
        other => Err(Error::invalid(format!(
            "unknown axis {other:?} (expected test-noise or train-count)"
        ))),
    }
}

fn parse_fit_kind(kind: &str) -> Result<FitKind> {
    match kind {
        "power" => Ok(FitKind::Power),
        "log" => Ok(FitKind::Log),
        "sample-power" => Ok(FitKind::SamplePower),
        other => Err(Error::invalid(format!(
            "unknown law kind {other:?} (expected power, log, or sample-power)"
        ))),
    }
}

fn cmd_generate(args: &GenerateArgs) -> Result<()> {
    let config = DatasetConfig {
        distribution: Distribution::parse(&args.distribution)?,
        train: args.train,
        valid: args.valid,
        test: args.test,
        grid_n: args.grid_n,
        modes_j: args.modes_j,
        mesh_rings: args.mesh_rings,
        seed: args.seed,
    };
    if args.verify {
        let manifest = eit_core::dataset::load_manifest(&args.out)?;
        let bad = verify_dataset(&args.out, &manifest)?;
        if bad.is_empty() {
            println!("dataset {} intact: {} files, complete = {}", args.out, manifest.files.len(), manifest.complete);
            return Ok(());
        }
        return Err(Error::format(format!(
            "dataset {} has {} missing/corrupt files: {}",
            args.out,
            bad.len(),
            bad.join(", ")
        )));
    }
    let manifest = generate_dataset(&config, &args.out)?;
    println!(
        "dataset {} ({}): {} train / {} valid / {} test, N = {}, J = {}, R = {}, complete = {}",
        args.out,
        manifest.config.distribution.name(),
        manifest.config.train,
        manifest.config.valid,
        manifest.config.test,
        manifest.config.grid_n,
        manifest.config.modes_j,
        manifest.config.mesh_rings,
        manifest.complete
    );
    Ok(())
}

fn cmd_train(args: &TrainArgs) -> Result<()> {
    let run = args.run.build()?;
    let report = run_training(&run, args.epoch_budget)?;
    println!(
        "trained {}: epoch {}/{}, best epoch {} (valid loss {:.6}), finished = {}{} [{:.1}s]",
        run.out_dir,
        report.epochs_done,
        report.total_epochs,
        report.best_epoch.map_or_else(|| "-".into(), |e| e.to_string()),
        report.best_valid,
        report.finished,
        report
            .diverged_at
            .map_or_else(String::new, |e| format!(", diverged at epoch {e}")),
        report.wall_seconds
    );
    Ok(())
}

fn cmd_eval(args: &EvalArgs) -> Result<()> {
    let run = args.run.build()?;
    let report = run_eval(&run)?;
    println!(
        "evaluated {}: rel_l1 = {:.6}, l0 = {:.6}, dice = {:.6} over {} reps × {} samples",
        run.out_dir,
        report.rel_l1,
        report.l0,
        report.dice,
        report.per_rep.len(),
        report.per_rep.first().map_or(0, |s| s.per_sample.len())
    );
    println!("wrote {}/{} and {}/{}", run.out_dir, pipeline::PER_SAMPLE_FILE, run.out_dir, pipeline::METRICS_FILE);
    Ok(())
}

fn cmd_sweep_noise(args: &SweepNoiseArgs) -> Result<()> {
    let run = args.run.build()?;
    let records = if args.matched {
        let seeds =
            if args.seeds.is_empty() { vec![run.train.seed] } else { args.seeds.clone() };
        sweep_matched_noise(&run, &args.deltas, &seeds)?
    } else {
        sweep_eval_noise(&run, &args.deltas)?
    };
    let file =
        if args.matched { pipeline::MATCHED_SWEEP_FILE } else { pipeline::NOISE_SWEEP_FILE };
    println!("swept {} noise levels → {}/{}", records.len(), run.out_dir, file);
    for r in &records {
        println!(
            "  δ_train = {}, δ_test = {}, seed = {}: rel_l1 = {:.6}, dice = {:.6}",
            r.delta_train, r.delta_test, r.seed, r.rel_l1, r.dice
        );
    }
    Ok(())
}

fn cmd_sweep_samples(args: &SweepSamplesArgs) -> Result<()> {
    let run = args.run.build()?;
    let records = sweep_sample_counts(&run, &args.counts)?;
    println!(
        "swept {} sample counts → {}/{}",
        records.len(),
        run.out_dir,
        pipeline::SAMPLES_SWEEP_FILE
    );
    for r in &records {
        println!("  N = {}: rel_l1 = {:.6}, dice = {:.6}", r.n_train, r.rel_l1, r.dice);
    }
    Ok(())
}

fn cmd_fit_laws(args: &FitLawsArgs) -> Result<()> {
    let text = fs::read_to_string(&args.records)?;
    let records = parse_records_csv(&text)?;
    let fit = fit_records(&records, parse_axis(&args.axis)?, parse_fit_kind(&args.kind)?)?;
    let json = serde_json::to_string_pretty(&fit)? + "\n";
    print!("{json}");
    if let Some(out) = &args.out {
        fs::write(out, &json)?;
    }
    Ok(())
}

fn cmd_phantom(args: &PhantomArgs) -> Result<()> {
    let root = std::env::var(RUN_ROOT_ENV).ok();
    let out_dir = resolve_run_dir(&args.out, root.as_deref());
    let report = run_phantom(
        PhantomKind::parse(&args.kind)?,
        args.grid_n,
        args.modes_j,
        args.mesh_rings,
        args.checkpoint.as_deref(),
        &out_dir,
    )?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

fn cmd_export_csv(args: &ExportCsvArgs) -> Result<()> {
    let name = match args.file.as_str() {
        "metrics" => pipeline::METRICS_FILE,
        "per_sample" => pipeline::PER_SAMPLE_FILE,
        "history" => pipeline::HISTORY_FILE,
        "noise_sweep" => pipeline::NOISE_SWEEP_FILE,
        "matched_sweep" => pipeline::MATCHED_SWEEP_FILE,
        "samples_sweep" => pipeline::SAMPLES_SWEEP_FILE,
        other => {
            return Err(Error::invalid(format!(
                "unknown export {other:?} (expected metrics, per_sample, history, \
                 noise_sweep, matched_sweep, or samples_sweep)"
            )))
        }
    };
    let root = std::env::var(RUN_ROOT_ENV).ok();
    let path = resolve_run_dir(&args.run, root.as_deref()).join(name);
    let text = fs::read_to_string(&path)
        .map_err(|e| Error::invalid(format!("cannot read {}: {e}", path.display())))?;
    // Validate record-schema files before exporting them.
    if matches!(args.file.as_str(), "metrics" | "noise_sweep" | "matched_sweep" | "samples_sweep")
    {
        parse_records_csv(&text)?;
    }
    print!("{text}");
    if let Some(out) = &args.out {
        fs::write(out, &text)?;
    }
    Ok(())
}

fn dispatch(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Generate(args) => cmd_generate(args),
        Command::Train(args) => cmd_train(args),
        Command::Eval(args) => cmd_eval(args),
        Command::SweepNoise(args) => cmd_sweep_noise(args),
        Command::SweepSamples(args) => cmd_sweep_samples(args),
        Command::FitLaws(args) => cmd_fit_laws(args),
        Command::Phantom(args) => cmd_phantom(args),
        Command::ExportCsv(args) => cmd_export_csv(args),
    }
}

/// 1 for configuration/format/IO problems, 2 for numerical failures.
fn exit_code(err: &Error) -> i32 {
    match err {
        Error::InvalidInput(_) | Error::Format(_) | Error::Io(_) | Error::Json(_) => 1,
        Error::SolveFailure { .. } | Error::Diverged { .. } | Error::NonFinite(_) => 2,
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(err) = dispatch(&cli) {
        eprintln!("error: {err}");
        std::process::exit(exit_code(&err));
    }
}
