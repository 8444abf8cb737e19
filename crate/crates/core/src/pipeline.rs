//! Experiment orchestration over generated datasets: noisy training runs with
//! checkpoint/resume, evaluation under independent test noise, δ- and
//! sample-count sweeps, scaling-law fits, and fixed CSV export.
//!
//! A *run* is a directory holding one trained model and its artifacts:
//!
//! * `run.json` — the full [`RunConfig`], written once; reruns must match it,
//! * `last.eitc` — checkpoint after the most recent epoch (resume point),
//! * `best.eitc` — checkpoint at the best validation epoch so far,
//! * `history.csv` — per-epoch learning rate and losses,
//! * `per_sample.csv`, `metrics.csv` — evaluation outputs,
//! * sweep CSVs (`noise_sweep.csv`, `matched_sweep.csv`, `samples_sweep.csv`).
//!
//! Noise is applied on the fly, never baked into datasets: training draws a
//! fresh perturbation per (sample, epoch), validation uses one fixed draw per
//! sample (so model selection is stable), and each evaluation repetition uses
//! its own per-sample draws. All noise seeds derive from the *run* seed
//! (`train.seed`), so one dataset serves every noise level and every seed,
//! and a resumed run replays the identical noise stream.
//!
//! Reproducibility contract: (dataset dir, `RunConfig`) fixes every artifact
//! bit-for-bit except the `wall_seconds` column in CSV exports, which reports
//! honest timing.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::boundary::{kernel_from_matrix, KernelGrid};
use crate::conductivity::{phantom, PhantomKind};
use crate::dataset::{self, DatasetManifest, Split};
use crate::error::{Error, Result};
use crate::fno::{
    evaluate, train_epochs_until, DataSource, EvalSummary, FNOConfig, Sample, SampleMetrics,
    Standardizer, TrainConfig, TrainState,
};
use crate::forward::{assemble_ntd, NeumannSolver};
use crate::grid::{DiskGrid, SquareField};
use crate::io::{load_checkpoint, save_array, save_checkpoint, Array, Checkpoint};
use crate::mesh::build_mesh;
use crate::metrics::{self, FitKind, FitResult, DICE_EPSILON, L0_THRESHOLD};
use crate::noise::{perturb_kernel, NoiseLaw, NoiseSpec};
use crate::seeds::{self, tags};

pub const RUN_CONFIG_FILE: &str = "run.json";
pub const LAST_CHECKPOINT_FILE: &str = "last.eitc";
pub const BEST_CHECKPOINT_FILE: &str = "best.eitc";
pub const HISTORY_FILE: &str = "history.csv";
pub const PER_SAMPLE_FILE: &str = "per_sample.csv";
pub const METRICS_FILE: &str = "metrics.csv";
pub const NOISE_SWEEP_FILE: &str = "noise_sweep.csv";
pub const MATCHED_SWEEP_FILE: &str = "matched_sweep.csv";
pub const SAMPLES_SWEEP_FILE: &str = "samples_sweep.csv";

/// Everything a run needs beyond the dataset itself. Serialized as
/// `run.json`; unknown fields are rejected so configs stay reproducible.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Directory holding a completed dataset (manifest + arrays).
    pub dataset_dir: String,
    /// Run directory; created if absent, must not belong to a different run.
    pub out_dir: String,
    pub fno: FNOConfig,
    pub train: TrainConfig,
    /// Train on only the first `train_count` samples of the train split
    /// (sample-count sweeps). The standardizer is fitted on the subset.
    pub train_count: Option<usize>,
    /// Relative noise level applied to training and validation kernels.
    pub delta_train: f64,
    /// Relative noise level applied to test kernels.
    pub delta_test: f64,
    pub noise_law_train: NoiseLaw,
    pub noise_law_test: NoiseLaw,
    /// Independent test-noise redraws; metrics average over repetitions.
    pub eval_reps: usize,
}

impl RunConfig {
    /// Desk-scale defaults: the stock network and optimizer, clean training
    /// and test data, Gaussian train / uniform test noise laws for when the
    /// deltas are raised.
    pub fn desk(dataset_dir: impl Into<String>, out_dir: impl Into<String>) -> Self {
        RunConfig {
            dataset_dir: dataset_dir.into(),
            out_dir: out_dir.into(),
            fno: FNOConfig::default(),
            train: TrainConfig::default(),
            train_count: None,
            delta_train: 0.0,
            delta_test: 0.0,
            noise_law_train: NoiseLaw::Gaussian,
            noise_law_test: NoiseLaw::UniformBounded,
            eval_reps: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.fno.validate()?;
        self.train.validate()?;
        if !(self.delta_train >= 0.0) || !(self.delta_test >= 0.0) {
            return Err(Error::invalid("noise levels must be finite and ≥ 0"));
        }
        if self.eval_reps == 0 {
            return Err(Error::invalid("eval_reps must be at least 1"));
        }
        if self.train_count == Some(0) {
            return Err(Error::invalid("train_count, when set, must be at least 1"));
        }
        Ok(())
    }

    /// Checks that must hold between a run and the dataset it reads.
    fn validate_against(&self, manifest: &DatasetManifest) -> Result<()> {
        if !manifest.complete {
            return Err(Error::invalid(format!(
                "dataset in {} is incomplete; finish generation first",
                self.dataset_dir
            )));
        }
        let config = &manifest.config;
        // The network maps the kernel grid to the pixel grid at one shared
        // resolution, so training data must be generated with N = 2J.
        // Feeding a differently sized kernel to a *trained* model is a
        // documented capability of the spectral architecture (the weights are
        // resolution-free), but then the output lives on that other grid and
        // the dataset's targets no longer apply.
        if config.grid_n != 2 * config.modes_j {
            return Err(Error::invalid(format!(
                "dataset has grid_n = {} but 2J = {}; runs need N = 2J so kernels \
                 and conductivities share one grid",
                config.grid_n,
                2 * config.modes_j
            )));
        }
        self.fno.validate_for_grid(2 * config.modes_j)?;
        if let Some(count) = self.train_count {
            if count > config.train {
                return Err(Error::invalid(format!(
                    "train_count {count} exceeds the dataset's train split ({})",
                    config.train
                )));
            }
        }
        Ok(())
    }

    fn out_path(&self) -> &Path {
        Path::new(&self.out_dir)
    }
}

/// Which noise stream a data source belongs to. Seeds are derived as pure
/// functions of (run seed, stream, sample index, epoch/rep), so every draw is
/// reproducible and independent across streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseStream {
    /// Fresh draw per (sample, epoch).
    Train,
    /// One fixed draw per sample, reused every epoch: the validation loss
    /// compares epochs on identical data, keeping model selection stable.
    Valid,
    /// One draw per (sample, repetition).
    Test { rep: u64 },
}

/// Data source that perturbs stored kernels on the fly and standardizes the
/// result. With δ = 0 it reproduces the clean kernels bitwise.
pub struct NoisySource {
    kernels: Vec<KernelGrid>,
    targets: Vec<SquareField>,
    spec: NoiseSpec,
    standardizer: Standardizer,
    master: u64,
    stream: NoiseStream,
}

impl NoisySource {
    pub fn new(
        kernels: Vec<KernelGrid>,
        targets: Vec<SquareField>,
        spec: NoiseSpec,
        standardizer: Standardizer,
        master: u64,
        stream: NoiseStream,
    ) -> Result<Self> {
        if kernels.len() != targets.len() {
            return Err(Error::invalid(format!(
                "{} kernels but {} targets",
                kernels.len(),
                targets.len()
            )));
        }
        for (k, t) in kernels.iter().zip(&targets) {
            if k.n != t.n {
                return Err(Error::invalid(format!(
                    "kernel grid {} and target grid {} differ; generate the dataset with N = 2J",
                    k.n, t.n
                )));
            }
            if k.n != spec.n {
                return Err(Error::invalid(format!(
                    "noise spec is sized for grid {} but kernels live on grid {}",
                    spec.n, k.n
                )));
            }
        }
        Ok(NoisySource { kernels, targets, spec, standardizer, master, stream })
    }

    fn noise_seed(&self, idx: usize, epoch: usize) -> u64 {
        match self.stream {
            NoiseStream::Train => {
                seeds::derive(self.master, &[tags::NOISE_TRAIN, idx as u64, epoch as u64])
            }
            NoiseStream::Valid => seeds::derive(self.master, &[tags::NOISE_VALID, idx as u64]),
            NoiseStream::Test { rep } => {
                seeds::derive(self.master, &[tags::NOISE_TEST, idx as u64, rep])
            }
        }
    }
}

impl DataSource<f64> for NoisySource {
    fn len(&self) -> usize {
        self.kernels.len()
    }

    fn fetch(&self, idx: usize, epoch: usize) -> Sample<f64> {
        let noisy = perturb_kernel(&self.kernels[idx], &self.spec, self.noise_seed(idx, epoch));
        Sample {
            n: noisy.n,
            input: self.standardizer.apply(&noisy),
            target: self.targets[idx].values.clone(),
        }
    }
}

fn load_split(
    dir: &Path,
    manifest: &DatasetManifest,
    split: Split,
) -> Result<(Vec<KernelGrid>, Vec<SquareField>)> {
    let count = manifest.config.count(split);
    let mut kernels = Vec::with_capacity(count);
    let mut targets = Vec::with_capacity(count);
    for index in 0..count {
        kernels.push(dataset::load_kernel(dir, manifest, split, index)?);
        targets.push(dataset::load_gamma(dir, manifest, split, index)?);
    }
    Ok((kernels, targets))
}

/// Fit input statistics on the *epoch-0 noisy* training kernels — the same
/// inputs the first epoch sees, so standardization matches the data
/// distribution the model is actually trained on. With δ = 0 this equals a
/// fit on the clean kernels.
fn fit_standardizer(kernels: &[KernelGrid], spec: &NoiseSpec, master: u64) -> Result<Standardizer> {
    let noisy: Vec<KernelGrid> = kernels
        .iter()
        .enumerate()
        .map(|(idx, k)| {
            perturb_kernel(k, spec, seeds::derive(master, &[tags::NOISE_TRAIN, idx as u64, 0]))
        })
        .collect();
    Standardizer::fit(noisy.iter())
}

/// Write `run.json` on first use; on reruns require the stored config to
/// match exactly, so one directory can never mix artifacts from two runs.
fn init_run_dir(run: &RunConfig, out_dir: &Path) -> Result<()> {
    let path = out_dir.join(RUN_CONFIG_FILE);
    if path.exists() {
        let existing: RunConfig = serde_json::from_str(&fs::read_to_string(&path)?)?;
        if existing != *run {
            return Err(Error::invalid(format!(
                "run directory {} was initialized with a different configuration; \
                 use a fresh directory",
                out_dir.display()
            )));
        }
    } else {
        fs::write(&path, serde_json::to_string_pretty(run)? + "\n")?;
    }
    Ok(())
}

fn write_history_csv(path: &Path, history: &[crate::fno::EpochStats]) -> Result<()> {
    let mut text = String::from("epoch,lr,train_loss,valid_loss\n");
    for row in history {
        text += &format!("{},{},{},{}\n", row.epoch, row.lr, row.train_loss, row.valid_loss);
    }
    fs::write(path, text)?;
    Ok(())
}

/// Outcome of one [`run_training`] invocation (which may cover only part of
/// the schedule when an epoch budget is set).
#[derive(Debug, Clone, serde::Serialize)]
pub struct TrainingReport {
    /// Epochs completed so far across all invocations.
    pub epochs_done: usize,
    pub total_epochs: usize,
    pub best_epoch: Option<usize>,
    pub best_valid: f64,
    pub diverged_at: Option<usize>,
    /// True when the schedule is exhausted or training diverged.
    pub finished: bool,
    pub wall_seconds: f64,
}

/// Train (or resume training) the run. Every epoch updates `last.eitc`,
/// `best.eitc` (on a new validation best), and `history.csv`, so an
/// interruption at any point resumes bitwise-identically: the learning rate,
/// shuffles, and noise draws are pure functions of (seed, epoch).
///
/// `epoch_budget` caps how many *additional* epochs this invocation runs
/// (`None` = run to the end of the schedule). A diverged run keeps its
/// artifacts; the call still succeeds if some earlier epoch produced a finite
/// validation loss, and fails with [`Error::Diverged`] otherwise.
pub fn run_training(run: &RunConfig, epoch_budget: Option<usize>) -> Result<TrainingReport> {
    let start = Instant::now();
    run.validate()?;
    let dataset_dir = Path::new(&run.dataset_dir);
    let manifest = dataset::load_manifest(dataset_dir)?;
    run.validate_against(&manifest)?;
    let out_dir = run.out_path();
    fs::create_dir_all(out_dir)?;
    init_run_dir(run, out_dir)?;

    let kernel_n = 2 * manifest.config.modes_j;
    let spec_train = NoiseSpec::new(run.delta_train, run.noise_law_train, kernel_n)?;

    let (mut train_kernels, mut train_targets) = load_split(dataset_dir, &manifest, Split::Train)?;
    if let Some(count) = run.train_count {
        train_kernels.truncate(count);
        train_targets.truncate(count);
    }
    let (valid_kernels, valid_targets) = load_split(dataset_dir, &manifest, Split::Valid)?;

    let last_path = out_dir.join(LAST_CHECKPOINT_FILE);
    let best_path = out_dir.join(BEST_CHECKPOINT_FILE);
    let (mut state, standardizer) = if last_path.exists() {
        let ck = load_checkpoint(&last_path)?;
        if ck.config != run.fno || ck.train != run.train {
            return Err(Error::invalid(format!(
                "checkpoint {} was written by a different configuration",
                last_path.display()
            )));
        }
        // Resume reuses the stored standardizer: refitting (even on identical
        // data) could perturb the inputs at the last bit and break the
        // bitwise-resume contract.
        (ck.state, ck.standardizer)
    } else {
        let standardizer = fit_standardizer(&train_kernels, &spec_train, run.train.seed)?;
        (TrainState::new(&run.fno, run.train.seed), standardizer)
    };

    let master = run.train.seed;
    let train_src = NoisySource::new(
        train_kernels,
        train_targets,
        spec_train,
        standardizer.clone(),
        master,
        NoiseStream::Train,
    )?;
    let valid_src = NoisySource::new(
        valid_kernels,
        valid_targets,
        spec_train,
        standardizer.clone(),
        master,
        NoiseStream::Valid,
    )?;

    let stop_epoch = match epoch_budget {
        Some(budget) => state.next_epoch.saturating_add(budget),
        None => run.train.epochs,
    };
    let history_path = out_dir.join(HISTORY_FILE);
    train_epochs_until(
        &run.fno,
        &train_src,
        &valid_src,
        &run.train,
        &mut state,
        stop_epoch,
        |s| {
            let ck = Checkpoint {
                config: run.fno.clone(),
                train: run.train.clone(),
                state: s.clone(),
                standardizer: standardizer.clone(),
            };
            save_checkpoint(&last_path, &ck)?;
            let last_epoch = s.history.last().map(|e| e.epoch);
            if s.best_epoch.is_some() && s.best_epoch == last_epoch {
                save_checkpoint(&best_path, &ck)?;
            }
            write_history_csv(&history_path, &s.history)
        },
    )?;

    if state.diverged_at.is_some() && state.best_epoch.is_none() {
        // Artifacts (history + last checkpoint) are on disk for post-mortems.
        return Err(Error::Diverged { epoch: state.diverged_at.unwrap_or(0) });
    }
    Ok(TrainingReport {
        epochs_done: state.next_epoch,
        total_epochs: run.train.epochs,
        best_epoch: state.best_epoch,
        best_valid: state.best_valid,
        diverged_at: state.diverged_at,
        finished: state.diverged_at.is_some() || state.next_epoch >= run.train.epochs,
        wall_seconds: start.elapsed().as_secs_f64(),
    })
}

/// One row of the fixed result schema shared by `metrics.csv` and every
/// sweep CSV.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RunRecord {
    pub dataset: String,
    pub delta_train: f64,
    pub delta_test: f64,
    /// Training sample count (the `N` column).
    pub n_train: usize,
    pub seed: u64,
    pub rel_l1: f64,
    pub l0: f64,
    pub dice: f64,
    /// Honest wall-clock timing — the one CSV column that is not a pure
    /// function of (dataset, config).
    pub wall_seconds: f64,
}

pub const RECORD_HEADER: &str = "dataset,delta_train,delta_test,N,seed,rel_l1,l0,dice,wall_seconds";

pub fn records_to_csv(records: &[RunRecord]) -> String {
    let mut out = String::from(RECORD_HEADER);
    out.push('\n');
    for r in records {
        out += &format!(
            "{},{},{},{},{},{},{},{},{}\n",
            r.dataset,
            r.delta_train,
            r.delta_test,
            r.n_train,
            r.seed,
            r.rel_l1,
            r.l0,
            r.dice,
            r.wall_seconds
        );
    }
    out
}

pub fn parse_records_csv(text: &str) -> Result<Vec<RunRecord>> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::format("records CSV is empty"))?;
    if header != RECORD_HEADER {
        return Err(Error::format(format!(
            "unexpected records CSV header {header:?} (expected {RECORD_HEADER:?})"
        )));
    }
    let mut records = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 9 {
            return Err(Error::format(format!(
                "records CSV line {} has {} fields, expected 9",
                lineno + 2,
                parts.len()
            )));
        }
        let field = |i: usize, what: &str| -> Result<f64> {
            parts[i].parse().map_err(|_| {
                Error::format(format!(
                    "records CSV line {}: bad {what} value {:?}",
                    lineno + 2,
                    parts[i]
                ))
            })
        };
        records.push(RunRecord {
            dataset: parts[0].to_string(),
            delta_train: field(1, "delta_train")?,
            delta_test: field(2, "delta_test")?,
            n_train: parts[3].parse().map_err(|_| {
                Error::format(format!("records CSV line {}: bad N value {:?}", lineno + 2, parts[3]))
            })?,
            seed: parts[4].parse().map_err(|_| {
                Error::format(format!(
                    "records CSV line {}: bad seed value {:?}",
                    lineno + 2,
                    parts[4]
                ))
            })?,
            rel_l1: field(5, "rel_l1")?,
            l0: field(6, "l0")?,
            dice: field(7, "dice")?,
            wall_seconds: field(8, "wall_seconds")?,
        });
    }
    Ok(records)
}

/// Evaluation outcome: per-repetition summaries plus the grand means that go
/// into the [`RunRecord`].
#[derive(Debug, Clone)]
pub struct EvalReport {
    pub per_rep: Vec<EvalSummary>,
    pub rel_l1: f64,
    pub l0: f64,
    pub dice: f64,
    pub record: RunRecord,
}

fn eval_checkpoint(out_dir: &Path) -> Result<Checkpoint> {
    let best = out_dir.join(BEST_CHECKPOINT_FILE);
    let last = out_dir.join(LAST_CHECKPOINT_FILE);
    let path = if best.exists() {
        best
    } else if last.exists() {
        last
    } else {
        return Err(Error::invalid(format!(
            "no checkpoint in {}; train the run first",
            out_dir.display()
        )));
    };
    load_checkpoint(path)
}

/// Evaluate without writing files; shared by [`run_eval`] and the sweeps.
fn eval_once(run: &RunConfig) -> Result<(EvalReport, String)> {
    let start = Instant::now();
    run.validate()?;
    let dataset_dir = Path::new(&run.dataset_dir);
    let manifest = dataset::load_manifest(dataset_dir)?;
    run.validate_against(&manifest)?;
    let ck = eval_checkpoint(run.out_path())?;
    if ck.config != run.fno || ck.train != run.train {
        return Err(Error::invalid(
            "run checkpoint was trained with a different configuration".to_string(),
        ));
    }
    let params = ck.state.best_params.as_ref().ok_or(Error::Diverged {
        epoch: ck.state.diverged_at.unwrap_or(0),
    })?;

    let kernel_n = 2 * manifest.config.modes_j;
    let spec_test = NoiseSpec::new(run.delta_test, run.noise_law_test, kernel_n)?;
    let (test_kernels, test_targets) = load_split(dataset_dir, &manifest, Split::Test)?;

    let mut per_rep = Vec::with_capacity(run.eval_reps);
    let mut per_sample_csv = String::from("rep,index,rel_l1,l0,dice\n");
    for rep in 0..run.eval_reps {
        let src = NoisySource::new(
            test_kernels.clone(),
            test_targets.clone(),
            spec_test,
            ck.standardizer.clone(),
            run.train.seed,
            NoiseStream::Test { rep: rep as u64 },
        )?;
        let summary = evaluate(params, &run.fno, &src)?;
        for (index, m) in summary.per_sample.iter().enumerate() {
            per_sample_csv +=
                &format!("{},{},{},{},{}\n", rep, index, m.rel_l1, m.l0, m.dice);
        }
        per_rep.push(summary);
    }
    let reps = per_rep.len() as f64;
    let rel_l1 = per_rep.iter().map(|s| s.mean_rel_l1).sum::<f64>() / reps;
    let l0 = per_rep.iter().map(|s| s.mean_l0).sum::<f64>() / reps;
    let dice = per_rep.iter().map(|s| s.mean_dice).sum::<f64>() / reps;
    let record = RunRecord {
        dataset: manifest.config.distribution.name().to_string(),
        delta_train: run.delta_train,
        delta_test: run.delta_test,
        n_train: run.train_count.unwrap_or(manifest.config.train),
        seed: run.train.seed,
        rel_l1,
        l0,
        dice,
        wall_seconds: start.elapsed().as_secs_f64(),
    };
    Ok((EvalReport { per_rep, rel_l1, l0, dice, record }, per_sample_csv))
}

/// Evaluate the run's best checkpoint on the test split under the configured
/// test noise, writing `per_sample.csv` and a one-row `metrics.csv`.
pub fn run_eval(run: &RunConfig) -> Result<EvalReport> {
    let (report, per_sample_csv) = eval_once(run)?;
    let out_dir = run.out_path();
    fs::write(out_dir.join(PER_SAMPLE_FILE), per_sample_csv)?;
    fs::write(out_dir.join(METRICS_FILE), records_to_csv(std::slice::from_ref(&report.record)))?;
    Ok(report)
}

/// Evaluate one trained checkpoint under several test-noise levels (the test
/// columns of a noise-transfer table). Writes `noise_sweep.csv` with one row
/// per δ and returns the rows.
pub fn sweep_eval_noise(run: &RunConfig, deltas: &[f64]) -> Result<Vec<RunRecord>> {
    if deltas.is_empty() {
        return Err(Error::invalid("noise sweep needs at least one δ"));
    }
    let mut records = Vec::with_capacity(deltas.len());
    for &delta in deltas {
        let mut sub = run.clone();
        sub.delta_test = delta;
        records.push(eval_once(&sub)?.0.record);
    }
    fs::write(run.out_path().join(NOISE_SWEEP_FILE), records_to_csv(&records))?;
    Ok(records)
}

fn delta_dir_tag(delta: f64) -> String {
    format!("{delta:.4}").replace('.', "p")
}

/// Train and evaluate one run per (δ, seed) with matched train/test noise
/// (δ_train = δ_test = δ), each in its own subdirectory of `base.out_dir`.
/// Writes `matched_sweep.csv` at the base directory. Completed sub-runs are
/// reused, so an interrupted sweep resumes where it stopped.
pub fn sweep_matched_noise(
    base: &RunConfig,
    deltas: &[f64],
    seeds_list: &[u64],
) -> Result<Vec<RunRecord>> {
    if deltas.is_empty() || seeds_list.is_empty() {
        return Err(Error::invalid("matched sweep needs at least one δ and one seed"));
    }
    let mut records = Vec::with_capacity(deltas.len() * seeds_list.len());
    for &delta in deltas {
        for &seed in seeds_list {
            let mut sub = base.clone();
            sub.delta_train = delta;
            sub.delta_test = delta;
            sub.train.seed = seed;
            sub.out_dir = Path::new(&base.out_dir)
                .join(format!("matched_{}_s{seed}", delta_dir_tag(delta)))
                .to_string_lossy()
                .into_owned();
            run_training(&sub, None)?;
            records.push(run_eval(&sub)?.record);
        }
    }
    fs::write(Path::new(&base.out_dir).join(MATCHED_SWEEP_FILE), records_to_csv(&records))?;
    Ok(records)
}

/// Train and evaluate one run per training-set size (the `N` axis of a
/// sample-complexity fit), each in its own subdirectory. Writes
/// `samples_sweep.csv` at the base directory.
pub fn sweep_sample_counts(base: &RunConfig, counts: &[usize]) -> Result<Vec<RunRecord>> {
    if counts.is_empty() {
        return Err(Error::invalid("sample sweep needs at least one count"));
    }
    let mut records = Vec::with_capacity(counts.len());
    for &count in counts {
        let mut sub = base.clone();
        sub.train_count = Some(count);
        sub.out_dir = Path::new(&base.out_dir)
            .join(format!("samples_n{count}"))
            .to_string_lossy()
            .into_owned();
        run_training(&sub, None)?;
        records.push(run_eval(&sub)?.record);
    }
    fs::write(Path::new(&base.out_dir).join(SAMPLES_SWEEP_FILE), records_to_csv(&records))?;
    Ok(records)
}

/// Which sweep column drives a scaling-law fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    /// x = δ_test (noise-robustness laws).
    TestNoise,
    /// x = training sample count (sample-complexity laws).
    TrainCount,
}

/// Group sweep records by the axis value, average `rel_l1` within each group
/// (collapsing seeds), and fit the requested law. Rows at x = 0 are dropped:
/// the clean point is the law's offset, not a point on its log scale.
pub fn fit_records(records: &[RunRecord], axis: SweepAxis, kind: FitKind) -> Result<FitResult> {
    let mut pairs: Vec<(f64, f64)> = records
        .iter()
        .filter_map(|r| {
            let x = match axis {
                SweepAxis::TestNoise => r.delta_test,
                SweepAxis::TrainCount => r.n_train as f64,
            };
            (x > 0.0).then_some((x, r.rel_l1))
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut xs: Vec<f64> = Vec::new();
    let mut sums: Vec<f64> = Vec::new();
    let mut counts: Vec<f64> = Vec::new();
    for (x, y) in pairs {
        if xs.last() == Some(&x) {
            *sums.last_mut().unwrap() += y;
            *counts.last_mut().unwrap() += 1.0;
        } else {
            xs.push(x);
            sums.push(y);
            counts.push(1.0);
        }
    }
    let ys: Vec<f64> = sums.iter().zip(&counts).map(|(s, c)| s / c).collect();
    metrics::fit_law(&xs, &ys, kind)
}

/// Artifact summary of a phantom study.
#[derive(Debug, Clone, serde::Serialize)]
pub struct PhantomReport {
    pub kind: String,
    pub grid_n: usize,
    pub modes_j: usize,
    pub mesh_rings: usize,
    /// Relative Hermitian residual of the FEM NtD matrix (pre-symmetrization).
    pub hermitian_residual: f64,
    /// Relative reality defect removed when symmetrizing the matrix.
    pub reality_violation: f64,
    /// Largest imaginary part left after kernel synthesis (round-off scale).
    pub imag_residue: f64,
    /// Reconstruction metrics, present when a checkpoint was supplied.
    pub metrics: Option<SampleMetrics>,
}

/// Simulate the fixed heart-and-lungs phantom end to end: paint γ, solve the
/// boundary problem, synthesize the kernel, and (optionally) reconstruct with
/// a trained checkpoint. Writes `phantom_gamma.eitk`, `phantom_ntd.eitk`,
/// `phantom_kernel.eitk`, `phantom_report.json`, and with a checkpoint also
/// `phantom_recon.eitk`. The reconstruction lives on the kernel grid (2J)²;
/// metrics compare it against the phantom repainted at that resolution.
pub fn run_phantom(
    kind: PhantomKind,
    grid_n: usize,
    modes_j: usize,
    mesh_rings: usize,
    checkpoint: Option<&Path>,
    out_dir: &Path,
) -> Result<PhantomReport> {
    if grid_n < 2 {
        return Err(Error::invalid("phantom grid_n must be at least 2"));
    }
    if modes_j == 0 || 2 * modes_j > 6 * mesh_rings {
        return Err(Error::invalid(format!(
            "mesh_rings {mesh_rings} cannot resolve 2J = {} boundary modes (needs 2J ≤ 6R)",
            2 * modes_j
        )));
    }
    fs::create_dir_all(out_dir)?;

    let gamma = phantom(kind, grid_n);
    save_array(
        out_dir.join("phantom_gamma.eitk"),
        &Array::f64(vec![grid_n, grid_n], gamma.field.values.clone())?,
    )?;

    let mesh = build_mesh(mesh_rings)?;
    let solver = NeumannSolver::new(mesh, &gamma);
    let assembly = assemble_ntd(&solver, modes_j)?;
    let ntd_len = assembly.matrix.index_set().len();
    save_array(
        out_dir.join("phantom_ntd.eitk"),
        &Array::C128 { shape: vec![ntd_len, ntd_len], data: assembly.matrix.entries().to_vec() },
    )?;

    let synthesis = kernel_from_matrix(&assembly.matrix);
    let kernel = &synthesis.kernel;
    save_array(
        out_dir.join("phantom_kernel.eitk"),
        &Array::f64(vec![kernel.n, kernel.n], kernel.values.clone())?,
    )?;

    let metrics_opt = match checkpoint {
        None => None,
        Some(ck_path) => {
            let ck = load_checkpoint(ck_path)?;
            let params = ck.state.best_params.as_ref().ok_or(Error::Diverged {
                epoch: ck.state.diverged_at.unwrap_or(0),
            })?;
            ck.config.validate_for_grid(kernel.n)?;
            let input: Vec<f64> = ck.standardizer.apply(kernel);
            let recon_vals = crate::fno::fno_forward(params, &ck.config, &input, kernel.n)?;
            save_array(
                out_dir.join("phantom_recon.eitk"),
                &Array::f64(vec![kernel.n, kernel.n], recon_vals.clone())?,
            )?;
            let recon = SquareField::new(kernel.n, recon_vals);
            let target = phantom(kind, kernel.n).field;
            let mask = DiskGrid::new(kernel.n).disk_mask();
            Some(SampleMetrics {
                rel_l1: metrics::rel_lp_error(&recon, &target, &mask, 1.0)?,
                l0: metrics::l0_distance(&recon, &target, &mask, L0_THRESHOLD)?,
                dice: metrics::dice(&recon, &target, &mask, L0_THRESHOLD, DICE_EPSILON)?,
            })
        }
    };

    let report = PhantomReport {
        kind: kind.name().to_string(),
        grid_n,
        modes_j,
        mesh_rings,
        hermitian_residual: assembly.hermitian_residual,
        reality_violation: assembly.reality_violation,
        imag_residue: synthesis.imag_residue,
        metrics: metrics_opt,
    };
    fs::write(out_dir.join("phantom_report.json"), serde_json::to_string_pretty(&report)? + "\n")?;
    Ok(report)
}

/// Resolve a run directory against the optional run-root environment
/// variable: absolute paths pass through; relative paths are joined under
/// `root` when one is given.
pub fn resolve_run_dir(dir: &str, root: Option<&str>) -> PathBuf {
    let path = Path::new(dir);
    match root {
        Some(root) if path.is_relative() => Path::new(root).join(path),
        _ => path.to_path_buf(),
    }
}
