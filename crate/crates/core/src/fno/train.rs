//! Data access traits, input standardization, the training loop, and test
//! set evaluation.
//!
//! Training is deterministic given the seed: parameter init draws from the
//! INIT stream, per-epoch shuffles from SHUFFLE streams, and data sources
//! are required to be pure functions of (index, epoch). Validation always
//! fetches with epoch 0 so model selection sees a fixed set.

use rand::seq::SliceRandom;

use super::net::{disk_mask, fno_forward_tape, relative_l1_loss};
use super::optim::{adamw_step, cosine_lr, OptimizerState};
use super::{FNOConfig, FNOParams, Real};
use crate::boundary::KernelGrid;
use crate::error::{Error, Result};
use crate::grid::SquareField;
use crate::interp::resample_periodic_square;
use crate::metrics::{self, DICE_EPSILON, L0_THRESHOLD};
use crate::seeds::{self, tags};

/// One training/evaluation example: a standardized kernel grid (n² on 𝕋²)
/// and the conductivity target (n² on the square, mask handled downstream).
#[derive(Debug, Clone)]
pub struct Sample<T> {
    pub n: usize,
    pub input: Vec<T>,
    pub target: Vec<T>,
}

/// Deterministic sample access. `fetch(idx, epoch)` must be a pure function
/// of its arguments — training sources use `epoch` to redraw noise, while
/// fixed sets ignore it.
pub trait DataSource<T: Real> {
    fn len(&self) -> usize;
    fn is_empty(&self) -> bool {
        self.len() == 0
    }
    fn fetch(&self, idx: usize, epoch: usize) -> Sample<T>;
}

/// In-memory source that ignores the epoch (fixed data).
pub struct VecSource<T>(pub Vec<Sample<T>>);

impl<T: Real> DataSource<T> for VecSource<T> {
    fn len(&self) -> usize {
        self.0.len()
    }
    fn fetch(&self, idx: usize, _epoch: usize) -> Sample<T> {
        self.0[idx].clone()
    }
}

/// Pointwise mean/std of the training inputs, with a 1e−8 std floor.
/// Grids at other resolutions are handled by periodic bicubic resampling of
/// the statistics.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct Standardizer {
    pub n: usize,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

pub const STD_FLOOR: f64 = 1e-8;

impl Standardizer {
    pub fn fit<'a>(grids: impl IntoIterator<Item = &'a KernelGrid>) -> Result<Self> {
        let mut iter = grids.into_iter();
        let first = iter.next().ok_or_else(|| Error::invalid("standardizer: no inputs"))?;
        let n = first.n;
        let mut count = 1.0f64;
        let mut mean = first.values.clone();
        let mut sq: Vec<f64> = first.values.iter().map(|v| v * v).collect();
        for grid in iter {
            if grid.n != n {
                return Err(Error::invalid(format!(
                    "standardizer: mixed grid sizes {n} and {}",
                    grid.n
                )));
            }
            count += 1.0;
            for (i, &v) in grid.values.iter().enumerate() {
                mean[i] += v;
                sq[i] += v * v;
            }
        }
        for v in mean.iter_mut() {
            *v /= count;
        }
        let std: Vec<f64> = sq
            .iter()
            .zip(&mean)
            .map(|(&s, &m)| (s / count - m * m).max(0.0).sqrt().max(STD_FLOOR))
            .collect();
        Ok(Standardizer { n, mean, std })
    }

    /// Statistics at another resolution (identity when sizes match).
    fn stats_at(&self, n: usize) -> (Vec<f64>, Vec<f64>) {
        if n == self.n {
            (self.mean.clone(), self.std.clone())
        } else {
            let mean = resample_periodic_square(&self.mean, self.n, n);
            let std: Vec<f64> = resample_periodic_square(&self.std, self.n, n)
                .into_iter()
                .map(|s| s.max(STD_FLOOR))
                .collect();
            (mean, std)
        }
    }

    /// Standardize a kernel grid: (κ − mean)/std, pointwise.
    pub fn apply<T: Real>(&self, kernel: &KernelGrid) -> Vec<T> {
        let (mean, std) = self.stats_at(kernel.n);
        kernel
            .values
            .iter()
            .zip(mean.iter().zip(&std))
            .map(|(&v, (&m, &s))| T::of_f64((v - m) / s))
            .collect()
    }
}

/// Optimization hyperparameters. The cosine schedule horizon is `epochs`.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 30,
            batch_size: 32,
            lr: 8e-3,
            weight_decay: 1e-4,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::invalid("training needs epochs ≥ 1 and batch_size ≥ 1"));
        }
        if !(self.lr > 0.0) || !(self.weight_decay >= 0.0) {
            return Err(Error::invalid("training needs lr > 0 and weight_decay ≥ 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub lr: f64,
    pub train_loss: f64,
    pub valid_loss: f64,
}

/// Training result: parameters of the best-validation epoch, the full loss
/// history, and the divergence epoch if the loss left the finite range.
#[derive(Debug, Clone)]
pub struct TrainOutput<T> {
    pub params: FNOParams<T>,
    pub best_epoch: usize,
    pub best_valid: f64,
    pub history: Vec<EpochStats>,
    pub diverged_at: Option<usize>,
}

/// Index of the finite minimum validation loss (model selection rule).
pub fn select_best(history: &[EpochStats]) -> Option<usize> {
    history
        .iter()
        .enumerate()
        .filter(|(_, e)| e.valid_loss.is_finite())
        .min_by(|a, b| a.1.valid_loss.total_cmp(&b.1.valid_loss))
        .map(|(i, _)| i)
}

fn mean_loss<T: Real>(
    params: &FNOParams<T>,
    config: &FNOConfig,
    source: &dyn DataSource<T>,
    epoch: usize,
) -> Result<f64> {
    let mut total = 0.0;
    for idx in 0..source.len() {
        let sample = source.fetch(idx, epoch);
        let (out, tape) = fno_forward_tape(params, config, &sample.input, sample.n)?;
        total += relative_l1_loss(&out, &sample.target, tape.mask(), sample.n).0;
    }
    Ok(total / source.len() as f64)
}

/// Complete mutable state of a run after some number of finished epochs.
/// Persisting it and resuming continues the schedule exactly: the learning
/// rate depends only on the epoch index, shuffles and noise redraws on
/// (seed, epoch), and the optimizer moments live here.
#[derive(Debug, Clone)]
pub struct TrainState<T> {
    pub params: FNOParams<T>,
    pub opt: OptimizerState<T>,
    pub next_epoch: usize,
    pub history: Vec<EpochStats>,
    pub best_epoch: Option<usize>,
    pub best_valid: f64,
    pub best_params: Option<FNOParams<T>>,
    pub diverged_at: Option<usize>,
}

impl<T: Real> TrainState<T> {
    /// Fresh state with seeded parameter initialization.
    pub fn new(config: &FNOConfig, seed: u64) -> Self {
        TrainState {
            params: FNOParams::init(config, seed),
            opt: OptimizerState::new(config),
            next_epoch: 0,
            history: Vec::new(),
            best_epoch: None,
            best_valid: f64::INFINITY,
            best_params: None,
            diverged_at: None,
        }
    }

    /// Finish: hand out the best-validation parameters, or report divergence
    /// if no epoch ever produced a finite validation loss.
    pub fn into_output(self) -> Result<TrainOutput<T>> {
        match (self.best_epoch, self.best_params) {
            (Some(best_epoch), Some(params)) => Ok(TrainOutput {
                params,
                best_epoch,
                best_valid: self.best_valid,
                history: self.history,
                diverged_at: self.diverged_at,
            }),
            _ => Err(Error::Diverged { epoch: self.diverged_at.unwrap_or(0) }),
        }
    }
}

/// Advance `state` from `state.next_epoch` to `tc.epochs`, invoking
/// `after_epoch` once per completed epoch (checkpoint hook). A diverged
/// state is final: the loop records the event and stops.
pub fn train_epochs<T: Real>(
    config: &FNOConfig,
    train_set: &dyn DataSource<T>,
    valid_set: &dyn DataSource<T>,
    tc: &TrainConfig,
    state: &mut TrainState<T>,
    after_epoch: impl FnMut(&TrainState<T>) -> Result<()>,
) -> Result<()> {
    train_epochs_until(config, train_set, valid_set, tc, state, tc.epochs, after_epoch)
}

/// Like [`train_epochs`] but stops after epoch `stop_epoch - 1` even when the
/// schedule has more epochs left. The cosine horizon stays `tc.epochs`, so a
/// run split across several budgeted calls follows the same learning-rate
/// curve (and shuffle/noise draws) as one uninterrupted run.
pub fn train_epochs_until<T: Real>(
    config: &FNOConfig,
    train_set: &dyn DataSource<T>,
    valid_set: &dyn DataSource<T>,
    tc: &TrainConfig,
    state: &mut TrainState<T>,
    stop_epoch: usize,
    mut after_epoch: impl FnMut(&TrainState<T>) -> Result<()>,
) -> Result<()> {
    config.validate()?;
    tc.validate()?;
    if train_set.is_empty() || valid_set.is_empty() {
        return Err(Error::invalid("training needs nonempty train and valid sets"));
    }

    for epoch in state.next_epoch..stop_epoch.min(tc.epochs) {
        if state.diverged_at.is_some() {
            break;
        }
        let lr = cosine_lr(tc.lr, epoch, tc.epochs);
        let mut rng = seeds::stream(seeds::derive(tc.seed, &[tags::SHUFFLE, epoch as u64]));
        // Shuffle the identity order so the permutation is a pure function of
        // (seed, epoch) — a resumed run reproduces the batch order exactly.
        let mut indices: Vec<usize> = (0..train_set.len()).collect();
        indices.shuffle(&mut rng);

        let mut epoch_loss = 0.0;
        for batch in indices.chunks(tc.batch_size) {
            let inv_b = 1.0 / batch.len() as f64;
            let mut grads = FNOParams::<T>::zeros(config);
            for &idx in batch {
                let sample = train_set.fetch(idx, epoch);
                let (out, tape) =
                    fno_forward_tape(&state.params, config, &sample.input, sample.n)?;
                let (loss, mut dout) =
                    relative_l1_loss(&out, &sample.target, tape.mask(), sample.n);
                epoch_loss += loss;
                let scale = T::of_f64(inv_b);
                for g in dout.iter_mut() {
                    *g *= scale;
                }
                super::net::backward(&state.params, config, &tape, &dout, &mut grads);
            }
            adamw_step(&mut state.opt, &mut state.params, &grads, lr, tc.weight_decay);
        }
        let train_loss = epoch_loss / train_set.len() as f64;
        state.next_epoch = epoch + 1;

        if !train_loss.is_finite() || !state.params.is_finite() {
            state.history.push(EpochStats { epoch, lr, train_loss, valid_loss: f64::NAN });
            state.diverged_at = Some(epoch);
            after_epoch(state)?;
            break;
        }

        let valid_loss = mean_loss(&state.params, config, valid_set, 0)?;
        state.history.push(EpochStats { epoch, lr, train_loss, valid_loss });
        if valid_loss.is_finite() && valid_loss < state.best_valid {
            state.best_epoch = Some(epoch);
            state.best_valid = valid_loss;
            state.best_params = Some(state.params.clone());
        }
        after_epoch(state)?;
    }
    Ok(())
}

/// Seeded training loop: shuffle, batched forward/backward, AdamW with the
/// cosine schedule, best-by-validation selection.
pub fn train<T: Real>(
    config: &FNOConfig,
    train_set: &dyn DataSource<T>,
    valid_set: &dyn DataSource<T>,
    tc: &TrainConfig,
) -> Result<TrainOutput<T>> {
    let mut state = TrainState::new(config, tc.seed);
    train_epochs(config, train_set, valid_set, tc, &mut state, |_| Ok(()))?;
    state.into_output()
}

#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct SampleMetrics {
    pub rel_l1: f64,
    pub l0: f64,
    pub dice: f64,
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct EvalSummary {
    pub per_sample: Vec<SampleMetrics>,
    pub mean_rel_l1: f64,
    pub mean_l0: f64,
    pub mean_dice: f64,
}

/// Evaluate an arbitrary predictor over a test set: relative L¹ plus the
/// thresholded L⁰ area distance and Dice overlap (meaningful for the
/// two-phase shape family; reported for all).
pub fn evaluate_with<T: Real>(
    predict: impl Fn(&Sample<T>) -> Result<Vec<T>>,
    test_set: &dyn DataSource<T>,
) -> Result<EvalSummary> {
    if test_set.is_empty() {
        return Err(Error::invalid("evaluation needs a nonempty test set"));
    }
    let mut per_sample = Vec::with_capacity(test_set.len());
    for idx in 0..test_set.len() {
        let sample = test_set.fetch(idx, 0);
        let n = sample.n;
        let pred_vals = predict(&sample)?;
        let pred = SquareField::new(n, pred_vals.iter().map(|v| v.as_f64()).collect());
        let target = SquareField::new(n, sample.target.iter().map(|v| v.as_f64()).collect());
        let mask = disk_mask(n);
        per_sample.push(SampleMetrics {
            rel_l1: metrics::rel_lp_error(&pred, &target, &mask, 1.0)?,
            l0: metrics::l0_distance(&pred, &target, &mask, L0_THRESHOLD)?,
            dice: metrics::dice(&pred, &target, &mask, L0_THRESHOLD, DICE_EPSILON)?,
        });
    }
    let count = per_sample.len() as f64;
    Ok(EvalSummary {
        mean_rel_l1: per_sample.iter().map(|m| m.rel_l1).sum::<f64>() / count,
        mean_l0: per_sample.iter().map(|m| m.l0).sum::<f64>() / count,
        mean_dice: per_sample.iter().map(|m| m.dice).sum::<f64>() / count,
        per_sample,
    })
}

/// Evaluate trained parameters over a test set.
pub fn evaluate<T: Real>(
    params: &FNOParams<T>,
    config: &FNOConfig,
    test_set: &dyn DataSource<T>,
) -> Result<EvalSummary> {
    evaluate_with(
        |sample| super::net::fno_forward(params, config, &sample.input, sample.n),
        test_set,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::TAU;

    fn tiny_config() -> FNOConfig {
        FNOConfig {
            modes: 4,
            width: 8,
            mlp_width: 16,
            ..FNOConfig::default()
        }
    }

    /// Smooth synthetic samples: band-limited kernel input, smooth target
    /// with an inclusion-like hump.
    fn synthetic_samples<T: Real>(n: usize, count: usize, seed: u64) -> Vec<Sample<T>> {
        let mut rng = crate::seeds::stream(seed);
        (0..count)
            .map(|_| {
                let a = <rand_chacha::ChaCha8Rng as rand::Rng>::gen::<f64>(&mut rng) - 0.5;
                let b = <rand_chacha::ChaCha8Rng as rand::Rng>::gen::<f64>(&mut rng) - 0.5;
                let input: Vec<T> = (0..n * n)
                    .map(|idx| {
                        let t1 = TAU * (idx / n) as f64 / n as f64;
                        let t2 = TAU * (idx % n) as f64 / n as f64;
                        T::of_f64(a * t1.cos() + b * (t1 - t2).cos())
                    })
                    .collect();
                let grid = crate::grid::DiskGrid::new(n);
                let target: Vec<T> = (0..n * n)
                    .map(|idx| {
                        let (x, y) = grid.center(idx / n, idx % n);
                        T::of_f64(
                            1.0 + (2.0 * a)
                                * (-4.0 * ((x - 0.3 * b) * (x - 0.3 * b) + y * y)).exp(),
                        )
                    })
                    .collect();
                Sample { n, input, target }
            })
            .collect()
    }

    #[test]
    fn standardizer_statistics_and_floor() {
        let n = 16;
        let g1 = KernelGrid::new(n, vec![2.0; n * n]);
        let g2 = KernelGrid::new(n, vec![4.0; n * n]);
        let s = Standardizer::fit([&g1, &g2]).unwrap();
        assert!(s.mean.iter().all(|&m| (m - 3.0).abs() < 1e-12));
        assert!(s.std.iter().all(|&v| (v - 1.0).abs() < 1e-12));
        let z: Vec<f64> = s.apply(&g1);
        assert!(z.iter().all(|&v| (v + 1.0).abs() < 1e-12));

        // Identical inputs: std hits the floor and standardization is 0.
        let s = Standardizer::fit([&g1, &g1]).unwrap();
        assert!(s.std.iter().all(|&v| v == STD_FLOOR));
        let z: Vec<f64> = s.apply(&g1);
        assert!(z.iter().all(|&v| v == 0.0));

        assert!(Standardizer::fit([]).is_err());
        let g3 = KernelGrid::zeros(2 * n);
        assert!(Standardizer::fit([&g1, &g3]).is_err());
    }

    #[test]
    fn standardizer_resamples_smooth_statistics_across_resolutions() {
        let n = 32;
        let base: Vec<f64> = (0..n * n)
            .map(|idx| (TAU * (idx / n) as f64 / n as f64).cos())
            .collect();
        let g1 = KernelGrid::new(n, base.iter().map(|v| v + 1.0).collect());
        let g2 = KernelGrid::new(n, base.iter().map(|v| v - 1.0).collect());
        let s = Standardizer::fit([&g1, &g2]).unwrap();
        // Mean is cos(θ); applying to a 64² sampling must reproduce it up to
        // the O(h⁴) bicubic interpolation error of the 32² statistics tables.
        let m = 64;
        let fine = KernelGrid::new(
            m,
            (0..m * m)
                .map(|idx| (TAU * (idx / m) as f64 / m as f64).cos())
                .collect(),
        );
        let z: Vec<f64> = s.apply(&fine);
        let worst = z.iter().fold(0.0f64, |w, v| w.max(v.abs()));
        assert!(worst < 5e-4, "resampled standardization residual {worst}");
    }

    #[test]
    fn select_best_is_the_finite_argmin() {
        let entry = |epoch, valid_loss| EpochStats {
            epoch,
            lr: 1e-3,
            train_loss: 1.0,
            valid_loss,
        };
        assert_eq!(select_best(&[]), None);
        let hist = vec![entry(0, 0.9), entry(1, 0.4), entry(2, 0.7), entry(3, 0.41)];
        assert_eq!(select_best(&hist), Some(1));
        let hist = vec![entry(0, f64::NAN), entry(1, 0.5), entry(2, f64::INFINITY)];
        assert_eq!(select_best(&hist), Some(1));
    }

    #[test]
    fn training_is_deterministic_and_selects_the_validation_argmin() {
        let config = tiny_config();
        let n = 16;
        let train_src = VecSource(synthetic_samples(n, 4, 800));
        let valid_src = VecSource(synthetic_samples(n, 2, 801));
        let tc = TrainConfig {
            epochs: 4,
            batch_size: 2,
            lr: 4e-3,
            weight_decay: 1e-4,
            seed: 5,
        };
        let a = train::<f64>(&config, &train_src, &valid_src, &tc).unwrap();
        let b = train::<f64>(&config, &train_src, &valid_src, &tc).unwrap();
        assert_eq!(a.history.len(), b.history.len());
        for (ea, eb) in a.history.iter().zip(&b.history) {
            assert_eq!(ea.train_loss.to_bits(), eb.train_loss.to_bits());
            assert_eq!(ea.valid_loss.to_bits(), eb.valid_loss.to_bits());
        }
        for (ta, tb) in a.params.tensors().iter().zip(b.params.tensors().iter()) {
            assert_eq!(ta, tb);
        }

        // Best epoch is the argmin of the recorded validation losses, and
        // re-evaluating the returned parameters reproduces that loss.
        assert_eq!(select_best(&a.history), Some(a.best_epoch));
        let replayed = mean_loss(&a.params, &config, &valid_src, 0).unwrap();
        assert_eq!(replayed.to_bits(), a.best_valid.to_bits());
        assert!(a.diverged_at.is_none());

        // A different seed changes the trajectory.
        let c = train::<f64>(&config, &train_src, &valid_src, &TrainConfig { seed: 6, ..tc }).unwrap();
        assert!(c.history[0].train_loss != a.history[0].train_loss);
    }

    #[test]
    fn small_net_overfits_a_small_batch() {
        let config = tiny_config();
        let n = 16;
        let samples = synthetic_samples(n, 3, 42);
        let train_src = VecSource(samples.clone());
        let valid_src = VecSource(samples);
        let tc = TrainConfig {
            epochs: 150,
            batch_size: 3,
            lr: 8e-3,
            weight_decay: 1e-4,
            seed: 11,
        };
        let out = train::<f64>(&config, &train_src, &valid_src, &tc).unwrap();
        let first = out.history.first().unwrap().train_loss;
        let last = out.history.last().unwrap().train_loss;
        assert!(last < 0.2, "final train loss {last}");
        assert!(last < 0.5 * first, "no optimization progress: {first} → {last}");
        assert!(out.diverged_at.is_none());
    }

    #[test]
    fn interrupted_training_resumes_the_schedule_bitwise() {
        let config = tiny_config();
        let n = 16;
        let train_src = VecSource(synthetic_samples(n, 6, 21));
        let valid_src = VecSource(synthetic_samples(n, 2, 22));
        let tc = TrainConfig {
            epochs: 6,
            batch_size: 2,
            lr: 4e-3,
            weight_decay: 1e-4,
            seed: 5,
        };

        let mut straight = TrainState::<f64>::new(&config, tc.seed);
        train_epochs(&config, &train_src, &valid_src, &tc, &mut straight, |_| Ok(()))
            .unwrap();

        // Interrupt after epoch 2 by snapshotting from the hook, then
        // continue from the snapshot with a second call.
        let mut snapshot: Option<TrainState<f64>> = None;
        let mut first = TrainState::<f64>::new(&config, tc.seed);
        train_epochs(&config, &train_src, &valid_src, &tc, &mut first, |s| {
            if s.next_epoch == 3 {
                snapshot = Some(s.clone());
            }
            Ok(())
        })
        .unwrap();
        let mut resumed = snapshot.expect("hook ran for epoch 2");
        assert_eq!(resumed.next_epoch, 3);
        train_epochs(&config, &train_src, &valid_src, &tc, &mut resumed, |_| Ok(()))
            .unwrap();

        assert_eq!(resumed.history.len(), straight.history.len());
        for (a, b) in resumed.history.iter().zip(&straight.history) {
            assert_eq!(a.train_loss.to_bits(), b.train_loss.to_bits());
            assert_eq!(a.valid_loss.to_bits(), b.valid_loss.to_bits());
        }
        for (a, b) in resumed.params.tensors().iter().zip(straight.params.tensors()) {
            assert_eq!(a.len(), b.len());
            for (x, y) in a.iter().zip(b.iter()) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
        assert_eq!(resumed.best_epoch, straight.best_epoch);
        assert_eq!(resumed.best_valid.to_bits(), straight.best_valid.to_bits());
    }

    #[test]
    fn exploding_learning_rate_reports_divergence_with_history() {
        let config = tiny_config();
        let n = 16;
        let train_src = VecSource(synthetic_samples(n, 2, 7));
        let valid_src = VecSource(synthetic_samples(n, 1, 8));
        let tc = TrainConfig {
            epochs: 40,
            batch_size: 2,
            lr: 1e25,
            weight_decay: 1e-4,
            seed: 1,
        };
        match train::<f32>(&config, &train_src, &valid_src, &tc) {
            Ok(out) => {
                let at = out.diverged_at.expect("divergence must be flagged");
                assert_eq!(out.history.len(), at + 1);
                assert!(!out.history[at].valid_loss.is_finite());
            }
            Err(Error::Diverged { .. }) => {} // diverged before the first finite epoch
            Err(other) => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn evaluation_stubs_and_permutation_invariance() {
        let n = 32;
        let mut samples = synthetic_samples(n, 5, 60);
        // Make targets shape-like so Dice is nontrivial: background 1 with
        // a contrast-100 disk inclusion.
        let grid = crate::grid::DiskGrid::new(n);
        for (s_idx, sample) in samples.iter_mut().enumerate() {
            for idx in 0..n * n {
                let (x, y) = grid.center(idx / n, idx % n);
                let cx = 0.1 * s_idx as f64 - 0.2;
                sample.target[idx] =
                    if (x - cx).hypot(y) < 0.4 { 100.0 } else { 1.0 };
            }
        }
        let source = VecSource(samples.clone());

        let perfect = evaluate_with(|s: &Sample<f64>| Ok(s.target.clone()), &source).unwrap();
        assert_eq!(perfect.mean_rel_l1, 0.0);
        // Dice of a set with itself is 2|A|/(ε + 2|A|), shy of 1 by ε/(2|A|).
        assert!((perfect.mean_dice - 1.0).abs() < 1e-6);
        assert_eq!(perfect.mean_l0, 0.0);

        // Constant-1 predictor must match the directly computed mean.
        let ones = evaluate_with(|s: &Sample<f64>| Ok(vec![1.0; s.n * s.n]), &source).unwrap();
        let mask = disk_mask(n);
        let direct: f64 = samples
            .iter()
            .map(|s| {
                let num: f64 = (0..n * n)
                    .filter(|&i| mask[i])
                    .map(|i| (1.0 - s.target[i]).abs())
                    .sum();
                let den: f64 = (0..n * n).filter(|&i| mask[i]).map(|i| s.target[i].abs()).sum();
                num / den
            })
            .sum::<f64>()
            / samples.len() as f64;
        assert_relative_eq!(ones.mean_rel_l1, direct, max_relative = 1e-9);

        // Order invariance of the means.
        let mut reversed = samples.clone();
        reversed.reverse();
        let rev = evaluate_with(|s: &Sample<f64>| Ok(vec![1.0; s.n * s.n]), &VecSource(reversed))
            .unwrap();
        assert_relative_eq!(rev.mean_rel_l1, ones.mean_rel_l1, epsilon = 1e-12);
        assert_relative_eq!(rev.mean_dice, ones.mean_dice, epsilon = 1e-12);
    }
}
