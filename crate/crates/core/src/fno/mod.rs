//! Compact Fourier neural operator mapping boundary kernels on 𝕋² to
//! conductivity images on the disk, with hand-written reverse-mode
//! gradients, AdamW, and cosine learning-rate annealing.
//!
//! The network is generic over the scalar type: training runs in `f32`,
//! while gradient verification against finite differences runs the same
//! code in `f64`. Parameter initialization draws from a single seeded
//! `f64` stream regardless of scalar type, so the two precisions start
//! from the same point up to rounding.
//!
//! Submodules: [`net`] (forward/backward/loss), [`optim`] (AdamW and the
//! cosine schedule), [`train`] (data traits, standardizer, training loop,
//! evaluation).

pub mod net;
pub mod optim;
pub mod train;

pub use net::{fno_forward, relative_l1_loss, spectral_conv};
pub use optim::{adamw_step, cosine_lr, OptimizerState};
pub use train::{
    evaluate, evaluate_with, select_best, train, train_epochs, train_epochs_until, DataSource,
    EpochStats, EvalSummary, Sample, SampleMetrics, Standardizer, TrainConfig, TrainOutput,
    TrainState, VecSource,
};

use num_complex::Complex;
use rand::Rng;
use rustfft::FftNum;

use crate::error::{Error, Result};

/// Scalar type the network runs in: `f32` for training, `f64` for checks.
pub trait Real:
    num_traits::Float
    + num_traits::FloatConst
    + num_traits::NumAssign
    + FftNum
    + std::fmt::Debug
    + std::fmt::Display
    + Send
    + Sync
    + 'static
{
    fn of_f64(v: f64) -> Self;
    fn as_f64(self) -> f64;
}

impl Real for f32 {
    fn of_f64(v: f64) -> Self {
        v as f32
    }
    fn as_f64(self) -> f64 {
        self as f64
    }
}

impl Real for f64 {
    fn of_f64(v: f64) -> Self {
        v
    }
    fn as_f64(self) -> f64 {
        self
    }
}

pub(crate) type C<T> = Complex<T>;

/// Architecture hyperparameters. Parameter shapes are a pure function of
/// this struct; see [`FNOConfig::param_count`].
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FNOConfig {
    /// Hidden layers; the last uses the identity activation, earlier ones ReLU.
    pub layers: usize,
    /// Retained Fourier modes per dimension (even); modes² mode pairs total.
    pub modes: usize,
    /// Channel width d_c of the hidden layers.
    pub width: usize,
    /// Width of the projection MLP's hidden layer.
    pub mlp_width: usize,
    /// Each spatial dim is zero-padded by ⌈grid·pad_fraction⌉ before the
    /// hidden layers and cropped after.
    pub pad_fraction: f64,
    /// Concatenate periodic coordinate channels (cos of the first torus
    /// coordinate, sin of the second) to the kernel input.
    pub grid_concat: bool,
    /// Zero the prediction outside the inscribed disk.
    pub mask_output: bool,
}

impl Default for FNOConfig {
    fn default() -> Self {
        FNOConfig {
            layers: 2,
            modes: 12,
            width: 48,
            mlp_width: 256,
            pad_fraction: 0.125,
            grid_concat: true,
            mask_output: true,
        }
    }
}

impl FNOConfig {
    pub fn validate(&self) -> Result<()> {
        if self.layers == 0 || self.width == 0 || self.mlp_width == 0 {
            return Err(Error::invalid("fno: layers and widths must be ≥ 1"));
        }
        if self.modes < 2 || self.modes % 2 != 0 {
            return Err(Error::invalid(format!(
                "fno: modes must be even and ≥ 2, got {}",
                self.modes
            )));
        }
        if !(self.pad_fraction >= 0.0 && self.pad_fraction < 1.0) {
            return Err(Error::invalid(format!(
                "fno: pad_fraction must lie in [0, 1), got {}",
                self.pad_fraction
            )));
        }
        Ok(())
    }

    /// Reject grids too small for the retained modes (need grid ≥ 2·modes).
    pub fn validate_for_grid(&self, n: usize) -> Result<()> {
        self.validate()?;
        if n < 2 * self.modes {
            return Err(Error::invalid(format!(
                "fno: grid {n} cannot hold {} modes per dimension (need ≥ {})",
                self.modes,
                2 * self.modes
            )));
        }
        Ok(())
    }

    pub fn in_channels(&self) -> usize {
        if self.grid_concat {
            3
        } else {
            1
        }
    }

    /// Zero-padding amount for an n×n grid.
    pub fn padding(&self, n: usize) -> usize {
        (n as f64 * self.pad_fraction).ceil() as usize
    }

    /// Retained mode pairs (k₁, k₂): k₁ runs over the half-axis 0..modes,
    /// k₂ over the symmetric band −modes/2+1 ..= modes/2. The layout is a
    /// fixed convention of this implementation.
    pub fn mode_pairs(&self) -> Vec<(usize, isize)> {
        let half = self.modes as isize / 2;
        (0..self.modes)
            .flat_map(|k1| (1 - half..=half).map(move |k2| (k1, k2)))
            .collect()
    }

    /// Total scalar parameter count (complex spectral weights count twice).
    pub fn param_count(&self) -> usize {
        let c_in = self.in_channels();
        let d = self.width;
        let lift = d * c_in + d;
        let per_layer = 2 * self.modes * self.modes * d * d + d * d + d;
        let mlp = self.mlp_width * d + self.mlp_width + self.mlp_width + 1;
        lift + self.layers * per_layer + mlp
    }
}

/// One hidden layer: complex spectral matrices (stored as split re/im),
/// a pointwise channel matrix, and a per-channel bias.
#[derive(Debug, Clone)]
pub struct LayerParams<T> {
    /// modes² × width × width, mode-major then row-major.
    pub p_re: Vec<T>,
    pub p_im: Vec<T>,
    /// width × width, row-major (output row, input column).
    pub w: Vec<T>,
    /// width.
    pub b: Vec<T>,
}

/// All network parameters. Tensor iteration order (for the optimizer and
/// serialization) is fixed: lift_w, lift_b, then per layer p_re, p_im, w, b,
/// then mlp_w1, mlp_b1, mlp_w2, mlp_b2.
#[derive(Debug, Clone)]
pub struct FNOParams<T> {
    /// width × in_channels.
    pub lift_w: Vec<T>,
    pub lift_b: Vec<T>,
    pub layers: Vec<LayerParams<T>>,
    /// mlp_width × width.
    pub mlp_w1: Vec<T>,
    pub mlp_b1: Vec<T>,
    /// 1 × mlp_width.
    pub mlp_w2: Vec<T>,
    /// 1.
    pub mlp_b2: Vec<T>,
}

/// Stable names for the tensors in iteration order, used by checkpoints.
pub fn tensor_names(layers: usize) -> Vec<String> {
    let mut names = vec!["lift_w".to_string(), "lift_b".to_string()];
    for l in 0..layers {
        for part in ["p_re", "p_im", "w", "b"] {
            names.push(format!("layer{l}_{part}"));
        }
    }
    for tail in ["mlp_w1", "mlp_b1", "mlp_w2", "mlp_b2"] {
        names.push(tail.to_string());
    }
    names
}

impl<T: Real> FNOParams<T> {
    /// All-zero parameters with the shapes the config dictates.
    pub fn zeros(config: &FNOConfig) -> Self {
        let d = config.width;
        let c_in = config.in_channels();
        let spec = config.modes * config.modes * d * d;
        FNOParams {
            lift_w: vec![T::zero(); d * c_in],
            lift_b: vec![T::zero(); d],
            layers: (0..config.layers)
                .map(|_| LayerParams {
                    p_re: vec![T::zero(); spec],
                    p_im: vec![T::zero(); spec],
                    w: vec![T::zero(); d * d],
                    b: vec![T::zero(); d],
                })
                .collect(),
            mlp_w1: vec![T::zero(); config.mlp_width * d],
            mlp_b1: vec![T::zero(); config.mlp_width],
            mlp_w2: vec![T::zero(); config.mlp_width],
            mlp_b2: vec![T::zero(); 1],
        }
    }

    /// Seeded initialization. Linear tensors (lift, pointwise, MLP) draw
    /// U(−√(1/fan_in), √(1/fan_in)); spectral re/im parts draw
    /// U[0, 1/(width²)). All draws come from one f64 stream in tensor
    /// iteration order, so the result is precision-independent.
    pub fn init(config: &FNOConfig, seed: u64) -> Self {
        let mut rng = crate::seeds::stream(crate::seeds::derive(seed, &[crate::seeds::tags::INIT]));
        let mut params = Self::zeros(config);
        let d = config.width;

        let mut uniform = |slice: &mut [T], lo: f64, hi: f64| {
            for v in slice.iter_mut() {
                *v = T::of_f64(lo + (hi - lo) * rng.gen::<f64>());
            }
        };

        let lift_bound = (1.0 / config.in_channels() as f64).sqrt();
        uniform(&mut params.lift_w, -lift_bound, lift_bound);
        uniform(&mut params.lift_b, -lift_bound, lift_bound);
        let spectral_scale = 1.0 / (d * d) as f64;
        let hidden_bound = (1.0 / d as f64).sqrt();
        for layer in &mut params.layers {
            uniform(&mut layer.p_re, 0.0, spectral_scale);
            uniform(&mut layer.p_im, 0.0, spectral_scale);
            uniform(&mut layer.w, -hidden_bound, hidden_bound);
            uniform(&mut layer.b, -hidden_bound, hidden_bound);
        }
        uniform(&mut params.mlp_w1, -hidden_bound, hidden_bound);
        uniform(&mut params.mlp_b1, -hidden_bound, hidden_bound);
        let mlp_bound = (1.0 / config.mlp_width as f64).sqrt();
        uniform(&mut params.mlp_w2, -mlp_bound, mlp_bound);
        uniform(&mut params.mlp_b2, -mlp_bound, mlp_bound);
        params
    }

    /// Tensors in the fixed iteration order.
    pub fn tensors(&self) -> Vec<&[T]> {
        let mut out: Vec<&[T]> = vec![&self.lift_w, &self.lift_b];
        for layer in &self.layers {
            out.push(&layer.p_re);
            out.push(&layer.p_im);
            out.push(&layer.w);
            out.push(&layer.b);
        }
        out.push(&self.mlp_w1);
        out.push(&self.mlp_b1);
        out.push(&self.mlp_w2);
        out.push(&self.mlp_b2);
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [T]> {
        let mut out: Vec<&mut [T]> = vec![&mut self.lift_w, &mut self.lift_b];
        for layer in &mut self.layers {
            out.push(&mut layer.p_re);
            out.push(&mut layer.p_im);
            out.push(&mut layer.w);
            out.push(&mut layer.b);
        }
        out.push(&mut self.mlp_w1);
        out.push(&mut self.mlp_b1);
        out.push(&mut self.mlp_w2);
        out.push(&mut self.mlp_b2);
        out
    }

    pub fn param_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|v| v.is_finite()))
    }

    /// Convert precision tensor-by-tensor (used to move trained f32 weights
    /// into f64 evaluation and vice versa).
    pub fn cast<U: Real>(&self) -> FNOParams<U> {
        let conv = |v: &[T]| v.iter().map(|x| U::of_f64(x.as_f64())).collect::<Vec<U>>();
        FNOParams {
            lift_w: conv(&self.lift_w),
            lift_b: conv(&self.lift_b),
            layers: self
                .layers
                .iter()
                .map(|l| LayerParams {
                    p_re: conv(&l.p_re),
                    p_im: conv(&l.p_im),
                    w: conv(&l.w),
                    b: conv(&l.b),
                })
                .collect(),
            mlp_w1: conv(&self.mlp_w1),
            mlp_b1: conv(&self.mlp_b1),
            mlp_w2: conv(&self.mlp_w2),
            mlp_b2: conv(&self.mlp_b2),
        }
    }
}
