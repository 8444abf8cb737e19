//! Forward pass, reverse-mode gradients, and the masked relative-L¹ loss.
//!
//! Layout conventions: a feature map on a g×g grid with C channels is a
//! flat `Vec<T>` indexed `(x·g + y)·C + c` (channels fastest, so pointwise
//! channel mixes are contiguous). Spectral transforms copy one channel at a
//! time into a complex plane.
//!
//! Spectral weights act on true Fourier coefficients: gather divides the
//! unnormalized forward transform by g², and the scattered Hermitian
//! spectrum is evaluated with an unnormalized inverse transform (no final
//! division). Retained modes (k₁, k₂) carry weight ½ whenever the mirrored
//! mode (−k₁, −k₂) is itself retained (the k₁ = 0 rows), so that summing a
//! mode with its conjugate mirror reproduces real harmonics exactly; with
//! identity matrices the layer is the identity on retained harmonics.

use num_complex::Complex;

use super::{FNOConfig, FNOParams, Real, C};
use crate::error::{Error, Result};
use crate::fft::Fft2;
use crate::grid::DiskGrid;

/// Disk indicator for an n×n cell-centered grid, flat row-major.
pub fn disk_mask(n: usize) -> Vec<bool> {
    DiskGrid::new(n).disk_mask()
}

/// Mirror of a frequency slot on a g-periodic axis.
#[inline]
fn mirror_slot(k: usize, g: usize) -> usize {
    if k == 0 {
        0
    } else {
        g - k
    }
}

/// Frequency slots and pairing weight for each retained mode on a g×g grid.
/// Returns (slot, mirror_slot, weight) with slot = k₁·g + (k₂ mod g).
fn mode_slots(config: &FNOConfig, g: usize) -> Vec<(usize, usize, f64)> {
    let half = config.modes as isize / 2;
    config
        .mode_pairs()
        .iter()
        .map(|&(k1, k2)| {
            let r = k1;
            let c = (k2.rem_euclid(g as isize)) as usize;
            let rm = mirror_slot(r, g);
            let cm = mirror_slot(c, g);
            // The mirror (−k₁, −k₂) is retained iff k₁ = 0 (half-axis layout)
            // and −k₂ lies in the band −modes/2+1 ..= modes/2.
            let mirrored_retained = k1 == 0 && (1 - half..=half).contains(&(-k2));
            let weight = if mirrored_retained { 0.5 } else { 1.0 };
            (r * g + c, rm * g + cm, weight)
        })
        .collect()
}

/// Per-sample saved forward state, consumed by [`backward`].
pub struct Tape<T> {
    n: usize,
    g: usize,
    /// Input channels on the padded grid, (g²)×c_in.
    channels: Vec<T>,
    /// Layer inputs h_ℓ, each (g²)×d_c (h_0 is the lift output).
    layer_inputs: Vec<Vec<T>>,
    /// Pre-activations z_ℓ of each hidden layer.
    layer_pre: Vec<Vec<T>>,
    /// Gathered spectral coefficients v per layer: modes² × d_c complex.
    layer_coeffs: Vec<Vec<C<T>>>,
    /// MLP hidden pre-activation on the cropped grid, (n²)×mlp_width.
    mlp_pre: Vec<T>,
    /// Cropped features feeding the MLP, (n²)×d_c.
    cropped: Vec<T>,
    mask: Vec<bool>,
}

impl<T> Tape<T> {
    pub fn mask(&self) -> &[bool] {
        &self.mask
    }
}

/// Standalone spectral convolution on a real multi-channel grid (used by the
/// layer forward and directly testable). `input` is (g²)×channels with the
/// channel-fastest layout; `p_re`/`p_im` hold modes² row-major out×in blocks.
pub fn spectral_conv<T: Real>(
    input: &[T],
    g: usize,
    channels: usize,
    config: &FNOConfig,
    p_re: &[T],
    p_im: &[T],
) -> Result<Vec<T>> {
    if g < 2 * config.modes {
        return Err(Error::invalid(format!(
            "spectral_conv: grid {g} below the 2×modes = {} floor",
            2 * config.modes
        )));
    }
    let fft = Fft2::<T>::new(g, g);
    let (out, _) = spectral_forward(input, g, channels, config, p_re, p_im, &fft);
    Ok(out)
}

/// Shared forward core: returns the real output map and the gathered
/// coefficients v (modes² × channels) needed for the weight gradient.
fn spectral_forward<T: Real>(
    input: &[T],
    g: usize,
    channels: usize,
    config: &FNOConfig,
    p_re: &[T],
    p_im: &[T],
    fft: &Fft2<T>,
) -> (Vec<T>, Vec<C<T>>) {
    let pixels = g * g;
    let slots = mode_slots(config, g);
    let d = channels;
    let inv_area = T::one() / T::of_f64((pixels) as f64);

    // Per-channel forward transforms.
    let mut spectra: Vec<Vec<C<T>>> = Vec::with_capacity(d);
    let mut plane = vec![Complex::new(T::zero(), T::zero()); pixels];
    for c in 0..d {
        for p in 0..pixels {
            plane[p] = Complex::new(input[p * d + c], T::zero());
        }
        fft.forward(&mut plane);
        spectra.push(plane.clone());
    }

    // Gather v, multiply by P, scatter Hermitianly.
    let mut coeffs = vec![Complex::new(T::zero(), T::zero()); slots.len() * d];
    let mut scattered: Vec<Vec<C<T>>> =
        vec![vec![Complex::new(T::zero(), T::zero()); pixels]; d];
    let block = d * d;
    for (m, &(slot, mir, w)) in slots.iter().enumerate() {
        let v = &mut coeffs[m * d..(m + 1) * d];
        for c in 0..d {
            v[c] = spectra[c][slot] * inv_area;
        }
        let wt = T::of_f64(w);
        for o in 0..d {
            let mut acc = Complex::new(T::zero(), T::zero());
            for i in 0..d {
                let p = Complex::new(p_re[m * block + o * d + i], p_im[m * block + o * d + i]);
                acc += p * v[i];
            }
            scattered[o][slot] += acc * wt;
            scattered[o][mir] += acc.conj() * wt;
        }
    }

    // Inverse transform per output channel; spectrum is Hermitian so the
    // imaginary residue is round-off and dropped.
    let mut out = vec![T::zero(); pixels * d];
    for (o, spec) in scattered.iter_mut().enumerate() {
        fft.inverse(spec);
        for p in 0..pixels {
            out[p * d + o] = spec[p].re;
        }
    }
    (out, coeffs)
}

/// Adjoint of [`spectral_forward`] with respect to input and weights.
/// `d_out` is the gradient at the layer's spectral output; returns the input
/// gradient and accumulates weight gradients into `g_re`/`g_im`.
#[allow(clippy::too_many_arguments)]
fn spectral_backward<T: Real>(
    d_out: &[T],
    coeffs: &[C<T>],
    g: usize,
    channels: usize,
    config: &FNOConfig,
    p_re: &[T],
    p_im: &[T],
    g_re: &mut [T],
    g_im: &mut [T],
    fft: &Fft2<T>,
) -> Vec<T> {
    let pixels = g * g;
    let slots = mode_slots(config, g);
    let d = channels;
    let inv_area = T::one() / T::of_f64(pixels as f64);
    let block = d * d;

    // Spectrum of the upstream gradient, per output channel.
    let mut grad_spectra: Vec<Vec<C<T>>> = Vec::with_capacity(d);
    let mut plane = vec![Complex::new(T::zero(), T::zero()); pixels];
    for c in 0..d {
        for p in 0..pixels {
            plane[p] = Complex::new(d_out[p * d + c], T::zero());
        }
        fft.forward(&mut plane);
        grad_spectra.push(plane.clone());
    }

    // Per-mode: z = w·(Ĝ[k] + conj(Ĝ[mirror])); grad P += z ⊗ conj(v);
    // input-coefficient gradient g_v = Pᴴ z lands in a Hermitian-free
    // spectral accumulator divided by g² (adjoint of the gather).
    let mut d_spec: Vec<Vec<C<T>>> = vec![vec![Complex::new(T::zero(), T::zero()); pixels]; d];
    for (m, &(slot, mir, w)) in slots.iter().enumerate() {
        let wt = T::of_f64(w);
        let v = &coeffs[m * d..(m + 1) * d];
        for o in 0..d {
            let z = (grad_spectra[o][slot] + grad_spectra[o][mir].conj()) * wt;
            for i in 0..d {
                let gp = z * v[i].conj();
                g_re[m * block + o * d + i] += gp.re;
                g_im[m * block + o * d + i] += gp.im;
                let p = Complex::new(p_re[m * block + o * d + i], p_im[m * block + o * d + i]);
                d_spec[i][slot] += p.conj() * z * inv_area;
            }
        }
    }

    // Adjoint of the per-channel forward FFT of a real input is the real
    // part of the unnormalized inverse transform.
    let mut d_input = vec![T::zero(); pixels * d];
    for (c, spec) in d_spec.iter_mut().enumerate() {
        fft.inverse(spec);
        for p in 0..pixels {
            d_input[p * d + c] = spec[p].re;
        }
    }
    d_input
}

/// Build the (padded) input channels for a standardized kernel grid given
/// row-major as n² values.
fn build_channels<T: Real>(kappa_std: &[T], n: usize, config: &FNOConfig) -> (Vec<T>, usize) {
    let pad = config.padding(n);
    let g = n + pad;
    let c_in = config.in_channels();
    let mut channels = vec![T::zero(); g * g * c_in];
    let tau = T::of_f64(std::f64::consts::TAU);
    for x in 0..n {
        let theta = tau * T::of_f64(x as f64 / n as f64);
        for y in 0..n {
            let base = (x * g + y) * c_in;
            channels[base] = kappa_std[x * n + y];
            if config.grid_concat {
                let theta_p = tau * T::of_f64(y as f64 / n as f64);
                channels[base + 1] = theta.cos();
                channels[base + 2] = theta_p.sin();
            }
        }
    }
    (channels, g)
}

/// Pointwise affine map out = W·h + b over pixels ((W rows) × (h channels)).
fn pointwise_affine<T: Real>(
    input: &[T],
    pixels: usize,
    c_in: usize,
    c_out: usize,
    w: &[T],
    b: &[T],
) -> Vec<T> {
    let mut out = vec![T::zero(); pixels * c_out];
    for p in 0..pixels {
        let h = &input[p * c_in..(p + 1) * c_in];
        let o = &mut out[p * c_out..(p + 1) * c_out];
        for (r, ov) in o.iter_mut().enumerate() {
            let row = &w[r * c_in..(r + 1) * c_in];
            let mut acc = b[r];
            for (i, &hv) in h.iter().enumerate() {
                acc += row[i] * hv;
            }
            *ov = acc;
        }
    }
    out
}

/// Full forward pass. Returns the masked n² prediction and the tape of
/// intermediates needed by [`backward`].
pub fn fno_forward_tape<T: Real>(
    params: &FNOParams<T>,
    config: &FNOConfig,
    kappa_std: &[T],
    n: usize,
) -> Result<(Vec<T>, Tape<T>)> {
    config.validate_for_grid(n)?;
    if kappa_std.len() != n * n {
        return Err(Error::invalid(format!(
            "fno_forward: input has {} values, expected {n}²",
            kappa_std.len()
        )));
    }
    let d = config.width;
    let (channels, g) = build_channels(kappa_std, n, config);
    let pixels = g * g;
    let fft = Fft2::<T>::new(g, g);

    // Lift.
    let mut h = pointwise_affine(
        &channels,
        pixels,
        config.in_channels(),
        d,
        &params.lift_w,
        &params.lift_b,
    );

    let mut layer_inputs = Vec::with_capacity(config.layers);
    let mut layer_pre = Vec::with_capacity(config.layers);
    let mut layer_coeffs = Vec::with_capacity(config.layers);
    for (l, layer) in params.layers.iter().enumerate() {
        let (spectral, coeffs) =
            spectral_forward(&h, g, d, config, &layer.p_re, &layer.p_im, &fft);
        let mut z = pointwise_affine(&h, pixels, d, d, &layer.w, &layer.b);
        for (zv, sv) in z.iter_mut().zip(&spectral) {
            *zv += *sv;
        }
        layer_inputs.push(std::mem::replace(&mut h, Vec::new()));
        let last = l + 1 == config.layers;
        h = if last {
            z.clone()
        } else {
            z.iter().map(|&v| if v > T::zero() { v } else { T::zero() }).collect()
        };
        layer_pre.push(z);
        layer_coeffs.push(coeffs);
    }

    // Crop back to the physical n×n region.
    let mut cropped = vec![T::zero(); n * n * d];
    for x in 0..n {
        for y in 0..n {
            let src = (x * g + y) * d;
            let dst = (x * n + y) * d;
            cropped[dst..dst + d].copy_from_slice(&h[src..src + d]);
        }
    }

    // Projection MLP with ReLU hidden activation.
    let mlp_pre = pointwise_affine(
        &cropped,
        n * n,
        d,
        config.mlp_width,
        &params.mlp_w1,
        &params.mlp_b1,
    );
    let hidden: Vec<T> = mlp_pre
        .iter()
        .map(|&v| if v > T::zero() { v } else { T::zero() })
        .collect();
    let projected = pointwise_affine(
        &hidden,
        n * n,
        config.mlp_width,
        1,
        &params.mlp_w2,
        &params.mlp_b2,
    );

    let mask = disk_mask(n);
    let mut output = projected;
    if config.mask_output {
        for (v, &m) in output.iter_mut().zip(&mask) {
            if !m {
                *v = T::zero();
            }
        }
    }

    let tape = Tape {
        n,
        g,
        channels,
        layer_inputs,
        layer_pre,
        layer_coeffs,
        mlp_pre,
        cropped,
        mask,
    };
    Ok((output, tape))
}

/// Forward pass without the tape.
pub fn fno_forward<T: Real>(
    params: &FNOParams<T>,
    config: &FNOConfig,
    kappa_std: &[T],
    n: usize,
) -> Result<Vec<T>> {
    fno_forward_tape(params, config, kappa_std, n).map(|(out, _)| out)
}

/// Reverse-mode pass for one sample: `d_output` is ∂loss/∂prediction on the
/// n² grid. Gradients accumulate into `grads` (so batches can share one
/// accumulator). The input gradient is not needed and not formed.
pub fn backward<T: Real>(
    params: &FNOParams<T>,
    config: &FNOConfig,
    tape: &Tape<T>,
    d_output: &[T],
    grads: &mut FNOParams<T>,
) {
    let n = tape.n;
    let g = tape.g;
    let d = config.width;
    let pixels = g * g;
    let fft = Fft2::<T>::new(g, g);

    // Mask (zero outside the disk when enabled).
    let mut d_proj = d_output.to_vec();
    if config.mask_output {
        for (v, &m) in d_proj.iter_mut().zip(&tape.mask) {
            if !m {
                *v = T::zero();
            }
        }
    }

    // MLP backward.
    let mw = config.mlp_width;
    let mut d_hidden = vec![T::zero(); n * n * mw];
    for p in 0..n * n {
        let dv = d_proj[p];
        if dv == T::zero() {
            continue;
        }
        grads.mlp_b2[0] += dv;
        for r in 0..mw {
            let hv = tape.mlp_pre[p * mw + r];
            let hval = if hv > T::zero() { hv } else { T::zero() };
            grads.mlp_w2[r] += dv * hval;
            if hv > T::zero() {
                d_hidden[p * mw + r] = dv * params.mlp_w2[r];
            }
        }
    }
    let mut d_cropped = vec![T::zero(); n * n * d];
    for p in 0..n * n {
        let dh = &d_hidden[p * mw..(p + 1) * mw];
        let hin = &tape.cropped[p * d..(p + 1) * d];
        for r in 0..mw {
            let dz = dh[r];
            if dz == T::zero() {
                continue;
            }
            grads.mlp_b1[r] += dz;
            let row = &params.mlp_w1[r * d..(r + 1) * d];
            let grow = &mut grads.mlp_w1[r * d..(r + 1) * d];
            let dc = &mut d_cropped[p * d..(p + 1) * d];
            for i in 0..d {
                grow[i] += dz * hin[i];
                dc[i] += dz * row[i];
            }
        }
    }

    // Un-crop to the padded grid.
    let mut d_h = vec![T::zero(); pixels * d];
    for x in 0..n {
        for y in 0..n {
            let src = (x * n + y) * d;
            let dst = (x * g + y) * d;
            d_h[dst..dst + d].copy_from_slice(&d_cropped[src..src + d]);
        }
    }

    // Hidden layers in reverse.
    for l in (0..config.layers).rev() {
        let layer = &params.layers[l];
        let glayer = &mut grads.layers[l];
        let last = l + 1 == config.layers;
        let pre = &tape.layer_pre[l];
        let hin = &tape.layer_inputs[l];

        // Activation derivative (identity for the last layer, ReLU before).
        let mut d_z = d_h;
        if !last {
            for (dzv, &zv) in d_z.iter_mut().zip(pre.iter()) {
                if zv <= T::zero() {
                    *dzv = T::zero();
                }
            }
        }

        // Bias and pointwise-matrix gradients; start the input gradient
        // with the Wᵀ path.
        let mut d_in = vec![T::zero(); pixels * d];
        for p in 0..pixels {
            let dz = &d_z[p * d..(p + 1) * d];
            let hv = &hin[p * d..(p + 1) * d];
            let di = &mut d_in[p * d..(p + 1) * d];
            for r in 0..d {
                let dzv = dz[r];
                if dzv == T::zero() {
                    continue;
                }
                glayer.b[r] += dzv;
                let row = &layer.w[r * d..(r + 1) * d];
                let grow = &mut glayer.w[r * d..(r + 1) * d];
                for i in 0..d {
                    grow[i] += dzv * hv[i];
                    di[i] += dzv * row[i];
                }
            }
        }

        // Spectral path adds its own input gradient.
        let d_spec_in = spectral_backward(
            &d_z,
            &tape.layer_coeffs[l],
            g,
            d,
            config,
            &layer.p_re,
            &layer.p_im,
            &mut glayer.p_re,
            &mut glayer.p_im,
            &fft,
        );
        for (a, b) in d_in.iter_mut().zip(&d_spec_in) {
            *a += *b;
        }
        d_h = d_in;
    }

    // Lift backward (input gradient discarded).
    let c_in = config.in_channels();
    for p in 0..pixels {
        let dz = &d_h[p * d..(p + 1) * d];
        let ch = &tape.channels[p * c_in..(p + 1) * c_in];
        for r in 0..d {
            let dzv = dz[r];
            if dzv == T::zero() {
                continue;
            }
            grads.lift_b[r] += dzv;
            let grow = &mut grads.lift_w[r * c_in..(r + 1) * c_in];
            for i in 0..c_in {
                grow[i] += dzv * ch[i];
            }
        }
    }
}

/// Masked relative-L¹ loss of one sample and its gradient seed:
/// ℓ = Σ_mask |p − t|·cell / (Σ_mask |t|·cell + ε), with ∂ℓ/∂p =
/// sign(p − t)·cell/den (sign(0) = 0). Values off the mask are ignored.
pub const LOSS_EPSILON: f64 = 1e-8;

pub fn relative_l1_loss<T: Real>(
    pred: &[T],
    target: &[T],
    mask: &[bool],
    n: usize,
) -> (f64, Vec<T>) {
    let cell = DiskGrid::new(n).cell_area();
    let mut num = 0.0;
    let mut den = LOSS_EPSILON;
    for idx in 0..n * n {
        if mask[idx] {
            num += (pred[idx].as_f64() - target[idx].as_f64()).abs() * cell;
            den += target[idx].as_f64().abs() * cell;
        }
    }
    let mut grad = vec![T::zero(); n * n];
    for idx in 0..n * n {
        if mask[idx] {
            let diff = pred[idx].as_f64() - target[idx].as_f64();
            let s = if diff > 0.0 {
                1.0
            } else if diff < 0.0 {
                -1.0
            } else {
                0.0
            };
            grad[idx] = T::of_f64(s * cell / den);
        }
    }
    (num / den, grad)
}
