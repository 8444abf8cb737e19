//! Structured random perturbations of NtD kernels on 𝕋².
//!
//! The noise field is a truncated random series ξ = Σ √c_{ij} ζ_{ij} e_{ij}
//! over the torus modes (i,j) ∈ {−n/2+1..n/2}² \ {(0,0)}, with coefficients
//! c_{ij} = τ^{2α−2}(4π²(i²+j²) + τ²)^{−α}. Each real orthonormal basis
//! function (cosine/sine pair per conjugate mode pair) gets one i.i.d. draw —
//! standard normal for the gaussian law, Unif[−√3,√3] for the bounded law —
//! so E‖ξ‖²_{L²(𝕋²)} equals the coefficient sum exactly and the bounded law
//! obeys ‖ξ‖ ≤ √(3·Σc) almost surely. Synthesis goes through one inverse FFT
//! of the Hermitian spectral array; draws happen in documented row-major
//! order so a field is a pure function of (spec, seed).

use crate::boundary::KernelGrid;
use crate::error::{Error, Result};
use crate::fft::Fft2;
use crate::seeds;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use std::f64::consts::{PI, TAU};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseLaw {
    Gaussian,
    UniformBounded,
}

impl NoiseLaw {
    pub fn name(&self) -> &'static str {
        match self {
            NoiseLaw::Gaussian => "gaussian",
            NoiseLaw::UniformBounded => "uniform_bounded",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "gaussian" => Ok(NoiseLaw::Gaussian),
            "uniform_bounded" => Ok(NoiseLaw::UniformBounded),
            other => Err(Error::invalid(format!(
                "unknown noise law {other:?} (expected gaussian or uniform_bounded)"
            ))),
        }
    }

    fn draw(&self, rng: &mut impl Rng) -> f64 {
        match self {
            NoiseLaw::Gaussian => rng.sample(StandardNormal),
            NoiseLaw::UniformBounded => {
                let width = 2.0 * 3.0f64.sqrt();
                rng.gen::<f64>() * width - width / 2.0
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct NoiseSpec {
    /// Relative noise level δ ≥ 0 in κ^δ = κ + δ‖κ‖ξ.
    pub delta: f64,
    pub law: NoiseLaw,
    /// Spectral decay exponent, α > 1.
    pub alpha: f64,
    /// Inverse length scale.
    pub tau: f64,
    /// Torus grid size (even, ≥ 4).
    pub n: usize,
}

impl NoiseSpec {
    /// The default decay (α = 1.5, τ = 10) at a given level and law.
    pub fn new(delta: f64, law: NoiseLaw, n: usize) -> Result<Self> {
        Self::with_decay(delta, law, 1.5, 10.0, n)
    }

    pub fn with_decay(delta: f64, law: NoiseLaw, alpha: f64, tau: f64, n: usize) -> Result<Self> {
        if !(delta >= 0.0) {
            return Err(Error::invalid(format!("delta must be ≥ 0, got {delta}")));
        }
        if !(alpha > 1.0) || !(tau > 0.0) {
            return Err(Error::invalid(format!(
                "noise decay needs alpha > 1 and tau > 0, got alpha={alpha}, tau={tau}"
            )));
        }
        if n < 4 || n % 2 != 0 {
            return Err(Error::invalid(format!("noise grid must be even and ≥ 4, got {n}")));
        }
        Ok(NoiseSpec { delta, law, alpha, tau, n })
    }

    /// Same spec on a different grid (kernels fix n at perturbation time).
    pub fn at_grid(&self, n: usize) -> Result<Self> {
        Self::with_decay(self.delta, self.law, self.alpha, self.tau, n)
    }
}

/// Spectral coefficient c_{ij} = τ^{2α−2}(4π²(i²+j²) + τ²)^{−α}; the constant
/// mode (0,0) is excluded and returns 0.
pub fn noise_coeff(i: i64, j: i64, spec: &NoiseSpec) -> f64 {
    if i == 0 && j == 0 {
        return 0.0;
    }
    let freq = 4.0 * PI * PI * (i * i + j * j) as f64;
    spec.tau.powf(2.0 * spec.alpha - 2.0) * (freq + spec.tau * spec.tau).powf(-spec.alpha)
}

/// Sum of retained coefficients = E‖ξ‖²_{L²(𝕋²)} of a draw.
pub fn coefficient_sum(spec: &NoiseSpec) -> f64 {
    let half = spec.n as i64 / 2;
    let mut acc = 0.0;
    for i in (-half + 1)..=half {
        for j in (-half + 1)..=half {
            acc += noise_coeff(i, j, spec);
        }
    }
    acc
}

#[inline]
fn negate_mode(m: i64, half: i64) -> i64 {
    if m == half {
        half
    } else {
        -m
    }
}

/// Draw one noise field on the n×n torus grid. Deterministic in (spec, seed).
pub fn sample_noise_field(spec: &NoiseSpec, seed: u64) -> KernelGrid {
    let n = spec.n;
    let half = n as i64 / 2;
    let mut rng = seeds::stream(seed);
    let slot = |m: i64| m.rem_euclid(n as i64) as usize;

    // Hermitian spectral array: one real draw per real basis function. Modes
    // are visited row-major (i outer, j inner, each ascending); a conjugate
    // pair is drawn once at its lexicographically smaller member.
    let mut spectrum = vec![Complex64::new(0.0, 0.0); n * n];
    let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
    for i in (-half + 1)..=half {
        for j in (-half + 1)..=half {
            if i == 0 && j == 0 {
                continue;
            }
            let mirror = (negate_mode(i, half), negate_mode(j, half));
            let amp = noise_coeff(i, j, spec).sqrt();
            if mirror == (i, j) {
                // Self-conjugate (Nyquist-type) mode: real coefficient.
                let eta = spec.law.draw(&mut rng);
                spectrum[slot(i) * n + slot(j)] = Complex64::new(amp * eta, 0.0);
            } else if (i, j) < mirror {
                let eta_cos = spec.law.draw(&mut rng);
                let eta_sin = spec.law.draw(&mut rng);
                let coef = Complex64::new(eta_cos, -eta_sin) * (amp * inv_sqrt2);
                spectrum[slot(i) * n + slot(j)] = coef;
                spectrum[slot(mirror.0) * n + slot(mirror.1)] = coef.conj();
            }
        }
    }

    Fft2::new(n, n).inverse(&mut spectrum);
    let values = spectrum.iter().map(|z| z.re / TAU).collect();
    KernelGrid::new(n, values)
}

/// Relative perturbation κ^δ = κ + δ·‖κ‖_{L²(𝕋²)}·ξ; δ = 0 returns the input
/// unchanged (bitwise).
pub fn perturb_kernel(kappa: &KernelGrid, spec: &NoiseSpec, seed: u64) -> KernelGrid {
    if spec.delta == 0.0 {
        return kappa.clone();
    }
    debug_assert_eq!(spec.n, kappa.n, "noise grid must match the kernel grid");
    let xi = sample_noise_field(spec, seed);
    let scale = spec.delta * kappa.l2_norm();
    let values = kappa
        .values
        .iter()
        .zip(&xi.values)
        .map(|(&k, &x)| k + scale * x)
        .collect();
    KernelGrid::new(kappa.n, values)
}
