//! Mean-zero Gaussian random fields on (−1,1)² with the Matérn-like
//! covariance (τ/2)^{2α−2}·(−Δ + (τ/2)²)^{−α}, diagonal in the Neumann
//! cosine eigenbasis.
//!
//! The orthonormal basis is e_{kl}(x,y) = a_k a_l cos(kπ(x+1)/2)cos(lπ(y+1)/2)
//! with a_0 = 1/√2 and a_k = 1 for k ≥ 1, which has unit L² norm on the
//! length-2 square. A draw is u = Σ √c_{kl} ζ_{kl} e_{kl} with ζ i.i.d.
//! standard normal, truncated below the grid Nyquist wavenumber.
//!
//! One `ChaCha` stream per field feeds the ζ draws in row-major (k outer,
//! l inner) order over the full cutoff×cutoff rectangle including (0,0)
//! (whose coefficient is zero); the order is part of the format, so a draw
//! is a pure function of `(spec, seed)` no matter how samples are scheduled.

use crate::error::{Error, Result};
use crate::grid::{DiskGrid, SquareField};
use crate::seeds;
use rand::Rng;
use rand_distr::StandardNormal;
use std::f64::consts::FRAC_1_SQRT_2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrfSpec {
    /// Inverse length scale τ > 0.
    pub tau: f64,
    /// Smoothness exponent α > 1 (trace class).
    pub alpha: f64,
    /// Output grid size per dimension.
    pub n: usize,
    /// Retained wavenumbers per dimension: k, l < mode_cutoff ≤ N.
    pub mode_cutoff: usize,
}

impl GrfSpec {
    pub fn new(tau: f64, alpha: f64, n: usize, mode_cutoff: usize) -> Result<Self> {
        if !(tau > 0.0) {
            return Err(Error::invalid(format!("tau must be positive, got {tau}")));
        }
        if !(alpha > 1.0) {
            return Err(Error::invalid(format!("alpha must exceed 1, got {alpha}")));
        }
        if n == 0 || mode_cutoff == 0 || mode_cutoff > n {
            return Err(Error::invalid(format!(
                "need 0 < mode_cutoff ≤ N, got cutoff {mode_cutoff}, N {n}"
            )));
        }
        Ok(GrfSpec { tau, alpha, n, mode_cutoff })
    }

    /// Spec with all modes up to the grid Nyquist retained.
    pub fn full(tau: f64, alpha: f64, n: usize) -> Result<Self> {
        Self::new(tau, alpha, n, n)
    }
}

/// Covariance eigenvalue c_{kl} = (τ/2)^{2α−2}·((kπ/2)² + (lπ/2)² + (τ/2)²)^{−α};
/// the constant mode (0,0) is excluded and returns 0.
pub fn covariance_coeff(k: usize, l: usize, spec: &GrfSpec) -> f64 {
    if k == 0 && l == 0 {
        return 0.0;
    }
    let half_tau = spec.tau / 2.0;
    let freq = |m: usize| (m as f64 * std::f64::consts::FRAC_PI_2).powi(2);
    half_tau.powf(2.0 * spec.alpha - 2.0)
        * (freq(k) + freq(l) + half_tau * half_tau).powf(-spec.alpha)
}

/// Sum of retained covariance eigenvalues = E‖u‖²_{L²} of a draw.
pub fn covariance_trace(spec: &GrfSpec) -> f64 {
    let mut acc = 0.0;
    for k in 0..spec.mode_cutoff {
        for l in 0..spec.mode_cutoff {
            acc += covariance_coeff(k, l, spec);
        }
    }
    acc
}

#[inline]
fn basis_scale(k: usize) -> f64 {
    if k == 0 {
        FRAC_1_SQRT_2
    } else {
        1.0
    }
}

/// The orthonormal basis function e_{kl} at a point of (−1,1)².
pub fn basis_fn(k: usize, l: usize, x: f64, y: f64) -> f64 {
    let cx = (k as f64 * std::f64::consts::FRAC_PI_2 * (x + 1.0)).cos();
    let cy = (l as f64 * std::f64::consts::FRAC_PI_2 * (y + 1.0)).cos();
    basis_scale(k) * basis_scale(l) * cx * cy
}

/// Draw one field. Deterministic in `(spec, seed)`; the seed is used as-is
/// (callers derive per-sample seeds with [`crate::seeds::derive`]).
pub fn sample_grf(spec: &GrfSpec, seed: u64) -> SquareField {
    let mut rng = seeds::stream(seed);
    let m = spec.mode_cutoff;
    let n = spec.n;

    // Scaled spectral coefficients A[k][l] = √c_{kl}·ζ_{kl}·a_k·a_l.
    let mut coef = vec![0.0f64; m * m];
    for k in 0..m {
        for l in 0..m {
            let z: f64 = rng.sample(StandardNormal);
            coef[k * m + l] =
                covariance_coeff(k, l, spec).sqrt() * z * basis_scale(k) * basis_scale(l);
        }
    }

    // Separable synthesis: u = Cᵀ·A·C with C[k][i] = cos(kπ(x_i+1)/2).
    let grid = DiskGrid::new(n);
    let mut cos_table = vec![0.0f64; m * n];
    for k in 0..m {
        for i in 0..n {
            cos_table[k * n + i] =
                (k as f64 * std::f64::consts::FRAC_PI_2 * (grid.coord(i) + 1.0)).cos();
        }
    }

    let mut half = vec![0.0f64; m * n]; // B[k][j] = Σ_l A[k][l]·C[l][j]
    for k in 0..m {
        for l in 0..m {
            let a = coef[k * m + l];
            if a == 0.0 {
                continue;
            }
            let row = &cos_table[l * n..(l + 1) * n];
            let out = &mut half[k * n..(k + 1) * n];
            for j in 0..n {
                out[j] += a * row[j];
            }
        }
    }

    let mut values = vec![0.0f64; n * n];
    for k in 0..m {
        let c_row = &cos_table[k * n..(k + 1) * n];
        let b_row = &half[k * n..(k + 1) * n];
        for i in 0..n {
            let ci = c_row[i];
            if ci == 0.0 {
                continue;
            }
            let out = &mut values[i * n..(i + 1) * n];
            for j in 0..n {
                out[j] += ci * b_row[j];
            }
        }
    }

    SquareField::new(n, values)
}
