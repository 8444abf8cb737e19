//! Overlapping angular charts on the circle, a smooth partition of unity
//! subordinate to them, and the pullback/push-back pair that moves boundary
//! kernels between the torus and per-patch unit-square grids.
//!
//! Each chart is an open arc with an affine coordinate map onto a window
//! W = (0.1, 0.9) strictly inside (0, 1). The global-to-local operator G
//! pulls a kernel back onto every chart pair (zero-extended outside W×W);
//! the local-to-global operator L pushes a patch stack forward through the
//! partition of unity. L is a left inverse of G up to interpolation error.

use std::f64::consts::{PI, TAU};

use crate::boundary::KernelGrid;
use crate::error::{Error, Result};
use crate::interp::{clamped_bicubic, periodic_bicubic};

/// Chart images live in (WINDOW_LO, WINDOW_HI) ⊂ (0, 1).
pub const WINDOW_LO: f64 = 0.1;
pub const WINDOW_HI: f64 = 0.9;

/// Wrap an angle difference into (−π, π].
fn wrap_angle(t: f64) -> f64 {
    let w = t.rem_euclid(TAU);
    if w > PI {
        w - TAU
    } else {
        w
    }
}

/// Smooth compactly supported profile e^{−1/(1−s²)} on (−1, 1).
fn bump_profile(s: f64) -> f64 {
    if s.abs() < 1.0 {
        (-1.0 / (1.0 - s * s)).exp()
    } else {
        0.0
    }
}

/// Open arc (center − half_width, center + half_width) with an affine map
/// onto the window W.
#[derive(Debug, Clone, Copy)]
pub struct Chart {
    pub center: f64,
    pub half_width: f64,
}

impl Chart {
    pub fn contains(&self, theta: f64) -> bool {
        wrap_angle(theta - self.center).abs() < self.half_width
    }

    /// Affine chart coordinate; lands in W exactly when θ ∈ U.
    pub fn to_local(&self, theta: f64) -> f64 {
        let w = wrap_angle(theta - self.center);
        WINDOW_LO + (WINDOW_HI - WINDOW_LO) * (w / (2.0 * self.half_width) + 0.5)
    }

    /// Inverse of `to_local`, returning the representative inside the arc.
    pub fn from_local(&self, x: f64) -> f64 {
        let w = ((x - WINDOW_LO) / (WINDOW_HI - WINDOW_LO) - 0.5) * 2.0 * self.half_width;
        self.center + w
    }

    /// |dx/dθ| of the coordinate map (the map is affine, so exact).
    pub fn lipschitz_forward(&self) -> f64 {
        (WINDOW_HI - WINDOW_LO) / (2.0 * self.half_width)
    }

    /// |dθ/dx| of the inverse map.
    pub fn lipschitz_inverse(&self) -> f64 {
        2.0 * self.half_width / (WINDOW_HI - WINDOW_LO)
    }
}

/// Normalized smooth bumps ψ_j supported strictly inside the arcs.
#[derive(Debug, Clone)]
pub struct PartitionOfUnity {
    centers: Vec<f64>,
    /// Half-width of supp ψ_j; strictly between the center spacing half π/J
    /// (so the supports still cover) and the arc half-width (so supp ⊂ U_j).
    support_half: Vec<f64>,
}

impl PartitionOfUnity {
    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    fn raw(&self, j: usize, theta: f64) -> f64 {
        bump_profile(wrap_angle(theta - self.centers[j]) / self.support_half[j])
    }

    /// ψ_j(θ): the j-th bump divided by the pointwise sum over all bumps.
    pub fn psi(&self, j: usize, theta: f64) -> f64 {
        let total: f64 = (0..self.len()).map(|k| self.raw(k, theta)).sum();
        self.raw(j, theta) / total
    }
}

/// Charts plus their subordinate partition of unity.
#[derive(Debug, Clone)]
pub struct Atlas {
    pub charts: Vec<Chart>,
    pub partition: PartitionOfUnity,
}

impl Atlas {
    pub fn chart_count(&self) -> usize {
        self.charts.len()
    }

    /// L² operator-norm bound for the pullback, from the inverse Lipschitz
    /// constants: ‖G h‖ ≤ J·max_j √(|dθ/dx|⁻¹)… reduced to the uniform-width
    /// case J·(W/(2·half_width)) per axis pair.
    pub fn global_to_local_bound(&self) -> f64 {
        let per_axis = self
            .charts
            .iter()
            .map(|c| c.lipschitz_forward().sqrt())
            .fold(0.0f64, f64::max);
        self.chart_count() as f64 * per_axis * per_axis
    }

    /// L² operator-norm bound for the push-back: each of the J² terms is a
    /// change of variables with Jacobian |dθ/dx| per axis and |ψ| ≤ 1.
    pub fn local_to_global_bound(&self) -> f64 {
        let per_axis = self
            .charts
            .iter()
            .map(|c| c.lipschitz_inverse().sqrt())
            .fold(0.0f64, f64::max);
        self.chart_count() as f64 * per_axis * per_axis
    }
}

/// Build `j_count` equally spaced arcs of half-width 4π/(3·j_count) + overlap
/// with smooth normalized bumps. The default pair (j_count = 2, overlap = 0.2)
/// gives U₁ = (−2π/3 − 0.2, 2π/3 + 0.2) and its antipodal twin.
pub fn build_atlas(j_count: usize, overlap: f64) -> Result<Atlas> {
    if j_count < 2 {
        return Err(Error::invalid("atlas needs at least two charts"));
    }
    if !(overlap > 0.0) {
        return Err(Error::invalid("atlas needs a positive angular overlap"));
    }
    let half_width = 4.0 * PI / (3.0 * j_count as f64) + overlap;
    if half_width >= PI {
        return Err(Error::invalid(format!(
            "arc half-width {half_width:.3} reaches π: arcs must stay proper sub-intervals"
        )));
    }
    let spacing_half = PI / j_count as f64;
    // Shrink the bump support halfway between "still covering" (> π/J) and
    // "inside the arc" (< half_width).
    let support_half = 0.5 * (half_width + spacing_half);
    let centers: Vec<f64> = (0..j_count).map(|j| TAU * j as f64 / j_count as f64).collect();
    let charts = centers.iter().map(|&c| Chart { center: c, half_width }).collect();
    let partition = PartitionOfUnity {
        centers,
        support_half: vec![support_half; j_count],
    };
    Ok(Atlas { charts, partition })
}

/// J² per-patch grids on the closed unit square, sampled on the (m × m)
/// endpoint lattice x_a = a/(m−1). Component (j,k) vanishes outside W×W.
#[derive(Debug, Clone)]
pub struct PatchStack {
    pub j_count: usize,
    pub m: usize,
    /// Row-major m×m grids, component (j,k) at index j·j_count + k.
    pub components: Vec<Vec<f64>>,
}

impl PatchStack {
    pub fn zeros(j_count: usize, m: usize) -> Self {
        PatchStack {
            j_count,
            m,
            components: vec![vec![0.0; m * m]; j_count * j_count],
        }
    }

    pub fn component(&self, j: usize, k: usize) -> &[f64] {
        &self.components[j * self.j_count + k]
    }

    pub fn component_mut(&mut self, j: usize, k: usize) -> &mut Vec<f64> {
        &mut self.components[j * self.j_count + k]
    }

    /// l² norm over all components under the per-node weight (1/(m−1))².
    pub fn l2_norm(&self) -> f64 {
        let w = 1.0 / (self.m - 1) as f64;
        self.components
            .iter()
            .flat_map(|c| c.iter())
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
            * w
    }
}

/// Pull a torus kernel back onto every chart pair: component (j,k) holds
/// h(φ_j⁻¹(x), φ_k⁻¹(y)) inside W×W and 0 outside. Off-grid angles are read
/// by periodic bicubic interpolation.
pub fn global_to_local(h: &KernelGrid, atlas: &Atlas, m: usize) -> Result<PatchStack> {
    if m < 4 {
        return Err(Error::invalid("patch grids need at least 4 nodes per axis"));
    }
    let n = h.n;
    let j_count = atlas.chart_count();
    let mut stack = PatchStack::zeros(j_count, m);
    let step = 1.0 / (m - 1) as f64;
    let inside: Vec<bool> = (0..m)
        .map(|a| {
            let x = a as f64 * step;
            x > WINDOW_LO && x < WINDOW_HI
        })
        .collect();
    for j in 0..j_count {
        // Pullback angles per axis node, in continuous grid units of h.
        let theta_u: Vec<f64> = (0..m)
            .map(|a| atlas.charts[j].from_local(a as f64 * step) / TAU * n as f64)
            .collect();
        for k in 0..j_count {
            let theta_v: Vec<f64> = (0..m)
                .map(|b| atlas.charts[k].from_local(b as f64 * step) / TAU * n as f64)
                .collect();
            let comp = stack.component_mut(j, k);
            for a in 0..m {
                if !inside[a] {
                    continue;
                }
                for b in 0..m {
                    if inside[b] {
                        comp[a * m + b] =
                            periodic_bicubic(&h.values, n, n, theta_u[a], theta_v[b]);
                    }
                }
            }
        }
    }
    Ok(stack)
}

/// Push a patch stack back to the torus: Σ_{jk} ψ_j(θ)ψ_k(θ′)·f_{jk} read at
/// the chart coordinates by clamped bicubic interpolation. Terms outside the
/// bump supports contribute zero and are skipped.
pub fn local_to_global(stack: &PatchStack, atlas: &Atlas, n: usize) -> Result<KernelGrid> {
    if stack.j_count != atlas.chart_count() {
        return Err(Error::invalid(format!(
            "stack has {} charts, atlas has {}",
            stack.j_count,
            atlas.chart_count()
        )));
    }
    if n == 0 {
        return Err(Error::invalid("output grid must be nonempty"));
    }
    let j_count = stack.j_count;
    let m = stack.m;
    // Per-axis tables: partition weights and local coordinates in grid units.
    let mut psi = vec![vec![0.0; n]; j_count];
    let mut local = vec![vec![0.0; n]; j_count];
    for j in 0..j_count {
        for i in 0..n {
            let theta = TAU * i as f64 / n as f64;
            psi[j][i] = atlas.partition.psi(j, theta);
            local[j][i] = atlas.charts[j].to_local(theta) * (m - 1) as f64;
        }
    }
    let mut out = KernelGrid::zeros(n);
    for i in 0..n {
        for ip in 0..n {
            let mut acc = 0.0;
            for j in 0..j_count {
                if psi[j][i] == 0.0 {
                    continue;
                }
                for k in 0..j_count {
                    if psi[k][ip] == 0.0 {
                        continue;
                    }
                    acc += psi[j][i]
                        * psi[k][ip]
                        * clamped_bicubic(stack.component(j, k), m, m, local[j][i], local[k][ip]);
                }
            }
            out.values[i * n + ip] = acc;
        }
    }
    Ok(out)
}
