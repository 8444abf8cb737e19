//! Fourier analysis on the boundary circle ∂𝔻 ≅ [0,2π) and conversions
//! between spectral NtD matrices and integral-kernel grids on the torus.
//!
//! The basis is φ_j(θ) = e^{ijθ}/√(2π) over the index set
//! J_n = {−n/2+1, …, n/2} \ {0}: mean-zero by construction (no j = 0), with
//! the single unpaired index n/2 inherited from the even grid. Boundary data
//! live on the uniform grid θ_a = 2πa/n; all quadrature is the uniform rule
//! with weight 2π/n (exact for band-limited integrands).

use crate::error::{Error, Result};
use crate::fft::{dft_1d, Fft2};
use num_complex::Complex64;
use std::f64::consts::TAU;

/// Default relative tolerance above which a reality-symmetry violation in an
/// NtD matrix is considered suspicious rather than solver round-off.
pub const DEFAULT_REALITY_TOL: f64 = 1e-8;

/// The ordered index set J_n = {−n/2+1, …, n/2} \ {0} for an even grid size n.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FourierIndexSet {
    n: usize,
}

impl FourierIndexSet {
    pub fn new(n: usize) -> Result<Self> {
        if n < 2 || n % 2 != 0 {
            return Err(Error::invalid(format!("grid size must be even and ≥ 2, got {n}")));
        }
        Ok(FourierIndexSet { n })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of indices, n − 1.
    pub fn len(&self) -> usize {
        self.n - 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Largest index, n/2.
    pub fn max_index(&self) -> i64 {
        self.n as i64 / 2
    }

    pub fn contains(&self, j: i64) -> bool {
        j != 0 && j > -self.max_index() && j <= self.max_index()
    }

    /// Indices in ascending order: −n/2+1, …, −1, 1, …, n/2.
    pub fn iter(&self) -> impl Iterator<Item = i64> {
        let half = self.n as i64 / 2;
        (-half + 1..=half).filter(|&j| j != 0)
    }

    /// Storage offset of index j within the ascending order.
    #[inline]
    pub fn offset(&self, j: i64) -> usize {
        debug_assert!(self.contains(j), "index {j} not in J_{}", self.n);
        let half = self.n as i64 / 2;
        if j < 0 {
            (j + half - 1) as usize
        } else {
            (j + half - 2) as usize
        }
    }

    /// The index paired with j under negation on the sample grid; n/2 maps to
    /// itself because −n/2 aliases to n/2 on n points.
    #[inline]
    pub fn negate(&self, j: i64) -> i64 {
        if j == self.max_index() {
            j
        } else {
            -j
        }
    }

    /// Position of e^{ijθ} in an unnormalized length-n DFT (j mod n).
    #[inline]
    pub fn dft_slot(&self, j: i64) -> usize {
        j.rem_euclid(self.n as i64) as usize
    }
}

/// Spectral coefficients of a mean-zero boundary function.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryCoefficients {
    index: FourierIndexSet,
    /// One complex entry per index, in the ascending order of [`FourierIndexSet::iter`].
    entries: Vec<Complex64>,
}

impl BoundaryCoefficients {
    pub fn zeros(n: usize) -> Result<Self> {
        let index = FourierIndexSet::new(n)?;
        let len = index.len();
        Ok(BoundaryCoefficients { index, entries: vec![Complex64::ZERO; len] })
    }

    /// The single basis coefficient vector for φ_j.
    pub fn basis(n: usize, j: i64) -> Result<Self> {
        let mut c = Self::zeros(n)?;
        if !c.index.contains(j) {
            return Err(Error::invalid(format!("mode {j} not in J_{n}")));
        }
        c.set(j, Complex64::ONE);
        Ok(c)
    }

    pub fn index_set(&self) -> FourierIndexSet {
        self.index
    }

    pub fn n(&self) -> usize {
        self.index.n()
    }

    #[inline]
    pub fn get(&self, j: i64) -> Complex64 {
        self.entries[self.index.offset(j)]
    }

    #[inline]
    pub fn set(&mut self, j: i64, v: Complex64) {
        let o = self.index.offset(j);
        self.entries[o] = v;
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    /// Point evaluation h(θ) = Σ_j ĥ_j·e^{ijθ}/√(2π) at an arbitrary angle.
    pub fn evaluate(&self, theta: f64) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for j in self.index.iter() {
            acc += self.get(j) * Complex64::from_polar(1.0, j as f64 * theta);
        }
        acc / TAU.sqrt()
    }

    /// Maximum deviation from the real-function symmetry entry(−j) = conj(entry(j)).
    pub fn reality_defect(&self) -> f64 {
        self.index
            .iter()
            .map(|j| (self.get(j) - self.get(self.index.negate(j)).conj()).norm())
            .fold(0.0, f64::max)
    }
}

/// Uniform-grid Fourier analysis: ĥ_j = (2π/n)·Σ_a h(θ_a)·conj(φ_j(θ_a)).
///
/// Exact (synthesize∘analyze = identity) for functions band-limited to J_n.
pub fn fourier_analyze(samples: &[Complex64]) -> Result<BoundaryCoefficients> {
    let n = samples.len();
    let mut out = BoundaryCoefficients::zeros(n)?;
    let mut buf = samples.to_vec();
    dft_1d(&mut buf, false);
    let scale = TAU.sqrt() / n as f64;
    for j in out.index.iter() {
        let v = buf[out.index.dft_slot(j)] * scale;
        out.set(j, v);
    }
    Ok(out)
}

/// Analysis of real samples (convenience wrapper).
pub fn fourier_analyze_real(samples: &[f64]) -> Result<BoundaryCoefficients> {
    let cx: Vec<Complex64> = samples.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fourier_analyze(&cx)
}

/// Synthesis back onto the θ grid: h(θ_a) = Σ_j ĥ_j φ_j(θ_a).
pub fn fourier_synthesize(coeffs: &BoundaryCoefficients) -> Vec<Complex64> {
    let n = coeffs.n();
    let mut buf = vec![Complex64::ZERO; n];
    for j in coeffs.index.iter() {
        buf[coeffs.index.dft_slot(j)] = coeffs.get(j);
    }
    dft_1d(&mut buf, true);
    let scale = 1.0 / TAU.sqrt();
    buf.iter_mut().for_each(|v| *v *= scale);
    buf
}

/// Sobolev norm (Σ_j (1+j²)^s |ĥ_j|²)^{1/2} with λ_j = j² on the circle.
pub fn sobolev_norm(h: &BoundaryCoefficients, s: f64) -> f64 {
    h.index
        .iter()
        .map(|j| {
            let w = (1.0 + (j * j) as f64).powf(s);
            w * h.get(j).norm_sqr()
        })
        .sum::<f64>()
        .sqrt()
}

/// Apply the smoothing operator C^{r/2}, C = Σ_j (1+λ_j)^{−1} φ_j ⊗ φ_j:
/// each entry is scaled by (1+j²)^{−r/2}. r = 0 is the identity.
pub fn apply_c_power(h: &BoundaryCoefficients, r: f64) -> Result<BoundaryCoefficients> {
    if r < 0.0 {
        return Err(Error::invalid(format!("C power must be ≥ 0, got {r}")));
    }
    let mut out = h.clone();
    for j in h.index.iter() {
        let w = (1.0 + (j * j) as f64).powf(-r / 2.0);
        out.set(j, h.get(j) * w);
    }
    Ok(out)
}

/// Spectral matrix of an operator on mean-zero boundary functions, indexed by
/// (j,k) ∈ J_n × J_n with entry m(j,k) = ⟨effect on φ_k, φ_j⟩.
#[derive(Debug, Clone, PartialEq)]
pub struct NtDMatrix {
    index: FourierIndexSet,
    /// Row-major (n−1)×(n−1) entries in ascending index order (row j, col k).
    entries: Vec<Complex64>,
}

impl NtDMatrix {
    pub fn zeros(n: usize) -> Result<Self> {
        let index = FourierIndexSet::new(n)?;
        let len = index.len();
        Ok(NtDMatrix { index, entries: vec![Complex64::ZERO; len * len] })
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(i64, i64) -> Complex64) -> Result<Self> {
        let mut m = Self::zeros(n)?;
        for j in m.index.iter() {
            for k in m.index.iter() {
                let v = f(j, k);
                m.set(j, k, v);
            }
        }
        Ok(m)
    }

    /// diag(1/|j|): the truncated NtD matrix of the homogeneous disk.
    pub fn diag_inverse_abs(n: usize) -> Result<Self> {
        Self::from_fn(n, |j, k| {
            if j == k {
                Complex64::new(1.0 / j.unsigned_abs() as f64, 0.0)
            } else {
                Complex64::ZERO
            }
        })
    }

    pub fn index_set(&self) -> FourierIndexSet {
        self.index
    }

    pub fn n(&self) -> usize {
        self.index.n()
    }

    #[inline]
    pub fn get(&self, j: i64, k: i64) -> Complex64 {
        self.entries[self.index.offset(j) * self.index.len() + self.index.offset(k)]
    }

    #[inline]
    pub fn set(&mut self, j: i64, k: i64, v: Complex64) {
        let o = self.index.offset(j) * self.index.len() + self.index.offset(k);
        self.entries[o] = v;
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.entries.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Relative deviation from Hermitian symmetry ‖m − mᴴ‖_F / ‖m‖_F.
    pub fn hermitian_residual(&self) -> f64 {
        let mut dev = 0.0;
        for j in self.index.iter() {
            for k in self.index.iter() {
                dev += (self.get(j, k) - self.get(k, j).conj()).norm_sqr();
            }
        }
        let norm = self.frobenius_norm();
        if norm == 0.0 {
            0.0
        } else {
            dev.sqrt() / norm
        }
    }

    /// Enforce the reality symmetry m(−j,−k) = conj(m(j,k)) (with n/2 its own
    /// negation on the grid) by averaging; returns the symmetrized matrix and
    /// the Frobenius norm of the change.
    pub fn symmetrize_reality(&self) -> (NtDMatrix, f64) {
        let mut out = self.clone();
        let mut dev = 0.0;
        for j in self.index.iter() {
            for k in self.index.iter() {
                let mirror = self.get(self.index.negate(j), self.index.negate(k)).conj();
                let avg = 0.5 * (self.get(j, k) + mirror);
                dev += (self.get(j, k) - avg).norm_sqr();
                out.set(j, k, avg);
            }
        }
        (out, dev.sqrt())
    }

    /// Re-index onto a new grid size: entries shared with the new index set
    /// are copied, everything else is zero. Growing is exact band-limited
    /// embedding; shrinking truncates.
    pub fn resize(&self, n_new: usize) -> Result<NtDMatrix> {
        let mut out = NtDMatrix::zeros(n_new)?;
        for j in out.index.iter() {
            for k in out.index.iter() {
                if self.index.contains(j) && self.index.contains(k) {
                    let v = self.get(j, k);
                    out.set(j, k, v);
                }
            }
        }
        Ok(out)
    }
}

/// Zero all entries with |j| > J or |k| > K.
pub fn project_matrix(m: &NtDMatrix, j_cut: i64, k_cut: i64) -> Result<NtDMatrix> {
    let half = m.index_set().max_index();
    if j_cut < 1 || k_cut < 1 || j_cut > half || k_cut > half {
        return Err(Error::invalid(format!(
            "mode cutoffs ({j_cut},{k_cut}) outside 1..={half}"
        )));
    }
    let mut out = m.clone();
    for j in m.index.iter() {
        for k in m.index.iter() {
            if j.abs() > j_cut || k.abs() > k_cut {
                out.set(j, k, Complex64::ZERO);
            }
        }
    }
    Ok(out)
}

/// Weighted Hilbert–Schmidt norm (Σ_{j,k} (1+k²)^{−s} (1+j²)^{t} |m(j,k)|²)^{1/2}.
pub fn weighted_hs_norm(m: &NtDMatrix, s: f64, t: f64) -> f64 {
    let idx = m.index_set();
    let mut acc = 0.0;
    for j in idx.iter() {
        let wj = (1.0 + (j * j) as f64).powf(t);
        for k in idx.iter() {
            let wk = (1.0 + (k * k) as f64).powf(-s);
            acc += wj * wk * m.get(j, k).norm_sqr();
        }
    }
    acc.sqrt()
}

/// Real n×n samples of a kernel on the boundary torus, entry (a,b) = κ(θ_a, θ_b).
#[derive(Debug, Clone, PartialEq)]
pub struct KernelGrid {
    pub n: usize,
    /// Row-major values, `values[a * n + b]`.
    pub values: Vec<f64>,
}

impl KernelGrid {
    pub fn new(n: usize, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), n * n, "kernel grid size mismatch");
        KernelGrid { n, values }
    }

    pub fn zeros(n: usize) -> Self {
        KernelGrid { n, values: vec![0.0; n * n] }
    }

    #[inline]
    pub fn at(&self, a: usize, b: usize) -> f64 {
        self.values[a * self.n + b]
    }

    /// Angle of grid line a.
    #[inline]
    pub fn theta(&self, a: usize) -> f64 {
        TAU * a as f64 / self.n as f64
    }

    /// L²(𝕋²) norm under the uniform quadrature weight (2π/n)².
    pub fn l2_norm(&self) -> f64 {
        let w = TAU / self.n as f64;
        (self.values.iter().map(|v| v * v).sum::<f64>()).sqrt() * w
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

/// Result of synthesizing a kernel grid from an NtD matrix.
#[derive(Debug, Clone)]
pub struct KernelSynthesis {
    pub kernel: KernelGrid,
    /// Frobenius norm of the reality-symmetrization correction.
    pub reality_violation: f64,
    /// The same, relative to the matrix norm (0 for a zero matrix).
    pub reality_violation_rel: f64,
    /// Largest imaginary part left after synthesis (round-off scale).
    pub imag_residue: f64,
}

impl KernelSynthesis {
    /// True when the input's reality violation exceeded `tol` relative.
    pub fn flagged(&self, tol: f64) -> bool {
        self.reality_violation_rel > tol
    }
}

/// Synthesize the kernel κ(θ,θ′) = Σ_{j,k} m(j,k)·φ_j(θ)·conj(φ_k(θ′)) on the
/// n×n torus grid. The matrix is reality-symmetrized first and the violation
/// reported; the output grid is exactly real up to round-off after that.
pub fn kernel_from_matrix(m: &NtDMatrix) -> KernelSynthesis {
    let n = m.n();
    let (sym, violation) = m.symmetrize_reality();
    let idx = sym.index_set();

    // Embed into DFT slots with the second axis negated so that a single
    // inverse transform implements e^{+ijθ} e^{−ikθ′}.
    let mut grid = vec![Complex64::ZERO; n * n];
    for j in idx.iter() {
        for k in idx.iter() {
            let a = idx.dft_slot(j);
            let b = idx.dft_slot(-k);
            grid[a * n + b] = sym.get(j, k);
        }
    }
    Fft2::new(n, n).inverse(&mut grid);

    let scale = 1.0 / TAU;
    let mut values = Vec::with_capacity(n * n);
    let mut imag_residue = 0.0f64;
    for v in &grid {
        values.push(v.re * scale);
        imag_residue = imag_residue.max((v.im * scale).abs());
    }
    let norm = m.frobenius_norm();
    KernelSynthesis {
        kernel: KernelGrid::new(n, values),
        reality_violation: violation,
        reality_violation_rel: if norm == 0.0 { 0.0 } else { violation / norm },
        imag_residue,
    }
}

/// Truncated log-sine series Σ_{j=1}^{J} cos(j x)/j, the analytic kernel
/// profile of the homogeneous disk; converges to −log(2|sin(x/2)|).
pub fn log_sine_partial(x: f64, terms: usize) -> f64 {
    (1..=terms).map(|j| (j as f64 * x).cos() / j as f64).sum()
}
