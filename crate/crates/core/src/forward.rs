//! P1 finite-element solution of the conductivity Neumann problem
//! −∇·(γ∇u) = 0 on the unit disk, and Neumann-to-Dirichlet matrix assembly.
//!
//! The mesh is the concentric-ring triangulation; γ is transferred as one
//! constant per triangle by nearest-pixel lookup at the centroid. The
//! singular compatible system is solved by Jacobi-preconditioned conjugate
//! gradients with the center node pinned, then shifted so the boundary
//! trace has zero mean (the H¹/constants gauge). For each boundary Fourier
//! mode φ_k = e^{ikθ}/√(2π), cosine and sine loads are solved separately and
//! the trace is analyzed back into coefficients; negative columns reuse the
//! positive solves through complex conjugation (γ and the PDE are real).

use crate::boundary::{fourier_analyze, BoundaryCoefficients, NtDMatrix};
use crate::conductivity::ConductivityField;
use crate::error::{Error, Result};
use crate::grid::DiskGrid;
use crate::mesh::DiskMesh;
use num_complex::Complex64;

/// Relative-residual target for the conjugate-gradient solve; far below the
/// 1e−2 physics tolerances so solver error never masks discretization error.
pub const CG_TOLERANCE: f64 = 1e-10;
/// Iteration cap as a multiple of the number of unknowns.
pub const CG_MAX_ITER_FACTOR: usize = 10;

/// Compressed-sparse-row symmetric positive-definite matrix.
#[derive(Debug, Clone)]
pub struct SparseMatrix {
    pub n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Build from (row, col, value) triplets, summing duplicates.
    pub fn from_triplets(n: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let mut rows = Vec::with_capacity(triplets.len());
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        for (r, c, v) in triplets {
            if rows.last() == Some(&r) && col_idx.last() == Some(&c) {
                *values.last_mut().unwrap() += v;
            } else {
                rows.push(r);
                col_idx.push(c);
                values.push(v);
            }
        }
        let mut row_ptr = vec![0usize; n + 1];
        for &r in &rows {
            row_ptr[r + 1] += 1;
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        SparseMatrix { n, row_ptr, col_idx, values }
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        for r in 0..self.n {
            let mut acc = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            y[r] = acc;
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.n];
        for r in 0..self.n {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                if self.col_idx[k] == r {
                    d[r] = self.values[k];
                }
            }
        }
        d
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }
}

/// γ sampled per triangle: nearest grid pixel to the centroid.
pub fn conductivity_per_triangle(mesh: &DiskMesh, gamma: &ConductivityField) -> Vec<f64> {
    let grid = DiskGrid::new(gamma.n());
    (0..mesh.triangles.len())
        .map(|t| {
            let [cx, cy] = mesh.triangle_centroid(t);
            gamma.field.at(grid.nearest_index(cx), grid.nearest_index(cy))
        })
        .collect()
}

/// Assemble the P1 stiffness matrix ∫γ∇φ_i·∇φ_j without any gauge fixing;
/// the result is symmetric positive-semidefinite with constants in its kernel.
pub fn assemble_stiffness(mesh: &DiskMesh, gamma_tri: &[f64]) -> SparseMatrix {
    let mut triplets = Vec::with_capacity(9 * mesh.triangles.len());
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let [a, b, c] = *tri;
        let (pa, pb, pc) = (mesh.nodes[a], mesh.nodes[b], mesh.nodes[c]);
        let area = mesh.triangle_area(t);
        // Opposite-edge vectors; ∇λ_i = perp(e_i)/(2A) and perp preserves
        // dot products, so K_ij = γ·(e_i·e_j)/(4A).
        let edges = [
            [pc[0] - pb[0], pc[1] - pb[1]],
            [pa[0] - pc[0], pa[1] - pc[1]],
            [pb[0] - pa[0], pb[1] - pa[1]],
        ];
        let scale = gamma_tri[t] / (4.0 * area);
        let idx = [a, b, c];
        for i in 0..3 {
            for j in 0..3 {
                let dot = edges[i][0] * edges[j][0] + edges[i][1] * edges[j][1];
                triplets.push((idx[i], idx[j], scale * dot));
            }
        }
    }
    SparseMatrix::from_triplets(mesh.nodes.len(), triplets)
}

/// Replace row/column `pin` by the identity so the compatible singular
/// system becomes positive definite; the PDE solution is recovered up to the
/// constant fixed afterwards by the boundary-mean shift.
fn pin_node(matrix: &mut SparseMatrix, pin: usize) {
    for r in 0..matrix.n {
        for k in matrix.row_ptr[r]..matrix.row_ptr[r + 1] {
            let c = matrix.col_idx[k];
            if r == pin || c == pin {
                matrix.values[k] = if r == c { 1.0 } else { 0.0 };
            }
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SolveStats {
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Jacobi-preconditioned conjugate gradients to ‖Ax−b‖ ≤ tol·‖b‖.
pub fn pcg(
    matrix: &SparseMatrix,
    inv_diag: &[f64],
    b: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, SolveStats)> {
    let n = matrix.n;
    let b_norm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    if b_norm == 0.0 {
        return Ok((vec![0.0; n], SolveStats { iterations: 0, relative_residual: 0.0 }));
    }
    let mut x = vec![0.0; n];
    let mut r: Vec<f64> = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(inv_diag).map(|(ri, di)| ri * di).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
    for iter in 0..max_iter {
        matrix.matvec(&p, &mut ap);
        let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let r_norm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        if r_norm <= tol * b_norm {
            return Ok((x, SolveStats { iterations: iter + 1, relative_residual: r_norm / b_norm }));
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_next: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let beta = rz_next / rz;
        rz = rz_next;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    let r_norm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
    Err(Error::SolveFailure { residual: r_norm / b_norm, iterations: max_iter })
}

/// A mesh with an assembled, gauged stiffness system, reusable across all
/// boundary loads for one conductivity.
pub struct NeumannSolver {
    pub mesh: DiskMesh,
    matrix: SparseMatrix,
    inv_diag: Vec<f64>,
}

/// Complex nodal solution with the mean-zero boundary-trace gauge applied to
/// real and imaginary parts independently.
#[derive(Debug, Clone)]
pub struct NeumannSolution {
    pub nodal: Vec<Complex64>,
}

impl NeumannSolver {
    pub fn new(mesh: DiskMesh, gamma: &ConductivityField) -> Self {
        let gamma_tri = conductivity_per_triangle(&mesh, gamma);
        let mut matrix = assemble_stiffness(&mesh, &gamma_tri);
        pin_node(&mut matrix, 0);
        let inv_diag = matrix.diagonal().iter().map(|d| 1.0 / d).collect();
        NeumannSolver { mesh, matrix, inv_diag }
    }

    /// Neumann load vector b_i = ∫_{∂Ω} g φ_i ds for a real current density
    /// given as a function of boundary angle; two-point Gauss quadrature per
    /// boundary edge with the angle linearized along the chord.
    pub fn boundary_load(&self, g: &dyn Fn(f64) -> f64) -> Vec<f64> {
        let mut load = vec![0.0; self.mesh.nodes.len()];
        let bnodes = &self.mesh.boundary_nodes;
        let angles = self.mesh.boundary_angles();
        let count = bnodes.len();
        let dtheta = std::f64::consts::TAU / count as f64;
        let chord = 2.0 * (dtheta / 2.0).sin();
        // Gauss points on [0,1]: (1 ∓ 1/√3)/2, weights 1/2 each.
        let gauss = [0.5 - 0.5 / 3.0f64.sqrt(), 0.5 + 0.5 / 3.0f64.sqrt()];
        for m in 0..count {
            let (na, nb) = (bnodes[m], bnodes[(m + 1) % count]);
            for &s in &gauss {
                let value = g(angles[m] + s * dtheta) * 0.5 * chord;
                load[na] += value * (1.0 - s);
                load[nb] += value * s;
            }
        }
        load
    }

    /// Solve one real load and apply the mean-zero boundary-trace gauge.
    pub fn solve_real(&self, load: &[f64]) -> Result<(Vec<f64>, SolveStats)> {
        let mut rhs = load.to_vec();
        rhs[0] = 0.0; // pinned node
        let (mut u, stats) = pcg(
            &self.matrix,
            &self.inv_diag,
            &rhs,
            CG_TOLERANCE,
            CG_MAX_ITER_FACTOR * self.matrix.n,
        )?;
        let mean = self.boundary_mean(&u);
        for v in &mut u {
            *v -= mean;
        }
        Ok((u, stats))
    }

    fn boundary_mean(&self, nodal: &[f64]) -> f64 {
        let sum: f64 = self.mesh.boundary_nodes.iter().map(|&i| nodal[i]).sum();
        sum / self.mesh.boundary_nodes.len() as f64
    }

    pub fn boundary_trace(&self, nodal: &[f64]) -> Vec<f64> {
        self.mesh.boundary_nodes.iter().map(|&i| nodal[i]).collect()
    }
}

/// Solve with Neumann data given as boundary Fourier coefficients (no
/// constant mode by construction, so the compatibility condition holds).
pub fn solve_neumann(
    solver: &NeumannSolver,
    g: &BoundaryCoefficients,
) -> Result<NeumannSolution> {
    let eval_real = |theta: f64| g.evaluate(theta).re;
    let eval_imag = |theta: f64| g.evaluate(theta).im;
    let (ur, _) = solver.solve_real(&solver.boundary_load(&eval_real))?;
    let (ui, _) = solver.solve_real(&solver.boundary_load(&eval_imag))?;
    let nodal = ur.iter().zip(&ui).map(|(&re, &im)| Complex64::new(re, im)).collect();
    Ok(NeumannSolution { nodal })
}

/// Diagnostics from one NtD assembly.
#[derive(Debug, Clone)]
pub struct NtdAssembly {
    /// Reality-symmetrized NtD matrix over modes |j|, |k| ≤ J (index grid 2J).
    pub matrix: NtDMatrix,
    /// Relative Hermitian residual ‖M − Mᴴ‖_F/‖M‖_F before symmetrization.
    pub hermitian_residual: f64,
    /// Relative reality defect removed by symmetrization.
    pub reality_violation: f64,
}

/// Assemble ⟨φ_j, R_γ φ_k⟩ for |j|, |k| ≤ J by 2J real FEM solves: for each
/// k ≥ 1 solve the cos(kθ) and sin(kθ) loads, combine into the φ_k trace,
/// and obtain the −k column from the conjugated trace.
pub fn assemble_ntd(solver: &NeumannSolver, j_modes: usize) -> Result<NtdAssembly> {
    let n_b = solver.mesh.boundary_nodes.len();
    if j_modes == 0 || 2 * j_modes > n_b {
        return Err(Error::invalid(format!(
            "mode cutoff {j_modes} needs 2 ≤ 2J ≤ boundary nodes ({n_b})"
        )));
    }
    let mut matrix = NtDMatrix::zeros(2 * j_modes)?;
    let matrix_index = matrix.index_set();
    let sqrt_2pi = std::f64::consts::TAU.sqrt();

    for k in 1..=j_modes as i64 {
        let kf = k as f64;
        let load_cos = solver.boundary_load(&|theta| (kf * theta).cos());
        let load_sin = solver.boundary_load(&|theta| (kf * theta).sin());
        let (uc, _) = solver.solve_real(&load_cos)?;
        let (us, _) = solver.solve_real(&load_sin)?;
        let trace_c = solver.boundary_trace(&uc);
        let trace_s = solver.boundary_trace(&us);
        // Trace of the solution for g = φ_k = (cos kθ + i sin kθ)/√(2π).
        let trace: Vec<Complex64> = trace_c
            .iter()
            .zip(&trace_s)
            .map(|(&re, &im)| Complex64::new(re, im) / sqrt_2pi)
            .collect();
        let conj_trace: Vec<Complex64> = trace.iter().map(|z| z.conj()).collect();
        let col_pos = fourier_analyze(&trace)?;
        let col_neg = fourier_analyze(&conj_trace)?;
        for j in matrix_index.iter() {
            matrix.set(j, k, col_pos.get(j));
            if k < j_modes as i64 {
                // −J is outside the index grid {−J+1..J}; skip its column.
                matrix.set(j, -k, col_neg.get(j));
            }
        }
    }

    let hermitian_residual = matrix.hermitian_residual();
    let (symmetrized, reality_violation) = matrix.symmetrize_reality();
    Ok(NtdAssembly { matrix: symmetrized, hermitian_residual, reality_violation })
}

/// Analytic NtD eigenvalue for a radial two-phase disk: conductivity c inside
/// radius ρ, 1 outside, Fourier mode n ≥ 1. Separation of variables gives
/// (1/n)·(1 − μρ^{2n})/(1 + μρ^{2n}) with μ = (c−1)/(c+1).
pub fn radial_ntd_oracle(c: f64, rho: f64, nmode: usize) -> Result<f64> {
    if !(c > 0.0) || !(rho > 0.0 && rho < 1.0) || nmode == 0 {
        return Err(Error::invalid(format!(
            "radial oracle needs c > 0, 0 < rho < 1, nmode ≥ 1; got c={c}, rho={rho}, n={nmode}"
        )));
    }
    let mu = (c - 1.0) / (c + 1.0);
    let s = mu * rho.powi(2 * nmode as i32);
    Ok((1.0 - s) / (1.0 + s) / nmode as f64)
}

/// Radial two-phase conductivity grid for oracle comparisons: value c for
/// |x| < ρ, 1 elsewhere. Resolution should be fine (≥ 128) so pixelization
/// stays below the oracle tolerances.
pub fn radial_two_phase(c: f64, rho: f64, n: usize) -> ConductivityField {
    let grid = DiskGrid::new(n);
    let mut values = vec![1.0; n * n];
    for i in 0..n {
        for j in 0..n {
            if grid.radius(i, j) < rho {
                values[i * n + j] = c;
            }
        }
    }
    ConductivityField::new(crate::grid::SquareField::new(n, values), (rho + 1.0) / 2.0)
}

/// Convenience: homogeneous γ ≡ 1 on an n×n grid.
pub fn homogeneous_field(n: usize) -> ConductivityField {
    ConductivityField::new(crate::grid::SquareField::new(n, vec![1.0; n * n]), 0.5)
}
