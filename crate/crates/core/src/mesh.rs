//! Concentric-ring triangulation of the unit disk for the P1 solver.
//!
//! Ring r of R carries 6r nodes at radius r/R, so refinement adds rings while
//! keeping near-equilateral triangles. Node 0 is the center; ring r starts at
//! index 1 + 3r(r−1); the outermost ring is the boundary, ordered by angle
//! starting at θ = 0. Totals: 1 + 3R(R+1) nodes and 6R² triangles.

use crate::error::{Error, Result};
use std::f64::consts::TAU;

#[derive(Debug, Clone, PartialEq)]
pub struct DiskMesh {
    pub rings: usize,
    /// Node coordinates; boundary nodes lie on the unit circle to rounding.
    pub nodes: Vec<[f64; 2]>,
    /// Positively oriented (counter-clockwise) vertex triples.
    pub triangles: Vec<[usize; 3]>,
    /// Outermost-ring node indices in increasing-angle order.
    pub boundary_nodes: Vec<usize>,
}

/// First node index of ring r ≥ 1 (node 0 is the center).
fn ring_start(r: usize) -> usize {
    1 + 3 * r * (r - 1)
}

fn signed_area(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))
}

pub fn build_mesh(rings: usize) -> Result<DiskMesh> {
    if rings == 0 {
        return Err(Error::invalid("mesh needs at least one ring"));
    }
    let r_count = rings;
    let mut nodes = vec![[0.0, 0.0]];
    for r in 1..=r_count {
        let radius = r as f64 / r_count as f64;
        let count = 6 * r;
        for m in 0..count {
            let theta = TAU * m as f64 / count as f64;
            nodes.push([radius * theta.cos(), radius * theta.sin()]);
        }
    }

    let mut triangles = Vec::with_capacity(6 * r_count * r_count);
    // Innermost fan around the center.
    for m in 0..6 {
        triangles.push([0, ring_start(1) + m, ring_start(1) + (m + 1) % 6]);
    }
    // Band between ring r−1 (6(r−1) nodes) and ring r (6r nodes), built per
    // 60° sector: r "up" triangles on the outer ring, r−1 "down" triangles
    // on the inner ring, 6(2r−1) in the band.
    for r in 2..=r_count {
        let inner = ring_start(r - 1);
        let outer = ring_start(r);
        let inner_count = 6 * (r - 1);
        let outer_count = 6 * r;
        for sector in 0..6 {
            let i0 = sector * (r - 1);
            let o0 = sector * r;
            for step in 0..r {
                triangles.push([
                    outer + (o0 + step) % outer_count,
                    outer + (o0 + step + 1) % outer_count,
                    inner + (i0 + step) % inner_count,
                ]);
            }
            for step in 0..r.saturating_sub(1) {
                triangles.push([
                    inner + (i0 + step) % inner_count,
                    outer + (o0 + step + 1) % outer_count,
                    inner + (i0 + step + 1) % inner_count,
                ]);
            }
        }
    }

    // Orientation is enforced, not assumed: flip any clockwise triple.
    for tri in &mut triangles {
        if signed_area(nodes[tri[0]], nodes[tri[1]], nodes[tri[2]]) < 0.0 {
            tri.swap(1, 2);
        }
    }

    let boundary_nodes = (ring_start(r_count)..nodes.len()).collect();
    Ok(DiskMesh { rings: r_count, nodes, triangles, boundary_nodes })
}

impl DiskMesh {
    /// Exact angles of the boundary nodes (uniform grid of size 6R).
    pub fn boundary_angles(&self) -> Vec<f64> {
        let count = self.boundary_nodes.len();
        (0..count).map(|m| TAU * m as f64 / count as f64).collect()
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t];
        signed_area(self.nodes[a], self.nodes[b], self.nodes[c])
    }

    pub fn triangle_centroid(&self, t: usize) -> [f64; 2] {
        let [a, b, c] = self.triangles[t];
        let (pa, pb, pc) = (self.nodes[a], self.nodes[b], self.nodes[c]);
        [(pa[0] + pb[0] + pc[0]) / 3.0, (pa[1] + pb[1] + pc[1]) / 3.0]
    }
}
