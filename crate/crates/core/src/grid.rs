//! Shared geometry of the N×N pixel grid covering the square (−1,1)².
//!
//! Pixels are cell-centered: pixel (i, j) sits at
//! `x = −1 + (i + ½)·(2/N)`, `y = −1 + (j + ½)·(2/N)`, with `i` indexing the
//! first coordinate. Cell centers make the disk mask unambiguous (no pixel
//! sits exactly on the circle for the sizes used here) and make the cosine
//! basis used by [`crate::grf`] exactly orthonormal under cell-sum quadrature.
//!
//! All square fields in the crate (conductivities, GRF draws, network
//! outputs) are stored row-major in `i`, i.e. `values[i * n + j]`.

/// Geometry helper for an N×N cell-centered grid on (−1,1)².
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DiskGrid {
    pub n: usize,
}

impl DiskGrid {
    pub fn new(n: usize) -> Self {
        assert!(n > 0, "grid size must be positive");
        DiskGrid { n }
    }

    /// Side length of one cell.
    #[inline]
    pub fn cell(&self) -> f64 {
        2.0 / self.n as f64
    }

    /// Area of one cell; the quadrature weight for integrals over the square.
    #[inline]
    pub fn cell_area(&self) -> f64 {
        self.cell() * self.cell()
    }

    /// Coordinate of the i-th cell center along either axis.
    #[inline]
    pub fn coord(&self, i: usize) -> f64 {
        -1.0 + (i as f64 + 0.5) * self.cell()
    }

    /// Center of pixel (i, j).
    #[inline]
    pub fn center(&self, i: usize, j: usize) -> (f64, f64) {
        (self.coord(i), self.coord(j))
    }

    /// Distance of the pixel center from the origin.
    #[inline]
    pub fn radius(&self, i: usize, j: usize) -> f64 {
        let (x, y) = self.center(i, j);
        x.hypot(y)
    }

    /// True when the pixel center lies strictly inside the unit disk.
    #[inline]
    pub fn inside_disk(&self, i: usize, j: usize) -> bool {
        self.radius(i, j) < 1.0
    }

    /// Boolean mask of pixels inside the unit disk, row-major.
    pub fn disk_mask(&self) -> Vec<bool> {
        let mut m = Vec::with_capacity(self.n * self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                m.push(self.inside_disk(i, j));
            }
        }
        m
    }

    /// Index of the pixel whose center is nearest to `x` (clamped to range).
    #[inline]
    pub fn nearest_index(&self, x: f64) -> usize {
        let f = (x + 1.0) / self.cell() - 0.5;
        let i = f.round();
        if i < 0.0 {
            0
        } else if i as usize >= self.n {
            self.n - 1
        } else {
            i as usize
        }
    }
}

/// A scalar field sampled on the N×N grid (no mask semantics attached).
#[derive(Debug, Clone, PartialEq)]
pub struct SquareField {
    pub n: usize,
    /// Row-major values, `values[i * n + j]`.
    pub values: Vec<f64>,
}

impl SquareField {
    pub fn new(n: usize, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), n * n, "field size mismatch");
        SquareField { n, values }
    }

    pub fn constant(n: usize, c: f64) -> Self {
        SquareField { n, values: vec![c; n * n] }
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    /// Grid-quadrature L² norm over the full square.
    pub fn l2_norm(&self) -> f64 {
        let w = DiskGrid::new(self.n).cell_area();
        (self.values.iter().map(|v| v * v).sum::<f64>() * w).sqrt()
    }
}
