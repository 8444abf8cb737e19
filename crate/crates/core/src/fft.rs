//! Thin wrappers around rustfft for the square 2-D transforms used by kernel
//! synthesis, noise sampling, and the neural operator's spectral layers.
//!
//! Transforms are unnormalized in both directions (forward uses e^{−i...},
//! inverse uses e^{+i...}); callers apply their own scaling. Plans are built
//! once per [`Fft2`] value, which matters in training loops where the same
//! size is transformed thousands of times.

use num_complex::Complex;
use rustfft::{Fft, FftDirection, FftNum, FftPlanner};
use std::sync::Arc;

/// Planned forward/inverse FFTs for an `rows × cols` row-major complex grid.
pub struct Fft2<T: FftNum> {
    rows: usize,
    cols: usize,
    fwd_rows: Arc<dyn Fft<T>>,
    inv_rows: Arc<dyn Fft<T>>,
    fwd_cols: Arc<dyn Fft<T>>,
    inv_cols: Arc<dyn Fft<T>>,
}

impl<T: FftNum> Fft2<T> {
    pub fn new(rows: usize, cols: usize) -> Self {
        let mut planner = FftPlanner::new();
        Fft2 {
            rows,
            cols,
            fwd_rows: planner.plan_fft(cols, FftDirection::Forward),
            inv_rows: planner.plan_fft(cols, FftDirection::Inverse),
            fwd_cols: planner.plan_fft(rows, FftDirection::Forward),
            inv_cols: planner.plan_fft(rows, FftDirection::Inverse),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    fn transform(&self, data: &mut [Complex<T>], inverse: bool) {
        assert_eq!(data.len(), self.rows * self.cols, "fft2 size mismatch");
        let row_plan = if inverse { &self.inv_rows } else { &self.fwd_rows };
        let col_plan = if inverse { &self.inv_cols } else { &self.fwd_cols };
        // Rows are contiguous: transform in place.
        for r in data.chunks_exact_mut(self.cols) {
            row_plan.process(r);
        }
        // Columns are strided: gather, transform, scatter.
        let mut col = vec![Complex::new(T::zero(), T::zero()); self.rows];
        for c in 0..self.cols {
            for r in 0..self.rows {
                col[r] = data[r * self.cols + c];
            }
            col_plan.process(&mut col);
            for r in 0..self.rows {
                data[r * self.cols + c] = col[r];
            }
        }
    }

    /// In-place unnormalized forward transform over both axes.
    pub fn forward(&self, data: &mut [Complex<T>]) {
        self.transform(data, false);
    }

    /// In-place unnormalized inverse transform over both axes.
    pub fn inverse(&self, data: &mut [Complex<T>]) {
        self.transform(data, true);
    }
}

/// One-shot unnormalized 1-D transform (plans internally; fine off hot paths).
pub fn dft_1d<T: FftNum>(data: &mut [Complex<T>], inverse: bool) {
    let dir = if inverse { FftDirection::Inverse } else { FftDirection::Forward };
    let plan = FftPlanner::new().plan_fft(data.len(), dir);
    plan.process(data);
}
