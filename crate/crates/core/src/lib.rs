//! Desk-scale laboratory for the continuum electrical impedance tomography
//! problem on the unit disk.
//!
//! The crate covers the whole experimental loop:
//!
//! * simulate Neumann-to-Dirichlet (NtD) boundary data for sampled
//!   conductivities with a P1 finite element solver ([`forward`], [`mesh`]),
//! * represent that data spectrally and as integral kernels on the boundary
//!   torus ([`boundary`]),
//! * draw conductivity phantoms and random fields ([`conductivity`], [`grf`]),
//! * corrupt kernels with structured random-series noise ([`noise`]),
//! * localize kernels into chart patches and back ([`patches`]),
//! * train and evaluate a compact Fourier neural operator inverse solver with
//!   hand-rolled reverse-mode gradients ([`fno`]),
//! * score reconstructions and fit error-scaling laws ([`metrics`]),
//! * persist datasets, checkpoints, and run artifacts ([`dataset`], [`io`],
//!   [`pipeline`]).
//!
//! Everything is deterministic given a master seed: random streams are derived
//! by [`seeds`] so that parallel execution cannot reorder draws.

pub mod boundary;
pub mod conductivity;
pub mod dataset;
pub mod error;
pub mod fft;
pub mod fno;
pub mod forward;
pub mod grf;
pub mod grid;
pub mod interp;
pub mod io;
pub mod mesh;
pub mod metrics;
pub mod noise;
pub mod patches;
pub mod pipeline;
pub mod seeds;

pub use error::{Error, Result};
