//! Non-uniform sampling (NUS) schedule generation and compressed-sensing
//! reconstruction for square, diagonally symmetric 2D spectra.
//!
//! The crate is organized around a small pipeline:
//!
//! * [`grid`] — square complex grids, unitary 2D Fourier transforms, the
//!   transpose symmetry operator and norms;
//! * [`sampling`] — Random, Poisson-gap (1D and 2D woven) and symmetric-copy
//!   schedules, plus the sampling operator and its adjoint;
//! * [`recon`] — iterative soft-thresholding and l1-regularized solvers;
//! * [`synth`] — synthetic symmetric FIDs with diagonal and cross peaks;
//! * [`eval`] — recovery metrics and the Monte Carlo comparison harness;
//! * [`io`] — the on-disk formats used by the CLI.

pub mod error;
pub mod eval;
pub mod grid;
pub mod io;
pub mod recon;
pub mod rng;
pub mod sampling;
pub mod synth;

pub use error::{Error, Result};
pub use grid::{asymmetry_residual, ft2d, ift2d, sym_permute, ComplexGrid, Fft2, GridNorms};
pub use sampling::{NusData, Schedule, ScheduleKind};
