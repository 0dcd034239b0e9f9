//! Square complex grids, unitary 2D Fourier transforms, the diagonal
//! symmetry operator and norms.
//!
//! Grids hold either time-domain FID data or spectra. The canonical linear
//! ordering is column-major: linear index `k = col * n + row`, so the column
//! index varies slowest. All symmetry in this crate is diagonal symmetry,
//! for which the symmetry permutation is plain transposition.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Square 2D complex array in column-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexGrid {
    n: usize,
    data: Vec<Complex64>,
}

impl ComplexGrid {
    /// All-zero grid. `n` must be at least 2.
    pub fn zeros(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::invalid(format!("grid side must be >= 2, got {n}")));
        }
        Ok(ComplexGrid {
            n,
            data: vec![Complex64::new(0.0, 0.0); n * n],
        })
    }

    /// Wrap column-major data of length `n*n`.
    pub fn from_data(n: usize, data: Vec<Complex64>) -> Result<Self> {
        if n < 2 {
            return Err(Error::invalid(format!("grid side must be >= 2, got {n}")));
        }
        if data.len() != n * n {
            return Err(Error::invalid(format!(
                "grid data length {} does not match {n}x{n}",
                data.len()
            )));
        }
        Ok(ComplexGrid { n, data })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Canonical linear index of cell `(row, col)`.
    #[inline]
    pub fn linear_index(&self, row: usize, col: usize) -> usize {
        col * self.n + row
    }

    /// Cell `(row, col)` of a canonical linear index.
    #[inline]
    pub fn cell_of(n: usize, k: usize) -> (usize, usize) {
        (k % n, k / n)
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.data[col * self.n + row]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, v: Complex64) {
        self.data[col * self.n + row] = v;
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<Complex64> {
        self.data
    }

    /// Transposed copy.
    pub fn transpose(&self) -> ComplexGrid {
        let n = self.n;
        let mut out = vec![Complex64::new(0.0, 0.0); n * n];
        for col in 0..n {
            for row in 0..n {
                out[row * n + col] = self.data[col * n + row];
            }
        }
        ComplexGrid { n, data: out }
    }

    /// Largest magnitude over all cells.
    pub fn max_abs(&self) -> f64 {
        // Compare on |z|^2 and take one sqrt at the end.
        let max_sq = self.data.iter().map(|z| z.norm_sqr()).fold(0.0, f64::max);
        max_sq.sqrt()
    }

    pub fn norms(&self) -> GridNorms {
        let mut l1 = 0.0;
        let mut sq = 0.0;
        let mut linf: f64 = 0.0;
        for z in &self.data {
            let m = z.norm();
            l1 += m;
            sq += z.norm_sqr();
            linf = linf.max(m);
        }
        GridNorms {
            l1,
            l2: sq.sqrt(),
            linf,
        }
    }

    /// self += other, elementwise.
    pub fn add_assign(&mut self, other: &ComplexGrid) {
        assert_eq!(self.n, other.n, "grid size mismatch");
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn scale(&self, c: f64) -> ComplexGrid {
        ComplexGrid {
            n: self.n,
            data: self.data.iter().map(|z| z.scale(c)).collect(),
        }
    }
}

/// l1 / l2 / l-infinity norms of a grid, over complex magnitudes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridNorms {
    pub l1: f64,
    pub l2: f64,
    pub linf: f64,
}

/// Symmetry permutation for diagonal symmetry: transposition.
///
/// An exact involution: applying it twice returns the input bitwise.
pub fn sym_permute(g: &ComplexGrid) -> ComplexGrid {
    g.transpose()
}

/// Max-magnitude deviation from diagonal symmetry, `max |g - g^T|`.
///
/// Zero exactly when the grid equals its transpose.
pub fn asymmetry_residual(g: &ComplexGrid) -> f64 {
    let n = g.n();
    let mut max_sq = 0.0f64;
    for col in 0..n {
        for row in 0..row_bound(col) {
            let d = g.get(row, col) - g.get(col, row);
            max_sq = max_sq.max(d.norm_sqr());
        }
    }
    return max_sq.sqrt();

    // Only the strict upper triangle needs checking.
    fn row_bound(col: usize) -> usize {
        col
    }
}

/// Cached unitary 2D FFT for one grid size.
///
/// The transform is `1/sqrt(n)`-scaled per dimension, so forward followed by
/// inverse is the identity and Parseval holds with no extra factors.
pub struct Fft2 {
    n: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex64>,
    row_buf: Vec<Complex64>,
}

impl Fft2 {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        let scratch_len = fwd
            .get_inplace_scratch_len()
            .max(inv.get_inplace_scratch_len());
        Fft2 {
            n,
            fwd,
            inv,
            scratch: vec![Complex64::new(0.0, 0.0); scratch_len],
            row_buf: vec![Complex64::new(0.0, 0.0); n],
        }
    }

    pub fn forward(&mut self, g: &ComplexGrid) -> ComplexGrid {
        self.transform(g, true)
    }

    pub fn inverse(&mut self, g: &ComplexGrid) -> ComplexGrid {
        self.transform(g, false)
    }

    fn transform(&mut self, g: &ComplexGrid, forward: bool) -> ComplexGrid {
        assert_eq!(g.n(), self.n, "grid size does not match the plan");
        let n = self.n;
        let plan = if forward { &self.fwd } else { &self.inv };
        let mut data = g.data().to_vec();

        // Columns are contiguous in column-major storage.
        for col in data.chunks_exact_mut(n) {
            plan.process_with_scratch(col, &mut self.scratch);
        }
        // Rows are strided; bounce through a buffer.
        for row in 0..n {
            for col in 0..n {
                self.row_buf[col] = data[col * n + row];
            }
            plan.process_with_scratch(&mut self.row_buf, &mut self.scratch);
            for col in 0..n {
                data[col * n + row] = self.row_buf[col];
            }
        }

        let scale = 1.0 / n as f64; // 1/sqrt(n) per dimension
        for z in &mut data {
            *z = z.scale(scale);
        }
        ComplexGrid { n, data }
    }
}

/// Unitary 2D Fourier transform.
pub fn ft2d(g: &ComplexGrid) -> ComplexGrid {
    Fft2::new(g.n()).forward(g)
}

/// Unitary inverse 2D Fourier transform.
pub fn ift2d(g: &ComplexGrid) -> ComplexGrid {
    Fft2::new(g.n()).inverse(g)
}

#[cfg(test)]
pub(crate) fn random_grid(n: usize, seed: u64) -> ComplexGrid {
    let mut rng = crate::rng::Rng::from_seed(seed);
    let data = (0..n * n)
        .map(|_| Complex64::new(rng.uniform_in(-1.0, 1.0), rng.uniform_in(-1.0, 1.0)))
        .collect();
    ComplexGrid::from_data(n, data).unwrap()
}
