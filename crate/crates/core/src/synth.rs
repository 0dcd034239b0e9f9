//! Synthetic symmetric FIDs: strong diagonal peaks plus mirrored pairs of
//! weaker cross peaks, each a decaying on-grid complex exponential.
//!
//! A grid cell `(t1, t2)` (time indices starting at 1) holds
//!
//! ```text
//! sum_n d_n e(f_n, t1) e(f_n, t2)
//!   + sum_m c_m [ e(f_m1, t1) e(f_m2, t2) + e(f_m1, t2) e(f_m2, t1) ]
//! ```
//!
//! with `e(f, t) = exp(2*pi*i*f*t - decay*t)`. Both cross terms of a pair
//! are accumulated together per cell, so the grid is bitwise symmetric by
//! construction.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::ComplexGrid;
use crate::rng::Rng;

/// One diagonal peak: frequency bin `b` (the peak lands at spectrum cell
/// `(b, b)`) and amplitude.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagPeak {
    pub bin: usize,
    pub amp: f64,
}

/// One cross-peak pair: frequency bins `(b1, b2)`, `b1 != b2`; the pair
/// lands at spectrum cells `(b1, b2)` and `(b2, b1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrossPeak {
    pub bin1: usize,
    pub bin2: usize,
    pub amp: f64,
}

/// Ground truth of a synthetic benchmark grid.
///
/// Frequencies live on the `1/n` grid and are stored as integer bins; peak
/// cells are pairwise distinct by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct PeakList {
    pub n: usize,
    pub diag: Vec<DiagPeak>,
    pub cross: Vec<CrossPeak>,
    /// Per-sample decay constant.
    pub decay_alpha: f64,
    pub seed: u64,
}

pub const DEFAULT_DIAG_COUNT: usize = 25;
pub const DEFAULT_CROSS_COUNT: usize = 50;
pub const DEFAULT_DECAY_ALPHA: f64 = 0.001;
pub const DIAG_AMP_RANGE: (f64, f64) = (9.0, 10.0);
pub const CROSS_AMP_RANGE: (f64, f64) = (3.0, 4.0);

impl PeakList {
    /// Frequency in cycles/sample of a bin.
    pub fn freq_of(&self, bin: usize) -> f64 {
        bin as f64 / self.n as f64
    }

    /// All occupied spectrum cells `(row, col)`: `(b, b)` per diagonal
    /// peak, `(b1, b2)` and `(b2, b1)` per cross pair.
    pub fn occupied_cells(&self) -> Vec<(usize, usize)> {
        let mut cells = Vec::with_capacity(self.diag.len() + 2 * self.cross.len());
        cells.extend(self.diag.iter().map(|p| (p.bin, p.bin)));
        for p in &self.cross {
            cells.push((p.bin1, p.bin2));
            cells.push((p.bin2, p.bin1));
        }
        cells
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::invalid("grid side must be >= 2"));
        }
        for p in &self.diag {
            if p.bin >= self.n {
                return Err(Error::invalid(format!("diagonal bin {} outside grid", p.bin)));
            }
        }
        for p in &self.cross {
            if p.bin1 >= self.n || p.bin2 >= self.n {
                return Err(Error::invalid(format!("cross bins ({}, {}) outside grid", p.bin1, p.bin2)));
            }
            if p.bin1 == p.bin2 {
                return Err(Error::invalid("cross peak bins must differ"));
            }
        }
        let mut cells = self.occupied_cells();
        cells.sort_unstable();
        let before = cells.len();
        cells.dedup();
        if cells.len() != before {
            return Err(Error::invalid("peak cells are not pairwise distinct"));
        }
        if !(self.decay_alpha >= 0.0) {
            return Err(Error::invalid("decay constant must be >= 0"));
        }
        Ok(())
    }
}

/// Draw a peak list: diagonal frequencies uniform on the bin grid,
/// cross-pair frequencies uniform on off-diagonal bin pairs, amplitudes
/// uniform in their ranges. Collisions between occupied cells are rejected
/// and redrawn, so every cell in the result is distinct.
pub fn make_peaklist(
    n: usize,
    diag_count: usize,
    cross_count: usize,
    decay_alpha: f64,
    seed: u64,
) -> Result<PeakList> {
    if n < 2 {
        return Err(Error::invalid("grid side must be >= 2"));
    }
    if diag_count > n {
        return Err(Error::invalid(format!(
            "{diag_count} diagonal peaks do not fit on a {n}-cell diagonal"
        )));
    }
    if 2 * cross_count > n * n - n {
        return Err(Error::invalid(format!(
            "{cross_count} cross pairs do not fit off the diagonal of a {n}x{n} grid"
        )));
    }
    if !(decay_alpha >= 0.0) {
        return Err(Error::invalid("decay constant must be >= 0"));
    }

    let mut rng = Rng::stream(seed, "peaklist", &[]);
    let mut used = std::collections::HashSet::new();
    let cap = 1000 * (diag_count + cross_count).max(1);
    let mut attempts = 0usize;

    let mut diag = Vec::with_capacity(diag_count);
    while diag.len() < diag_count {
        attempts += 1;
        if attempts > cap {
            return Err(Error::invalid("could not place distinct peaks (grid too crowded)"));
        }
        let bin = rng.below(n as u64) as usize;
        if used.insert((bin, bin)) {
            let amp = rng.uniform_in(DIAG_AMP_RANGE.0, DIAG_AMP_RANGE.1);
            diag.push(DiagPeak { bin, amp });
        }
    }

    let mut cross = Vec::with_capacity(cross_count);
    while cross.len() < cross_count {
        attempts += 1;
        if attempts > cap {
            return Err(Error::invalid("could not place distinct peaks (grid too crowded)"));
        }
        let bin1 = rng.below(n as u64) as usize;
        let bin2 = rng.below(n as u64) as usize;
        if bin1 == bin2 || used.contains(&(bin1, bin2)) || used.contains(&(bin2, bin1)) {
            continue;
        }
        used.insert((bin1, bin2));
        used.insert((bin2, bin1));
        let amp = rng.uniform_in(CROSS_AMP_RANGE.0, CROSS_AMP_RANGE.1);
        cross.push(CrossPeak { bin1, bin2, amp });
    }

    let pl = PeakList {
        n,
        diag,
        cross,
        decay_alpha,
        seed,
    };
    pl.validate()?;
    Ok(pl)
}

/// Peak list with the stock benchmark shape: 25 diagonal peaks in [9, 10],
/// 50 cross pairs in [3, 4], decay 0.001.
pub fn make_default_peaklist(n: usize, seed: u64) -> Result<PeakList> {
    make_peaklist(n, DEFAULT_DIAG_COUNT, DEFAULT_CROSS_COUNT, DEFAULT_DECAY_ALPHA, seed)
}

/// Per-axis factor `e(f, t) = exp(2*pi*i*f*t - decay*t)` for t = 1..=n.
fn axis_factors(n: usize, bin: usize, decay: f64) -> Vec<Complex64> {
    let f = bin as f64 / n as f64;
    (1..=n)
        .map(|t| {
            let t = t as f64;
            Complex64::from_polar((-decay * t).exp(), 2.0 * std::f64::consts::PI * f * t)
        })
        .collect()
}

/// Evaluate the time-domain grid of a peak list. The output is bitwise
/// symmetric.
pub fn synth_fid(pl: &PeakList) -> Result<ComplexGrid> {
    pl.validate()?;
    let n = pl.n;
    let mut g = ComplexGrid::zeros(n)?;
    for p in &pl.diag {
        let u = axis_factors(n, p.bin, pl.decay_alpha);
        let data = g.data_mut();
        for col in 0..n {
            for row in 0..n {
                // Multiply the axis factors before scaling: complex
                // multiplication commutes bitwise, so mirrored cells stay
                // exactly equal.
                data[col * n + row] += (u[row] * u[col]).scale(p.amp);
            }
        }
    }
    for p in &pl.cross {
        let u = axis_factors(n, p.bin1, pl.decay_alpha);
        let v = axis_factors(n, p.bin2, pl.decay_alpha);
        let data = g.data_mut();
        for col in 0..n {
            for row in 0..n {
                // Both members of the mirrored pair at once; the two
                // products are bitwise equal under swap of (row, col).
                let w = u[row] * v[col] + u[col] * v[row];
                data[col * n + row] += w.scale(p.amp);
            }
        }
    }
    Ok(g)
}

/// Scale a grid so its largest magnitude is 1.
pub fn normalize_max(g: &ComplexGrid) -> Result<ComplexGrid> {
    let m = g.max_abs();
    if m == 0.0 {
        return Err(Error::degenerate("cannot normalize an all-zero grid"));
    }
    Ok(g.scale(1.0 / m))
}

/// Additive Gaussian noise specification. `sigma` applies independently to
/// the real and imaginary part of every cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub sigma: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma >= 0.0) {
            return Err(Error::invalid(format!("sigma must be >= 0, got {}", self.sigma)));
        }
        Ok(())
    }
}

/// Add white Gaussian noise per component. `sigma = 0` returns the input
/// unchanged. The noisy grid is generally not symmetric.
pub fn add_noise(g: &ComplexGrid, ns: &NoiseSpec) -> Result<ComplexGrid> {
    ns.validate()?;
    if ns.sigma == 0.0 {
        return Ok(g.clone());
    }
    let mut rng = Rng::stream(ns.seed, "noise", &[]);
    let mut out = g.clone();
    for z in out.data_mut() {
        *z += Complex64::new(ns.sigma * rng.normal(), ns.sigma * rng.normal());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{asymmetry_residual, ft2d};

    #[test]
    fn default_peaklist_shape() {
        let pl = make_default_peaklist(256, 7).unwrap();
        assert_eq!(pl.diag.len(), 25);
        assert_eq!(pl.cross.len(), 50);
        let mut cells = pl.occupied_cells();
        assert_eq!(cells.len(), 125);
        cells.sort_unstable();
        cells.dedup();
        assert_eq!(cells.len(), 125);
        for p in &pl.diag {
            assert!((9.0..10.0).contains(&p.amp));
        }
        for p in &pl.cross {
            assert!((3.0..4.0).contains(&p.amp));
            assert_ne!(p.bin1, p.bin2);
        }
    }

    #[test]
    fn single_diag_peaklist() {
        let pl = make_peaklist(16, 1, 0, 0.0, 3).unwrap();
        assert_eq!(pl.diag.len(), 1);
        assert!(pl.cross.is_empty());
    }

    #[test]
    fn peaklist_deterministic() {
        assert_eq!(make_default_peaklist(64, 5).unwrap(), make_default_peaklist(64, 5).unwrap());
    }

    #[test]
    fn peaklist_capacity_errors() {
        assert!(make_peaklist(4, 5, 0, 0.0, 0).is_err());
        assert!(make_peaklist(4, 0, 7, 0.0, 0).is_err());
    }

    #[test]
    fn fid_is_bitwise_symmetric() {
        let pl = make_default_peaklist(64, 11).unwrap();
        let w = synth_fid(&pl).unwrap();
        assert_eq!(asymmetry_residual(&w), 0.0);
    }

    #[test]
    fn undecayed_single_diag_peak_has_unit_modulus() {
        let pl = PeakList {
            n: 16,
            diag: vec![DiagPeak { bin: 3, amp: 1.0 }],
            cross: vec![],
            decay_alpha: 0.0,
            seed: 0,
        };
        let w = synth_fid(&pl).unwrap();
        for z in w.data() {
            assert!((z.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn cross_pair_decay_ratio_matches_closed_form() {
        let n = 32;
        let alpha = 0.001;
        let pl = PeakList {
            n,
            diag: vec![],
            cross: vec![CrossPeak {
                bin1: 3,
                bin2: 9,
                amp: 1.0,
            }],
            decay_alpha: alpha,
            seed: 0,
        };
        let w = synth_fid(&pl).unwrap();
        // |W(1,1)| / |W(n,n)| = exp(2 * alpha * (n - 1)) for a pure pair:
        // each factor decays as exp(-alpha * t) on both axes.
        let ratio = w.get(0, 0).norm() / w.get(n - 1, n - 1).norm();
        let expected = (2.0 * alpha * (n - 1) as f64).exp();
        assert!(
            (ratio - expected).abs() <= 1e-9 * expected,
            "ratio {ratio} vs {expected}"
        );
    }

    #[test]
    fn spectrum_peaks_land_on_nominal_bins() {
        let pl = PeakList {
            n: 32,
            diag: vec![DiagPeak { bin: 5, amp: 9.5 }],
            cross: vec![CrossPeak {
                bin1: 12,
                bin2: 25,
                amp: 3.5,
            }],
            decay_alpha: 0.001,
            seed: 0,
        };
        let spec = ft2d(&synth_fid(&pl).unwrap());
        let n = pl.n;
        for (pi, pj) in pl.occupied_cells() {
            let center = spec.get(pi, pj).norm();
            for di in [n - 1, 0, 1] {
                for dj in [n - 1, 0, 1] {
                    if di == 0 && dj == 0 {
                        continue;
                    }
                    let neighbor = spec.get((pi + di) % n, (pj + dj) % n).norm();
                    assert!(neighbor < center, "peak ({pi},{pj}) not a local max");
                }
            }
        }
    }

    #[test]
    fn normalize_examples() {
        let pl = make_default_peaklist(32, 2).unwrap();
        let w = synth_fid(&pl).unwrap();
        let bar = normalize_max(&w).unwrap();
        assert!((bar.max_abs() - 1.0).abs() < 1e-12);
        // Idempotent up to rounding, symmetry preserved exactly.
        let again = normalize_max(&bar).unwrap();
        let drift: f64 = bar
            .data()
            .iter()
            .zip(again.data())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(drift <= 1e-15);
        assert_eq!(asymmetry_residual(&bar), 0.0);
        // Degenerate input.
        assert!(normalize_max(&ComplexGrid::zeros(4).unwrap()).is_err());
    }

    #[test]
    fn noise_zero_sigma_is_identity() {
        let pl = make_default_peaklist(32, 9).unwrap();
        let w = synth_fid(&pl).unwrap();
        let out = add_noise(&w, &NoiseSpec { sigma: 0.0, seed: 1 }).unwrap();
        assert_eq!(out, w);
    }

    #[test]
    fn noise_component_std_matches_sigma() {
        let g = ComplexGrid::zeros(256).unwrap();
        let sigma = 1e-3;
        let out = add_noise(&g, &NoiseSpec { sigma, seed: 8 }).unwrap();
        let n2 = (256 * 256) as f64;
        let mean: f64 = out.data().iter().map(|z| z.re).sum::<f64>() / n2;
        let var: f64 = out.data().iter().map(|z| (z.re - mean).powi(2)).sum::<f64>() / n2;
        let std = var.sqrt();
        assert!((std - sigma).abs() <= 0.02 * sigma, "std={std}");
    }

    #[test]
    fn noise_deterministic() {
        let pl = make_default_peaklist(32, 10).unwrap();
        let w = synth_fid(&pl).unwrap();
        let spec = NoiseSpec { sigma: 1e-3, seed: 4 };
        assert_eq!(add_noise(&w, &spec).unwrap(), add_noise(&w, &spec).unwrap());
    }
}
