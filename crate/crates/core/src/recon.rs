//! Compressed-sensing reconstruction.
//!
//! Two solvers recover a sparse spectrum `X` from measurement data
//! `(omega, y)` under the forward model `gather(ift2d(X), omega) ~ y`:
//!
//! * [`istd_reconstruct`] — greedy iterative soft thresholding with a
//!   linearly shrinking threshold. Each pass moves the above-threshold part
//!   of the residual spectrum into the accumulator; the threshold reaches
//!   zero on the final pass, which absorbs the remaining residual spectrum
//!   outright.
//! * [`l1_reconstruct`] — accelerated proximal gradient for the convex
//!   objective `0.5 * ||gather(ift2d(X)) - y||^2 + lambda * ||X||_1`, with
//!   monotone (objective-gated) acceleration and restart. The forward
//!   operator is a restriction of a unitary map, so the step size is fixed
//!   at 1.
//!
//! Both solvers are deterministic functions of their inputs; there is no
//! randomness in this module. When the measurement index set is
//! transpose-closed and mirrored samples are equal (symmetric-copy
//! schedules), every iterate of either solver is symmetric up to floating
//! rounding, and so is the output.

use std::time::Instant;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{ComplexGrid, Fft2};
use crate::sampling::{gather, scatter, NusData};

/// Iterative soft-thresholding configuration.
#[derive(Debug, Clone)]
pub struct IstdConfig {
    /// Iteration cap. The threshold schedule runs the loop for counters
    /// `0..=maxt`, so up to `maxt + 1` update passes happen.
    pub maxt: usize,
    /// Stop when the data residual l2-norm falls to this level.
    pub eps: f64,
    /// Threshold multiplier applied to the residual-spectrum peak, 0.99 by
    /// default.
    pub shrink_factor: f64,
}

impl Default for IstdConfig {
    fn default() -> Self {
        IstdConfig {
            maxt: 200,
            eps: 0.0,
            shrink_factor: 0.99,
        }
    }
}

impl IstdConfig {
    /// Default configuration with the residual tolerance scaled to the
    /// data: `eps = 1e-6 * ||y||_2`.
    pub fn defaults_for(nus: &NusData) -> Self {
        IstdConfig {
            eps: 1e-6 * l2_vec(nus.y()),
            ..IstdConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.maxt < 1 {
            return Err(Error::invalid("maxt must be >= 1"));
        }
        if !(self.eps >= 0.0) {
            return Err(Error::invalid(format!("eps must be >= 0, got {}", self.eps)));
        }
        if !(self.shrink_factor > 0.0 && self.shrink_factor < 1.0) {
            return Err(Error::invalid(format!(
                "shrink_factor must be in (0, 1), got {}",
                self.shrink_factor
            )));
        }
        Ok(())
    }
}

/// l1-regularized solver configuration.
#[derive(Debug, Clone)]
pub struct L1SolverConfig {
    /// Regularization weight.
    pub lambda: f64,
    pub max_iters: usize,
    /// Stop when the relative objective change falls below this.
    pub rel_obj_tol: f64,
}

impl Default for L1SolverConfig {
    fn default() -> Self {
        L1SolverConfig {
            lambda: 0.001,
            max_iters: 500,
            rel_obj_tol: 1e-9,
        }
    }
}

impl L1SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0) {
            return Err(Error::invalid(format!("lambda must be > 0, got {}", self.lambda)));
        }
        if self.max_iters < 1 {
            return Err(Error::invalid("max_iters must be >= 1"));
        }
        if !(self.rel_obj_tol > 0.0) {
            return Err(Error::invalid(format!(
                "rel_obj_tol must be > 0, got {}",
                self.rel_obj_tol
            )));
        }
        Ok(())
    }
}

/// One row of a solver trace: iteration counter, the iteration's threshold
/// (IST) or objective value (l1), and the data residual l2-norm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub iter: usize,
    pub value: f64,
    pub residual: f64,
}

/// Solver output.
#[derive(Debug, Clone)]
pub struct ReconResult {
    pub spectrum: ComplexGrid,
    /// Number of update passes performed.
    pub iterations: usize,
    /// Final `||gather(ift2d(X)) - y||_2`.
    pub final_residual: f64,
    pub wall_time_s: f64,
    pub trace: Vec<TraceRow>,
}

/// Complex soft threshold, elementwise: zero where `|z| <= beta`, otherwise
/// `z` shrunk toward zero by `beta` along its phase.
pub fn shr(g: &ComplexGrid, beta: f64) -> Result<ComplexGrid> {
    if !beta.is_finite() || beta < 0.0 {
        return Err(Error::invalid(format!("threshold must be finite and >= 0, got {beta}")));
    }
    let mut out = g.clone();
    shr_in_place(&mut out, beta);
    Ok(out)
}

fn shr_in_place(g: &mut ComplexGrid, beta: f64) {
    if beta == 0.0 {
        return;
    }
    for z in g.data_mut() {
        let m = z.norm();
        *z = if m <= beta {
            Complex64::new(0.0, 0.0)
        } else {
            z.scale(1.0 - beta / m)
        };
    }
}

fn l2_vec(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn l1_grid(g: &ComplexGrid) -> f64 {
    g.data().iter().map(|z| z.norm()).sum()
}

/// Greedy IST reconstruction; see the module docs for the update scheme.
pub fn istd_reconstruct(nus: &NusData, cfg: &IstdConfig) -> Result<ReconResult> {
    istd_reconstruct_observed(nus, cfg, |_, _, _| {})
}

/// [`istd_reconstruct`] with a per-iteration observer.
///
/// The observer receives `(t, X^t, S^t)` for every iterate including the
/// initial one, which is how the iterate-symmetry guarantees are checked in
/// the test suite.
pub fn istd_reconstruct_observed(
    nus: &NusData,
    cfg: &IstdConfig,
    mut observer: impl FnMut(usize, &ComplexGrid, &ComplexGrid),
) -> Result<ReconResult> {
    cfg.validate()?;
    let start = Instant::now();
    let n = nus.n();
    let omega = nus.omega();
    let y = nus.y();

    let mut x = ComplexGrid::zeros(n)?;
    if y.iter().all(|z| *z == Complex64::new(0.0, 0.0)) {
        return Ok(ReconResult {
            spectrum: x,
            iterations: 0,
            final_residual: 0.0,
            wall_time_s: start.elapsed().as_secs_f64(),
            trace: Vec::new(),
        });
    }

    let mut fft = Fft2::new(n);
    let mut s = fft.forward(&scatter(omega, y, n)?);
    let mut residual: Vec<Complex64> = y.to_vec();
    let mut res_l2 = l2_vec(&residual);
    let mut trace = Vec::new();
    let mut t = 0usize;

    observer(t, &x, &s);
    while t <= cfg.maxt && res_l2 > cfg.eps {
        let beta =
            cfg.shrink_factor * s.max_abs() * (cfg.maxt - t) as f64 / cfg.maxt as f64;
        let mut increment = s.clone();
        shr_in_place(&mut increment, beta);
        x.add_assign(&increment);

        let xt = fft.inverse(&x);
        let fitted = gather(&xt, omega)?;
        for (r, (yv, fv)) in residual.iter_mut().zip(y.iter().zip(&fitted)) {
            *r = yv - fv;
        }
        res_l2 = l2_vec(&residual);
        s = fft.forward(&scatter(omega, &residual, n)?);

        t += 1;
        trace.push(TraceRow {
            iter: t,
            value: beta,
            residual: res_l2,
        });
        observer(t, &x, &s);
    }

    Ok(ReconResult {
        spectrum: x,
        iterations: t,
        final_residual: res_l2,
        wall_time_s: start.elapsed().as_secs_f64(),
        trace,
    })
}

/// l1-regularized reconstruction by accelerated proximal gradient.
pub fn l1_reconstruct(nus: &NusData, cfg: &L1SolverConfig) -> Result<ReconResult> {
    cfg.validate()?;
    let start = Instant::now();
    let n = nus.n();
    let omega = nus.omega();
    let y = nus.y();

    if y.iter().all(|z| *z == Complex64::new(0.0, 0.0)) {
        return Ok(ReconResult {
            spectrum: ComplexGrid::zeros(n)?,
            iterations: 0,
            final_residual: 0.0,
            wall_time_s: start.elapsed().as_secs_f64(),
            trace: Vec::new(),
        });
    }

    let mut fft = Fft2::new(n);

    // residual(X) = gather(ift2d(X)) - y
    let residual_of = |fft: &mut Fft2, g: &ComplexGrid| -> Vec<Complex64> {
        let time_domain = fft.inverse(g);
        gather(&time_domain, omega)
            .expect("omega validated by NusData")
            .iter()
            .zip(y)
            .map(|(f, yv)| f - yv)
            .collect()
    };

    let mut x = ComplexGrid::zeros(n)?;
    let mut z = x.clone();
    let mut momentum = 1.0f64;

    let y_l2 = l2_vec(y);
    let mut obj = 0.5 * y_l2 * y_l2; // objective at X = 0
    let mut res_l2 = y_l2;
    let mut trace = Vec::new();
    let mut iterations = 0usize;

    for iter in 1..=cfg.max_iters {
        iterations = iter;

        // Proximal gradient step from the extrapolated point.
        let rz = residual_of(&mut fft, &z);
        let grad = fft.forward(&scatter(omega, &rz, n)?);
        let mut candidate = z.clone();
        for (c, g) in candidate.data_mut().iter_mut().zip(grad.data()) {
            *c -= g;
        }
        shr_in_place(&mut candidate, cfg.lambda);

        let cand_res = residual_of(&mut fft, &candidate);
        let cand_res_l2 = l2_vec(&cand_res);
        let cand_obj = 0.5 * cand_res_l2 * cand_res_l2 + cfg.lambda * l1_grid(&candidate);

        let next_momentum = 0.5 * (1.0 + (1.0 + 4.0 * momentum * momentum).sqrt());
        if cand_obj <= obj {
            // Accept, then extrapolate past the new iterate.
            let scale = (momentum - 1.0) / next_momentum;
            z = candidate.clone();
            for (zv, prev) in z.data_mut().iter_mut().zip(x.data()) {
                *zv += (*zv - prev).scale(scale);
            }
            x = candidate;
            momentum = next_momentum;
            let change = (obj - cand_obj).abs();
            let stop = change <= cfg.rel_obj_tol * obj.max(f64::MIN_POSITIVE);
            obj = cand_obj;
            res_l2 = cand_res_l2;
            trace.push(TraceRow {
                iter,
                value: obj,
                residual: res_l2,
            });
            if stop {
                break;
            }
        } else if momentum == 1.0 {
            // A pure proximal step from the current iterate cannot improve
            // the objective: stationary point reached.
            trace.push(TraceRow {
                iter,
                value: obj,
                residual: res_l2,
            });
            break;
        } else {
            // Objective went up under momentum: drop the candidate and
            // restart the momentum sequence from the current iterate.
            momentum = 1.0;
            z = x.clone();
            trace.push(TraceRow {
                iter,
                value: obj,
                residual: res_l2,
            });
        }
    }

    Ok(ReconResult {
        spectrum: x,
        iterations,
        final_residual: res_l2,
        wall_time_s: start.elapsed().as_secs_f64(),
        trace,
    })
}

/// The l1 solver objective at `x` for measurement data `(omega, y)`.
pub fn l1_objective(x: &ComplexGrid, nus: &NusData, lambda: f64) -> f64 {
    let time_domain = crate::grid::ift2d(x);
    let fitted = gather(&time_domain, nus.omega()).expect("omega validated by NusData");
    let res: f64 = fitted
        .iter()
        .zip(nus.y())
        .map(|(f, yv)| (f - yv).norm_sqr())
        .sum();
    0.5 * res + lambda * l1_grid(x)
}
