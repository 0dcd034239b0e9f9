//! Recovery metrics and the Monte Carlo schedule-comparison harness.
//!
//! A benchmark cell is one `(trial, schedule, rate, sigma)` tuple. Each cell
//! synthesizes a normalized symmetric grid from trial-derived seeds, adds
//! noise, samples it with the requested schedule, reconstructs, and scores
//! diagonal and cross peaks separately against the noiseless fully-sampled
//! reference spectrum. Cells are pure functions of the configuration and
//! their derived seeds, so the harness may run them on any number of
//! workers and still produce the same table as a sequential run.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{ft2d, ComplexGrid};
use crate::recon::{istd_reconstruct, l1_reconstruct, IstdConfig, L1SolverConfig, ReconResult};
use crate::rng::derive_seed;
use crate::sampling::{
    build_nusdata, random_2d, scpg_generate, woven_pg_2d, Schedule, ScheduleKind,
};
use crate::synth::{make_peaklist, normalize_max, synth_fid, NoiseSpec, PeakList};
use crate::synth::{add_noise, DEFAULT_CROSS_COUNT, DEFAULT_DECAY_ALPHA, DEFAULT_DIAG_COUNT};

/// Relative l2-norm error `||x_hat - x||_2 / ||x||_2`.
pub fn rlne(x_hat: &[f64], x: &[f64]) -> Result<f64> {
    if x.len() != x_hat.len() {
        return Err(Error::invalid(format!(
            "length mismatch: {} vs {}",
            x_hat.len(),
            x.len()
        )));
    }
    if x.is_empty() {
        return Err(Error::invalid("empty vectors"));
    }
    let denom: f64 = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if denom == 0.0 {
        return Err(Error::degenerate("reference vector has zero norm"));
    }
    let num: f64 = x_hat
        .iter()
        .zip(x)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    Ok(num / denom)
}

/// Which peak class to read.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PeakClass {
    Diag,
    Cross,
}

impl PeakClass {
    pub fn as_str(self) -> &'static str {
        match self {
            PeakClass::Diag => "diag",
            PeakClass::Cross => "cross",
        }
    }
}

/// Magnitudes at the nominal peak bins of one class, in peak-list order.
/// Cross peaks contribute both mirrored cells, `(b1, b2)` then `(b2, b1)`.
pub fn peak_amplitudes(spectrum: &ComplexGrid, pl: &PeakList, class: PeakClass) -> Vec<f64> {
    match class {
        PeakClass::Diag => pl
            .diag
            .iter()
            .map(|p| spectrum.get(p.bin, p.bin).norm())
            .collect(),
        PeakClass::Cross => pl
            .cross
            .iter()
            .flat_map(|p| {
                [
                    spectrum.get(p.bin1, p.bin2).norm(),
                    spectrum.get(p.bin2, p.bin1).norm(),
                ]
            })
            .collect(),
    }
}

pub const DEFAULT_PEAK_FLOOR: f64 = 5.0;

/// Detect local maxima of the spectrum magnitude and integrate over a
/// `w x w` window with periodic wraparound, using the default floor of
/// [`DEFAULT_PEAK_FLOOR`] times the median magnitude.
pub fn integrate_peaks(spectrum: &ComplexGrid, window_w: usize) -> Result<Vec<((usize, usize), f64)>> {
    integrate_peaks_with_floor(spectrum, window_w, DEFAULT_PEAK_FLOOR)
}

/// [`integrate_peaks`] with an explicit floor multiplier on the median
/// magnitude. Cells strictly greater than all eight wrapped neighbors and
/// above the floor count as peaks; results come back in canonical cell
/// order.
pub fn integrate_peaks_with_floor(
    spectrum: &ComplexGrid,
    window_w: usize,
    floor_multiplier: f64,
) -> Result<Vec<((usize, usize), f64)>> {
    if window_w % 2 == 0 || window_w == 0 {
        return Err(Error::invalid(format!("window width must be odd, got {window_w}")));
    }
    let n = spectrum.n();
    let mut mags: Vec<f64> = spectrum.data().iter().map(|z| z.norm()).collect();
    let mag = |i: usize, j: usize| mags[j * n + i];

    let floor = {
        let mut sorted = mags.clone();
        sorted.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
        let mid = sorted.len() / 2;
        let median = if sorted.len() % 2 == 0 {
            0.5 * (sorted[mid - 1] + sorted[mid])
        } else {
            sorted[mid]
        };
        floor_multiplier * median
    };

    let half = window_w / 2;
    let mut out = Vec::new();
    for col in 0..n {
        for row in 0..n {
            let center = mag(row, col);
            if center <= floor {
                continue;
            }
            let mut is_peak = true;
            'nb: for di in [n - 1, 0, 1] {
                for dj in [n - 1, 0, 1] {
                    if di == 0 && dj == 0 {
                        continue;
                    }
                    if mag((row + di) % n, (col + dj) % n) >= center {
                        is_peak = false;
                        break 'nb;
                    }
                }
            }
            if !is_peak {
                continue;
            }
            let mut sum = 0.0;
            for di in 0..window_w {
                for dj in 0..window_w {
                    sum += mag((row + n + di - half) % n, (col + n + dj - half) % n);
                }
            }
            out.push(((row, col), sum));
        }
    }
    mags.clear();
    Ok(out)
}

/// Ordinary least squares `y ~ a*x + b`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<(f64, f64)> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::invalid("fit needs two equal-length vectors of length >= 2"));
    }
    let n = x.len() as f64;
    let sx: f64 = x.iter().sum();
    let sy: f64 = y.iter().sum();
    let sxx: f64 = x.iter().map(|v| v * v).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let denom = n * sxx - sx * sx;
    if denom == 0.0 {
        return Err(Error::degenerate("zero variance in x"));
    }
    let a = (n * sxy - sx * sy) / denom;
    let b = (sy - a * sx) / n;
    Ok((a, b))
}

/// Pearson product-moment correlation.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::invalid("correlation needs two equal-length vectors of length >= 2"));
    }
    let n = x.len() as f64;
    let sx: f64 = x.iter().sum();
    let sy: f64 = y.iter().sum();
    let sxx: f64 = x.iter().map(|v| v * v).sum();
    let syy: f64 = y.iter().map(|v| v * v).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let vx = n * sxx - sx * sx;
    let vy = n * syy - sy * sy;
    if vx == 0.0 || vy == 0.0 {
        return Err(Error::degenerate("zero variance"));
    }
    Ok((n * sxy - sx * sy) / (vx.sqrt() * vy.sqrt()))
}

/// Which solver the harness runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverKind {
    Istd,
    L1,
}

impl SolverKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SolverKind::Istd => "istd",
            SolverKind::L1 => "l1",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "istd" => Ok(SolverKind::Istd),
            "l1" => Ok(SolverKind::L1),
            other => Err(Error::format(format!("unknown solver `{other}`"))),
        }
    }
}

impl std::fmt::Display for SolverKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Monte Carlo sweep configuration.
#[derive(Debug, Clone)]
pub struct MonteCarloConfig {
    pub trials: usize,
    pub n: usize,
    /// Sampled fractions of the grid; converted to exact counts by ceiling.
    pub nus_rates: Vec<f64>,
    pub noise_sigmas: Vec<f64>,
    pub schedules: Vec<ScheduleKind>,
    pub solver: SolverKind,
    pub base_seed: u64,
    pub diag_count: usize,
    pub cross_count: usize,
    pub decay_alpha: f64,
    pub theta: f64,
    pub istd_maxt: usize,
    pub istd_shrink: f64,
    /// Residual tolerance as a fraction of `||y||_2`.
    pub istd_eps_rel: f64,
    pub l1_lambda: f64,
    pub l1_max_iters: usize,
    pub l1_tol: f64,
}

impl MonteCarloConfig {
    /// Stock configuration: one rate/sigma cell per trial, greedy solver.
    pub fn new(n: usize, base_seed: u64) -> Self {
        MonteCarloConfig {
            trials: 10,
            n,
            nus_rates: vec![0.05],
            noise_sigmas: vec![1e-3],
            schedules: vec![ScheduleKind::Random, ScheduleKind::WovenPg, ScheduleKind::Scpg],
            solver: SolverKind::Istd,
            base_seed,
            diag_count: DEFAULT_DIAG_COUNT,
            cross_count: DEFAULT_CROSS_COUNT,
            decay_alpha: DEFAULT_DECAY_ALPHA,
            theta: crate::sampling::THETA_PI,
            istd_maxt: 200,
            istd_shrink: 0.99,
            istd_eps_rel: 1e-6,
            l1_lambda: 0.001,
            l1_max_iters: 500,
            l1_tol: 1e-9,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials < 1 {
            return Err(Error::invalid("trials must be >= 1"));
        }
        if self.n < 2 {
            return Err(Error::invalid("grid side must be >= 2"));
        }
        if self.nus_rates.is_empty() || self.noise_sigmas.is_empty() || self.schedules.is_empty() {
            return Err(Error::invalid("rates, sigmas and schedules must be non-empty"));
        }
        for &r in &self.nus_rates {
            if !(r > 0.0 && r <= 1.0) {
                return Err(Error::invalid(format!("rate {r} outside (0, 1]")));
            }
        }
        for &s in &self.noise_sigmas {
            if !(s >= 0.0) {
                return Err(Error::invalid(format!("sigma {s} must be >= 0")));
            }
        }
        Ok(())
    }

    /// Exact acquired-point count for a rate on this grid.
    pub fn count_for_rate(&self, rate: f64) -> usize {
        (rate * (self.n * self.n) as f64).ceil() as usize
    }
}

/// Per-class recovery metrics of one reconstruction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassMetrics {
    pub rlne: f64,
    pub fit_a: f64,
    pub fit_b: f64,
    pub pearson_r: f64,
}

/// Metrics of one reconstruction, both peak classes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalReport {
    pub diag: ClassMetrics,
    pub cross: ClassMetrics,
    pub iterations: usize,
    pub wall_time_s: f64,
}

/// Everything produced by one benchmark cell.
#[derive(Debug, Clone)]
pub struct CellOutcome {
    pub spectrum: ComplexGrid,
    pub peaks: PeakList,
    pub report: EvalReport,
}

/// One row of the results table; `metrics` is `None` when the cell failed.
#[derive(Debug, Clone)]
pub struct EvalRow {
    pub trial: usize,
    pub schedule: ScheduleKind,
    pub solver: SolverKind,
    pub n: usize,
    pub rate: f64,
    pub sigma: f64,
    pub class: PeakClass,
    pub metrics: Option<ClassMetrics>,
    pub iterations: usize,
    pub wall_time_s: f64,
}

/// Stable per-kind id used in seed derivation, independent of the order
/// schedules are listed in the configuration.
fn kind_id(kind: ScheduleKind) -> u64 {
    match kind {
        ScheduleKind::Random => 0,
        ScheduleKind::WovenPg => 1,
        ScheduleKind::Scpg => 2,
    }
}

/// Ground-truth peak list of a trial.
pub fn trial_peaklist(cfg: &MonteCarloConfig, trial: usize) -> Result<PeakList> {
    make_peaklist(
        cfg.n,
        cfg.diag_count,
        cfg.cross_count,
        cfg.decay_alpha,
        derive_seed(cfg.base_seed, "trial-peaks", &[trial as u64]),
    )
}

/// Schedule for one `(trial, kind, rate)` cell. The seed depends on the
/// exact count rather than list positions, so adding rates or schedules to
/// a configuration does not reshuffle the others.
pub fn trial_schedule(
    cfg: &MonteCarloConfig,
    trial: usize,
    kind: ScheduleKind,
    rate: f64,
) -> Result<Schedule> {
    let count = cfg.count_for_rate(rate);
    let seed = derive_seed(cfg.base_seed, "trial-sched", &[trial as u64, kind_id(kind), count as u64]);
    match kind {
        ScheduleKind::Random => random_2d(cfg.n, count, seed),
        ScheduleKind::WovenPg => woven_pg_2d(cfg.n, count, cfg.theta, seed),
        ScheduleKind::Scpg => scpg_generate(cfg.n, count, cfg.theta, seed),
    }
}

/// Run one benchmark cell end to end.
pub fn run_cell(
    cfg: &MonteCarloConfig,
    trial: usize,
    kind: ScheduleKind,
    rate: f64,
    sigma: f64,
) -> Result<CellOutcome> {
    let peaks = trial_peaklist(cfg, trial)?;
    let clean = normalize_max(&synth_fid(&peaks)?)?;
    let reference = ft2d(&clean);
    let ref_diag = peak_amplitudes(&reference, &peaks, PeakClass::Diag);
    let ref_cross = peak_amplitudes(&reference, &peaks, PeakClass::Cross);

    let noisy = add_noise(
        &clean,
        &NoiseSpec {
            sigma,
            seed: derive_seed(cfg.base_seed, "trial-noise", &[trial as u64, sigma.to_bits()]),
        },
    )?;
    let schedule = trial_schedule(cfg, trial, kind, rate)?;
    let nus = build_nusdata(&noisy, &schedule)?;

    let result: ReconResult = match cfg.solver {
        SolverKind::Istd => {
            let y_l2 = nus.y().iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            istd_reconstruct(
                &nus,
                &IstdConfig {
                    maxt: cfg.istd_maxt,
                    eps: cfg.istd_eps_rel * y_l2,
                    shrink_factor: cfg.istd_shrink,
                },
            )?
        }
        SolverKind::L1 => l1_reconstruct(
            &nus,
            &L1SolverConfig {
                lambda: cfg.l1_lambda,
                max_iters: cfg.l1_max_iters,
                rel_obj_tol: cfg.l1_tol,
            },
        )?,
    };

    let class_metrics = |reference: &[f64], recovered: &[f64]| -> Result<ClassMetrics> {
        let (fit_a, fit_b) = linear_fit(reference, recovered)?;
        Ok(ClassMetrics {
            rlne: rlne(recovered, reference)?,
            fit_a,
            fit_b,
            pearson_r: pearson(reference, recovered)?,
        })
    };
    let rec_diag = peak_amplitudes(&result.spectrum, &peaks, PeakClass::Diag);
    let rec_cross = peak_amplitudes(&result.spectrum, &peaks, PeakClass::Cross);
    let report = EvalReport {
        diag: class_metrics(&ref_diag, &rec_diag)?,
        cross: class_metrics(&ref_cross, &rec_cross)?,
        iterations: result.iterations,
        wall_time_s: result.wall_time_s,
    };
    Ok(CellOutcome {
        spectrum: result.spectrum,
        peaks,
        report,
    })
}

/// Run the whole sweep. Cells execute in parallel on the current rayon
/// pool; the returned rows are in deterministic order (trial-major, then
/// schedules, rates and sigmas in configuration order, diagonal before
/// cross) and are identical to a sequential run apart from wall times.
///
/// A failing cell contributes two flagged rows (empty metrics) instead of
/// aborting the sweep.
pub fn run_monte_carlo(cfg: &MonteCarloConfig) -> Result<Vec<EvalRow>> {
    cfg.validate()?;
    let mut units = Vec::new();
    for trial in 0..cfg.trials {
        for &kind in &cfg.schedules {
            for &rate in &cfg.nus_rates {
                for &sigma in &cfg.noise_sigmas {
                    units.push((trial, kind, rate, sigma));
                }
            }
        }
    }
    let rows: Vec<EvalRow> = units
        .par_iter()
        .flat_map_iter(|&(trial, kind, rate, sigma)| {
            let outcome = run_cell(cfg, trial, kind, rate, sigma);
            let (diag, cross, iterations, wall) = match outcome {
                Ok(cell) => (
                    Some(cell.report.diag),
                    Some(cell.report.cross),
                    cell.report.iterations,
                    cell.report.wall_time_s,
                ),
                Err(_) => (None, None, 0, 0.0),
            };
            let base = EvalRow {
                trial,
                schedule: kind,
                solver: cfg.solver,
                n: cfg.n,
                rate,
                sigma,
                class: PeakClass::Diag,
                metrics: diag,
                iterations,
                wall_time_s: wall,
            };
            let mut cross_row = base.clone();
            cross_row.class = PeakClass::Cross;
            cross_row.metrics = cross;
            [base, cross_row].into_iter()
        })
        .collect();
    Ok(rows)
}

pub const RESULTS_CSV_HEADER: &str =
    "trial,schedule,solver,n,rate,sigma,class,rlne,fit_a,fit_b,pearson_r,iterations,wall_time_s";

/// Render rows as CSV, header included.
pub fn rows_to_csv(rows: &[EvalRow]) -> String {
    let mut out = String::from(RESULTS_CSV_HEADER);
    out.push('\n');
    for r in rows {
        let m = r.metrics.unwrap_or(ClassMetrics {
            rlne: f64::NAN,
            fit_a: f64::NAN,
            fit_b: f64::NAN,
            pearson_r: f64::NAN,
        });
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            r.trial,
            r.schedule,
            r.solver,
            r.n,
            r.rate,
            r.sigma,
            r.class.as_str(),
            m.rlne,
            m.fit_a,
            m.fit_b,
            m.pearson_r,
            r.iterations,
            r.wall_time_s
        ));
    }
    out
}
