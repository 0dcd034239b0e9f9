//! NUS schedule generation and the sampling operator.
//!
//! Three schedule families are provided:
//!
//! * [`random_2d`] — uniform sampling without replacement;
//! * [`woven_pg_2d`] — a Poisson-gap process run over a serpentine
//!   anti-diagonal traversal of the grid, with the gap mean modulated by a
//!   sinusoid in the anti-diagonal index;
//! * [`scpg_generate`] — Poisson-gap selection over mirror-pair indices.
//!   Each selected off-diagonal pair contributes one physically acquired
//!   point (chosen by a fair coin) and one copy destination at its mirror
//!   cell, so the filled index set is closed under transposition.
//!
//! All generators hit their target counts exactly: the gap-scale constant is
//! calibrated by bisection, regenerating each probe from a seed derived from
//! `(seed, attempt)`. Identical inputs and seed produce bitwise-identical
//! schedules.

use std::collections::BTreeMap;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::ComplexGrid;
use crate::rng::Rng;

/// Upper bound for the modulation angle: full half-wave (dense at both ends
/// of the traversal).
pub const THETA_PI: f64 = std::f64::consts::PI;
/// Quarter-wave modulation (dense at the start only).
pub const THETA_HALF_PI: f64 = std::f64::consts::FRAC_PI_2;

/// Poisson draws above this rate are split into partial draws so the
/// sequential-search inversion never underflows `exp(-alpha)`.
const POISSON_CHUNK: f64 = 500.0;
/// Knuth's product method is exact and fast for small rates.
const POISSON_KNUTH_MAX: f64 = 30.0;
const CALIBRATION_PROBES: u32 = 64;

/// One draw from `Pois(alpha)`. `alpha = 0` returns 0 deterministically.
pub fn poisson_sample(alpha: f64, rng: &mut Rng) -> Result<u64> {
    if !alpha.is_finite() || alpha < 0.0 {
        return Err(Error::invalid(format!("poisson rate must be finite and >= 0, got {alpha}")));
    }
    if alpha == 0.0 {
        return Ok(0);
    }
    let mut total = 0u64;
    let mut remaining = alpha;
    while remaining > POISSON_CHUNK {
        total += poisson_search(POISSON_CHUNK, rng);
        remaining -= POISSON_CHUNK;
    }
    total += if remaining <= POISSON_KNUTH_MAX {
        poisson_knuth(remaining, rng)
    } else {
        poisson_search(remaining, rng)
    };
    Ok(total)
}

/// Knuth's exponential-product method.
fn poisson_knuth(alpha: f64, rng: &mut Rng) -> u64 {
    let limit = (-alpha).exp();
    let mut k = 0u64;
    let mut p = 1.0;
    loop {
        p *= rng.uniform();
        if p <= limit {
            return k;
        }
        k += 1;
    }
}

/// Inversion by sequential search over the CDF.
fn poisson_search(alpha: f64, rng: &mut Rng) -> u64 {
    let u = rng.uniform();
    let mut k = 0u64;
    let mut p = (-alpha).exp();
    let mut cdf = p;
    // Hard stop far in the tail; unreachable for alpha <= POISSON_CHUNK.
    let cap = (alpha + 20.0 * alpha.sqrt() + 100.0) as u64;
    while u > cdf && k < cap {
        k += 1;
        p *= alpha / k as f64;
        cdf += p;
    }
    k
}

/// Configuration of a 1D Poisson-gap run.
#[derive(Debug, Clone)]
pub struct PgConfig {
    /// Length of the traversal the gap process runs over.
    pub n_max: usize,
    /// Sinusoid upper bound; [`THETA_PI`] or [`THETA_HALF_PI`].
    pub theta: f64,
    /// Upper bound for the gap-scale calibration search; 0 selects the
    /// default `4 * n_max / target`.
    pub gamma: f64,
    /// Exact number of indices to emit.
    pub target: usize,
    pub seed: u64,
}

impl PgConfig {
    pub fn new(n_max: usize, theta: f64, target: usize, seed: u64) -> Result<Self> {
        let cfg = PgConfig {
            n_max,
            theta,
            gamma: 0.0,
            target,
            seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.target < 1 || self.target > self.n_max {
            return Err(Error::invalid(format!(
                "target {} out of range 1..={}",
                self.target, self.n_max
            )));
        }
        if self.theta != THETA_PI && self.theta != THETA_HALF_PI {
            return Err(Error::invalid(format!("theta must be pi or pi/2, got {}", self.theta)));
        }
        if !(self.gamma >= 0.0) {
            return Err(Error::invalid(format!("gamma must be >= 0, got {}", self.gamma)));
        }
        Ok(())
    }
}

/// Run the gap process once over `0..len`.
///
/// The mean gap at a position is `alpha(position)`. The first gap is drawn
/// at position 0; after a sample at `s` the next gap is drawn at `s + 1`, so
/// consecutive samples are at least one step apart.
fn pg_run(len: usize, alpha: impl Fn(usize) -> f64, rng: &mut Rng) -> Vec<usize> {
    let mut out = Vec::new();
    let mut pos = 0usize;
    loop {
        let a = alpha(pos);
        // alpha is finite and >= 0 for every generator in this module.
        let gap = poisson_sample(a, rng).expect("gap rate is valid") as usize;
        pos = pos.saturating_add(gap);
        if pos >= len {
            break;
        }
        out.push(pos);
        pos += 1;
        if pos >= len {
            break;
        }
    }
    out
}

/// Bisect the gap scale until a run hits `target` exactly.
///
/// Each probe regenerates from a seed derived from `(seed, attempt)`. If no
/// probe is exact after the cap, the last run is trimmed (dropping samples
/// after the smallest gaps) or padded (inserting midpoints of the largest
/// gaps) to the target.
fn calibrate_gap_scale(
    len: usize,
    target: usize,
    gamma_hint: f64,
    seed: u64,
    modulation: impl Fn(usize, f64) -> f64,
) -> Vec<usize> {
    if target == len {
        return (0..len).collect();
    }
    let mut lo = 0.0f64;
    let mut hi = if gamma_hint > 0.0 {
        gamma_hint
    } else {
        4.0 * len as f64 / target as f64
    };
    let mut last = Vec::new();
    for attempt in 0..CALIBRATION_PROBES {
        let gamma = 0.5 * (lo + hi);
        let mut rng = Rng::stream(seed, "pg-probe", &[u64::from(attempt)]);
        let samples = pg_run(len, |pos| modulation(pos, gamma), &mut rng);
        match samples.len().cmp(&target) {
            std::cmp::Ordering::Equal => return samples,
            std::cmp::Ordering::Greater => lo = gamma, // too dense, widen gaps
            std::cmp::Ordering::Less => hi = gamma,
        }
        last = samples;
    }
    adjust_to_target(last, len, target)
}

/// Deterministic fallback when bisection never hits the count exactly.
fn adjust_to_target(mut samples: Vec<usize>, len: usize, target: usize) -> Vec<usize> {
    while samples.len() > target {
        // Drop the sample following the smallest gap (latest one on ties).
        let mut drop_at = samples.len() - 1;
        let mut smallest = usize::MAX;
        for k in 1..samples.len() {
            let gap = samples[k] - samples[k - 1];
            if gap <= smallest {
                smallest = gap;
                drop_at = k;
            }
        }
        samples.remove(drop_at);
    }
    while samples.len() < target {
        // Insert the midpoint of the largest gap (earliest one on ties),
        // including the head gap before the first sample and the tail gap
        // after the last.
        let mut best_insert = None;
        let mut largest = 0usize;
        let head = samples.first().map_or(len, |&s| s);
        if head > largest {
            largest = head;
            best_insert = Some(head / 2);
        }
        for k in 1..samples.len() {
            let room = samples[k] - samples[k - 1];
            if room > largest + 1 {
                largest = room - 1;
                best_insert = Some(samples[k - 1] + room / 2);
            }
        }
        if let Some(&last_s) = samples.last() {
            let room = len - 1 - last_s;
            if room > largest {
                best_insert = Some(last_s + (room + 1) / 2);
            }
        }
        let pos = best_insert.expect("target <= len leaves room to insert");
        let at = samples.partition_point(|&s| s < pos);
        debug_assert!(samples.get(at) != Some(&pos));
        samples.insert(at, pos);
    }
    samples
}

/// 1D Poisson-gap schedule: exactly `cfg.target` sorted indices in
/// `[0, cfg.n_max)`, with gap means `gamma * sin(theta * n / n_max)`.
pub fn pg_1d(cfg: &PgConfig) -> Result<Vec<usize>> {
    cfg.validate()?;
    let n_max = cfg.n_max as f64;
    let theta = cfg.theta;
    Ok(calibrate_gap_scale(
        cfg.n_max,
        cfg.target,
        cfg.gamma,
        cfg.seed,
        move |pos, gamma| gamma * (theta * pos as f64 / n_max).sin(),
    ))
}

/// Schedule family tag. The names are also the on-disk `kind=` values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScheduleKind {
    Random,
    WovenPg,
    Scpg,
}

impl ScheduleKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ScheduleKind::Random => "random",
            ScheduleKind::WovenPg => "woven_pg",
            ScheduleKind::Scpg => "scpg",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(ScheduleKind::Random),
            "woven_pg" => Ok(ScheduleKind::WovenPg),
            "scpg" => Ok(ScheduleKind::Scpg),
            other => Err(Error::format(format!("unknown schedule kind `{other}`"))),
        }
    }
}

impl std::fmt::Display for ScheduleKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A mirror fill: the value acquired at `src` is copied to `dst`, the
/// transposed cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CopyEntry {
    pub src: (usize, usize),
    pub dst: (usize, usize),
}

/// A sampling plan: which grid cells are physically acquired, plus (for
/// symmetric-copy schedules) where acquired values are mirrored to.
#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    pub n: usize,
    pub kind: ScheduleKind,
    /// Acquired cells `(row, col)`, sorted in canonical column-major order.
    pub acquired: Vec<(usize, usize)>,
    /// Mirror fills; empty unless `kind` is `Scpg`.
    pub copies: Vec<CopyEntry>,
    pub seed: u64,
    /// Modulation angle used at generation time; 0 for random schedules.
    pub theta: f64,
}

impl Schedule {
    /// Physically acquired fraction of the grid. Copies are free and do not
    /// count.
    pub fn nominal_rate(&self) -> f64 {
        self.acquired.len() as f64 / (self.n * self.n) as f64
    }

    /// Structural validation: bounds, uniqueness, canonical ordering, and
    /// the mirror rules for symmetric-copy schedules.
    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::invalid("schedule grid side must be >= 2"));
        }
        let n = self.n;
        let key = |&(i, j): &(usize, usize)| j * n + i;
        let mut prev = None;
        for cell in &self.acquired {
            if cell.0 >= n || cell.1 >= n {
                return Err(Error::invalid(format!("acquired cell {cell:?} outside {n}x{n}")));
            }
            let k = key(cell);
            if prev.is_some_and(|p| p >= k) {
                return Err(Error::invalid("acquired cells not in strict canonical order"));
            }
            prev = Some(k);
        }
        if self.kind != ScheduleKind::Scpg {
            if !self.copies.is_empty() {
                return Err(Error::invalid("copy entries only belong to scpg schedules"));
            }
            return Ok(());
        }
        let acquired: std::collections::BTreeSet<usize> = self.acquired.iter().map(key).collect();
        for c in &self.copies {
            let (si, sj) = c.src;
            if c.dst != (sj, si) || si == sj {
                return Err(Error::invalid(format!("copy {c:?} is not an off-diagonal mirror")));
            }
            if si >= n || sj >= n {
                return Err(Error::invalid(format!("copy {c:?} outside {n}x{n}")));
            }
            if !acquired.contains(&key(&c.src)) {
                return Err(Error::invalid(format!("copy source {:?} not acquired", c.src)));
            }
            if acquired.contains(&key(&c.dst)) {
                return Err(Error::invalid(format!(
                    "mirror {:?} of an acquired point is itself acquired",
                    c.dst
                )));
            }
        }
        // Acquired plus copy destinations must be transpose-closed.
        let mut filled = acquired;
        filled.extend(self.copies.iter().map(|c| key(&c.dst)));
        for &k in &filled {
            let (i, j) = (k % n, k / n);
            if !filled.contains(&(i * n + j)) {
                return Err(Error::invalid(format!(
                    "filled set is not transpose-closed at ({i}, {j})"
                )));
            }
        }
        Ok(())
    }

    /// All cells carrying data after mirror filling, as sorted linear
    /// indices.
    pub fn filled_indices(&self) -> Vec<usize> {
        let n = self.n;
        let mut all: Vec<usize> = self.acquired.iter().map(|&(i, j)| j * n + i).collect();
        all.extend(self.copies.iter().map(|c| c.dst.1 * n + c.dst.0));
        all.sort_unstable();
        all
    }
}

fn sort_canonical(cells: &mut [(usize, usize)], n: usize) {
    cells.sort_unstable_by_key(|&(i, j)| j * n + i);
}

/// Uniform sampling without replacement of `target` cells.
pub fn random_2d(n: usize, target: usize, seed: u64) -> Result<Schedule> {
    if n < 2 {
        return Err(Error::invalid("grid side must be >= 2"));
    }
    if target < 1 || target > n * n {
        return Err(Error::invalid(format!("target {target} out of range 1..={}", n * n)));
    }
    let mut rng = Rng::stream(seed, "random-2d", &[]);
    // Partial Fisher-Yates over the linear cell indices.
    let mut cells: Vec<u32> = (0..(n * n) as u32).collect();
    for k in 0..target {
        let pick = k + rng.below((n * n - k) as u64) as usize;
        cells.swap(k, pick);
    }
    let mut acquired: Vec<(usize, usize)> = cells[..target]
        .iter()
        .map(|&lin| ComplexGrid::cell_of(n, lin as usize))
        .collect();
    sort_canonical(&mut acquired, n);
    Ok(Schedule {
        n,
        kind: ScheduleKind::Random,
        acquired,
        copies: Vec::new(),
        seed,
        theta: 0.0,
    })
}

/// Serpentine anti-diagonal traversal: cells grouped by `row + col`, with
/// alternating direction per anti-diagonal.
fn antidiagonal_traversal(n: usize) -> Vec<(usize, usize)> {
    let mut order = Vec::with_capacity(n * n);
    for d in 0..=(2 * n - 2) {
        let lo = d.saturating_sub(n - 1);
        let hi = d.min(n - 1);
        if d % 2 == 0 {
            for i in lo..=hi {
                order.push((i, d - i));
            }
        } else {
            for i in (lo..=hi).rev() {
                order.push((i, d - i));
            }
        }
    }
    order
}

/// 2D woven Poisson-gap schedule.
///
/// The 1D gap process runs over the serpentine anti-diagonal traversal with
/// gap mean `gamma * sin(theta * (row + col) / (2n))`, then the whole
/// sampled sequence is shifted backward along the traversal until traversal
/// position 0 is occupied.
pub fn woven_pg_2d(n: usize, target: usize, theta: f64, seed: u64) -> Result<Schedule> {
    if n < 2 {
        return Err(Error::invalid("grid side must be >= 2"));
    }
    if target < 1 || target > n * n {
        return Err(Error::invalid(format!("target {target} out of range 1..={}", n * n)));
    }
    if theta != THETA_PI && theta != THETA_HALF_PI {
        return Err(Error::invalid(format!("theta must be pi or pi/2, got {theta}")));
    }
    let order = antidiagonal_traversal(n);
    let denom = (2 * n) as f64;
    let mut positions = {
        let order = &order;
        calibrate_gap_scale(n * n, target, 0.0, seed, move |pos, gamma| {
            let (i, j) = order[pos];
            gamma * (theta * (i + j) as f64 / denom).sin()
        })
    };
    // Shift the whole sequence backward until the traversal origin is
    // sampled.
    if let Some(&first) = positions.first() {
        if first > 0 {
            for p in &mut positions {
                *p -= first;
            }
        }
    }
    let mut acquired: Vec<(usize, usize)> = positions.iter().map(|&p| order[p]).collect();
    sort_canonical(&mut acquired, n);
    Ok(Schedule {
        n,
        kind: ScheduleKind::WovenPg,
        acquired,
        copies: Vec::new(),
        seed,
        theta,
    })
}

/// 1-based mirror-pair index of the 1-based upper-triangle cell
/// `(i, j)`, `1 <= i <= j`: `k = j(j-1)/2 + i`. Pairs with `i = j` hold a
/// single (diagonal) point, so single-point pairs sit at the triangular
/// numbers 1, 3, 6, 10, ...
pub fn pair_index(i: usize, j: usize) -> usize {
    debug_assert!(1 <= i && i <= j);
    j * (j - 1) / 2 + i
}

/// Inverse of [`pair_index`]: the 1-based `(i, j)`, `i <= j`, for pair `k`.
pub fn pair_cell(k: usize) -> (usize, usize) {
    debug_assert!(k >= 1);
    // Smallest j with j(j+1)/2 >= k, found from the real root and fixed up.
    let mut j = ((((8 * k - 7) as f64).sqrt() - 1.0) / 2.0).floor() as usize;
    while j * (j + 1) / 2 < k {
        j += 1;
    }
    while j > 1 && (j - 1) * j / 2 >= k {
        j -= 1;
    }
    (k - j * (j - 1) / 2, j)
}

/// Number of mirror pairs of an `n x n` grid.
pub fn pair_count(n: usize) -> usize {
    n * (n + 1) / 2
}

/// Symmetric-copy Poisson-gap schedule.
///
/// The 1D gap process selects `target_pairs` mirror-pair indices from
/// `[1, n(n+1)/2]`. A diagonal pair is acquired at its single cell. For an
/// off-diagonal pair a fair coin (drawn in pair-index order) picks the upper
/// or lower cell for acquisition; the mirror cell becomes a copy
/// destination. Acquisition cost is exactly one point per selected pair.
pub fn scpg_generate(n: usize, target_pairs: usize, theta: f64, seed: u64) -> Result<Schedule> {
    if n < 2 {
        return Err(Error::invalid("grid side must be >= 2"));
    }
    let total_pairs = pair_count(n);
    if target_pairs < 1 || target_pairs > total_pairs {
        return Err(Error::invalid(format!(
            "target_pairs {target_pairs} out of range 1..={total_pairs}"
        )));
    }
    if theta != THETA_PI && theta != THETA_HALF_PI {
        return Err(Error::invalid(format!("theta must be pi or pi/2, got {theta}")));
    }
    let denom = total_pairs as f64;
    let positions = calibrate_gap_scale(total_pairs, target_pairs, 0.0, seed, move |pos, gamma| {
        gamma * (theta * pos as f64 / denom).sin()
    });

    let mut coin_rng = Rng::stream(seed, "scpg-coins", &[]);
    let mut acquired = Vec::with_capacity(target_pairs);
    let mut copies = Vec::new();
    for &pos in &positions {
        let k = pos + 1; // pair indices are 1-based
        let (pi, pj) = pair_cell(k);
        let (row, col) = (pi - 1, pj - 1); // upper triangle: row <= col
        if row == col {
            acquired.push((row, col));
        } else if coin_rng.coin() {
            // upper point acquired, lower filled by copy
            acquired.push((row, col));
            copies.push(CopyEntry {
                src: (row, col),
                dst: (col, row),
            });
        } else {
            acquired.push((col, row));
            copies.push(CopyEntry {
                src: (col, row),
                dst: (row, col),
            });
        }
    }
    sort_canonical(&mut acquired, n);
    copies.sort_unstable_by_key(|c| c.src.1 * n + c.src.0);
    Ok(Schedule {
        n,
        kind: ScheduleKind::Scpg,
        acquired,
        copies,
        seed,
        theta,
    })
}

/// The measurement pair: the index set carrying data after mirror filling
/// and the sample vector aligned with it.
#[derive(Debug, Clone, PartialEq)]
pub struct NusData {
    n: usize,
    omega: Vec<usize>,
    y: Vec<Complex64>,
}

impl NusData {
    /// Assemble from parts, validating ordering and bounds.
    pub fn new(n: usize, omega: Vec<usize>, y: Vec<Complex64>) -> Result<Self> {
        if n < 2 {
            return Err(Error::invalid("grid side must be >= 2"));
        }
        if omega.len() != y.len() {
            return Err(Error::invalid(format!(
                "index/sample length mismatch: {} vs {}",
                omega.len(),
                y.len()
            )));
        }
        if omega.is_empty() {
            return Err(Error::invalid("empty sampling set"));
        }
        let mut prev = None;
        for &k in &omega {
            if k >= n * n {
                return Err(Error::invalid(format!("index {k} outside {n}x{n} grid")));
            }
            if prev.is_some_and(|p| p >= k) {
                return Err(Error::invalid("indices not strictly increasing in canonical order"));
            }
            prev = Some(k);
        }
        Ok(NusData { n, omega, y })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Sorted linear indices of cells carrying data.
    pub fn omega(&self) -> &[usize] {
        &self.omega
    }

    /// Samples aligned one-to-one with [`NusData::omega`].
    pub fn y(&self) -> &[Complex64] {
        &self.y
    }

    /// Cardinality of the index set.
    pub fn r(&self) -> usize {
        self.omega.len()
    }

    /// True when the index set is transpose-closed and mirrored cells carry
    /// bitwise-equal samples.
    pub fn symmetry_closed(&self) -> bool {
        let n = self.n;
        let lookup: BTreeMap<usize, Complex64> =
            self.omega.iter().copied().zip(self.y.iter().copied()).collect();
        self.omega.iter().zip(&self.y).all(|(&k, v)| {
            let (i, j) = ComplexGrid::cell_of(n, k);
            lookup.get(&(i * n + j)) == Some(v)
        })
    }
}

/// Gather samples from a grid at acquired cells and mirror-fill copy
/// destinations, producing canonical-ordered measurement data.
pub fn build_nusdata(full_fid: &ComplexGrid, sched: &Schedule) -> Result<NusData> {
    if sched.n != full_fid.n() {
        return Err(Error::invalid(format!(
            "schedule is {0}x{0} but grid is {1}x{1}",
            sched.n,
            full_fid.n()
        )));
    }
    let n = sched.n;
    let mut filled: BTreeMap<usize, Complex64> = BTreeMap::new();
    for &(i, j) in &sched.acquired {
        if i >= n || j >= n {
            return Err(Error::invalid(format!("acquired cell ({i}, {j}) outside {n}x{n}")));
        }
        if filled.insert(j * n + i, full_fid.get(i, j)).is_some() {
            return Err(Error::invalid(format!("duplicate acquired cell ({i}, {j})")));
        }
    }
    for c in &sched.copies {
        let (si, sj) = c.src;
        let (di, dj) = c.dst;
        if si >= n || sj >= n || di >= n || dj >= n {
            return Err(Error::invalid(format!("copy {c:?} outside {n}x{n}")));
        }
        // The copy, not the true value: the destination repeats the sample
        // acquired at the source cell.
        if filled.insert(dj * n + di, full_fid.get(si, sj)).is_some() {
            return Err(Error::invalid(format!("copy destination ({di}, {dj}) already filled")));
        }
    }
    let (omega, y): (Vec<usize>, Vec<Complex64>) = filled.into_iter().unzip();
    NusData::new(n, omega, y)
}

/// The sampling operator: fetch grid values at `omega` in canonical order.
pub fn gather(g: &ComplexGrid, omega: &[usize]) -> Result<Vec<Complex64>> {
    let limit = g.n() * g.n();
    let mut out = Vec::with_capacity(omega.len());
    for &k in omega {
        if k >= limit {
            return Err(Error::invalid(format!("index {k} outside grid of {limit} cells")));
        }
        out.push(g.data()[k]);
    }
    Ok(out)
}

/// Adjoint of [`gather`]: place samples at `omega`, zero elsewhere.
///
/// `omega` must be strictly increasing (canonical order), which also rules
/// out duplicate cells.
pub fn scatter(omega: &[usize], y: &[Complex64], n: usize) -> Result<ComplexGrid> {
    if omega.len() != y.len() {
        return Err(Error::invalid(format!(
            "index/sample length mismatch: {} vs {}",
            omega.len(),
            y.len()
        )));
    }
    let mut g = ComplexGrid::zeros(n)?;
    let mut prev = None;
    for (&k, &v) in omega.iter().zip(y) {
        if k >= n * n {
            return Err(Error::invalid(format!("index {k} outside {n}x{n} grid")));
        }
        if prev.is_some_and(|p| p >= k) {
            return Err(Error::invalid("indices not strictly increasing in canonical order"));
        }
        prev = Some(k);
        g.data_mut()[k] = v;
    }
    Ok(g)
}

/// The three disjoint parts of a transpose-closed index set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SymmetryPartition {
    /// Strict upper-triangle members (row < col), canonical order.
    pub omega_0: Vec<usize>,
    /// Their transposes (row > col), canonical order.
    pub omega_0t: Vec<usize>,
    /// Diagonal members, canonical order.
    pub omega_d: Vec<usize>,
}

/// Split a transpose-closed index set into upper-triangle, lower-triangle
/// and diagonal parts. Errors when the set is not transpose-closed.
pub fn partition_symmetric(omega: &[usize], n: usize) -> Result<SymmetryPartition> {
    let mut omega_0 = Vec::new();
    let mut omega_0t = Vec::new();
    let mut omega_d = Vec::new();
    for &k in omega {
        if k >= n * n {
            return Err(Error::invalid(format!("index {k} outside {n}x{n} grid")));
        }
        let (i, j) = ComplexGrid::cell_of(n, k);
        let mirror = i * n + j;
        if omega.binary_search(&mirror).is_err() {
            return Err(Error::invalid(format!(
                "index set is not transpose-closed at ({i}, {j})"
            )));
        }
        if i < j {
            omega_0.push(k);
        } else if i > j {
            omega_0t.push(k);
        } else {
            omega_d.push(k);
        }
    }
    Ok(SymmetryPartition {
        omega_0,
        omega_0t,
        omega_d,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::random_grid;

    #[test]
    fn poisson_zero_rate_is_zero() {
        let mut rng = Rng::from_seed(1);
        for _ in 0..100 {
            assert_eq!(poisson_sample(0.0, &mut rng).unwrap(), 0);
        }
    }

    #[test]
    fn poisson_rejects_bad_rates() {
        let mut rng = Rng::from_seed(1);
        assert!(poisson_sample(-1.0, &mut rng).is_err());
        assert!(poisson_sample(f64::NAN, &mut rng).is_err());
        assert!(poisson_sample(f64::INFINITY, &mut rng).is_err());
    }

    #[test]
    fn poisson_unit_rate_mass_at_zero() {
        // P(X = 0) = exp(-1) ~ 0.3679
        let mut rng = Rng::from_seed(90210);
        let draws = 100_000;
        let zeros = (0..draws)
            .filter(|_| poisson_sample(1.0, &mut rng).unwrap() == 0)
            .count();
        let p0 = zeros as f64 / draws as f64;
        assert!((p0 - (-1.0f64).exp()).abs() < 0.005, "p0={p0}");
    }

    #[test]
    fn poisson_mean_at_rate_ten() {
        let mut rng = Rng::from_seed(90211);
        let draws = 100_000;
        let sum: u64 = (0..draws).map(|_| poisson_sample(10.0, &mut rng).unwrap()).sum();
        let mean = sum as f64 / draws as f64;
        assert!((mean - 10.0).abs() < 0.04, "mean={mean}");
    }

    #[test]
    fn poisson_large_rate_moments() {
        // Exercises both the sequential search and the chunked path.
        for rate in [60.0, 1200.0] {
            let mut rng = Rng::from_seed(5150);
            let draws = 20_000;
            let sum: u64 = (0..draws).map(|_| poisson_sample(rate, &mut rng).unwrap()).sum();
            let mean = sum as f64 / draws as f64;
            let se = (rate / draws as f64).sqrt();
            assert!((mean - rate).abs() < 4.0 * se, "rate={rate} mean={mean}");
        }
    }

    #[test]
    fn pg_full_target_takes_every_index() {
        let cfg = PgConfig::new(64, THETA_PI, 64, 3).unwrap();
        assert_eq!(pg_1d(&cfg).unwrap(), (0..64).collect::<Vec<_>>());
    }

    #[test]
    fn pg_exact_count_and_determinism() {
        for seed in 0..40 {
            let cfg = PgConfig::new(256, THETA_PI, 26, seed).unwrap();
            let a = pg_1d(&cfg).unwrap();
            let b = pg_1d(&cfg).unwrap();
            assert_eq!(a, b);
            assert_eq!(a.len(), 26);
            assert!(a.windows(2).all(|w| w[0] < w[1]));
            assert!(*a.last().unwrap() < 256);
        }
    }

    #[test]
    fn pg_rejects_overfull_target() {
        assert!(PgConfig::new(16, THETA_PI, 17, 0).is_err());
        assert!(PgConfig::new(16, THETA_PI, 0, 0).is_err());
    }

    #[test]
    fn pg_gaps_widest_in_the_middle() {
        // Mean gap around the center of the line exceeds the mean gap near
        // both ends, as the sinusoid modulation dictates.
        let mut near_start = Vec::new();
        let mut near_mid = Vec::new();
        let mut near_end = Vec::new();
        for seed in 0..200 {
            let cfg = PgConfig::new(256, THETA_PI, 26, 1000 + seed).unwrap();
            let s = pg_1d(&cfg).unwrap();
            for w in s.windows(2) {
                let gap = (w[1] - w[0]) as f64;
                let at = w[0];
                if at < 20 {
                    near_start.push(gap);
                } else if (118..138).contains(&at) {
                    near_mid.push(gap);
                } else if at > 235 {
                    near_end.push(gap);
                }
            }
        }
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        assert!(mean(&near_mid) > mean(&near_start), "mid gaps should dominate start");
        assert!(mean(&near_mid) > mean(&near_end), "mid gaps should dominate end");
    }

    #[test]
    fn random_2d_full_and_errors() {
        let s = random_2d(4, 16, 9).unwrap();
        assert_eq!(s.acquired.len(), 16);
        s.validate().unwrap();
        assert!(random_2d(4, 17, 9).is_err());
    }

    #[test]
    fn random_2d_single_cell_is_uniform() {
        let mut counts = [0u32; 16];
        let draws = 10_000;
        for seed in 0..draws {
            let s = random_2d(4, 1, seed).unwrap();
            let (i, j) = s.acquired[0];
            counts[j * 4 + i] += 1;
        }
        for &c in &counts {
            let freq = f64::from(c) / draws as f64;
            assert!((freq - 1.0 / 16.0).abs() < 0.01, "freq={freq}");
        }
    }

    #[test]
    fn random_2d_deterministic() {
        assert_eq!(random_2d(8, 13, 77).unwrap(), random_2d(8, 13, 77).unwrap());
    }

    #[test]
    fn traversal_covers_grid_serpentine() {
        let order = antidiagonal_traversal(3);
        assert_eq!(order.len(), 9);
        assert_eq!(order[0], (0, 0));
        // diagonal d=1 runs in reverse (serpentine)
        assert_eq!(&order[1..3], &[(1, 0), (0, 1)]);
        let mut sorted = order.clone();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(sorted.len(), 9);
    }

    #[test]
    fn woven_pg_exact_count_origin_and_determinism() {
        for seed in 0..20 {
            let s = woven_pg_2d(64, 205, THETA_PI, seed).unwrap();
            assert_eq!(s.acquired.len(), 205);
            s.validate().unwrap();
            assert!(s.acquired.contains(&(0, 0)), "traversal origin must be sampled");
            assert_eq!(s, woven_pg_2d(64, 205, THETA_PI, seed).unwrap());
        }
        let full = woven_pg_2d(4, 16, THETA_PI, 0).unwrap();
        assert_eq!(full.acquired.len(), 16);
    }

    #[test]
    fn woven_pg_sparse_on_central_antidiagonals() {
        let n = 64;
        let mut per_diag_hits = vec![0u64; 2 * n - 1];
        let diag_len = |d: usize| d.min(2 * n - 2 - d).min(n - 1) + 1;
        for seed in 0..200 {
            let s = woven_pg_2d(n, 205, THETA_PI, 3000 + seed).unwrap();
            for &(i, j) in &s.acquired {
                per_diag_hits[i + j] += 1;
            }
        }
        let density = |range: std::ops::Range<usize>| {
            let hits: u64 = range.clone().map(|d| per_diag_hits[d]).sum();
            let cells: usize = range.map(diag_len).sum();
            hits as f64 / cells as f64
        };
        let start = density(0..12);
        let middle = density(57..70);
        let end = density(115..127);
        assert!(middle < start, "middle {middle} vs start {start}");
        assert!(middle < end, "middle {middle} vs end {end}");
    }

    #[test]
    fn pair_index_examples() {
        // Single-point (diagonal) pairs sit at triangular numbers.
        assert_eq!(pair_index(1, 1), 1);
        assert_eq!(pair_index(2, 2), 3);
        assert_eq!(pair_index(3, 3), 6);
        assert_eq!(pair_index(4, 4), 10);
        assert_eq!(pair_index(1, 2), 2);
        assert_eq!(pair_index(1, 3), 4);
        assert_eq!(pair_index(2, 3), 5);
    }

    #[test]
    fn pair_cell_inverts_pair_index() {
        for k in 1..=pair_count(40) {
            let (i, j) = pair_cell(k);
            assert!(1 <= i && i <= j && j <= 40);
            assert_eq!(pair_index(i, j), k);
        }
    }

    #[test]
    fn scpg_structure_on_toy_grid() {
        // 4x4 grid: 10 mirror pairs, 5 selected.
        assert_eq!(pair_count(4), 10);
        let s = scpg_generate(4, 5, THETA_PI, 2).unwrap();
        s.validate().unwrap();
        assert_eq!(s.acquired.len(), 5);
        for c in &s.copies {
            assert_eq!(c.dst, (c.src.1, c.src.0));
            assert_ne!(c.src.0, c.src.1);
        }
        // Filled set is transpose-closed.
        let filled = s.filled_indices();
        for &k in &filled {
            let (i, j) = ComplexGrid::cell_of(4, k);
            assert!(filled.binary_search(&(i * 4 + j)).is_ok());
        }
    }

    #[test]
    fn scpg_counts_and_closure_across_seeds() {
        for seed in 0..30 {
            let s = scpg_generate(16, 40, THETA_PI, seed).unwrap();
            s.validate().unwrap();
            assert_eq!(s.acquired.len(), 40);
            let diag = s.acquired.iter().filter(|&&(i, j)| i == j).count();
            assert_eq!(s.copies.len(), 40 - diag);
            assert_eq!(s, scpg_generate(16, 40, THETA_PI, seed).unwrap());
        }
        assert!(scpg_generate(4, 11, THETA_PI, 0).is_err());
    }

    #[test]
    fn build_nusdata_matches_toy_gather() {
        // 4x4 toy: acquired cells (1-based matrix notation) 11, 41, 32, 13,
        // 33, 44 produce samples in exactly that canonical order.
        let n = 4;
        let mut fid = ComplexGrid::zeros(n).unwrap();
        for col in 0..n {
            for row in 0..n {
                // value encodes 1-based (row, col) as row.col
                fid.set(row, col, Complex64::new((row + 1) as f64 + (col + 1) as f64 / 10.0, 0.0));
            }
        }
        let mut acquired = vec![(0, 0), (3, 0), (2, 1), (0, 2), (2, 2), (3, 3)];
        sort_canonical(&mut acquired, n);
        let sched = Schedule {
            n,
            kind: ScheduleKind::Random,
            acquired,
            copies: Vec::new(),
            seed: 0,
            theta: 0.0,
        };
        let nus = build_nusdata(&fid, &sched).unwrap();
        let got: Vec<f64> = nus.y().iter().map(|z| z.re).collect();
        assert_eq!(got, vec![1.1, 4.1, 3.2, 1.3, 3.3, 4.4]);

        // Scatter keeps exactly those cells and zeroes the rest.
        let kept = scatter(nus.omega(), nus.y(), n).unwrap();
        let nonzero: Vec<f64> = kept.data().iter().filter(|z| z.re != 0.0).map(|z| z.re).collect();
        assert_eq!(nonzero, vec![1.1, 4.1, 3.2, 1.3, 3.3, 4.4]);
    }

    #[test]
    fn full_schedule_gathers_column_major() {
        let n = 4;
        let fid = random_grid(n, 123);
        let sched = random_2d(n, n * n, 5).unwrap();
        let nus = build_nusdata(&fid, &sched).unwrap();
        assert_eq!(nus.omega(), (0..n * n).collect::<Vec<_>>().as_slice());
        assert_eq!(nus.y(), fid.data());
    }

    #[test]
    fn scpg_fill_is_exactly_symmetric() {
        let n = 16;
        let fid = random_grid(n, 42); // deliberately asymmetric
        let sched = scpg_generate(n, 40, THETA_PI, 7).unwrap();
        let nus = build_nusdata(&fid, &sched).unwrap();
        assert!(nus.symmetry_closed());
        let g = scatter(nus.omega(), nus.y(), n).unwrap();
        assert_eq!(g, g.transpose());
        // Accounting: r = 2 * off-diagonal pairs + diagonal pairs.
        let diag = sched.acquired.iter().filter(|&&(i, j)| i == j).count();
        assert_eq!(nus.r(), 2 * (40 - diag) + diag);
    }

    #[test]
    fn scpg_on_symmetric_fid_copies_coincide_with_truth() {
        let n = 8;
        let g = random_grid(n, 4);
        let mut fid = g.clone();
        fid.add_assign(&g.transpose()); // exactly symmetric
        let sched = scpg_generate(n, 12, THETA_PI, 9).unwrap();
        let nus = build_nusdata(&fid, &sched).unwrap();
        let direct = gather(&fid, nus.omega()).unwrap();
        assert_eq!(nus.y(), direct.as_slice());
    }

    #[test]
    fn build_nusdata_rejects_size_mismatch() {
        let fid = random_grid(8, 1);
        let sched = random_2d(4, 3, 0).unwrap();
        assert!(build_nusdata(&fid, &sched).is_err());
    }

    #[test]
    fn adjoint_identity() {
        let n = 8;
        let x = random_grid(n, 10);
        let sched = random_2d(n, 20, 3).unwrap();
        let omega = sched.filled_indices();
        let mut rng = Rng::from_seed(77);
        let y: Vec<Complex64> = (0..omega.len())
            .map(|_| Complex64::new(rng.uniform_in(-1.0, 1.0), rng.uniform_in(-1.0, 1.0)))
            .collect();
        let lhs: Complex64 = gather(&x, &omega)
            .unwrap()
            .iter()
            .zip(&y)
            .map(|(a, b)| a * b.conj())
            .sum();
        let sc = scatter(&omega, &y, n).unwrap();
        let rhs: Complex64 = x.data().iter().zip(sc.data()).map(|(a, b)| a * b.conj()).sum();
        assert!((lhs - rhs).norm() <= 1e-12 * lhs.norm().max(1.0));
    }

    #[test]
    fn gather_scatter_bounds_and_ordering_errors() {
        let g = random_grid(4, 0);
        assert!(gather(&g, &[0, 16]).is_err());
        let y = vec![Complex64::new(1.0, 0.0); 2];
        assert!(scatter(&[3, 3], &y, 4).is_err());
        assert!(scatter(&[5, 2], &y, 4).is_err());
        assert!(scatter(&[0], &y, 4).is_err());
    }

    #[test]
    fn partition_examples() {
        let n = 4;
        // Diagonal-only set.
        let p = partition_symmetric(&[0, 5], n).unwrap();
        assert_eq!(p.omega_d, vec![0, 5]);
        assert!(p.omega_0.is_empty() && p.omega_0t.is_empty());

        // Single mirror pair: cells (0,1) and (1,0).
        let mut pair = [n, 1]; // (0,1) -> 1*4+0 = 4, (1,0) -> 0*4+1 = 1
        pair.sort_unstable();
        let p = partition_symmetric(&pair, n).unwrap();
        assert_eq!(p.omega_0, vec![n]);
        assert_eq!(p.omega_0t, vec![1]);
        assert!(p.omega_d.is_empty());

        // Not transpose-closed.
        assert!(partition_symmetric(&[1], n).is_err());
    }

    #[test]
    fn partition_counts_on_scpg() {
        let sched = scpg_generate(16, 40, THETA_PI, 21).unwrap();
        let omega = sched.filled_indices();
        let p = partition_symmetric(&omega, 16).unwrap();
        assert_eq!(p.omega_0.len(), p.omega_0t.len());
        assert_eq!(omega.len(), 2 * p.omega_0.len() + p.omega_d.len());
    }
}
