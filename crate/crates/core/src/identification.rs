//! Fitting the ground-motion model to a target accelerogram.
//!
//! The envelope parameters are fitted by matching cumulative energy, the
//! filter frequencies by matching the cumulative count of zero-level
//! up-crossings against the expected count of the unit process, and the
//! filter damping by matching the count of positive minima and negative
//! maxima against simulated realizations.

use std::f64::consts::PI;
use std::path::Path;

use crate::error::{Error, Result};
use crate::ground_motion::{
    irf_h, irf_h_dot, unit_process, FilterParams, GroundMotionParams, Grid, ModulationParams, Signal,
    DEFAULT_TAIL_CUTOFF,
};
use crate::io::Table;
use crate::optimize::{nelder_mead, NelderMeadOptions};
use crate::quadrature::cumulative_energy;
use crate::rng::{stream, tags};

/// A record with its cumulative energy and event counts on the sample grid.
#[derive(Debug, Clone)]
pub struct TargetRecord {
    pub signal: Signal,
    pub cumulative_energy: Vec<f64>,
    pub upcrossing_count: Vec<f64>,
    pub extrema_count: Vec<f64>,
}

impl TargetRecord {
    pub fn from_signal(signal: Signal) -> Self {
        let s = signal.samples();
        Self {
            cumulative_energy: cumulative_energy(s, signal.dt()),
            upcrossing_count: upcrossing_counts(s),
            extrema_count: extrema_counts(s),
            signal,
        }
    }

    /// Replaces the energy series, e.g. by an exact `∫q²` target.
    pub fn with_energy(mut self, energy: Vec<f64>) -> Result<Self> {
        if energy.len() != self.signal.len() {
            return Err(Error::invalid("energy series length differs from the signal"));
        }
        self.cumulative_energy = energy;
        Ok(self)
    }

    pub fn dt(&self) -> f64 {
        self.signal.dt()
    }

    pub fn duration(&self) -> f64 {
        self.signal.duration()
    }

    pub fn total_energy(&self) -> f64 {
        *self.cumulative_energy.last().expect("non-empty signal")
    }

    /// First time the cumulative energy reaches `fraction` of the total.
    pub fn energy_quantile_time(&self, fraction: f64) -> f64 {
        let target = fraction * self.total_energy();
        let k = self
            .cumulative_energy
            .iter()
            .position(|&e| e >= target)
            .unwrap_or(self.cumulative_energy.len() - 1);
        k as f64 * self.dt()
    }
}

/// Running count of up-crossings: one whenever `a[k] <= 0 < a[k+1]`,
/// credited at `k + 1`.
pub fn upcrossing_counts(a: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(a.len());
    let mut c = 0.0;
    out.push(0.0);
    for w in a.windows(2) {
        if w[0] <= 0.0 && w[1] > 0.0 {
            c += 1.0;
        }
        out.push(c);
    }
    out
}

/// Running count of positive minima and negative maxima by three-point
/// tests, credited at the extremum index.
pub fn extrema_counts(a: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len()];
    let mut c = 0.0;
    for k in 1..a.len() {
        if k + 1 < a.len() {
            let (p, x, n) = (a[k - 1], a[k], a[k + 1]);
            let positive_min = x > 0.0 && x < p && x <= n;
            let negative_max = x < 0.0 && x > p && x >= n;
            if positive_min || negative_max {
                c += 1.0;
            }
        }
        out[k] = c;
    }
    out
}

/// How the expected count of discrete up-crossings relates to the
/// continuous-time rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AdjustmentFactor {
    /// `N_x(t) = r ∫ nu`.
    Constant(f64),
    /// Exact expected count of sign changes between consecutive samples of
    /// the discretized Gaussian process, `arccos(rho) / 2pi` per step.
    DiscreteGaussian,
}

#[derive(Debug, Clone)]
pub struct IdentificationConfig {
    /// Candidate filter damping ratios.
    pub damping_grid: Vec<f64>,
    /// Simulated realizations per damping candidate.
    pub sim_replicates: usize,
    pub adjustment: AdjustmentFactor,
    /// Up-crossing rates are evaluated every `rate_stride` samples.
    pub rate_stride: usize,
    /// Seed of the simulation streams; identical seeds make runs repeatable.
    pub seed: u64,
}

impl Default for IdentificationConfig {
    fn default() -> Self {
        Self {
            damping_grid: (1..=9).map(|i| i as f64 / 10.0).collect(),
            sim_replicates: 20,
            adjustment: AdjustmentFactor::DiscreteGaussian,
            rate_stride: 10,
            seed: 0,
        }
    }
}

impl IdentificationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.damping_grid.is_empty() {
            return Err(Error::invalid("damping grid is empty"));
        }
        if self.damping_grid.iter().any(|z| !(*z > 0.0 && *z < 1.0)) {
            return Err(Error::domain("damping candidates must lie in (0, 1)"));
        }
        if self.sim_replicates == 0 {
            return Err(Error::invalid("need at least one simulation replicate"));
        }
        if let AdjustmentFactor::Constant(r) = self.adjustment {
            if !(r > 0.0 && r <= 1.0) {
                return Err(Error::domain("adjustment factor must be in (0, 1]"));
            }
        }
        if self.rate_stride == 0 {
            return Err(Error::invalid("rate stride must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct ModulationFit {
    pub params: ModulationParams,
    /// Normalized integrated squared energy mismatch.
    pub objective: f64,
    pub converged: bool,
}

fn unpack_modulation(p: &[f64]) -> ModulationParams {
    let t0 = p[3] * p[3];
    let t1 = t0 + p[4].exp();
    let t2 = t1 + p[5].exp();
    ModulationParams {
        alpha1: p[0].exp(),
        alpha2: p[1].exp(),
        alpha3: p[2].exp(),
        t0,
        t1,
        t2,
    }
}

fn pack_modulation(m: &ModulationParams) -> Vec<f64> {
    vec![
        m.alpha1.ln(),
        m.alpha2.ln(),
        m.alpha3.ln(),
        m.t0.sqrt(),
        (m.t1 - m.t0).max(1e-3).ln(),
        (m.t2 - m.t1).max(1e-3).ln(),
    ]
}

/// Trapezoidal `∫₀ᵗ q²` on the record grid.
pub fn expected_energy(m: &ModulationParams, dt: f64, len: usize) -> Vec<f64> {
    let q2: Vec<f64> = (0..len).map(|n| m.q(n as f64 * dt).powi(2)).collect();
    let mut out = Vec::with_capacity(len);
    let mut acc = 0.0;
    out.push(0.0);
    for w in q2.windows(2) {
        acc += 0.5 * dt * (w[0] + w[1]);
        out.push(acc);
    }
    out
}

fn energy_mismatch(m: &ModulationParams, record: &TargetRecord) -> f64 {
    let dt = record.dt();
    let norm = record.total_energy().powi(2) * record.duration();
    let mut acc = 0.0;
    let mut e = 0.0;
    let mut q_prev = m.q(0.0).powi(2);
    for (n, ea) in record.cumulative_energy.iter().enumerate() {
        if n > 0 {
            let q = m.q(n as f64 * dt).powi(2);
            e += 0.5 * dt * (q_prev + q);
            q_prev = q;
        }
        acc += (e - ea).powi(2);
    }
    acc * dt / norm
}

/// Fits the envelope by minimizing `∫ (∫q² - E_a)² dt` with multi-start
/// Nelder–Mead in a reparameterization that keeps every parameter positive
/// and the times ordered.
pub fn fit_modulation(record: &TargetRecord) -> Result<ModulationFit> {
    if record.signal.len() < 10 {
        return Err(Error::invalid("record needs at least 10 samples"));
    }
    let total = record.total_energy();
    if !(total > 0.0) {
        return Err(Error::invalid("record has no energy"));
    }
    let starts = modulation_starts(record);
    let opts = NelderMeadOptions {
        max_evals: 6000,
        f_tol: 1e-16,
        x_tol: 1e-9,
        initial_step: 0.15,
        restarts: 3,
    };
    let objective = |p: &[f64]| energy_mismatch(&unpack_modulation(p), record);
    let mut best: Option<(Vec<f64>, f64, bool)> = None;
    for s in &starts {
        let m = nelder_mead(objective, s, &opts);
        if best.as_ref().is_none_or(|b| m.value < b.1) {
            best = Some((m.x, m.value, m.converged));
        }
    }
    let (x, value, converged) = best.expect("at least one start");
    Ok(ModulationFit {
        params: unpack_modulation(&x),
        objective: value,
        converged,
    })
}

fn modulation_starts(record: &TargetRecord) -> Vec<Vec<f64>> {
    let total = record.total_energy();
    let t = |f: f64| record.energy_quantile_time(f);
    let dt = record.dt();
    let choices = [
        (0.05, 0.75, 1.0),
        (0.10, 0.70, 1.0),
        (0.15, 0.80, 1.5),
        (0.03, 0.60, 0.7),
        (0.20, 0.85, 2.0),
    ];
    let t0 = 0.5 * t(0.002);
    choices
        .iter()
        .map(|&(a, b, alpha3)| {
            let t1 = t(a).max(t0 + dt);
            let t2 = t(b).max(t1 + dt);
            let e1 = record.cumulative_energy[(t1 / dt).round() as usize];
            let e2 = record.cumulative_energy[(t2 / dt).round() as usize];
            let power = ((e2 - e1) / (t2 - t1)).max(1e-12 * total);
            let tail = (total - e2).max(1e-6 * total);
            let alpha2 = 0.5 * (0.9 * power / tail).powf(alpha3);
            pack_modulation(&ModulationParams {
                alpha1: power.sqrt(),
                alpha2: alpha2.max(1e-6),
                alpha3,
                t0,
                t1,
                t2,
            })
        })
        .collect()
}

/// Moments of the filtered process and its derivative at one grid node.
#[derive(Debug, Clone, Copy)]
struct RateMoments {
    var: f64,
    var_dot: f64,
    /// Correlation with the next grid node.
    rho_next: f64,
}

fn rate_moments(filter: &FilterParams, grid: &Grid, n: usize) -> RateMoments {
    let dt = grid.dt;
    let duration = grid.duration();
    let zeta = filter.zeta_f;
    let tn = n as f64 * dt;
    let (mut s_hh, mut s_hd, mut s_dd, mut s_next, mut s_cross) = (0.0, 0.0, 0.0, 0.0, 0.0);
    let cutoff = grid.tail_cutoff.unwrap_or(f64::INFINITY);
    for k in (0..=n).rev() {
        let tau = k as f64 * dt;
        let w = filter.frequency_at(tau, duration);
        let lag = tn - tau;
        if zeta * w * lag > cutoff {
            // lags only grow as k decreases, but w may shrink; keep scanning
            // unless the fastest-decaying bound is also exceeded
            if zeta * filter.omega0.min(filter.omega_n) * lag > cutoff {
                break;
            }
            continue;
        }
        let h = irf_h(lag, w, zeta);
        let hd = irf_h_dot(lag, w, zeta);
        let hn = irf_h(lag + dt, w, zeta);
        let weight = if k == n { 0.5 } else { 1.0 };
        s_hh += h * h;
        s_hd += h * hd;
        s_dd += weight * hd * hd;
        s_next += hn * hn;
        s_cross += h * hn;
    }
    let var = s_hh * dt;
    let var_dot = if s_hh > 0.0 {
        ((s_dd - s_hd * s_hd / s_hh) / s_hh).max(0.0)
    } else {
        0.0
    };
    let rho_next = if s_hh > 0.0 && s_next > 0.0 {
        (s_cross / (s_hh * s_next).sqrt()).clamp(-1.0, 1.0)
    } else {
        1.0
    };
    RateMoments {
        var,
        var_dot,
        rho_next,
    }
}

/// Mean zero-level up-crossing rate `sigma_ydot / 2pi` of the unit process
/// at time `t` in a record of length `duration`.
pub fn mean_upcrossing_rate(t: f64, filter: &FilterParams, duration: f64, dt: f64) -> f64 {
    let grid = Grid::new(duration, dt);
    let n = ((t / dt).round() as usize).min(grid.len - 1);
    let m = rate_moments(filter, &grid, n);
    if m.var > 0.0 {
        m.var_dot.sqrt() / (2.0 * PI)
    } else {
        0.0
    }
}

/// Effective expected up-crossing rate (rate times adjustment) at the grid
/// nodes `0, stride, 2*stride, ...` and the final node.
pub fn effective_rate_series(
    filter: &FilterParams,
    grid: &Grid,
    stride: usize,
    adjustment: AdjustmentFactor,
) -> (Vec<usize>, Vec<f64>) {
    let mut nodes: Vec<usize> = (0..grid.len).step_by(stride.max(1)).collect();
    if *nodes.last().expect("non-empty grid") != grid.len - 1 {
        nodes.push(grid.len - 1);
    }
    let rates = nodes
        .iter()
        .map(|&n| {
            let m = rate_moments(filter, grid, n);
            if m.var <= 0.0 {
                return 0.0;
            }
            match adjustment {
                AdjustmentFactor::Constant(r) => r * m.var_dot.sqrt() / (2.0 * PI),
                AdjustmentFactor::DiscreteGaussian => m.rho_next.acos() / (2.0 * PI * grid.dt),
            }
        })
        .collect();
    (nodes, rates)
}

/// Expected cumulative up-crossing count `N_x` at the returned nodes.
pub fn expected_upcrossings(
    filter: &FilterParams,
    grid: &Grid,
    stride: usize,
    adjustment: AdjustmentFactor,
) -> (Vec<usize>, Vec<f64>) {
    let (nodes, rates) = effective_rate_series(filter, grid, stride, adjustment);
    let mut counts = Vec::with_capacity(nodes.len());
    let mut acc = 0.0;
    counts.push(0.0);
    for j in 1..nodes.len() {
        let span = (nodes[j] - nodes[j - 1]) as f64 * grid.dt;
        acc += 0.5 * span * (rates[j - 1] + rates[j]);
        counts.push(acc);
    }
    (nodes, counts)
}

#[derive(Debug, Clone, Copy)]
pub struct FrequencyFit {
    pub omega0: f64,
    pub omega_n: f64,
    pub objective: f64,
    pub converged: bool,
}

fn record_grid(record: &TargetRecord) -> Grid {
    Grid {
        dt: record.dt(),
        len: record.signal.len(),
        tail_cutoff: Some(DEFAULT_TAIL_CUTOFF),
    }
}

fn crossing_mismatch(
    filter: &FilterParams,
    record: &TargetRecord,
    grid: &Grid,
    config: &IdentificationConfig,
) -> f64 {
    let (nodes, expected) = expected_upcrossings(filter, grid, config.rate_stride, config.adjustment);
    let mut acc = 0.0;
    for j in 1..nodes.len() {
        let span = (nodes[j] - nodes[j - 1]) as f64 * grid.dt;
        let d = expected[j] - record.upcrossing_count[nodes[j]];
        acc += span * d * d;
    }
    acc / grid.duration()
}

fn frequency_starts(record: &TargetRecord, config: &IdentificationConfig) -> Vec<(f64, f64)> {
    let r = match config.adjustment {
        AdjustmentFactor::Constant(r) => r,
        AdjustmentFactor::DiscreteGaussian => 0.95,
    };
    let counts = &record.upcrossing_count;
    let dt = record.dt();
    let len = counts.len();
    let total = counts[len - 1];
    let half = len / 2;
    let duration = record.duration();
    let nu1 = counts[half] / (half as f64 * dt);
    let nu2 = (total - counts[half]) / ((len - 1 - half) as f64 * dt);
    let nu_mean = total / duration;
    let to_omega = |nu: f64| (2.0 * PI * nu / r).max(0.5);
    let nu0 = 1.5 * nu1 - 0.5 * nu2;
    let nun = 1.5 * nu2 - 0.5 * nu1;
    vec![
        (to_omega(nu0), to_omega(nun)),
        (to_omega(nu_mean), to_omega(nu_mean)),
        (to_omega(nu1), to_omega(nu2)),
    ]
}

/// Fits `(omega0, omega_n)` for a given damping by matching the cumulative
/// up-crossing count.
pub fn fit_filter_frequencies(
    record: &TargetRecord,
    zeta_f: f64,
    config: &IdentificationConfig,
) -> Result<FrequencyFit> {
    fit_filter_frequencies_from(record, zeta_f, config, None)
}

/// As [`fit_filter_frequencies`], optionally starting from a known pair
/// (used to warm-start successive damping candidates).
pub fn fit_filter_frequencies_from(
    record: &TargetRecord,
    zeta_f: f64,
    config: &IdentificationConfig,
    start: Option<(f64, f64)>,
) -> Result<FrequencyFit> {
    config.validate()?;
    if !(zeta_f > 0.0 && zeta_f < 1.0) {
        return Err(Error::domain("zeta_f must be in (0, 1)"));
    }
    if *record.upcrossing_count.last().expect("non-empty") < 5.0 {
        return Err(Error::invalid("record needs at least 5 up-crossings"));
    }
    let grid = record_grid(record);
    let objective = |p: &[f64]| {
        let f = FilterParams {
            omega0: p[0].exp(),
            omega_n: p[1].exp(),
            zeta_f,
        };
        crossing_mismatch(&f, record, &grid, config)
    };
    let (starts, opts) = match start {
        Some(s) => (
            vec![s],
            NelderMeadOptions {
                max_evals: 200,
                f_tol: 1e-10,
                x_tol: 1e-4,
                initial_step: 0.05,
                restarts: 1,
            },
        ),
        None => (
            frequency_starts(record, config),
            NelderMeadOptions {
                max_evals: 300,
                f_tol: 1e-10,
                x_tol: 1e-4,
                initial_step: 0.15,
                restarts: 1,
            },
        ),
    };
    let mut best: Option<FrequencyFit> = None;
    for (w0, wn) in starts {
        let m = nelder_mead(objective, &[w0.ln(), wn.ln()], &opts);
        if best.as_ref().is_none_or(|b| m.value < b.objective) {
            best = Some(FrequencyFit {
                omega0: m.x[0].exp(),
                omega_n: m.x[1].exp(),
                objective: m.value,
                converged: m.converged,
            });
        }
    }
    Ok(best.expect("at least one start"))
}

#[derive(Debug, Clone)]
pub struct DampingCandidate {
    pub zeta_f: f64,
    pub frequencies: FrequencyFit,
    /// Integrated squared difference of the mean simulated and the record
    /// extrema counts.
    pub mismatch: f64,
}

#[derive(Debug, Clone)]
pub struct DampingFit {
    pub zeta_f: f64,
    pub candidates: Vec<DampingCandidate>,
}

impl DampingFit {
    pub fn chosen(&self) -> &DampingCandidate {
        self.candidates
            .iter()
            .find(|c| c.zeta_f == self.zeta_f)
            .expect("chosen damping is a candidate")
    }
}

/// Picks the damping candidate whose simulated extrema counts best match
/// the record. Replicate `r` uses the same noise stream for every
/// candidate; ties go to the smaller damping.
pub fn fit_damping(record: &TargetRecord, config: &IdentificationConfig) -> Result<DampingFit> {
    config.validate()?;
    let mut grid_values = config.damping_grid.clone();
    grid_values.sort_by(f64::total_cmp);
    grid_values.dedup();
    let grid = record_grid(record);
    let dt = grid.dt;
    let mut candidates = Vec::with_capacity(grid_values.len());
    let mut warm: Option<(f64, f64)> = None;
    for &zeta in &grid_values {
        let freq = fit_filter_frequencies_from(record, zeta, config, warm)?;
        warm = Some((freq.omega0, freq.omega_n));
        let filter = FilterParams {
            omega0: freq.omega0,
            omega_n: freq.omega_n,
            zeta_f: zeta,
        };
        let mut mean_counts = vec![0.0; grid.len];
        for r in 0..config.sim_replicates {
            let mut rng = stream(config.seed, tags::IDENTIFY, r as u64);
            let y = unit_process(&filter, &grid, &mut rng);
            for (m, c) in mean_counts.iter_mut().zip(extrema_counts(&y)) {
                *m += c / config.sim_replicates as f64;
            }
        }
        let mismatch = mean_counts
            .iter()
            .zip(&record.extrema_count)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            * dt;
        candidates.push(DampingCandidate {
            zeta_f: zeta,
            frequencies: freq,
            mismatch,
        });
    }
    let best = candidates
        .iter()
        .fold(None::<&DampingCandidate>, |best, c| match best {
            Some(b) if b.mismatch <= c.mismatch => Some(b),
            _ => Some(c),
        })
        .expect("non-empty grid");
    Ok(DampingFit {
        zeta_f: best.zeta_f,
        candidates: candidates.clone(),
    })
}

#[derive(Debug, Clone)]
pub struct Identified {
    pub params: GroundMotionParams,
    pub modulation: ModulationFit,
    pub damping: DampingFit,
}

/// Identifies envelope and filter parameters independently. The record
/// delay `t0` is kept in the result; simulation drops it.
pub fn identify(record: &TargetRecord, config: &IdentificationConfig) -> Result<Identified> {
    let modulation = fit_modulation(record)?;
    let damping = fit_damping(record, config)?;
    let chosen = damping.chosen().frequencies;
    let params = GroundMotionParams::new(
        modulation.params,
        FilterParams::new(chosen.omega0, chosen.omega_n, damping.zeta_f)?,
    )?;
    Ok(Identified {
        params,
        modulation,
        damping,
    })
}

pub const PARAM_COLUMNS: [&str; 10] = [
    "id", "alpha1", "alpha2", "alpha3", "t1", "t2", "omega0", "omegaN", "zetaF", "t0",
];

/// One row per record with named parameter columns.
pub fn parameters_table(rows: &[(String, GroundMotionParams)]) -> Table {
    let mut t = Table::new(PARAM_COLUMNS);
    for (id, p) in rows {
        let m = &p.modulation;
        let f = &p.filter;
        t.push([
            id.clone(),
            m.alpha1.to_string(),
            m.alpha2.to_string(),
            m.alpha3.to_string(),
            m.t1.to_string(),
            m.t2.to_string(),
            f.omega0.to_string(),
            f.omega_n.to_string(),
            f.zeta_f.to_string(),
            m.t0.to_string(),
        ]);
    }
    t
}

pub fn parse_parameters_table(t: &Table) -> Result<Vec<(String, GroundMotionParams)>> {
    let idx = |name: &str| {
        t.column_index(name)
            .ok_or_else(|| Error::invalid(format!("missing column `{name}`")))
    };
    let cols: Vec<usize> = PARAM_COLUMNS[1..]
        .iter()
        .map(|c| idx(c))
        .collect::<Result<_>>()?;
    let id_col = t.column_index("id");
    t.rows
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let v: Vec<f64> = cols
                .iter()
                .map(|&j| {
                    r[j].parse::<f64>()
                        .map_err(|e| Error::invalid(format!("row {i}: {e}")))
                })
                .collect::<Result<_>>()?;
            let params = GroundMotionParams::new(
                ModulationParams {
                    alpha1: v[0],
                    alpha2: v[1],
                    alpha3: v[2],
                    t0: v[8],
                    t1: v[3],
                    t2: v[4],
                },
                FilterParams {
                    omega0: v[5],
                    omega_n: v[6],
                    zeta_f: v[7],
                },
            )
            .map_err(|e| Error::invalid(format!("row {i}: {e}")))?;
            let id = id_col.map(|j| r[j].clone()).unwrap_or_else(|| i.to_string());
            Ok((id, params))
        })
        .collect()
}

pub fn read_parameters_csv(path: &Path) -> Result<Vec<(String, GroundMotionParams)>> {
    let t = Table::read(path)?;
    parse_parameters_table(&t).map_err(|e| Error::format(path, e.to_string()))
}
