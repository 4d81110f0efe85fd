//! Modulated, filtered white-noise ground motions.
//!
//! A synthetic accelerogram is the product of a deterministic envelope
//! `q(t)` and a unit-variance process obtained by passing white noise
//! through a damped oscillator filter whose natural frequency drifts
//! linearly from `omega0` to `omega_n` over the record. A critically damped
//! high-pass filter removes residual velocity and displacement afterwards.
//!
//! Discretization: pulses sit on the signal grid, the white noise at node
//! `k` has variance `1/dt`, and both the convolution and the variance
//! `sigma_f^2` are left-Riemann sums over the same pulses, so the bracketed
//! process has unit variance at every node `t >= dt`.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Default high-pass corner, 0.2 Hz.
pub const DEFAULT_CORNER: f64 = 2.0 * PI * 0.2;
pub const DEFAULT_DT: f64 = 0.01;
/// Quiet time appended after the plateau end.
pub const DEFAULT_PADDING: f64 = 20.0;
pub const MIN_DURATION: f64 = 20.0;
/// IRF tail is dropped once its envelope falls below `exp(-DEFAULT_TAIL_CUTOFF)`
/// of its initial amplitude.
pub const DEFAULT_TAIL_CUTOFF: f64 = 8.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModulationParams {
    pub alpha1: f64,
    pub alpha2: f64,
    pub alpha3: f64,
    pub t0: f64,
    pub t1: f64,
    pub t2: f64,
}

impl ModulationParams {
    pub fn new(alpha1: f64, alpha2: f64, alpha3: f64, t0: f64, t1: f64, t2: f64) -> Result<Self> {
        let m = Self {
            alpha1,
            alpha2,
            alpha3,
            t0,
            t1,
            t2,
        };
        m.validate()?;
        Ok(m)
    }

    /// `alpha1 = 0` is accepted and yields a silent record.
    pub fn validate(&self) -> Result<()> {
        let finite = [self.alpha1, self.alpha2, self.alpha3, self.t0, self.t1, self.t2]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::domain("modulation parameters must be finite"));
        }
        if self.alpha1 < 0.0 || self.alpha2 <= 0.0 || self.alpha3 <= 0.0 {
            return Err(Error::domain(format!(
                "need alpha1 >= 0, alpha2 > 0, alpha3 > 0 (got {}, {}, {})",
                self.alpha1, self.alpha2, self.alpha3
            )));
        }
        if !(0.0 <= self.t0 && self.t0 <= self.t1 && self.t1 <= self.t2) {
            return Err(Error::domain(format!(
                "need 0 <= t0 <= t1 <= t2 (got {}, {}, {})",
                self.t0, self.t1, self.t2
            )));
        }
        Ok(())
    }

    /// The piecewise envelope: zero, quadratic ramp, plateau, stretched
    /// exponential decay.
    pub fn q(&self, t: f64) -> f64 {
        if t <= self.t0 {
            0.0
        } else if t <= self.t1 {
            let r = (t - self.t0) / (self.t1 - self.t0);
            self.alpha1 * r * r
        } else if t <= self.t2 {
            self.alpha1
        } else {
            self.alpha1 * (-self.alpha2 * (t - self.t2).powf(self.alpha3)).exp()
        }
    }
}

pub fn modulating_q(t: f64, m: &ModulationParams) -> f64 {
    m.q(t)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterParams {
    pub omega0: f64,
    pub omega_n: f64,
    pub zeta_f: f64,
}

impl FilterParams {
    pub fn new(omega0: f64, omega_n: f64, zeta_f: f64) -> Result<Self> {
        let f = Self {
            omega0,
            omega_n,
            zeta_f,
        };
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega0 > 0.0 && self.omega0.is_finite()) {
            return Err(Error::domain(format!("omega0 must be > 0 (got {})", self.omega0)));
        }
        if !(self.omega_n > 0.0 && self.omega_n.is_finite()) {
            return Err(Error::domain(format!("omega_n must be > 0 (got {})", self.omega_n)));
        }
        if !(self.zeta_f > 0.0 && self.zeta_f < 1.0) {
            return Err(Error::domain(format!("zeta_f must be in (0, 1) (got {})", self.zeta_f)));
        }
        Ok(())
    }

    pub fn constant(omega: f64, zeta_f: f64) -> Self {
        Self {
            omega0: omega,
            omega_n: omega,
            zeta_f,
        }
    }

    /// Filter frequency for a pulse applied at `tau` in a record of length `duration`.
    #[inline]
    pub fn frequency_at(&self, tau: f64, duration: f64) -> f64 {
        if duration > 0.0 {
            self.omega0 + tau / duration * (self.omega_n - self.omega0)
        } else {
            self.omega0
        }
    }
}

/// The 8 simulation parameters plus the record delay `t0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundMotionParams {
    pub modulation: ModulationParams,
    pub filter: FilterParams,
}

pub const THETA_DIM: usize = 8;
pub const THETA_NAMES: [&str; THETA_DIM] =
    ["alpha1", "alpha2", "alpha3", "t1", "t2", "omega0", "omegaN", "zetaF"];

impl GroundMotionParams {
    pub fn new(modulation: ModulationParams, filter: FilterParams) -> Result<Self> {
        let p = Self { modulation, filter };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        self.modulation.validate()?;
        self.filter.validate()
    }

    /// `(alpha1, alpha2, alpha3, t1, t2, omega0, omegaN, zetaF)` with the
    /// time origin moved to `t0`.
    pub fn theta(&self) -> [f64; THETA_DIM] {
        let m = &self.modulation;
        let f = &self.filter;
        [
            m.alpha1,
            m.alpha2,
            m.alpha3,
            m.t1 - m.t0,
            m.t2 - m.t0,
            f.omega0,
            f.omega_n,
            f.zeta_f,
        ]
    }

    /// Inverse of [`theta`](Self::theta), with `t0 = 0`.
    pub fn from_theta(theta: &[f64]) -> Result<Self> {
        if theta.len() != THETA_DIM {
            return Err(Error::invalid(format!(
                "theta must have {THETA_DIM} components, got {}",
                theta.len()
            )));
        }
        Self::new(
            ModulationParams {
                alpha1: theta[0],
                alpha2: theta[1],
                alpha3: theta[2],
                t0: 0.0,
                t1: theta[3],
                t2: theta[4],
            },
            FilterParams {
                omega0: theta[5],
                omega_n: theta[6],
                zeta_f: theta[7],
            },
        )
    }

    /// The same motion with `t0 = 0`, as used for simulation.
    pub fn for_simulation(&self) -> Self {
        let m = &self.modulation;
        Self {
            modulation: ModulationParams {
                t0: 0.0,
                t1: m.t1 - m.t0,
                t2: m.t2 - m.t0,
                ..*m
            },
            filter: self.filter,
        }
    }

    /// Plateau end plus the default quiet padding, at least [`MIN_DURATION`].
    pub fn default_duration(&self) -> f64 {
        (self.modulation.t2 - self.modulation.t0 + DEFAULT_PADDING).max(MIN_DURATION)
    }
}

/// Uniformly sampled acceleration record.
#[derive(Debug, Clone, PartialEq)]
pub struct Signal {
    dt: f64,
    samples: Vec<f64>,
}

impl Signal {
    pub fn new(dt: f64, samples: Vec<f64>) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::invalid(format!("dt must be > 0 (got {dt})")));
        }
        if samples.is_empty() {
            return Err(Error::invalid("signal has no samples"));
        }
        if let Some(k) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("sample {k} is not finite")));
        }
        Ok(Self { dt, samples })
    }

    pub fn zeros(dt: f64, len: usize) -> Result<Self> {
        Self::new(dt, vec![0.0; len])
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.dt * (self.samples.len() - 1) as f64
    }

    pub fn scaled(&self, c: f64) -> Signal {
        Signal {
            dt: self.dt,
            samples: self.samples.iter().map(|v| c * v).collect(),
        }
    }

    /// Appends `seconds` of zeros.
    pub fn padded(&self, seconds: f64) -> Signal {
        let extra = (seconds / self.dt).round() as usize;
        let mut samples = self.samples.clone();
        samples.resize(samples.len() + extra, 0.0);
        Signal { dt: self.dt, samples }
    }

    /// Linear interpolation, zero outside the record.
    pub fn value_at(&self, t: f64) -> f64 {
        if t < 0.0 {
            return 0.0;
        }
        let x = t / self.dt;
        let k = x.floor() as usize;
        if k + 1 >= self.samples.len() {
            return if k + 1 == self.samples.len() && (x - k as f64) < 1e-12 {
                self.samples[k]
            } else {
                0.0
            };
        }
        let w = x - k as f64;
        self.samples[k] * (1.0 - w) + self.samples[k + 1] * w
    }
}

/// Impulse response of the filter at lag `lag` for natural frequency `freq`.
#[inline]
pub fn irf_h(lag: f64, freq: f64, zeta_f: f64) -> f64 {
    if lag < 0.0 {
        return 0.0;
    }
    let s = (1.0 - zeta_f * zeta_f).sqrt();
    freq / s * (-zeta_f * freq * lag).exp() * (freq * s * lag).sin()
}

/// Time derivative of [`irf_h`] with respect to the lag.
#[inline]
pub fn irf_h_dot(lag: f64, freq: f64, zeta_f: f64) -> f64 {
    if lag < 0.0 {
        return 0.0;
    }
    let s = (1.0 - zeta_f * zeta_f).sqrt();
    let wd = freq * s;
    let a = zeta_f * freq;
    freq / s * (-a * lag).exp() * (wd * (wd * lag).cos() - a * (wd * lag).sin())
}

/// Standard deviation of the filtered process at `t`, as the left-Riemann
/// sum of `h^2` over pulses applied on the grid in `[0, t]`. Returns 0 at
/// `t = 0`.
pub fn sigma_f(t: f64, filter: &FilterParams, duration: f64, dt: f64) -> f64 {
    let n = (t / dt).round() as usize;
    let tn = n as f64 * dt;
    let mut var = 0.0;
    for k in 0..n {
        let tau = k as f64 * dt;
        let h = irf_h(tn - tau, filter.frequency_at(tau, duration), filter.zeta_f);
        var += h * h * dt;
    }
    var.sqrt()
}

/// Grid description shared by the synthesis routines.
#[derive(Debug, Clone, Copy)]
pub struct Grid {
    pub dt: f64,
    pub len: usize,
    /// Tail cutoff in e-foldings; `None` keeps the full IRF.
    pub tail_cutoff: Option<f64>,
}

impl Grid {
    pub fn new(duration: f64, dt: f64) -> Self {
        Self {
            dt,
            len: (duration / dt).round() as usize + 1,
            tail_cutoff: Some(DEFAULT_TAIL_CUTOFF),
        }
    }

    pub fn duration(&self) -> f64 {
        self.dt * (self.len - 1) as f64
    }
}

/// Visits every (pulse, lag) pair of the discretized convolution.
///
/// `visit(k, n, h)` receives the pulse index `k`, the output index `n > k`
/// and `h(t_n - t_k)`. Each pulse's response is generated by a complex
/// rotation recurrence rather than evaluating `exp`/`sin` at every lag.
fn for_each_pulse_response<F>(filter: &FilterParams, grid: &Grid, mut visit: F)
where
    F: FnMut(usize, usize, f64),
{
    let dt = grid.dt;
    let duration = grid.duration();
    let zeta = filter.zeta_f;
    let s = (1.0 - zeta * zeta).sqrt();
    for k in 0..grid.len.saturating_sub(1) {
        let w = filter.frequency_at(k as f64 * dt, duration);
        let decay = zeta * w;
        let wd = w * s;
        let amp = w / s;
        let r = (-decay * dt).exp();
        let (zr, zi) = (r * (wd * dt).cos(), r * (wd * dt).sin());
        let mut last = grid.len - 1 - k;
        if let Some(cut) = grid.tail_cutoff {
            let lag_steps = (cut / (decay * dt)).ceil();
            if lag_steps < last as f64 {
                last = lag_steps as usize;
            }
        }
        let (mut cr, mut ci) = (amp * zr, amp * zi);
        for m in 1..=last {
            visit(k, k + m, ci);
            let nr = cr * zr - ci * zi;
            ci = cr * zi + ci * zr;
            cr = nr;
        }
    }
}

/// Variance `sigma_f^2` of the filtered process on every grid node.
pub fn filter_variance(filter: &FilterParams, grid: &Grid) -> Vec<f64> {
    let mut var = vec![0.0; grid.len];
    let dt = grid.dt;
    for_each_pulse_response(filter, grid, |_, n, h| var[n] += h * h * dt);
    var
}

/// The unit-variance process `y(t)` for given standard normal draws, one per
/// grid node. `y = 0` where `sigma_f = 0`.
pub fn unit_process_from_noise(filter: &FilterParams, grid: &Grid, normals: &[f64]) -> Vec<f64> {
    assert_eq!(normals.len(), grid.len, "one normal draw per grid node");
    let dt = grid.dt;
    let gain = dt.sqrt();
    let mut acc = vec![0.0; grid.len];
    let mut var = vec![0.0; grid.len];
    for_each_pulse_response(filter, grid, |k, n, h| {
        acc[n] += h * normals[k] * gain;
        var[n] += h * h * dt;
    });
    acc.iter()
        .zip(&var)
        .map(|(a, v)| if *v > 0.0 { a / v.sqrt() } else { 0.0 })
        .collect()
}

pub fn draw_normals<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

pub fn unit_process<R: Rng + ?Sized>(filter: &FilterParams, grid: &Grid, rng: &mut R) -> Vec<f64> {
    let normals = draw_normals(rng, grid.len);
    unit_process_from_noise(filter, grid, &normals)
}

/// Synthesizes the raw (uncorrected) modulated filtered white-noise signal.
pub fn synthesize<R: Rng + ?Sized>(
    params: &GroundMotionParams,
    duration: f64,
    dt: f64,
    rng: &mut R,
) -> Result<Signal> {
    synthesize_on(params, &Grid::new(duration, dt), rng)
}

pub fn synthesize_on<R: Rng + ?Sized>(
    params: &GroundMotionParams,
    grid: &Grid,
    rng: &mut R,
) -> Result<Signal> {
    params.validate()?;
    let params = params.for_simulation();
    if !(grid.dt > 0.0) {
        return Err(Error::domain("dt must be > 0"));
    }
    if grid.duration() + 1e-9 < params.modulation.t2 {
        return Err(Error::domain(format!(
            "duration {} shorter than plateau end {}",
            grid.duration(),
            params.modulation.t2
        )));
    }
    let y = unit_process(&params.filter, grid, rng);
    let samples = y
        .iter()
        .enumerate()
        .map(|(n, yn)| params.modulation.q(n as f64 * grid.dt) * yn)
        .collect();
    Signal::new(grid.dt, samples)
}

/// Raw synthesis followed by the high-pass correction, on the default grid.
pub fn synthesize_corrected<R: Rng + ?Sized>(
    params: &GroundMotionParams,
    dt: f64,
    rng: &mut R,
) -> Result<Signal> {
    let raw = synthesize(params, params.default_duration(), dt, rng)?;
    Ok(highpass_correct(&raw, DEFAULT_CORNER))
}

/// Acceleration response of the critically damped oscillator
/// `u'' + 2 wc u' + wc^2 u = s` with zero initial state, integrated with the
/// average-acceleration Newmark rule. With this rule the trapezoidal
/// integrals of the output are exactly the oscillator velocity and
/// displacement, which decay once the input is quiet.
pub fn highpass_correct(raw: &Signal, omega_c: f64) -> Signal {
    let dt = raw.dt();
    let s = raw.samples();
    let mut out = Vec::with_capacity(s.len());
    let (mut u, mut v) = (0.0, 0.0);
    let mut a = s[0];
    out.push(a);
    let denom = 1.0 + omega_c * dt + 0.25 * omega_c * omega_c * dt * dt;
    for &sn in &s[1..] {
        let v_pred = v + 0.5 * dt * a;
        let u_pred = u + dt * v + 0.25 * dt * dt * a;
        let a_next = (sn - 2.0 * omega_c * v_pred - omega_c * omega_c * u_pred) / denom;
        v = v_pred + 0.5 * dt * a_next;
        u = u_pred + 0.25 * dt * dt * a_next;
        a = a_next;
        out.push(a);
    }
    Signal { dt, samples: out }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::{cumulative_trapezoid, max_abs, trapezoid};
    use crate::rng::stream;

    fn params(alpha1: f64) -> GroundMotionParams {
        GroundMotionParams::new(
            ModulationParams::new(alpha1, 0.4, 1.2, 0.0, 2.0, 6.0).unwrap(),
            FilterParams::new(2.0 * PI * 5.0, 2.0 * PI * 3.0, 0.3).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn envelope_branches() {
        let m = ModulationParams::new(1.0, 0.5, 1.0, 0.0, 2.0, 5.0).unwrap();
        assert!((m.q(1.0) - 0.25).abs() < 1e-15);
        assert_eq!(m.q(3.0), 1.0);
        assert_eq!(m.q(5.0), 1.0);
        assert_eq!(m.q(0.0), 0.0);
        assert!((m.q(5.0 + 1e-9) - 1.0).abs() < 1e-8);
        assert!((m.q(7.0) - (-1.0f64).exp()).abs() < 1e-15);
        assert!((m.q(2.0 + 1e-9) - m.q(2.0)).abs() < 1e-8);
    }

    #[test]
    fn modulation_rejects_bad_ordering() {
        assert!(ModulationParams::new(1.0, 0.5, 1.0, 0.0, 5.0, 2.0).is_err());
        assert!(ModulationParams::new(1.0, 0.0, 1.0, 0.0, 1.0, 2.0).is_err());
        assert!(FilterParams::new(1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn irf_basic_values() {
        assert_eq!(irf_h(-0.1, 10.0, 0.2), 0.0);
        assert_eq!(irf_h(0.0, 10.0, 0.2), 0.0);
        let w = 7.0;
        let peak = irf_h(PI / (2.0 * w), w, 0.0);
        assert!((peak - w).abs() < 1e-12);
        let bound = w / (1.0f64 - 0.09).sqrt();
        for k in 0..2000 {
            assert!(irf_h(k as f64 * 0.003, w, 0.3).abs() <= bound);
        }
        assert!(irf_h(50.0, w, 0.3).abs() < 1e-30);
    }

    #[test]
    fn irf_derivative_matches_finite_difference() {
        let (w, z) = (12.0, 0.25);
        for &lag in &[0.0, 0.05, 0.2, 0.7] {
            let eps = 1e-6;
            let fd = (irf_h(lag + eps, w, z) - irf_h((lag - eps).max(0.0), w, z))
                / (lag + eps - (lag - eps).max(0.0));
            assert!((fd - irf_h_dot(lag, w, z)).abs() < 1e-4 * w * w, "lag {lag}");
        }
    }

    #[test]
    fn sigma_f_converges_to_closed_form() {
        let (w, z) = (2.0 * PI * 5.0, 0.3);
        let f = FilterParams::constant(w, z);
        let dt = 0.005;
        let s = sigma_f(10.0, &f, 20.0, dt);
        let target = w / (4.0 * z);
        assert!(((s * s) - target).abs() / target < 0.005, "{} vs {}", s * s, target);
        assert_eq!(sigma_f(0.0, &f, 20.0, dt), 0.0);
        // dt refinement study
        let coarse = sigma_f(10.0, &f, 20.0, 0.005);
        let fine = sigma_f(10.0, &f, 20.0, 0.0025);
        assert!((coarse - fine).abs() / fine < 0.01);
    }

    #[test]
    fn grid_variance_matches_pointwise_sigma() {
        let f = FilterParams::new(20.0, 10.0, 0.2).unwrap();
        let mut grid = Grid::new(8.0, 0.01);
        grid.tail_cutoff = None;
        let var = filter_variance(&f, &grid);
        for &n in &[1usize, 10, 333, 800] {
            let s = sigma_f(n as f64 * 0.01, &f, grid.duration(), 0.01);
            assert!((var[n].sqrt() - s).abs() < 1e-9 * s.max(1.0));
        }
        grid.tail_cutoff = Some(DEFAULT_TAIL_CUTOFF);
        let truncated = filter_variance(&f, &grid);
        for (a, b) in var.iter().zip(&truncated) {
            assert!((a - b).abs() <= 1e-6 * a.max(1e-300));
        }
    }

    #[test]
    fn silent_envelope_gives_zero_signal() {
        let p = params(0.0);
        let s = synthesize(&p, 10.0, 0.01, &mut stream(1, "t", 0)).unwrap();
        assert!(s.samples().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn synthesis_is_deterministic_and_linear_in_alpha1() {
        let a = synthesize(&params(1.0), 12.0, 0.01, &mut stream(3, "t", 0)).unwrap();
        let b = synthesize(&params(1.0), 12.0, 0.01, &mut stream(3, "t", 0)).unwrap();
        assert_eq!(a, b);
        let c = synthesize(&params(2.0), 12.0, 0.01, &mut stream(3, "t", 0)).unwrap();
        for (x, y) in a.samples().iter().zip(c.samples()) {
            assert!((2.0 * x - y).abs() <= 1e-12 * y.abs().max(1.0));
        }
    }

    #[test]
    fn synthesis_checks_duration() {
        assert!(synthesize(&params(1.0), 4.0, 0.01, &mut stream(3, "t", 0)).is_err());
    }

    #[test]
    fn plateau_variance_is_alpha1_squared() {
        let p = GroundMotionParams::new(
            ModulationParams::new(1.5, 0.5, 1.0, 0.0, 1.0, 8.0).unwrap(),
            FilterParams::constant(2.0 * PI * 6.0, 0.3),
        )
        .unwrap();
        let grid = Grid::new(10.0, 0.01);
        let probe = [400usize, 550, 700];
        let mut sums = [0.0; 3];
        let seeds = 2000;
        for seed in 0..seeds {
            let s = synthesize_on(&p, &grid, &mut stream(11, "plateau", seed)).unwrap();
            for (acc, &n) in sums.iter_mut().zip(&probe) {
                *acc += s.samples()[n].powi(2);
            }
        }
        for acc in sums {
            let var = acc / seeds as f64;
            assert!((var - 2.25).abs() / 2.25 < 0.05, "variance {var}");
        }
    }

    #[test]
    fn highpass_zero_and_step() {
        let z = Signal::zeros(0.01, 100).unwrap();
        assert!(highpass_correct(&z, DEFAULT_CORNER).samples().iter().all(|v| *v == 0.0));
        let step = Signal::new(0.01, vec![1.0; 6000]).unwrap();
        let out = highpass_correct(&step, DEFAULT_CORNER);
        assert!(out.samples()[5999].abs() < 1e-6);
        assert!(out.samples()[0] == 1.0);
    }

    #[test]
    fn highpass_leaves_no_residual_velocity_or_displacement() {
        let raw = synthesize(&params(2.0), 16.0, 0.01, &mut stream(5, "hp", 0))
            .unwrap()
            .padded(25.0);
        let out = highpass_correct(&raw, DEFAULT_CORNER);
        let vel = cumulative_trapezoid(out.samples(), out.dt());
        let disp = cumulative_trapezoid(&vel, out.dt());
        let (v_end, d_end) = (vel.last().unwrap().abs(), disp.last().unwrap().abs());
        assert!(v_end / max_abs(&vel) < 1e-3);
        assert!(d_end / max_abs(&disp) < 1e-3, "{d_end} vs {}", max_abs(&disp));
        assert!(trapezoid(out.samples(), out.dt()).abs() / max_abs(&vel) < 1e-3);
    }

    #[test]
    fn highpass_is_linear() {
        let a = synthesize(&params(1.0), 10.0, 0.01, &mut stream(1, "lin", 0)).unwrap();
        let b = synthesize(&params(1.0), 10.0, 0.01, &mut stream(1, "lin", 1)).unwrap();
        let mix = Signal::new(
            0.01,
            a.samples().iter().zip(b.samples()).map(|(x, y)| 2.0 * x - 0.5 * y).collect(),
        )
        .unwrap();
        let (ca, cb) = (highpass_correct(&a, DEFAULT_CORNER), highpass_correct(&b, DEFAULT_CORNER));
        let cm = highpass_correct(&mix, DEFAULT_CORNER);
        for k in 0..cm.len() {
            let expect = 2.0 * ca.samples()[k] - 0.5 * cb.samples()[k];
            assert!((cm.samples()[k] - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn theta_roundtrip_shifts_origin() {
        let p = GroundMotionParams::new(
            ModulationParams::new(1.0, 0.3, 1.1, 1.5, 3.0, 8.0).unwrap(),
            FilterParams::new(30.0, 12.0, 0.4).unwrap(),
        )
        .unwrap();
        let theta = p.theta();
        assert_eq!(theta[3], 1.5);
        assert_eq!(theta[4], 6.5);
        let back = GroundMotionParams::from_theta(&theta).unwrap();
        assert_eq!(back, p.for_simulation());
    }
}
