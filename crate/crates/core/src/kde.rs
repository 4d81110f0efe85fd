//! Gaussian kernel density estimate over identified parameter vectors.
//!
//! The bandwidth is `H = beta^2 * Sigma`, with `Sigma` the sample covariance
//! and `beta` the AMISE-optimal scale for the curvature functional `R`
//! estimated by a Gaussian-pilot plug-in.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::ground_motion::{GroundMotionParams, THETA_DIM};

/// A set of points in `R^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterEnsemble {
    points: Vec<Vec<f64>>,
    dim: usize,
}

impl ParameterEnsemble {
    pub fn new(points: Vec<Vec<f64>>) -> Result<Self> {
        let dim = points.first().map(Vec::len).unwrap_or(0);
        if dim == 0 {
            return Err(Error::invalid("ensemble needs at least one non-empty point"));
        }
        if points.iter().any(|p| p.len() != dim) {
            return Err(Error::invalid("ensemble points have differing dimensions"));
        }
        if points.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::invalid("ensemble contains non-finite values"));
        }
        Ok(Self { points, dim })
    }

    /// Ensemble of `theta` vectors; every entry must be a valid motion.
    pub fn from_params(params: &[GroundMotionParams]) -> Result<Self> {
        for p in params {
            p.validate()?;
        }
        Self::new(params.iter().map(|p| p.theta().to_vec()).collect())
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn count(&self) -> usize {
        self.points.len()
    }

    pub fn mean(&self) -> DVector<f64> {
        let mut m = DVector::zeros(self.dim);
        for p in &self.points {
            m += DVector::from_column_slice(p);
        }
        m / self.count() as f64
    }

    /// Unbiased sample covariance (zero for a single point).
    pub fn covariance(&self) -> DMatrix<f64> {
        let n = self.count();
        let mean = self.mean();
        let mut c = DMatrix::zeros(self.dim, self.dim);
        for p in &self.points {
            let d = DVector::from_column_slice(p) - &mean;
            c += &d * d.transpose();
        }
        if n > 1 {
            c / (n - 1) as f64
        } else {
            c
        }
    }
}

/// AMISE-optimal scale `[d (4 pi)^{d/2} N R]^{-1/(d+4)}`.
pub fn beta_opt(dim: usize, count: usize, r: f64) -> f64 {
    let d = dim as f64;
    (d * (4.0 * PI).powf(d / 2.0) * count as f64 * r).powf(-1.0 / (d + 4.0))
}

/// Plug-in estimate of `R = ∫ tr²(Sigma Hess p)` from points already
/// whitened by `Sigma`. The pilot density is the Gaussian KDE with
/// bandwidth `G = g² I`, `g² = (4 / ((d+2) N))^{2/(d+4)}`, whose curvature
/// functional has the closed form used here (pairwise kernels of variance
/// `2g²` times the fourth-order Hermite factor).
pub fn curvature_estimate(whitened: &[DVector<f64>]) -> f64 {
    let n = whitened.len();
    let d = whitened[0].len() as f64;
    let g2 = (4.0 / ((d + 2.0) * n as f64)).powf(2.0 / (d + 4.0));
    let s2 = 2.0 * g2;
    let norm = (2.0 * PI * s2).powf(-d / 2.0);
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            let m = (&whitened[i] - &whitened[j]).norm_squared() / s2;
            let hermite = m * m - 2.0 * (d + 2.0) * m + d * (d + 2.0);
            acc += norm * (-0.5 * m).exp() * hermite;
        }
    }
    acc / (s2 * s2 * (n * n) as f64)
}

#[derive(Debug, Clone)]
pub struct KdeModel {
    ensemble: ParameterEnsemble,
    covariance: DMatrix<f64>,
    bandwidth: DMatrix<f64>,
    beta: f64,
    /// Lower-triangular factor of the bandwidth.
    chol: DMatrix<f64>,
    /// Set when the covariance needed diagonal jitter.
    pub regularized: bool,
    /// Rejections after which sampling gives up.
    pub max_rejections: usize,
}

fn regularize(cov: &DMatrix<f64>) -> (DMatrix<f64>, bool) {
    let d = cov.nrows();
    let trace = cov.trace();
    if let Some(c) = cov.clone().cholesky() {
        let l = c.l();
        let min_pivot = (0..d).map(|k| l[(k, k)] * l[(k, k)]).fold(f64::INFINITY, f64::min);
        if min_pivot > 1e-12 * trace / d as f64 {
            return (cov.clone(), false);
        }
    }
    let jitter = if trace > 0.0 { 1e-8 * trace / d as f64 } else { 1e-8 };
    let mut c = cov.clone();
    for k in 0..d {
        c[(k, k)] += jitter;
    }
    (c, true)
}

fn whiten(ens: &ParameterEnsemble, chol: &Cholesky<f64, Dyn>) -> Vec<DVector<f64>> {
    let l = chol.l();
    ens.points
        .iter()
        .map(|p| {
            l.solve_lower_triangular(&DVector::from_column_slice(p))
                .expect("triangular factor is nonsingular")
        })
        .collect()
}

/// Builds the estimate with the plug-in bandwidth.
pub fn kristan_bandwidth(ensemble: &ParameterEnsemble) -> Result<KdeModel> {
    if ensemble.count() < 2 {
        return Err(Error::invalid("bandwidth estimation needs at least 2 points"));
    }
    let (cov, regularized) = regularize(&ensemble.covariance());
    let chol = cov
        .clone()
        .cholesky()
        .ok_or_else(|| Error::domain("covariance is not positive definite after jitter"))?;
    let r = curvature_estimate(&whiten(ensemble, &chol));
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::domain(format!("curvature estimate {r} is not positive")));
    }
    let beta = beta_opt(ensemble.dim(), ensemble.count(), r);
    let mut model = KdeModel::with_beta(ensemble.clone(), cov, beta)?;
    model.regularized = regularized;
    Ok(model)
}

impl KdeModel {
    /// Model with a prescribed scale and covariance (`H = beta^2 cov`).
    pub fn with_beta(ensemble: ParameterEnsemble, covariance: DMatrix<f64>, beta: f64) -> Result<Self> {
        let d = ensemble.dim();
        if covariance.shape() != (d, d) {
            return Err(Error::invalid("covariance shape does not match the ensemble"));
        }
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::domain("beta must be positive"));
        }
        let bandwidth = &covariance * (beta * beta);
        let chol = bandwidth
            .clone()
            .cholesky()
            .ok_or_else(|| Error::domain("bandwidth is not positive definite"))?
            .l();
        Ok(Self {
            ensemble,
            covariance,
            bandwidth,
            beta,
            chol,
            regularized: false,
            max_rejections: 1000,
        })
    }

    pub fn ensemble(&self) -> &ParameterEnsemble {
        &self.ensemble
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    pub fn bandwidth(&self) -> &DMatrix<f64> {
        &self.bandwidth
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn dim(&self) -> usize {
        self.ensemble.dim()
    }

    /// Mixture density at `x`.
    pub fn pdf(&self, x: &[f64]) -> f64 {
        let d = self.dim();
        let log_det: f64 = (0..d).map(|k| self.chol[(k, k)].ln()).sum::<f64>() * 2.0;
        let norm = ((2.0 * PI).powf(d as f64) * log_det.exp()).sqrt().recip();
        let x = DVector::from_column_slice(x);
        let total: f64 = self
            .ensemble
            .points
            .iter()
            .map(|p| {
                let diff = &x - DVector::from_column_slice(p);
                let z = self
                    .chol
                    .solve_lower_triangular(&diff)
                    .expect("triangular factor is nonsingular");
                (-0.5 * z.norm_squared()).exp()
            })
            .sum();
        norm * total / self.ensemble.count() as f64
    }

    /// One unconstrained draw: a uniform component plus Gaussian jitter.
    pub fn sample_point<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let i = rng.random_range(0..self.ensemble.count());
        let z = DVector::from_iterator(self.dim(), (0..self.dim()).map(|_| rng.sample(StandardNormal)));
        let y = &self.chol * z;
        self.ensemble.points[i]
            .iter()
            .zip(y.iter())
            .map(|(a, b)| a + b)
            .collect()
    }

    /// Draws until `accept` holds, giving up after `max_rejections`
    /// consecutive rejections. Returns the point and the rejection count.
    pub fn sample_accepted<R, F>(&self, rng: &mut R, mut accept: F) -> Result<(Vec<f64>, usize)>
    where
        R: Rng + ?Sized,
        F: FnMut(&[f64]) -> bool,
    {
        for rejected in 0..=self.max_rejections {
            let p = self.sample_point(rng);
            if accept(&p) {
                return Ok((p, rejected));
            }
        }
        Err(Error::RejectionExhausted(self.max_rejections))
    }

    /// Draws a valid ground motion (positive amplitudes, ordered times,
    /// positive frequencies, damping in (0, 1)).
    pub fn sample_theta<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<GroundMotionParams> {
        if self.dim() != THETA_DIM {
            return Err(Error::invalid(format!(
                "sampling motions needs a {THETA_DIM}-dimensional model"
            )));
        }
        let (p, _) = self.sample_accepted(rng, theta_is_valid)?;
        GroundMotionParams::from_theta(&p)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let d = self.dim();
        let _ = writeln!(s, "beta,{}", self.beta);
        let _ = writeln!(s, "dim,{d}");
        let _ = writeln!(s, "[points]");
        for p in &self.ensemble.points {
            let _ = writeln!(s, "{}", join(p.iter()));
        }
        let _ = writeln!(s, "[covariance]");
        for r in 0..d {
            let _ = writeln!(s, "{}", join(self.covariance.row(r).iter()));
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut beta = None;
        let mut points = Vec::new();
        let mut cov = Vec::new();
        let mut section = "";
        for (ln, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if line.starts_with('[') {
                section = line;
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if section.is_empty() {
                if fields[0] == "beta" && fields.len() == 2 {
                    beta = fields[1].parse::<f64>().ok();
                }
                continue;
            }
            let row = fields
                .iter()
                .map(|f| f.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::invalid(format!("line {}: {e}", ln + 1)))?;
            match section {
                "[points]" => points.push(row),
                "[covariance]" => cov.push(row),
                other => return Err(Error::invalid(format!("unknown section {other}"))),
            }
        }
        let beta = beta.ok_or_else(|| Error::invalid("missing beta"))?;
        let ensemble = ParameterEnsemble::new(points)?;
        let d = ensemble.dim();
        if cov.len() != d || cov.iter().any(|r| r.len() != d) {
            return Err(Error::invalid("covariance block has the wrong shape"));
        }
        let cov = DMatrix::from_fn(d, d, |i, j| cov[i][j]);
        Self::with_beta(ensemble, cov, beta)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_text(&text).map_err(|e| Error::format(path, e.to_string()))
    }
}

fn join<'a>(values: impl Iterator<Item = &'a f64>) -> String {
    values.map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}

/// Acceptance test for drawn parameter vectors. The amplitude must be
/// strictly positive here even though a zero amplitude is a valid motion.
pub fn theta_is_valid(theta: &[f64]) -> bool {
    theta.len() == THETA_DIM
        && theta[0] > 0.0
        && GroundMotionParams::from_theta(theta).is_ok()
}
