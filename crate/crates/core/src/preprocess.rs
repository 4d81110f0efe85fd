//! Pool filtering by linear response, per-component Box-Cox transforms and
//! standardization.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::features::{FEATURE_DIM, FEATURE_NAMES, R4_COLUMNS};
use crate::io::Table;
use crate::optimize::golden_section;

/// Closed interval of linear displacements kept for learning.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KeepRange {
    pub lo: f64,
    pub hi: f64,
}

impl KeepRange {
    /// `[Y, 6Y]`.
    pub fn for_yield(yield_y: f64) -> Self {
        Self {
            lo: yield_y,
            hi: 6.0 * yield_y,
        }
    }

    pub fn contains(&self, l: f64) -> bool {
        self.lo <= l && l <= self.hi
    }
}

/// Indices whose linear displacement lies in the keep range.
pub fn filter_pool(lin_disp: &[f64], range: KeepRange) -> Vec<usize> {
    lin_disp
        .iter()
        .enumerate()
        .filter(|(_, &l)| range.contains(l))
        .map(|(i, _)| i)
        .collect()
}

pub const DELTA_BRACKET: (f64, f64) = (-3.0, 3.0);

/// `(x^delta - 1) / delta`, or `ln x` at `delta = 0`.
pub fn boxcox(x: f64, delta: f64) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::domain(format!("Box-Cox needs x > 0, got {x}")));
    }
    Ok(boxcox_unchecked(x, delta))
}

fn boxcox_unchecked(x: f64, delta: f64) -> f64 {
    let lx = x.ln();
    if delta == 0.0 {
        lx
    } else {
        (delta * lx).exp_m1() / delta
    }
}

fn boxcox_inverse(y: f64, delta: f64) -> f64 {
    if delta == 0.0 {
        y.exp()
    } else {
        ((delta * y).ln_1p() / delta).exp()
    }
}

/// Profile log-likelihood of a normal model for the transformed data,
/// including the Jacobian term.
pub fn boxcox_log_likelihood(column: &[f64], delta: f64) -> f64 {
    let n = column.len() as f64;
    let t: Vec<f64> = column.iter().map(|&x| boxcox_unchecked(x, delta)).collect();
    let mean = t.iter().sum::<f64>() / n;
    let var = t.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let log_sum: f64 = column.iter().map(|x| x.ln()).sum();
    -0.5 * n * var.ln() + (delta - 1.0) * log_sum
}

/// Maximum-likelihood exponent on [`DELTA_BRACKET`]. The data is divided by
/// its geometric mean first, which leaves the maximizer unchanged.
pub fn fit_boxcox_delta(column: &[f64]) -> Result<f64> {
    if column.len() < 30 {
        return Err(Error::invalid("Box-Cox fit needs at least 30 values"));
    }
    if column.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
        return Err(Error::domain("Box-Cox fit needs positive finite values"));
    }
    let gm = (column.iter().map(|x| x.ln()).sum::<f64>() / column.len() as f64).exp();
    let scaled: Vec<f64> = column.iter().map(|x| x / gm).collect();
    if scaled.iter().all(|&v| v == scaled[0]) {
        return Ok(1.0);
    }
    let (lo, hi) = DELTA_BRACKET;
    Ok(golden_section(
        |d| -boxcox_log_likelihood(&scaled, d),
        lo,
        hi,
        1e-7,
    ))
}

/// Which columns the classifiers see.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureSet {
    R13,
    R4,
}

impl FeatureSet {
    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "r13" => Ok(Self::R13),
            "r4" => Ok(Self::R4),
            _ => Err(Error::Config(format!("unknown feature set `{s}` (r13|r4)"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::R13 => "r13",
            Self::R4 => "r4",
        }
    }

    pub fn columns(self) -> Vec<usize> {
        match self {
            Self::R13 => (0..FEATURE_DIM).collect(),
            Self::R4 => R4_COLUMNS.to_vec(),
        }
    }

    pub fn select(self, x: &[f64; FEATURE_DIM]) -> Vec<f64> {
        self.columns().iter().map(|&j| x[j]).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PreprocessModel {
    pub keep: KeepRange,
    pub deltas: [f64; FEATURE_DIM],
    pub shifts: [f64; FEATURE_DIM],
    pub means: [f64; FEATURE_DIM],
    pub stds: [f64; FEATURE_DIM],
}

impl PreprocessModel {
    /// Fits on the kept rows. Columns with a non-positive entry are shifted
    /// by `1 + |min|` before the transform.
    pub fn fit(kept: &[[f64; FEATURE_DIM]], keep: KeepRange) -> Result<Self> {
        if kept.len() < 30 {
            return Err(Error::invalid("preprocessing needs at least 30 kept rows"));
        }
        let mut deltas = [0.0; FEATURE_DIM];
        let mut shifts = [0.0; FEATURE_DIM];
        let mut means = [0.0; FEATURE_DIM];
        let mut stds = [0.0; FEATURE_DIM];
        for j in 0..FEATURE_DIM {
            let col: Vec<f64> = kept.iter().map(|r| r[j]).collect();
            let min = col.iter().copied().fold(f64::INFINITY, f64::min);
            let shift = if min <= 0.0 { 1.0 + min.abs() } else { 0.0 };
            let shifted: Vec<f64> = col.iter().map(|v| v + shift).collect();
            let delta = fit_boxcox_delta(&shifted)?;
            let t: Vec<f64> = shifted.iter().map(|&v| boxcox_unchecked(v, delta)).collect();
            let n = t.len() as f64;
            let mean = t.iter().sum::<f64>() / n;
            let std = (t.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
            if !(std > 0.0) {
                return Err(Error::domain(format!(
                    "component `{}` is constant on the kept pool",
                    FEATURE_NAMES[j]
                )));
            }
            deltas[j] = delta;
            shifts[j] = shift;
            means[j] = mean;
            stds[j] = std;
        }
        Ok(Self {
            keep,
            deltas,
            shifts,
            means,
            stds,
        })
    }

    /// Transform of one component. Values at or below `-shift` have no
    /// Box-Cox image and yield an error.
    pub fn apply_component(&self, j: usize, x: f64) -> Result<f64> {
        let t = boxcox(x + self.shifts[j], self.deltas[j])?;
        Ok((t - self.means[j]) / self.stds[j])
    }

    pub fn apply(&self, raw: &[f64; FEATURE_DIM]) -> Result<[f64; FEATURE_DIM]> {
        let mut out = [0.0; FEATURE_DIM];
        for j in 0..FEATURE_DIM {
            out[j] = self.apply_component(j, raw[j])?;
        }
        Ok(out)
    }

    /// Raw value mapping to the standardized value `z`.
    pub fn invert_component(&self, j: usize, z: f64) -> f64 {
        boxcox_inverse(z * self.stds[j] + self.means[j], self.deltas[j]) - self.shifts[j]
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# keep_lo={}", self.keep.lo);
        let _ = writeln!(s, "# keep_hi={}", self.keep.hi);
        let _ = writeln!(s, "component,delta,shift,mean,std");
        for j in 0..FEATURE_DIM {
            let _ = writeln!(
                s,
                "{},{},{},{},{}",
                FEATURE_NAMES[j], self.deltas[j], self.shifts[j], self.means[j], self.stds[j]
            );
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut keep = (None, None);
        for line in text.lines() {
            if let Some(rest) = line.trim().strip_prefix('#') {
                if let Some((k, v)) = rest.trim().split_once('=') {
                    let v = v.trim().parse::<f64>().ok();
                    match k.trim() {
                        "keep_lo" => keep.0 = v,
                        "keep_hi" => keep.1 = v,
                        _ => {}
                    }
                }
            }
        }
        let (Some(lo), Some(hi)) = keep else {
            return Err(Error::invalid("missing keep range"));
        };
        let t = Table::parse(text)?;
        if t.rows.len() != FEATURE_DIM {
            return Err(Error::invalid(format!("expected {FEATURE_DIM} component rows")));
        }
        let col = |name: &str| -> Result<[f64; FEATURE_DIM]> {
            let v = t.column_f64(name)?;
            Ok(v.try_into().expect("row count checked"))
        };
        Ok(Self {
            keep: KeepRange { lo, hi },
            deltas: col("delta")?,
            shifts: col("shift")?,
            means: col("mean")?,
            stds: col("std")?,
        })
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
