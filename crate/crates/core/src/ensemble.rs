//! Ground-truth parameter ensemble for the synthetic pseudo-records that
//! stand in for a database of recorded accelerograms.

use std::f64::consts::PI;

use rand::Rng;

use crate::error::Result;
use crate::ground_motion::{FilterParams, GroundMotionParams, ModulationParams};
use crate::identification::{parameters_table, parse_parameters_table};
use crate::io::Table;
use crate::rng::{stream, tags};

pub const PSEUDO_RECORD_COUNT: usize = 97;
pub const PSEUDO_RECORD_SEED: u64 = 20_250_101;

/// The shipped ensemble, generated by [`EnsembleRanges::default`] with
/// [`PSEUDO_RECORD_SEED`].
pub const SHIPPED_CSV: &str = include_str!("../data/pseudo_records.csv");

/// Uniform sampling ranges. Frequencies are in Hz here and stored as
/// circular frequencies; the amplitude is log-uniform.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnsembleRanges {
    pub alpha1: (f64, f64),
    pub alpha2: (f64, f64),
    pub alpha3: (f64, f64),
    pub t1: (f64, f64),
    pub plateau: (f64, f64),
    pub f0_hz: (f64, f64),
    /// `omegaN / omega0`.
    pub end_ratio: (f64, f64),
    pub zeta_f: (f64, f64),
}

impl Default for EnsembleRanges {
    fn default() -> Self {
        Self {
            alpha1: (0.02, 1.6),
            alpha2: (0.1, 0.8),
            alpha3: (0.8, 1.6),
            t1: (1.0, 4.0),
            plateau: (2.0, 10.0),
            f0_hz: (3.0, 15.0),
            end_ratio: (0.3, 1.0),
            zeta_f: (0.1, 0.6),
        }
    }
}

fn uniform<R: Rng + ?Sized>(rng: &mut R, (lo, hi): (f64, f64)) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}

impl EnsembleRanges {
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<GroundMotionParams> {
        let alpha1 = (uniform(rng, (self.alpha1.0.ln(), self.alpha1.1.ln()))).exp();
        let alpha2 = uniform(rng, self.alpha2);
        let alpha3 = uniform(rng, self.alpha3);
        let t1 = uniform(rng, self.t1);
        let t2 = t1 + uniform(rng, self.plateau);
        let omega0 = 2.0 * PI * uniform(rng, self.f0_hz);
        let omega_n = omega0 * uniform(rng, self.end_ratio);
        let zeta_f = uniform(rng, self.zeta_f);
        GroundMotionParams::new(
            ModulationParams::new(alpha1, alpha2, alpha3, 0.0, t1, t2)?,
            FilterParams::new(omega0, omega_n, zeta_f)?,
        )
    }

    /// `count` motions, record `i` drawn from its own stream.
    pub fn generate(&self, seed: u64, count: usize) -> Result<Vec<GroundMotionParams>> {
        (0..count)
            .map(|i| self.draw(&mut stream(seed, tags::ENSEMBLE, i as u64)))
            .collect()
    }
}

pub fn record_id(i: usize) -> String {
    format!("pr{i:03}")
}

pub fn ensemble_table(params: &[GroundMotionParams]) -> Table {
    let rows: Vec<(String, GroundMotionParams)> = params
        .iter()
        .enumerate()
        .map(|(i, p)| (record_id(i), *p))
        .collect();
    parameters_table(&rows)
}

/// The shipped pseudo-record parameters.
pub fn shipped() -> Result<Vec<GroundMotionParams>> {
    Ok(parse_parameters_table(&Table::parse(SHIPPED_CSV)?)?
        .into_iter()
        .map(|(_, p)| p)
        .collect())
}
