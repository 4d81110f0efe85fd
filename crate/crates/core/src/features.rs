//! The 13 descriptors of a simulated signal: the 8 model parameters, peak
//! ground acceleration, velocity and displacement, total energy, and the
//! peak linear spectral displacement `L` at the structure frequency.

use crate::ground_motion::{Signal, THETA_DIM, THETA_NAMES};
use crate::quadrature::{cumulative_trapezoid, max_abs, trapezoid};

pub const FEATURE_DIM: usize = 13;

pub const FEATURE_NAMES: [&str; FEATURE_DIM] = [
    THETA_NAMES[0],
    THETA_NAMES[1],
    THETA_NAMES[2],
    THETA_NAMES[3],
    THETA_NAMES[4],
    THETA_NAMES[5],
    THETA_NAMES[6],
    THETA_NAMES[7],
    "PGA",
    "V",
    "D",
    "E",
    "L",
];

pub const IDX_OMEGA0: usize = 5;
pub const IDX_PGA: usize = 8;
pub const IDX_PGV: usize = 9;
pub const IDX_PGD: usize = 10;
pub const IDX_ENERGY: usize = 11;
pub const IDX_L: usize = 12;

/// Columns of the reduced `(L, PGA, V, omega0)` view.
pub const R4_COLUMNS: [usize; 4] = [IDX_L, IDX_PGA, IDX_PGV, IDX_OMEGA0];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureVector {
    pub theta: [f64; THETA_DIM],
    pub pga: f64,
    pub pgv: f64,
    pub pgd: f64,
    pub energy: f64,
    pub lin_disp: f64,
}

impl FeatureVector {
    pub fn to_array(&self) -> [f64; FEATURE_DIM] {
        let mut out = [0.0; FEATURE_DIM];
        out[..THETA_DIM].copy_from_slice(&self.theta);
        out[IDX_PGA] = self.pga;
        out[IDX_PGV] = self.pgv;
        out[IDX_PGD] = self.pgd;
        out[IDX_ENERGY] = self.energy;
        out[IDX_L] = self.lin_disp;
        out
    }

    pub fn from_array(a: &[f64; FEATURE_DIM]) -> Self {
        let mut theta = [0.0; THETA_DIM];
        theta.copy_from_slice(&a[..THETA_DIM]);
        Self {
            theta,
            pga: a[IDX_PGA],
            pgv: a[IDX_PGV],
            pgd: a[IDX_PGD],
            energy: a[IDX_ENERGY],
            lin_disp: a[IDX_L],
        }
    }
}

/// Peak |s|, peak |∫s|, peak |∬s| and ∫s² (trapezoidal), assembled with
/// the parameters and the precomputed linear displacement.
pub fn extract(signal: &Signal, theta: &[f64; THETA_DIM], lin_disp: f64) -> FeatureVector {
    let s = signal.samples();
    let dt = signal.dt();
    let vel = cumulative_trapezoid(s, dt);
    let disp = cumulative_trapezoid(&vel, dt);
    let sq: Vec<f64> = s.iter().map(|v| v * v).collect();
    FeatureVector {
        theta: *theta,
        pga: max_abs(s),
        pgv: max_abs(&vel),
        pgd: max_abs(&disp),
        energy: trapezoid(&sq, dt),
        lin_disp,
    }
}
