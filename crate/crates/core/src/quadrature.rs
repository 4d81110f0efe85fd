//! Trapezoidal quadrature on uniform grids. Every time integral in the crate
//! (ground velocity and displacement, energies, residual checks) goes
//! through these helpers.

/// Running trapezoidal integral, starting at zero.
pub fn cumulative_trapezoid(values: &[f64], dt: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len());
    let mut acc = 0.0;
    if let Some(&first) = values.first() {
        out.push(0.0);
        let mut prev = first;
        for &v in &values[1..] {
            acc += 0.5 * dt * (prev + v);
            out.push(acc);
            prev = v;
        }
    }
    out
}

pub fn trapezoid(values: &[f64], dt: f64) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let inner: f64 = values[1..values.len() - 1].iter().sum();
    dt * (inner + 0.5 * (values[0] + values[values.len() - 1]))
}

/// Running trapezoidal integral of the squared values.
pub fn cumulative_energy(values: &[f64], dt: f64) -> Vec<f64> {
    let sq: Vec<f64> = values.iter().map(|v| v * v).collect();
    cumulative_trapezoid(&sq, dt)
}

pub fn max_abs(values: &[f64]) -> f64 {
    values.iter().fold(0.0, |m: f64, v| m.max(v.abs()))
}
