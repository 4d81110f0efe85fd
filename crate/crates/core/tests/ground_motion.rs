use std::f64::consts::PI;

use seisfrag::ground_motion::{synthesize, Grid};
use seisfrag::rng::stream;
use seisfrag::{FilterParams, GroundMotionParams, ModulationParams};

const SEEDS: u64 = 500;

fn constant(alpha1: f64, t1: f64, t2: f64, f_hz: f64, zeta: f64) -> GroundMotionParams {
    GroundMotionParams::new(
        ModulationParams::new(alpha1, 0.4, 1.1, 0.0, t1, t2).unwrap(),
        FilterParams::constant(2.0 * PI * f_hz, zeta),
    )
    .unwrap()
}

#[test]
fn mean_energy_follows_the_envelope() {
    let cases = [
        constant(0.5, 1.0, 4.0, 5.0, 0.3),
        constant(1.2, 2.0, 6.0, 2.0, 0.5),
        constant(0.1, 0.5, 3.0, 10.0, 0.2),
    ];
    for (c, p) in cases.iter().enumerate() {
        let m = p.modulation;
        let dt = 0.01;
        // t = T, the end of the strong phase
        let n = (m.t2 / dt).round() as usize;
        let mut mean = 0.0;
        for seed in 0..SEEDS {
            let s = synthesize(p, m.t2 + 1.0, dt, &mut stream(seed, "energy", c as u64)).unwrap();
            mean += s.samples()[..n].iter().map(|v| v * v * dt).sum::<f64>();
        }
        mean /= SEEDS as f64;
        let want: f64 = (0..n).map(|k| m.q(k as f64 * dt).powi(2) * dt).sum();
        assert!((mean - want).abs() / want < 0.02, "case {c}: {mean} vs {want}");
    }
}

#[test]
fn plateau_variance_is_alpha1_squared() {
    let p = constant(0.7, 1.0, 12.0, 4.0, 0.3);
    let dt = 0.01;
    let probes = [600usize, 900, 1150];
    let mut sums = [0.0; 3];
    for seed in 0..SEEDS {
        let s = synthesize(&p, 13.0, dt, &mut stream(seed, "plateau", 0)).unwrap();
        for (acc, &k) in sums.iter_mut().zip(&probes) {
            *acc += s.samples()[k].powi(2);
        }
    }
    // 500 squared Gaussians: relative standard error about 6%, so pool the probes
    let var = sums.iter().sum::<f64>() / (3 * SEEDS) as f64;
    assert!((var / 0.49 - 1.0).abs() < 0.05, "{var}");
}

#[test]
fn synthesis_is_linear_in_amplitude() {
    let a = constant(0.3, 1.0, 4.0, 6.0, 0.4);
    let b = constant(0.6, 1.0, 4.0, 6.0, 0.4);
    let sa = synthesize(&a, 10.0, 0.01, &mut stream(5, "lin", 0)).unwrap();
    let sb = synthesize(&b, 10.0, 0.01, &mut stream(5, "lin", 0)).unwrap();
    for (x, y) in sa.samples().iter().zip(sb.samples()) {
        assert!((2.0 * x - y).abs() <= 1e-12 * y.abs().max(1e-12));
    }
    assert_eq!(Grid::new(10.0, 0.01).duration(), sa.duration());
}
