//! Python bindings: ground-motion synthesis and identification, the
//! oscillator oracle, KDE sampling, SVM training, fragility calibration and
//! the file-based pipeline commands.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use seisfrag::ensemble;
use seisfrag::fragility;
use seisfrag::ground_motion::{self, FilterParams, ModulationParams};
use seisfrag::identification::{self, IdentificationConfig, TargetRecord};
use seisfrag::kde;
use seisfrag::learning::{self, Kernel};
use seisfrag::oscillator::{self, Label, Preset, StructureConfig};
use seisfrag::pipeline::{self, RunConfig};
use seisfrag::preprocess;
use seisfrag::rng::stream;
use seisfrag::Signal;

fn err(e: seisfrag::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn labels(v: &[i8]) -> PyResult<Vec<Label>> {
    v.iter().map(|&l| Label::from_i8(l).map_err(err)).collect()
}

/// Envelope and filter parameters of one ground motion. Frequencies are
/// circular (rad/s).
#[pyclass(name = "GroundMotionParams", from_py_object)]
#[derive(Clone)]
struct PyParams(ground_motion::GroundMotionParams);

#[pymethods]
impl PyParams {
    #[new]
    #[pyo3(signature = (alpha1, alpha2, alpha3, t1, t2, omega0, omega_n, zeta_f, t0 = 0.0))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        alpha1: f64,
        alpha2: f64,
        alpha3: f64,
        t1: f64,
        t2: f64,
        omega0: f64,
        omega_n: f64,
        zeta_f: f64,
        t0: f64,
    ) -> PyResult<Self> {
        let m = ModulationParams::new(alpha1, alpha2, alpha3, t0, t1, t2).map_err(err)?;
        let f = FilterParams::new(omega0, omega_n, zeta_f).map_err(err)?;
        Ok(Self(ground_motion::GroundMotionParams::new(m, f).map_err(err)?))
    }

    /// The eight sampled coordinates.
    fn theta(&self) -> Vec<f64> {
        self.0.theta().to_vec()
    }

    #[staticmethod]
    fn from_theta(theta: Vec<f64>) -> PyResult<Self> {
        Ok(Self(ground_motion::GroundMotionParams::from_theta(&theta).map_err(err)?))
    }

    fn default_duration(&self) -> f64 {
        self.0.default_duration()
    }

    /// Raw signal samples; `corrected` applies the high-pass correction on
    /// the default duration instead.
    #[pyo3(signature = (seed, dt = 0.01, duration = None, corrected = false))]
    fn synthesize(&self, seed: u64, dt: f64, duration: Option<f64>, corrected: bool) -> PyResult<Vec<f64>> {
        let mut rng = stream(seed, "python", 0);
        let s = if corrected {
            ground_motion::synthesize_corrected(&self.0, dt, &mut rng)
        } else {
            let d = duration.unwrap_or_else(|| self.0.default_duration());
            ground_motion::synthesize(&self.0, d, dt, &mut rng)
        };
        Ok(s.map_err(err)?.into_samples())
    }

    fn __repr__(&self) -> String {
        let (m, f) = (self.0.modulation, self.0.filter);
        format!(
            "GroundMotionParams(alpha=({:.4}, {:.4}, {:.4}), t1={:.3}, t2={:.3}, omega0={:.3}, omega_n={:.3}, zeta_f={:.3})",
            m.alpha1, m.alpha2, m.alpha3, m.t1, m.t2, f.omega0, f.omega_n, f.zeta_f
        )
    }
}

/// The shipped pseudo-record parameters.
#[pyfunction]
fn pseudo_records() -> PyResult<Vec<PyParams>> {
    Ok(ensemble::shipped().map_err(err)?.into_iter().map(PyParams).collect())
}

#[pyfunction]
#[pyo3(signature = (samples, dt, sim_replicates = 20, seed = 0))]
fn identify(samples: Vec<f64>, dt: f64, sim_replicates: usize, seed: u64) -> PyResult<PyParams> {
    let rec = TargetRecord::from_signal(Signal::new(dt, samples).map_err(err)?);
    let cfg = IdentificationConfig {
        sim_replicates,
        seed,
        ..Default::default()
    };
    Ok(PyParams(identification::identify(&rec, &cfg).map_err(err)?.params))
}

fn structure(preset: &str) -> PyResult<StructureConfig> {
    Ok(StructureConfig::preset(Preset::parse(preset).map_err(err)?))
}

/// `(Z, L, label)` of a ground acceleration for a structure preset.
#[pyfunction]
#[pyo3(signature = (samples, dt, preset = "5"))]
fn summarize(samples: Vec<f64>, dt: f64, preset: &str) -> PyResult<(f64, f64, i8)> {
    let s = Signal::new(dt, samples).map_err(err)?;
    let r = oscillator::summarize(&s, &structure(preset)?).map_err(err)?;
    Ok((r.max_nonlinear, r.max_linear, r.label.as_i8()))
}

#[pyfunction]
#[pyo3(signature = (samples, dt, frequencies, beta = 0.02))]
fn response_spectrum(samples: Vec<f64>, dt: f64, frequencies: Vec<f64>, beta: f64) -> PyResult<Vec<f64>> {
    let s = Signal::new(dt, samples).map_err(err)?;
    oscillator::response_spectrum(&s, &frequencies, beta).map_err(err)
}

/// Gaussian KDE over ground-motion parameters.
#[pyclass(name = "Kde")]
struct PyKde(kde::KdeModel);

#[pymethods]
impl PyKde {
    /// Bandwidth from the given parameters, or the shipped pseudo-records.
    #[new]
    #[pyo3(signature = (params = None))]
    fn new(params: Option<Vec<PyParams>>) -> PyResult<Self> {
        let ps: Vec<_> = match params {
            Some(v) => v.into_iter().map(|p| p.0).collect(),
            None => ensemble::shipped().map_err(err)?,
        };
        let e = kde::ParameterEnsemble::from_params(&ps).map_err(err)?;
        Ok(Self(kde::kristan_bandwidth(&e).map_err(err)?))
    }

    #[getter]
    fn beta(&self) -> f64 {
        self.0.beta()
    }

    fn pdf(&self, theta: Vec<f64>) -> f64 {
        self.0.pdf(&theta)
    }

    /// `count` valid motions from stream `seed`.
    fn sample(&self, seed: u64, count: usize) -> PyResult<Vec<PyParams>> {
        let mut rng = stream(seed, "python-kde", 0);
        (0..count)
            .map(|_| self.0.sample_theta(&mut rng).map(PyParams).map_err(err))
            .collect()
    }
}

#[pyfunction]
fn boxcox(x: f64, delta: f64) -> PyResult<f64> {
    preprocess::boxcox(x, delta).map_err(err)
}

#[pyfunction]
fn fit_boxcox_delta(column: Vec<f64>) -> PyResult<f64> {
    preprocess::fit_boxcox_delta(&column).map_err(err)
}

/// Trained soft-margin SVM.
#[pyclass(name = "Svm")]
struct PySvm(learning::SvmModel);

#[pymethods]
impl PySvm {
    /// Labels are +1 / -1; `gamma` selects the RBF kernel.
    #[new]
    #[pyo3(signature = (xs, labels, cost = 10.0, gamma = None))]
    fn new(xs: Vec<Vec<f64>>, labels: Vec<i8>, cost: f64, gamma: Option<f64>) -> PyResult<Self> {
        let kernel = match gamma {
            Some(g) => Kernel::Rbf { gamma: g },
            None => Kernel::Linear,
        };
        kernel.validate().map_err(err)?;
        let l = self::labels(&labels)?;
        Ok(Self(learning::train_svm(&xs, &l, kernel, cost).map_err(err)?.model))
    }

    fn score(&self, x: Vec<f64>) -> f64 {
        self.0.score(&x)
    }

    fn scores(&self, xs: Vec<Vec<f64>>) -> Vec<f64> {
        xs.iter().map(|x| self.0.score(x)).collect()
    }

    #[getter]
    fn weights(&self) -> Option<Vec<f64>> {
        self.0.weights.clone()
    }

    #[getter]
    fn bias(&self) -> f64 {
        self.0.bias
    }
}

#[pyfunction]
fn prbp(scores: Vec<f64>, labels: Vec<i8>) -> PyResult<f64> {
    learning::prbp(&scores, &self::labels(&labels)?).map_err(err)
}

#[pyfunction]
fn roc_auc(scores: Vec<f64>, labels: Vec<i8>) -> PyResult<f64> {
    learning::roc_auc(&scores, &self::labels(&labels)?).map_err(err)
}

/// `(slope, intercept, capped)` of the logistic calibration.
#[pyfunction]
fn fit_logistic(scores: Vec<f64>, labels: Vec<i8>) -> PyResult<(f64, f64, bool)> {
    let c = fragility::fit_logistic(&scores, &self::labels(&labels)?).map_err(err)?;
    Ok((c.slope, c.intercept, c.capped))
}

#[pyfunction]
fn hybrid_probability(p_lin: f64, p_rbf: f64) -> f64 {
    fragility::hybrid_probability(p_lin, p_rbf)
}

fn run_config(settings: Vec<(String, String)>) -> PyResult<RunConfig> {
    let mut cfg = RunConfig::default();
    for (k, v) in settings {
        cfg.set(&k, &v).map_err(err)?;
    }
    cfg.validate().map_err(err)?;
    Ok(cfg)
}

/// Runs a pipeline command (`generate`, `identify`, `labels`, `learn`,
/// `fragility` or `report`) with `key=value` settings over the defaults.
/// Returns the output directory.
#[pyfunction]
#[pyo3(signature = (command, **settings))]
fn run(command: &str, settings: Option<std::collections::BTreeMap<String, String>>) -> PyResult<String> {
    let cfg = run_config(settings.unwrap_or_default().into_iter().collect())?;
    match command {
        "generate" => pipeline::cmd_generate(&cfg).map(drop),
        "identify" => pipeline::cmd_identify(&cfg).map(drop),
        "labels" => pipeline::cmd_labels(&cfg).map(drop),
        "learn" => pipeline::cmd_learn(&cfg).map(drop),
        "fragility" => pipeline::cmd_fragility(&cfg).map(drop),
        "report" => pipeline::cmd_report(&cfg).map(drop),
        other => return Err(PyValueError::new_err(format!("unknown command `{other}`"))),
    }
    .map_err(err)?;
    Ok(cfg.out_dir.display().to_string())
}

#[pymodule]
fn seisfrag_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyParams>()?;
    m.add_class::<PyKde>()?;
    m.add_class::<PySvm>()?;
    m.add_function(wrap_pyfunction!(pseudo_records, m)?)?;
    m.add_function(wrap_pyfunction!(identify, m)?)?;
    m.add_function(wrap_pyfunction!(summarize, m)?)?;
    m.add_function(wrap_pyfunction!(response_spectrum, m)?)?;
    m.add_function(wrap_pyfunction!(boxcox, m)?)?;
    m.add_function(wrap_pyfunction!(fit_boxcox_delta, m)?)?;
    m.add_function(wrap_pyfunction!(prbp, m)?)?;
    m.add_function(wrap_pyfunction!(roc_auc, m)?)?;
    m.add_function(wrap_pyfunction!(fit_logistic, m)?)?;
    m.add_function(wrap_pyfunction!(hybrid_probability, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    Ok(())
}
