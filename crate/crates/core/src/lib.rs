//! Non-parametric seismic fragility curves from active learning on support
//! vector machines.
//!
//! The pipeline, module by module:
//!
//! * [`ground_motion`]: modulated filtered white-noise accelerograms.
//! * [`identification`]: fitting the signal model to a target record.
//! * [`kde`]: Gaussian KDE over identified parameters and sampling.
//! * [`oscillator`]: elastoplastic and linear single-DOF responses.
//! * [`features`]: the 13 intensity descriptors of a signal.
//! * [`preprocess`]: pool filtering, Box-Cox and standardization.
//! * [`learning`]: SVMs, uncertainty-sampling active learning, PRBP/ROC.
//! * [`fragility`]: logistic calibration, k-means binning, curve metrics.
//! * [`pipeline`]: seeded end-to-end commands and their artifacts.

pub mod ensemble;
pub mod error;
pub mod features;
pub mod fragility;
pub mod ground_motion;
pub mod identification;
pub mod io;
pub mod kde;
pub mod learning;
pub mod optimize;
pub mod oscillator;
pub mod pipeline;
pub mod preprocess;
pub mod quadrature;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
pub use ground_motion::{FilterParams, GroundMotionParams, ModulationParams, Signal};
