//! Classifiers and the active learning loop.

pub mod active;
pub mod metrics;
pub mod svm;

pub use active::{
    active_learn, active_learn_from, log_schedule, select_start_points, weight_trace, ActiveConfig,
    ActiveState, IterationRecord, LabelOracle, LookupOracle, Pool, Snapshot,
};
pub use metrics::{auc, prbp, roc_auc, roc_curve, simple_classifier_prbp};
pub use svm::{train_svm, Kernel, SvmModel};
