//! Conformal prediction sets for multi-label catheter and line
//! classification.
//!
//! The crate consumes per-class probabilities from an upstream classifier
//! and turns them into per-class prediction sets over `{Present, Absent}`
//! with a finite-sample coverage guarantee. On top of the sets it provides
//! coverage and clinical safety metrics, per-image triage, workload
//! extrapolation, a Dynamic Weight Averaging replay utility and the file
//! formats and CLI that tie them together.
//!
//! Module map:
//!
//! * [`taxonomy`]: class registry, risk groups and tube categories
//! * [`conformal`]: nonconformity scores, quantiles, calibration, sets
//! * [`metrics`]: coverage, high-risk misprediction, potential critical miss
//! * [`triage`]: per-image categories and workload
//! * [`dwa`]: multi-task loss weights
//! * [`dataio`]: CSV/JSON formats, grouped split, synthetic cohorts
//! * [`cli`]: the `linecp` command line

pub mod cli;
pub mod conformal;
pub mod dataio;
pub mod dwa;
pub mod error;
pub mod metrics;
pub mod report;
pub mod taxonomy;
pub mod triage;

pub use conformal::{
    calibrate_independent, calibrate_risk_sensitive, conformal_quantile, nonconformity,
    predict_sets, CalibrationMode, CalibrationModel, ConformalThreshold, LabelSet, Outcome,
    Pooling, PredictionSet, Thresholds,
};
pub use dataio::ScoredCase;
pub use error::{Error, Result};
pub use taxonomy::{ClassDef, RiskGroup, Taxonomy, TubeCategory};
pub use triage::{CaseVerdict, TriageCategory};
