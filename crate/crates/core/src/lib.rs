//! BOIN dose-finding: interval design and trial conduct, isotonic and
//! Bayesian dose-response MTD estimators, prior elicitation, and a
//! simulation harness for operating characteristics.

pub mod design;
pub mod drm;
pub mod elicit;
pub mod error;
pub mod estimate;
pub mod link;
pub mod mcmc;
pub mod pava;
#[cfg(feature = "server")]
pub mod service;
pub mod sim;
pub mod sweep;
pub mod trial;

pub use design::{
    compute_boundaries, decide, decision_table, Action, Boundaries, DoseGrid, DoseLevel,
    TrialDesign,
};
pub use drm::{
    CoefficientPrior, DoseData, DoseResponseModel, GridSpec, PointEstimate, PosteriorSummary,
};
pub use error::{Error, Result};
pub use estimate::{
    Admissibility, DrmEstimator, MtdEstimator, PavaEstimator, PosteriorEngine, Selection,
};
pub use link::Link;
pub use trial::{CohortOutcome, Decision, TrialState, TrialStatus};
