//! Terminal MTD estimators applied to a finished trial.

use serde::{Deserialize, Serialize};

use crate::design::{DoseLevel, TrialDesign};
use crate::drm::{self, DoseData, DoseResponseModel, GridSpec, PointEstimate, PosteriorSummary};
use crate::error::Result;
use crate::mcmc::{self, McmcConfig};
use crate::pava;
use crate::trial::{TrialState, TrialStatus};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub mtd: Option<DoseLevel>,
    /// Per-dose estimates used for the pick; `None` where the method gives none.
    pub estimates: Vec<Option<f64>>,
    pub admissible: Vec<bool>,
}

pub trait MtdEstimator: Send + Sync {
    fn select(&self, state: &TrialState, design: &TrialDesign) -> Result<Selection>;
}

/// Isotonic estimator with the closest-to-target rule.
#[derive(Debug, Clone, Copy, Default)]
pub struct PavaEstimator;

impl MtdEstimator for PavaEstimator {
    fn select(&self, state: &TrialState, design: &TrialDesign) -> Result<Selection> {
        let (fit, mtd) = pava::select_mtd_pava(state, design);
        Ok(Selection {
            mtd,
            estimates: fit.p_hat,
            admissible: fit.admissible,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "engine", rename_all = "lowercase")]
pub enum PosteriorEngine {
    Grid(GridSpec),
    Mcmc(McmcConfig),
}

impl Default for PosteriorEngine {
    fn default() -> Self {
        PosteriorEngine::Grid(GridSpec::default())
    }
}

impl PosteriorEngine {
    pub fn posterior(
        &self,
        model: &DoseResponseModel,
        data: &DoseData,
        point: PointEstimate,
    ) -> Result<PosteriorSummary> {
        match *self {
            PosteriorEngine::Grid(spec) => drm::grid_posterior(model, data, spec, point),
            PosteriorEngine::Mcmc(cfg) => Ok(mcmc::mcmc_sample(model, data, cfg, point)?.summary),
        }
    }
}

/// Which doses a dose-response estimator may pick.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Admissibility {
    /// Treated doses that were not eliminated and pass the final screen.
    #[default]
    NotEliminated,
    /// Every treated dose; elimination only matters through an early stop.
    Treated,
}

impl Admissibility {
    pub fn flags(self, state: &TrialState, design: &TrialDesign) -> Vec<bool> {
        match self {
            Admissibility::NotEliminated => state.admissible(design),
            Admissibility::Treated => {
                let stopped = state.status == TrialStatus::StoppedAllEliminated;
                state.n.iter().map(|&n| !stopped && n > 0).collect()
            }
        }
    }
}

/// Dose-response model estimator.
#[derive(Debug, Clone)]
pub struct DrmEstimator {
    pub model: DoseResponseModel,
    pub engine: PosteriorEngine,
    pub point: PointEstimate,
    pub admissibility: Admissibility,
}

impl DrmEstimator {
    pub fn new(model: DoseResponseModel) -> Self {
        Self {
            model,
            engine: PosteriorEngine::default(),
            point: PointEstimate::Mean,
            admissibility: Admissibility::default(),
        }
    }

    pub fn with_admissibility(mut self, admissibility: Admissibility) -> Self {
        self.admissibility = admissibility;
        self
    }

    pub fn with_engine(mut self, engine: PosteriorEngine) -> Self {
        self.engine = engine;
        self
    }

    pub fn with_point(mut self, point: PointEstimate) -> Self {
        self.point = point;
        self
    }

    pub fn posterior(&self, state: &TrialState) -> Result<PosteriorSummary> {
        self.engine
            .posterior(&self.model, &DoseData::from_state(state), self.point)
    }
}

impl MtdEstimator for DrmEstimator {
    fn select(&self, state: &TrialState, design: &TrialDesign) -> Result<Selection> {
        let admissible = self.admissibility.flags(state, design);
        if !admissible.iter().any(|&a| a) {
            // nothing to choose from; skip the posterior
            return Ok(Selection {
                mtd: None,
                estimates: vec![None; admissible.len()],
                admissible,
            });
        }
        let summary = self.posterior(state)?;
        let mtd = drm::select_mtd_drm(&summary, design.phi(), &admissible);
        Ok(Selection {
            mtd,
            estimates: summary.estimates.into_iter().map(Some).collect(),
            admissible,
        })
    }
}

impl<E: MtdEstimator + ?Sized> MtdEstimator for &E {
    fn select(&self, state: &TrialState, design: &TrialDesign) -> Result<Selection> {
        (**self).select(state, design)
    }
}

impl<E: MtdEstimator + ?Sized> MtdEstimator for Box<E> {
    fn select(&self, state: &TrialState, design: &TrialDesign) -> Result<Selection> {
        (**self).select(state, design)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::DoseGrid;
    use crate::drm::CoefficientPrior;
    use crate::link::Link;

    fn estimator() -> DrmEstimator {
        DrmEstimator::new(DoseResponseModel::new(
            Link::Logit,
            DoseGrid::reference_grid(),
            CoefficientPrior::new(-1.592, 1.371, 0.412, 0.784).unwrap(),
        ))
    }

    #[test]
    fn drm_respects_admissibility() {
        let design = TrialDesign::new(0.3).unwrap();
        let state =
            TrialState::from_counts(vec![3, 6, 12, 9, 0, 0], vec![0, 0, 2, 6, 0, 0], &design)
                .unwrap();
        let sel = estimator().select(&state, &design).unwrap();
        assert_eq!(sel.admissible, vec![true, true, true, false, false, false]);
        let mtd = sel.mtd.unwrap().index();
        assert!(sel.admissible[mtd]);
        assert_eq!(sel.estimates.len(), 6);
    }

    #[test]
    fn treated_admissibility_keeps_eliminated_doses() {
        let design = TrialDesign::new(0.3).unwrap();
        let state =
            TrialState::from_counts(vec![3, 6, 12, 9, 0, 0], vec![0, 0, 2, 6, 0, 0], &design)
                .unwrap();
        let sel = estimator()
            .with_admissibility(Admissibility::Treated)
            .select(&state, &design)
            .unwrap();
        assert_eq!(sel.admissible, vec![true, true, true, true, false, false]);
        let stopped =
            TrialState::from_counts(vec![3, 0, 0, 0, 0, 0], vec![3, 0, 0, 0, 0, 0], &design)
                .unwrap();
        let sel = estimator()
            .with_admissibility(Admissibility::Treated)
            .select(&stopped, &design)
            .unwrap();
        assert_eq!(sel.mtd, None);
    }

    #[test]
    fn drm_on_stopped_trial_selects_nothing() {
        let design = TrialDesign::new(0.3).unwrap();
        let state =
            TrialState::from_counts(vec![3, 0, 0, 0, 0, 0], vec![3, 0, 0, 0, 0, 0], &design)
                .unwrap();
        let sel = estimator().select(&state, &design).unwrap();
        assert_eq!(sel.mtd, None);
        let sel = PavaEstimator.select(&state, &design).unwrap();
        assert_eq!(sel.mtd, None);
    }

    #[test]
    fn engine_json_is_tagged() {
        let e: PosteriorEngine =
            serde_json::from_str(r#"{"engine":"grid","points":401,"half_width":6.0}"#).unwrap();
        assert_eq!(
            e,
            PosteriorEngine::Grid(GridSpec {
                points: 401,
                half_width: 6.0
            })
        );
        let e: PosteriorEngine =
            serde_json::from_str(r#"{"engine":"mcmc","n_iter":3000,"n_burn":500,"seed":4}"#)
                .unwrap();
        assert!(matches!(e, PosteriorEngine::Mcmc(_)));
    }
}
