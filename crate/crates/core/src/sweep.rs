//! Simulation sweep configuration shared by the CLI and tests. The
//! structure is format-neutral; callers deserialize it from TOML or JSON.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::design::{DoseGrid, DoseLevel, TrialDesign, DEFAULT_ELIM_MIN_N, DEFAULT_ELIM_THRESHOLD};
use crate::drm::{CoefficientPrior, DoseResponseModel, PointEstimate};
use crate::elicit::{elicit_prior, ElicitationInput, OptimizeOptions};
use crate::error::{Error, Result};
use crate::estimate::{Admissibility, DrmEstimator, PavaEstimator, PosteriorEngine};
use crate::link::Link;
use crate::sim::{
    reference_scenarios, run_scenario, Method, Scenario, SimulationConfig, SimulationReport,
};

fn default_phi() -> f64 {
    0.3
}
fn default_cohort_size() -> u32 {
    3
}
fn default_n_cohorts() -> u32 {
    12
}
fn default_doses() -> Vec<f64> {
    DoseGrid::reference_grid().doses().to_vec()
}
fn default_ref_index() -> usize {
    3
}
fn default_reps() -> usize {
    1000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub name: String,
    pub true_probs: Vec<f64>,
}

/// Where a DRM arm gets its coefficient prior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PriorSource {
    Inline(CoefficientPrior),
    /// Model JSON as written by `elicit`; only the prior fields are used.
    File {
        file: PathBuf,
    },
    Elicit {
        p1: f64,
        pj: f64,
        #[serde(default)]
        levels: Option<Vec<f64>>,
        #[serde(default)]
        restarts: Option<usize>,
        #[serde(default)]
        var_floor: Option<f64>,
        #[serde(default)]
        seed: Option<u64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "lowercase")]
pub enum MethodConfig {
    Pava {
        #[serde(default)]
        label: Option<String>,
    },
    Drm {
        #[serde(default)]
        label: Option<String>,
        link: Link,
        prior: PriorSource,
        #[serde(default)]
        engine: PosteriorEngine,
        #[serde(default)]
        point: PointEstimate,
        #[serde(default)]
        admissible: Admissibility,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default = "default_phi")]
    pub phi: f64,
    #[serde(default)]
    pub phi1: Option<f64>,
    #[serde(default)]
    pub phi2: Option<f64>,
    #[serde(default = "default_cohort_size")]
    pub cohort_size: u32,
    #[serde(default = "default_n_cohorts")]
    pub n_cohorts: u32,
    #[serde(default = "default_doses")]
    pub doses: Vec<f64>,
    #[serde(default = "default_ref_index")]
    pub ref_index: usize,
    #[serde(default = "default_reps")]
    pub reps: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub independent_paths: bool,
    /// Empty means the eight built-in scenarios.
    #[serde(default)]
    pub scenarios: Vec<ScenarioSpec>,
    /// Restrict to these scenario names.
    #[serde(default)]
    pub only: Vec<String>,
    pub methods: Vec<MethodConfig>,
}

pub struct ResolvedSweep {
    pub design: TrialDesign,
    pub grid: DoseGrid,
    pub scenarios: Vec<Scenario>,
    pub methods: Vec<Method>,
    /// Prior actually used by each DRM arm, by label.
    pub priors: Vec<(String, CoefficientPrior)>,
    pub sim: SimulationConfig,
}

impl SweepConfig {
    pub fn design(&self) -> Result<TrialDesign> {
        let mut builder = TrialDesign::builder(self.phi)
            .cohorts(self.cohort_size, self.n_cohorts)
            .elimination(DEFAULT_ELIM_THRESHOLD, DEFAULT_ELIM_MIN_N);
        if let (Some(p1), Some(p2)) = (self.phi1, self.phi2) {
            builder = builder.probes(p1, p2);
        } else if self.phi1.is_some() || self.phi2.is_some() {
            return Err(Error::InvalidDesign(
                "set both phi1 and phi2 or neither".into(),
            ));
        }
        builder.build()
    }

    pub fn grid(&self) -> Result<DoseGrid> {
        let reference = DoseLevel::from_number(self.ref_index)
            .ok_or_else(|| Error::InvalidGrid("ref_index is one-based".into()))?;
        DoseGrid::new(self.doses.clone(), reference)
    }

    /// Validates everything, loads or elicits priors and builds the
    /// estimators. Relative prior paths resolve against `base_dir`.
    pub fn resolve(&self, base_dir: &Path) -> Result<ResolvedSweep> {
        let design = self.design()?;
        let grid = self.grid()?;
        let mut scenarios = if self.scenarios.is_empty() {
            reference_scenarios()
        } else {
            self.scenarios
                .iter()
                .map(|s| Scenario::new(s.name.clone(), s.true_probs.clone(), self.phi))
                .collect::<Result<_>>()?
        };
        if !self.only.is_empty() {
            if let Some(missing) = self
                .only
                .iter()
                .find(|n| !scenarios.iter().any(|s| &s.name == *n))
            {
                return Err(Error::InvalidScenario(format!(
                    "unknown scenario '{missing}'"
                )));
            }
            scenarios.retain(|s| self.only.contains(&s.name));
        }
        if let Some(s) = scenarios.iter().find(|s| s.true_probs.len() != grid.len()) {
            return Err(Error::InvalidScenario(format!(
                "scenario {} has {} doses but the grid has {}",
                s.name,
                s.true_probs.len(),
                grid.len()
            )));
        }
        if self.methods.is_empty() {
            return Err(Error::InvalidArgument("no methods configured".into()));
        }

        let mut methods = Vec::new();
        let mut priors = Vec::new();
        for cfg in &self.methods {
            match cfg {
                MethodConfig::Pava { label } => {
                    methods.push(Method::new(
                        label.clone().unwrap_or_else(|| "pava".into()),
                        PavaEstimator,
                    ));
                }
                MethodConfig::Drm {
                    label,
                    link,
                    prior,
                    engine,
                    point,
                    admissible,
                } => {
                    let label = label.clone().unwrap_or_else(|| format!("drm-{link}"));
                    let prior = self.resolve_prior(prior, *link, &grid, base_dir)?;
                    let model = DoseResponseModel::new(*link, grid.clone(), prior);
                    let estimator = DrmEstimator::new(model)
                        .with_engine(*engine)
                        .with_point(*point)
                        .with_admissibility(*admissible);
                    priors.push((label.clone(), prior));
                    methods.push(Method::new(label, estimator));
                }
            }
        }
        let labels: Vec<&str> = methods.iter().map(|m| m.label.as_str()).collect();
        if (1..labels.len()).any(|i| labels[..i].contains(&labels[i])) {
            return Err(Error::InvalidArgument(
                "method labels must be unique".into(),
            ));
        }
        Ok(ResolvedSweep {
            design,
            grid,
            scenarios,
            methods,
            priors,
            sim: SimulationConfig {
                reps: self.reps,
                master_seed: self.seed,
                independent_paths: self.independent_paths,
            },
        })
    }

    fn resolve_prior(
        &self,
        source: &PriorSource,
        link: Link,
        grid: &DoseGrid,
        base_dir: &Path,
    ) -> Result<CoefficientPrior> {
        match source {
            PriorSource::Inline(p) => {
                p.validate()?;
                Ok(*p)
            }
            PriorSource::File { file } => {
                let path = base_dir.join(file);
                let text = std::fs::read_to_string(&path)
                    .map_err(|e| Error::InvalidArgument(format!("{}: {e}", path.display())))?;
                let model: DoseResponseModel = serde_json::from_str(&text)
                    .map_err(|e| Error::InvalidModel(format!("{}: {e}", path.display())))?;
                Ok(*model.prior())
            }
            PriorSource::Elicit {
                p1,
                pj,
                levels,
                restarts,
                var_floor,
                seed,
            } => {
                let mut input =
                    ElicitationInput::new(grid.clone(), link).with_probabilities(*p1, *pj);
                input.phi = self.phi;
                if let Some(levels) = levels {
                    input.levels = levels.clone();
                }
                let defaults = OptimizeOptions::default();
                let options = OptimizeOptions {
                    restarts: restarts.unwrap_or(defaults.restarts),
                    var_floor: var_floor.unwrap_or(defaults.var_floor),
                    seed: seed.unwrap_or(defaults.seed),
                    ..defaults
                };
                Ok(elicit_prior(&input, &options)?.1.prior)
            }
        }
    }
}

impl ResolvedSweep {
    /// Reports in scenario order, methods in configuration order.
    pub fn run(&self) -> Result<Vec<SimulationReport>> {
        let mut out = Vec::new();
        for scenario in &self.scenarios {
            out.extend(run_scenario(
                &self.design,
                scenario,
                &self.methods,
                self.sim,
            )?);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(json: &str) -> SweepConfig {
        serde_json::from_str(json).unwrap()
    }

    #[test]
    fn defaults_fill_in() {
        let cfg = parse(r#"{"methods":[{"method":"pava"}]}"#);
        assert_eq!(cfg.phi, 0.3);
        assert_eq!(cfg.reps, 1000);
        let r = cfg.resolve(Path::new(".")).unwrap();
        assert_eq!(r.scenarios.len(), 8);
        assert_eq!(r.grid.reference().number(), 3);
        assert_eq!(r.methods[0].label, "pava");
    }

    #[test]
    fn inline_prior_and_filter() {
        let cfg = parse(
            r#"{"reps":5,"seed":3,"only":["s7"],"methods":[
                {"method":"pava"},
                {"method":"drm","link":"logit","prior":{"gamma0":-1.592,"var0":1.371,"gamma1":0.412,"var1":0.784}}
            ]}"#,
        );
        let r = cfg.resolve(Path::new(".")).unwrap();
        assert_eq!(r.scenarios.len(), 1);
        assert_eq!(r.priors[0].0, "drm-logit");
        let reports = r.run().unwrap();
        assert_eq!(reports.len(), 2);
        assert_eq!(reports[0].mean_n, reports[1].mean_n);
    }

    #[test]
    fn bad_configs_are_rejected() {
        let unknown = parse(r#"{"only":["s9"],"methods":[{"method":"pava"}]}"#);
        assert!(unknown.resolve(Path::new(".")).is_err());
        let dup = parse(r#"{"methods":[{"method":"pava"},{"method":"pava"}]}"#);
        assert!(dup.resolve(Path::new(".")).is_err());
        let short = parse(
            r#"{"scenarios":[{"name":"a","true_probs":[0.1,0.2]}],"methods":[{"method":"pava"}]}"#,
        );
        assert!(short.resolve(Path::new(".")).is_err());
        assert!(serde_json::from_str::<SweepConfig>(r#"{"methods":[],"typo":1}"#).is_err());
        let one_probe = parse(r#"{"phi1":0.2,"methods":[{"method":"pava"}]}"#);
        assert!(one_probe.resolve(Path::new(".")).is_err());
    }

    #[test]
    fn prior_from_file() {
        let dir = tempfile::tempdir().unwrap();
        let model = DoseResponseModel::new(
            Link::CLogLog,
            DoseGrid::reference_grid(),
            CoefficientPrior::new(-1.549, 0.943, 0.142, 0.743).unwrap(),
        );
        std::fs::write(
            dir.path().join("prior.json"),
            serde_json::to_string(&model).unwrap(),
        )
        .unwrap();
        let cfg = parse(
            r#"{"methods":[{"method":"drm","link":"cloglog","prior":{"file":"prior.json"}}]}"#,
        );
        let r = cfg.resolve(dir.path()).unwrap();
        assert_eq!(r.priors[0].1, *model.prior());
    }
}
