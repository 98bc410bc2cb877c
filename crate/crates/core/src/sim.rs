//! Monte-Carlo operating characteristics over fixed toxicity scenarios.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::design::{DoseLevel, TrialDesign};
use crate::error::{Error, Result};
use crate::estimate::{MtdEstimator, PavaEstimator};
use crate::trial::{simulate_conduct, validate_true_probs};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub true_probs: Vec<f64>,
    pub true_mtd: DoseLevel,
}

impl Scenario {
    /// The true MTD is the dose closest to `phi`, lower dose on ties.
    pub fn new(name: impl Into<String>, true_probs: Vec<f64>, phi: f64) -> Result<Self> {
        validate_true_probs(&true_probs)?;
        let name = name.into();
        if name.is_empty() {
            return Err(Error::InvalidScenario("scenario name is empty".into()));
        }
        let estimates: Vec<Option<f64>> = true_probs.iter().copied().map(Some).collect();
        let true_mtd =
            crate::pava::closest_to_target(&estimates, &vec![true; true_probs.len()], phi)
                .ok_or_else(|| Error::InvalidScenario("scenario has no doses".into()))?;
        Ok(Self {
            name,
            true_probs,
            true_mtd,
        })
    }
}

/// The eight six-dose scenarios used for the operating characteristics,
/// with target 0.3.
pub fn reference_scenarios() -> Vec<Scenario> {
    let table: [[f64; 6]; 8] = [
        [0.02, 0.15, 0.20, 0.30, 0.35, 0.55],
        [0.01, 0.04, 0.14, 0.18, 0.22, 0.30],
        [0.01, 0.03, 0.10, 0.20, 0.30, 0.55],
        [0.15, 0.30, 0.36, 0.50, 0.55, 0.64],
        [0.08, 0.19, 0.30, 0.44, 0.54, 0.64],
        [0.03, 0.09, 0.17, 0.30, 0.42, 0.55],
        [0.09, 0.30, 0.45, 0.59, 0.68, 0.75],
        [0.08, 0.19, 0.30, 0.46, 0.60, 0.75],
    ];
    table
        .iter()
        .enumerate()
        .map(|(i, p)| {
            Scenario::new(format!("s{}", i + 1), p.to_vec(), 0.3).expect("valid scenario")
        })
        .collect()
}

/// A labelled terminal estimator.
pub struct Method {
    pub label: String,
    pub estimator: Box<dyn MtdEstimator>,
}

impl Method {
    pub fn new(label: impl Into<String>, estimator: impl MtdEstimator + 'static) -> Self {
        Self {
            label: label.into(),
            estimator: Box::new(estimator),
        }
    }

    pub fn pava() -> Self {
        Self::new("pava", PavaEstimator)
    }
}

impl std::fmt::Debug for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Method")
            .field("label", &self.label)
            .finish_non_exhaustive()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub reps: usize,
    pub master_seed: u64,
    /// Draw a separate trial path per method instead of sharing one.
    #[serde(default)]
    pub independent_paths: bool,
}

impl SimulationConfig {
    pub fn new(reps: usize, master_seed: u64) -> Self {
        Self {
            reps,
            master_seed,
            independent_paths: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub scenario: String,
    pub method: String,
    /// Per-dose proportion of replicates selecting that dose.
    pub selection: Vec<f64>,
    pub none: f64,
    pub overdose: f64,
    pub correct: f64,
    pub mean_n: Vec<f64>,
    pub mean_m: Vec<f64>,
    pub reps: usize,
    pub seed: u64,
}

/// 64-bit FNV-1a.
fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| {
        (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3)
    })
}

/// Independent stream for one replicate: the key mixes the master seed
/// with the scenario name, the stream id carries the replicate and arm.
pub fn replicate_rng(master_seed: u64, scenario: &str, rep: usize, arm: usize) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&master_seed.to_le_bytes());
    key[8..16].copy_from_slice(&fnv1a(scenario.as_bytes()).to_le_bytes());
    key[16..24].copy_from_slice(b"dosefind");
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(((arm as u64) << 40) | rep as u64);
    rng
}

struct ReplicateOutcome {
    /// Per method: selected dose index.
    picks: Vec<Option<usize>>,
    /// Per method (or one shared entry): final counts.
    counts: Vec<(Vec<u32>, Vec<u32>)>,
}

pub fn run_scenario(
    design: &TrialDesign,
    scenario: &Scenario,
    methods: &[Method],
    config: SimulationConfig,
) -> Result<Vec<SimulationReport>> {
    if config.reps == 0 {
        return Err(Error::InvalidArgument("reps must be at least 1".into()));
    }
    if methods.is_empty() {
        return Err(Error::InvalidArgument("no methods to simulate".into()));
    }
    validate_true_probs(&scenario.true_probs)?;
    let j = scenario.true_probs.len();

    let outcomes: Vec<ReplicateOutcome> = (0..config.reps)
        .into_par_iter()
        .map(|rep| -> Result<ReplicateOutcome> {
            let mut picks = Vec::with_capacity(methods.len());
            let mut counts = Vec::new();
            let shared = if config.independent_paths {
                None
            } else {
                let mut rng = replicate_rng(config.master_seed, &scenario.name, rep, 0);
                Some(simulate_conduct(design, &scenario.true_probs, &mut rng)?)
            };
            for (arm, method) in methods.iter().enumerate() {
                let own;
                let state = match &shared {
                    Some(s) => s,
                    None => {
                        let mut rng = replicate_rng(config.master_seed, &scenario.name, rep, arm);
                        own = simulate_conduct(design, &scenario.true_probs, &mut rng)?;
                        &own
                    }
                };
                let selection = method.estimator.select(state, design)?;
                picks.push(selection.mtd.map(DoseLevel::index));
                if config.independent_paths || counts.is_empty() {
                    counts.push((state.n.clone(), state.m.clone()));
                }
            }
            Ok(ReplicateOutcome { picks, counts })
        })
        .collect::<Result<_>>()?;

    let reps = config.reps as f64;
    let reports = methods
        .iter()
        .enumerate()
        .map(|(k, method)| {
            let mut picked = vec![0u64; j];
            let mut none = 0u64;
            let mut sum_n = vec![0u64; j];
            let mut sum_m = vec![0u64; j];
            for out in &outcomes {
                match out.picks[k] {
                    Some(d) => picked[d] += 1,
                    None => none += 1,
                }
                let (n, m) = &out.counts[if config.independent_paths { k } else { 0 }];
                for d in 0..j {
                    sum_n[d] += u64::from(n[d]);
                    sum_m[d] += u64::from(m[d]);
                }
            }
            let selection: Vec<f64> = picked.iter().map(|&c| c as f64 / reps).collect();
            let mut report = SimulationReport {
                scenario: scenario.name.clone(),
                method: method.label.clone(),
                correct: selection[scenario.true_mtd.index()],
                selection,
                none: none as f64 / reps,
                overdose: 0.0,
                mean_n: sum_n.iter().map(|&s| s as f64 / reps).collect(),
                mean_m: sum_m.iter().map(|&s| s as f64 / reps).collect(),
                reps: config.reps,
                seed: config.master_seed,
            };
            report.overdose = overdose_rate(&report, scenario);
            report
        })
        .collect();
    Ok(reports)
}

/// Share of replicates selecting a dose strictly above the true MTD.
pub fn overdose_rate(report: &SimulationReport, scenario: &Scenario) -> f64 {
    report
        .selection
        .iter()
        .skip(scenario.true_mtd.index() + 1)
        .sum()
}

/// Mean allocated patients and DLTs per dose.
pub fn allocation_summary(report: &SimulationReport) -> (Vec<f64>, Vec<f64>) {
    (report.mean_n.clone(), report.mean_m.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn design() -> TrialDesign {
        TrialDesign::new(0.3).unwrap()
    }

    #[test]
    fn reference_true_mtds() {
        let mtds: Vec<usize> = reference_scenarios()
            .iter()
            .map(|s| s.true_mtd.number())
            .collect();
        assert_eq!(mtds, vec![4, 6, 5, 2, 3, 4, 2, 3]);
    }

    #[test]
    fn invalid_scenarios_are_rejected() {
        assert!(Scenario::new("bad", vec![0.3, 0.2], 0.3).is_err());
        assert!(Scenario::new("bad", vec![0.3, 1.2], 0.3).is_err());
        assert!(Scenario::new("", vec![0.1, 0.2], 0.3).is_err());
    }

    #[test]
    fn streams_differ_and_repeat() {
        let mut a = replicate_rng(1, "s1", 0, 0);
        let mut b = replicate_rng(1, "s1", 0, 0);
        let mut c = replicate_rng(1, "s1", 1, 0);
        let mut d = replicate_rng(1, "s2", 0, 0);
        let x: u64 = a.random();
        assert_eq!(x, b.random::<u64>());
        assert_ne!(x, c.random::<u64>());
        assert_ne!(x, d.random::<u64>());
    }

    #[test]
    fn identical_inputs_identical_reports() {
        let s = &reference_scenarios()[2];
        let cfg = SimulationConfig::new(1, 77);
        let a = run_scenario(&design(), s, &[Method::pava()], cfg).unwrap();
        let b = run_scenario(&design(), s, &[Method::pava()], cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn proportions_partition_unity() {
        let s = &reference_scenarios()[6];
        let r = &run_scenario(
            &design(),
            s,
            &[Method::pava()],
            SimulationConfig::new(300, 5),
        )
        .unwrap()[0];
        let total: f64 = r.selection.iter().sum::<f64>() + r.none;
        assert!((total - 1.0).abs() < 1e-12);
        assert!(r
            .mean_n
            .iter()
            .zip(&r.mean_m)
            .all(|(n, m)| n >= m && *m >= 0.0));
    }

    #[test]
    fn zero_toxicity_has_no_dlts() {
        let s = Scenario::new("zero", vec![0.0; 6], 0.3).unwrap();
        let r = &run_scenario(
            &design(),
            &s,
            &[Method::pava()],
            SimulationConfig::new(50, 3),
        )
        .unwrap()[0];
        assert!(r.mean_m.iter().all(|&m| m == 0.0));
        assert_eq!(r.selection[5], 1.0);
    }

    #[test]
    fn overdose_examples() {
        let s = Scenario::new("x", vec![0.05, 0.1, 0.3, 0.5], 0.3).unwrap();
        let mut r = SimulationReport {
            scenario: "x".into(),
            method: "m".into(),
            selection: vec![1.0, 0.0, 0.0, 0.0],
            none: 0.0,
            overdose: 0.0,
            correct: 0.0,
            mean_n: vec![0.0; 4],
            mean_m: vec![0.0; 4],
            reps: 1,
            seed: 0,
        };
        assert_eq!(overdose_rate(&r, &s), 0.0);
        r.selection = vec![0.1, 0.2, 0.3, 0.4];
        assert!((overdose_rate(&r, &s) - 0.4).abs() < 1e-15);
    }

    #[test]
    fn shared_paths_give_identical_allocations() {
        let s = &reference_scenarios()[0];
        let methods = [Method::pava(), Method::new("pava-again", PavaEstimator)];
        let r = run_scenario(&design(), s, &methods, SimulationConfig::new(100, 9)).unwrap();
        assert_eq!(r[0].mean_n, r[1].mean_n);
        assert_eq!(r[0].mean_m, r[1].mean_m);
        let cfg = SimulationConfig {
            independent_paths: true,
            ..SimulationConfig::new(100, 9)
        };
        let r = run_scenario(&design(), s, &methods, cfg).unwrap();
        assert_ne!(r[0].mean_n, r[1].mean_n);
    }
}
