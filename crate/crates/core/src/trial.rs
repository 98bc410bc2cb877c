//! The in-trial state machine and the simulated conduct loop.

use std::fmt;

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::design::{decide, Action, DoseLevel, TrialDesign};
use crate::error::{Error, Result};
use crate::estimate::{MtdEstimator, Selection};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TrialStatus {
    Running,
    StoppedAllEliminated,
    Completed,
}

impl TrialStatus {
    pub fn is_finished(self) -> bool {
        self != TrialStatus::Running
    }
}

impl fmt::Display for TrialStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TrialStatus::Running => "Running",
            TrialStatus::StoppedAllEliminated => "StoppedAllEliminated",
            TrialStatus::Completed => "Completed",
        })
    }
}

/// Outcome of one cohort at the current dose.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CohortOutcome {
    pub n: u32,
    pub dlt: u32,
}

/// What `apply_cohort` decided.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Decision {
    pub action: Action,
    pub next_dose: DoseLevel,
    /// Doses newly eliminated by this cohort, lowest first.
    pub eliminations: Vec<DoseLevel>,
}

/// One entry of the ordered decision log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CohortEvent {
    /// One-based cohort counter.
    pub cohort_index: u32,
    pub dose: DoseLevel,
    pub n: u32,
    pub dlt: u32,
    pub decision: Action,
    pub next_dose: DoseLevel,
    pub eliminations: Vec<DoseLevel>,
}

/// Cumulative per-dose data and conduct status of a single trial.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialState {
    /// Patients treated per dose.
    pub n: Vec<u32>,
    /// DLTs observed per dose.
    pub m: Vec<u32>,
    pub current_dose: DoseLevel,
    pub eliminated: Vec<bool>,
    pub status: TrialStatus,
    pub events: Vec<CohortEvent>,
}

impl TrialState {
    /// A fresh trial starting at the lowest dose.
    pub fn new(n_doses: usize) -> Result<Self> {
        if n_doses == 0 {
            return Err(Error::InvalidArgument(
                "a trial needs at least one dose".into(),
            ));
        }
        Ok(Self {
            n: vec![0; n_doses],
            m: vec![0; n_doses],
            current_dose: DoseLevel::from_index(0),
            eliminated: vec![false; n_doses],
            status: TrialStatus::Running,
            events: Vec::new(),
        })
    }

    /// Builds a finished data snapshot from per-dose counts, e.g. when only
    /// the final tallies of a trial are known. The elimination flags are
    /// recomputed with the design's screen.
    pub fn from_counts(n: Vec<u32>, m: Vec<u32>, design: &TrialDesign) -> Result<Self> {
        if n.len() != m.len() || n.is_empty() {
            return Err(Error::InvalidArgument(
                "n and m must be non-empty and of equal length".into(),
            ));
        }
        if n.iter().zip(&m).any(|(n, m)| m > n) {
            return Err(Error::InvalidArgument("m_j must not exceed n_j".into()));
        }
        let eliminated = screen(&n, &m, design);
        let status = if eliminated[0] {
            TrialStatus::StoppedAllEliminated
        } else {
            TrialStatus::Completed
        };
        Ok(Self {
            current_dose: DoseLevel::from_index(0),
            eliminated,
            status,
            events: Vec::new(),
            n,
            m,
        })
    }

    pub fn n_doses(&self) -> usize {
        self.n.len()
    }

    pub fn total_enrolled(&self) -> u32 {
        self.n.iter().sum()
    }

    pub fn cohorts_completed(&self) -> u32 {
        self.events.len() as u32
    }

    /// Applies one cohort's outcome at the current dose.
    pub fn apply_cohort(
        &mut self,
        design: &TrialDesign,
        outcome: CohortOutcome,
    ) -> Result<Decision> {
        if self.status != TrialStatus::Running {
            return Err(Error::NotRunning(self.status));
        }
        if outcome.n == 0 || outcome.n > design.cohort_size() {
            return Err(Error::InvalidOutcome(format!(
                "cohort size must be in 1..={}, got {}",
                design.cohort_size(),
                outcome.n
            )));
        }
        if outcome.dlt > outcome.n {
            return Err(Error::InvalidOutcome(format!(
                "{} DLTs among {} patients",
                outcome.dlt, outcome.n
            )));
        }

        let dose = self.current_dose;
        let d = dose.index();
        let top = self.n_doses() - 1;
        self.n[d] += outcome.n;
        self.m[d] += outcome.dlt;

        let mut eliminations = Vec::new();
        if design.is_eliminated(self.n[d], self.m[d]) {
            for j in d..=top {
                if !self.eliminated[j] {
                    self.eliminated[j] = true;
                    eliminations.push(DoseLevel::from_index(j));
                }
            }
        }

        let mut action = decide(self.n[d], self.m[d], design)?;
        let next = if self.eliminated[d] {
            // An eliminated dose always exceeds the de-escalation boundary,
            // but the move must not depend on that.
            action = Action::Deescalate;
            if d == 0 {
                self.status = TrialStatus::StoppedAllEliminated;
                d
            } else {
                d - 1
            }
        } else {
            match action {
                Action::Escalate if d < top && !self.eliminated[d + 1] => d + 1,
                Action::Deescalate if d > 0 => d - 1,
                _ => d,
            }
        };

        let decision = Decision {
            action,
            next_dose: DoseLevel::from_index(next),
            eliminations,
        };
        self.events.push(CohortEvent {
            cohort_index: self.cohorts_completed() + 1,
            dose,
            n: outcome.n,
            dlt: outcome.dlt,
            decision: decision.action,
            next_dose: decision.next_dose,
            eliminations: decision.eliminations.clone(),
        });
        self.current_dose = decision.next_dose;
        if self.status == TrialStatus::Running && self.cohorts_completed() >= design.n_cohorts() {
            self.status = TrialStatus::Completed;
        }
        Ok(decision)
    }

    /// Rebuilds a state by folding `apply_cohort` over a logged sequence and
    /// checks that every logged decision is reproduced.
    pub fn replay(design: &TrialDesign, n_doses: usize, events: &[CohortEvent]) -> Result<Self> {
        let mut state = TrialState::new(n_doses)?;
        for event in events {
            if event.dose != state.current_dose {
                return Err(Error::InvalidOutcome(format!(
                    "cohort {} logged at dose {} but the trial was at dose {}",
                    event.cohort_index, event.dose, state.current_dose
                )));
            }
            state.apply_cohort(
                design,
                CohortOutcome {
                    n: event.n,
                    dlt: event.dlt,
                },
            )?;
            let replayed = state.events.last().expect("event just pushed");
            if replayed != event {
                return Err(Error::InvalidOutcome(format!(
                    "cohort {} does not replay to the logged decision",
                    event.cohort_index
                )));
            }
        }
        Ok(state)
    }

    /// Doses eligible for MTD selection: treated, not eliminated during the
    /// trial, and passing the final safety screen on the closing data.
    pub fn admissible(&self, design: &TrialDesign) -> Vec<bool> {
        if self.status == TrialStatus::StoppedAllEliminated {
            return vec![false; self.n_doses()];
        }
        let final_screen = screen(&self.n, &self.m, design);
        (0..self.n_doses())
            .map(|j| self.n[j] > 0 && !self.eliminated[j] && !final_screen[j])
            .collect()
    }
}

/// Upward-closed elimination flags from per-dose counts.
pub fn screen(n: &[u32], m: &[u32], design: &TrialDesign) -> Vec<bool> {
    let first = (0..n.len()).find(|&j| design.is_eliminated(n[j], m[j]));
    (0..n.len())
        .map(|j| first.is_some_and(|f| j >= f))
        .collect()
}

/// Runs the conduct loop against true per-dose DLT probabilities, drawing
/// each cohort's DLT count from a binomial at the current dose.
pub fn simulate_conduct<R: Rng + ?Sized>(
    design: &TrialDesign,
    true_probs: &[f64],
    rng: &mut R,
) -> Result<TrialState> {
    validate_true_probs(true_probs)?;
    let mut state = TrialState::new(true_probs.len())?;
    let size = design.cohort_size();
    while state.status == TrialStatus::Running {
        let p = true_probs[state.current_dose.index()];
        let dlt = Binomial::new(u64::from(size), p)
            .map_err(|e| Error::InvalidScenario(e.to_string()))?
            .sample(rng) as u32;
        state.apply_cohort(design, CohortOutcome { n: size, dlt })?;
    }
    Ok(state)
}

pub fn validate_true_probs(true_probs: &[f64]) -> Result<()> {
    if true_probs.is_empty() {
        return Err(Error::InvalidScenario("no doses".into()));
    }
    if true_probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(Error::InvalidScenario(
            "true DLT probabilities must lie in [0, 1]".into(),
        ));
    }
    if true_probs.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidScenario(
            "true DLT probabilities must be nondecreasing".into(),
        ));
    }
    Ok(())
}

/// Final state of a simulated trial and the estimator's pick.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub state: TrialState,
    pub selection: Selection,
}

impl TrialRecord {
    pub fn mtd(&self) -> Option<DoseLevel> {
        self.selection.mtd
    }
}

pub fn run_trial<R, E>(
    design: &TrialDesign,
    true_probs: &[f64],
    estimator: &E,
    rng: &mut R,
) -> Result<TrialRecord>
where
    R: Rng + ?Sized,
    E: MtdEstimator + ?Sized,
{
    let state = simulate_conduct(design, true_probs, rng)?;
    let selection = estimator.select(&state, design)?;
    Ok(TrialRecord { state, selection })
}
