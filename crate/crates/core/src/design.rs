//! BOIN interval boundaries, the cohort decision rule and the dose
//! elimination screen.
//!
//! Everything here is a pure function of the design; the mutable side of a
//! running trial lives in [`crate::trial`].

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Zero-based dose index. Serialized as the one-based dose level used in
/// every external interface (JSON, CLI, HTTP, C API).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DoseLevel(usize);

impl DoseLevel {
    pub const fn from_index(index: usize) -> Self {
        Self(index)
    }

    /// Builds a level from its one-based number; `None` for zero.
    pub fn from_number(number: usize) -> Option<Self> {
        number.checked_sub(1).map(Self)
    }

    pub const fn index(self) -> usize {
        self.0
    }

    pub const fn number(self) -> usize {
        self.0 + 1
    }
}

impl fmt::Display for DoseLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.number())
    }
}

impl Serialize for DoseLevel {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_u64(self.number() as u64)
    }
}

impl<'de> Deserialize<'de> for DoseLevel {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let number = u64::deserialize(deserializer)?;
        DoseLevel::from_number(number as usize)
            .ok_or_else(|| serde::de::Error::custom("dose levels are numbered from 1"))
    }
}

/// Ordered dose amounts with the reference dose used by the dose-response
/// model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DoseGridRepr", into = "DoseGridRepr")]
pub struct DoseGrid {
    doses: Vec<f64>,
    reference: DoseLevel,
}

#[derive(Serialize, Deserialize)]
struct DoseGridRepr {
    doses: Vec<f64>,
    ref_index: usize,
}

impl TryFrom<DoseGridRepr> for DoseGrid {
    type Error = Error;

    fn try_from(repr: DoseGridRepr) -> Result<Self> {
        let reference = DoseLevel::from_number(repr.ref_index)
            .ok_or_else(|| Error::InvalidGrid("ref_index is one-based".into()))?;
        DoseGrid::new(repr.doses, reference)
    }
}

impl From<DoseGrid> for DoseGridRepr {
    fn from(grid: DoseGrid) -> Self {
        DoseGridRepr {
            doses: grid.doses,
            ref_index: grid.reference.number(),
        }
    }
}

impl DoseGrid {
    pub fn new(doses: Vec<f64>, reference: DoseLevel) -> Result<Self> {
        if doses.len() < 2 {
            return Err(Error::InvalidGrid("at least two doses are required".into()));
        }
        if doses.iter().any(|d| !(d.is_finite() && *d > 0.0)) {
            return Err(Error::InvalidGrid(
                "doses must be positive and finite".into(),
            ));
        }
        if doses.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidGrid(
                "doses must be strictly increasing".into(),
            ));
        }
        if reference.index() >= doses.len() {
            return Err(Error::InvalidGrid(format!(
                "reference level {reference} is outside 1..={}",
                doses.len()
            )));
        }
        Ok(Self { doses, reference })
    }

    /// The six-level modified Fibonacci grid (10, 20, 30, 45, 60, 80 mg)
    /// with the reference dose at level 3.
    pub fn reference_grid() -> Self {
        Self::new(
            vec![10.0, 20.0, 30.0, 45.0, 60.0, 80.0],
            DoseLevel::from_index(2),
        )
        .expect("static grid is valid")
    }

    pub fn doses(&self) -> &[f64] {
        &self.doses
    }

    pub fn len(&self) -> usize {
        self.doses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.doses.is_empty()
    }

    pub fn reference(&self) -> DoseLevel {
        self.reference
    }

    pub fn reference_dose(&self) -> f64 {
        self.doses[self.reference.index()]
    }

    pub fn with_reference(&self, reference: DoseLevel) -> Result<Self> {
        Self::new(self.doses.clone(), reference)
    }

    /// `log(d_j / d*)` for every dose.
    pub fn log_ratios(&self) -> Vec<f64> {
        let reference = self.reference_dose();
        self.doses.iter().map(|d| (d / reference).ln()).collect()
    }

    pub fn levels(&self) -> impl Iterator<Item = DoseLevel> {
        (0..self.doses.len()).map(DoseLevel::from_index)
    }
}

/// Lower (escalation) and upper (de-escalation) bounds of the toxicity
/// tolerance interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Boundaries {
    pub escalate: f64,
    pub deescalate: f64,
}

/// Closed-form optimal interval boundaries for the local BOIN design under
/// equal hypothesis priors.
pub fn compute_boundaries(phi: f64, phi1: f64, phi2: f64) -> Result<Boundaries> {
    if !(0.0 < phi1 && phi1 < phi && phi < phi2 && phi2 < 1.0) {
        return Err(Error::InvalidDesign(format!(
            "require 0 < phi1 < phi < phi2 < 1, got phi1={phi1}, phi={phi}, phi2={phi2}"
        )));
    }
    let escalate =
        ((1.0 - phi1) / (1.0 - phi)).ln() / ((phi * (1.0 - phi1)) / (phi1 * (1.0 - phi))).ln();
    let deescalate =
        ((1.0 - phi) / (1.0 - phi2)).ln() / ((phi2 * (1.0 - phi)) / (phi * (1.0 - phi2))).ln();
    Ok(Boundaries {
        escalate,
        deescalate,
    })
}

pub const DEFAULT_ELIM_THRESHOLD: f64 = 0.95;
pub const DEFAULT_ELIM_MIN_N: u32 = 3;

/// A validated BOIN design. The boundaries are derived on construction and
/// never stored independently of `phi`, `phi1` and `phi2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TrialDesignRepr", into = "TrialDesignRepr")]
pub struct TrialDesign {
    phi: f64,
    phi1: f64,
    phi2: f64,
    cohort_size: u32,
    n_cohorts: u32,
    elim_threshold: f64,
    elim_min_n: u32,
    boundaries: Boundaries,
}

/// Wire form of [`TrialDesign`]. Probes and safety settings are optional on
/// input; the derived boundaries are emitted on output and ignored on input.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrialDesignRepr {
    pub phi: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi2: Option<f64>,
    #[serde(default = "default_cohort_size")]
    pub cohort_size: u32,
    #[serde(default = "default_n_cohorts")]
    pub n_cohorts: u32,
    #[serde(default = "default_elim_threshold")]
    pub elim_threshold: f64,
    #[serde(default = "default_elim_min_n")]
    pub elim_min_n: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_e: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_d: Option<f64>,
}

fn default_cohort_size() -> u32 {
    3
}
fn default_n_cohorts() -> u32 {
    12
}
fn default_elim_threshold() -> f64 {
    DEFAULT_ELIM_THRESHOLD
}
fn default_elim_min_n() -> u32 {
    DEFAULT_ELIM_MIN_N
}

impl TryFrom<TrialDesignRepr> for TrialDesign {
    type Error = Error;

    fn try_from(r: TrialDesignRepr) -> Result<Self> {
        TrialDesign::builder(r.phi)
            .probes(r.phi1.unwrap_or(0.6 * r.phi), r.phi2.unwrap_or(1.4 * r.phi))
            .cohorts(r.cohort_size, r.n_cohorts)
            .elimination(r.elim_threshold, r.elim_min_n)
            .build()
    }
}

impl From<TrialDesign> for TrialDesignRepr {
    fn from(d: TrialDesign) -> Self {
        TrialDesignRepr {
            phi: d.phi,
            phi1: Some(d.phi1),
            phi2: Some(d.phi2),
            cohort_size: d.cohort_size,
            n_cohorts: d.n_cohorts,
            elim_threshold: d.elim_threshold,
            elim_min_n: d.elim_min_n,
            lambda_e: Some(d.boundaries.escalate),
            lambda_d: Some(d.boundaries.deescalate),
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrialDesignBuilder {
    phi: f64,
    phi1: f64,
    phi2: f64,
    cohort_size: u32,
    n_cohorts: u32,
    elim_threshold: f64,
    elim_min_n: u32,
}

impl TrialDesignBuilder {
    pub fn probes(mut self, phi1: f64, phi2: f64) -> Self {
        self.phi1 = phi1;
        self.phi2 = phi2;
        self
    }

    pub fn cohorts(mut self, cohort_size: u32, n_cohorts: u32) -> Self {
        self.cohort_size = cohort_size;
        self.n_cohorts = n_cohorts;
        self
    }

    pub fn elimination(mut self, threshold: f64, min_n: u32) -> Self {
        self.elim_threshold = threshold;
        self.elim_min_n = min_n;
        self
    }

    pub fn build(self) -> Result<TrialDesign> {
        let boundaries = compute_boundaries(self.phi, self.phi1, self.phi2)?;
        if self.cohort_size == 0 || self.n_cohorts == 0 {
            return Err(Error::InvalidDesign(
                "cohort_size and n_cohorts must be positive".into(),
            ));
        }
        if !(self.elim_threshold > 0.0 && self.elim_threshold < 1.0) {
            return Err(Error::InvalidDesign(
                "elim_threshold must lie in (0, 1)".into(),
            ));
        }
        Ok(TrialDesign {
            phi: self.phi,
            phi1: self.phi1,
            phi2: self.phi2,
            cohort_size: self.cohort_size,
            n_cohorts: self.n_cohorts,
            elim_threshold: self.elim_threshold,
            elim_min_n: self.elim_min_n,
            boundaries,
        })
    }
}

impl TrialDesign {
    /// Starts a design with the recommended probes `(0.6 phi, 1.4 phi)`,
    /// 12 cohorts of 3 and the 0.95 / n >= 3 elimination screen.
    pub fn builder(phi: f64) -> TrialDesignBuilder {
        TrialDesignBuilder {
            phi,
            phi1: 0.6 * phi,
            phi2: 1.4 * phi,
            cohort_size: default_cohort_size(),
            n_cohorts: default_n_cohorts(),
            elim_threshold: DEFAULT_ELIM_THRESHOLD,
            elim_min_n: DEFAULT_ELIM_MIN_N,
        }
    }

    pub fn new(phi: f64) -> Result<Self> {
        Self::builder(phi).build()
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }
    pub fn phi1(&self) -> f64 {
        self.phi1
    }
    pub fn phi2(&self) -> f64 {
        self.phi2
    }
    pub fn cohort_size(&self) -> u32 {
        self.cohort_size
    }
    pub fn n_cohorts(&self) -> u32 {
        self.n_cohorts
    }
    pub fn max_enrollment(&self) -> u32 {
        self.cohort_size * self.n_cohorts
    }
    pub fn elim_threshold(&self) -> f64 {
        self.elim_threshold
    }
    pub fn elim_min_n(&self) -> u32 {
        self.elim_min_n
    }
    pub fn boundaries(&self) -> Boundaries {
        self.boundaries
    }

    pub fn is_eliminated(&self, n: u32, m: u32) -> bool {
        check_elimination(n, m, self.phi, self.elim_threshold, self.elim_min_n)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Action {
    Escalate,
    Retain,
    Deescalate,
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Action::Escalate => "Escalate",
            Action::Retain => "Retain",
            Action::Deescalate => "Deescalate",
        })
    }
}

/// The BOIN rule at one dose: escalate when `m/n <= lambda_e`, de-escalate
/// when `m/n >= lambda_d`, otherwise retain. Both comparisons are inclusive.
pub fn decide(n: u32, m: u32, design: &TrialDesign) -> Result<Action> {
    if n == 0 {
        return Err(Error::NoData);
    }
    if m > n {
        return Err(Error::InvalidOutcome(format!(
            "{m} DLTs among {n} patients"
        )));
    }
    let rate = f64::from(m) / f64::from(n);
    let b = design.boundaries();
    Ok(if rate <= b.escalate {
        Action::Escalate
    } else if rate >= b.deescalate {
        Action::Deescalate
    } else {
        Action::Retain
    })
}

/// One row of the tabulated rule for `n` cumulative patients at a dose.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecisionRow {
    pub n: u32,
    /// Escalate if the DLT count is at most this value.
    pub escalate_max: Option<u32>,
    /// De-escalate if the DLT count is at least this value.
    pub deescalate_min: u32,
    /// Eliminate the dose (and all higher doses) at or above this count.
    pub eliminate_min: Option<u32>,
}

/// Tabulates the rule at `n = c, 2c, ..., <= max_n` for cohort size `c`.
pub fn decision_table(design: &TrialDesign, max_n: u32) -> Result<Vec<DecisionRow>> {
    let step = design.cohort_size();
    if max_n < step {
        return Err(Error::InvalidArgument(format!(
            "max_n ({max_n}) must be at least the cohort size ({step})"
        )));
    }
    let rows = (1..=max_n / step)
        .map(|k| decision_row(design, k * step))
        .collect();
    Ok(rows)
}

pub fn decision_row(design: &TrialDesign, n: u32) -> DecisionRow {
    let b = design.boundaries();
    let nf = f64::from(n);
    // floor/ceil on n*lambda agree with the ratio comparisons in `decide`
    let escalate_max = (nf * b.escalate).floor();
    let deescalate_min = (nf * b.deescalate).ceil() as u32;
    let eliminate_min = (0..=n).find(|&m| design.is_eliminated(n, m));
    DecisionRow {
        n,
        escalate_max: (escalate_max >= 0.0).then_some(escalate_max as u32),
        deescalate_min,
        eliminate_min,
    }
}

/// `Pr{p > phi}` for `p ~ Beta(1 + m, 1 + n - m)`.
///
/// With integer shapes the Beta tail is a binomial CDF:
/// `Pr{Beta(a, b) > x} = Pr{Bin(a + b - 1, x) <= a - 1}`.
pub fn posterior_exceedance(n: u32, m: u32, phi: f64) -> f64 {
    let trials = n + 1;
    binomial_cdf(m, trials, phi)
}

fn binomial_cdf(k: u32, trials: u32, p: f64) -> f64 {
    if k >= trials {
        return 1.0;
    }
    if p <= 0.0 {
        return 1.0;
    }
    if p >= 1.0 {
        return 0.0;
    }
    let q = 1.0 - p;
    let mut term = q.powi(trials as i32);
    let mut total = term;
    for i in 0..k {
        term *= f64::from(trials - i) / f64::from(i + 1) * (p / q);
        total += term;
    }
    total.min(1.0)
}

/// Safety screen: true when at least `min_n` patients were treated and the
/// posterior probability of exceeding `phi` under a uniform prior is above
/// `threshold`.
pub fn check_elimination(n: u32, m: u32, phi: f64, threshold: f64, min_n: u32) -> bool {
    n >= min_n && posterior_exceedance(n, m, phi) > threshold
}
