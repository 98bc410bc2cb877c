//! Bayesian dose-response model
//! `g(pi(d)) = beta0 + exp(beta1) * log(d / d*)` with independent normal
//! priors on the coefficients, and its deterministic lattice posterior.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::design::{DoseGrid, DoseLevel, TrialDesign};
use crate::error::{Error, Result};
use crate::link::Link;
use crate::mcmc::SamplerDiagnostics;
use crate::trial::TrialState;

/// Normal priors `beta0 ~ N(gamma0, var0)`, `beta1 ~ N(gamma1, var1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoefficientPrior {
    pub gamma0: f64,
    pub var0: f64,
    pub gamma1: f64,
    pub var1: f64,
}

impl CoefficientPrior {
    pub fn new(gamma0: f64, var0: f64, gamma1: f64, var1: f64) -> Result<Self> {
        let prior = Self {
            gamma0,
            var0,
            gamma1,
            var1,
        };
        prior.validate()?;
        Ok(prior)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma0.is_finite() && self.gamma1.is_finite()) {
            return Err(Error::InvalidModel("prior means must be finite".into()));
        }
        if !(self.var0 > 0.0 && self.var1 > 0.0 && self.var0.is_finite() && self.var1.is_finite()) {
            return Err(Error::InvalidModel(
                "prior variances must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn sd0(&self) -> f64 {
        self.var0.sqrt()
    }

    pub fn sd1(&self) -> f64 {
        self.var1.sqrt()
    }

    /// Log prior density up to an additive constant.
    pub fn log_density(&self, beta0: f64, beta1: f64) -> f64 {
        -0.5 * ((beta0 - self.gamma0).powi(2) / self.var0
            + (beta1 - self.gamma1).powi(2) / self.var1)
    }

    /// Same means with both variances replaced.
    pub fn with_variance(&self, var: f64) -> Result<Self> {
        Self::new(self.gamma0, var, self.gamma1, var)
    }
}

/// Per-dose cumulative counts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DoseData {
    pub n: Vec<u32>,
    pub m: Vec<u32>,
}

impl DoseData {
    pub fn new(n: Vec<u32>, m: Vec<u32>) -> Result<Self> {
        if n.len() != m.len() {
            return Err(Error::InvalidArgument("n and m differ in length".into()));
        }
        if n.iter().zip(&m).any(|(n, m)| m > n) {
            return Err(Error::InvalidArgument("m_j must not exceed n_j".into()));
        }
        Ok(Self { n, m })
    }

    pub fn empty(len: usize) -> Self {
        Self {
            n: vec![0; len],
            m: vec![0; len],
        }
    }

    pub fn from_state(state: &TrialState) -> Self {
        Self {
            n: state.n.clone(),
            m: state.m.clone(),
        }
    }

    pub fn len(&self) -> usize {
        self.n.len()
    }

    pub fn is_empty(&self) -> bool {
        self.n.is_empty()
    }

    /// `(log ratio, n, m)` for doses with patients.
    fn observed<'a>(&'a self, log_ratios: &'a [f64]) -> impl Iterator<Item = (f64, f64, f64)> + 'a {
        (0..self.n.len())
            .filter(|&j| self.n[j] > 0)
            .map(move |j| (log_ratios[j], f64::from(self.n[j]), f64::from(self.m[j])))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelRepr", into = "ModelRepr")]
pub struct DoseResponseModel {
    link: Link,
    grid: DoseGrid,
    prior: CoefficientPrior,
    log_ratios: Vec<f64>,
}

/// Flat JSON form: `{link, doses, ref_index, gamma0, var0, gamma1, var1}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelRepr {
    pub link: Link,
    pub doses: Vec<f64>,
    pub ref_index: usize,
    pub gamma0: f64,
    pub var0: f64,
    pub gamma1: f64,
    pub var1: f64,
}

impl TryFrom<ModelRepr> for DoseResponseModel {
    type Error = Error;

    fn try_from(r: ModelRepr) -> Result<Self> {
        let reference = DoseLevel::from_number(r.ref_index)
            .ok_or_else(|| Error::InvalidGrid("ref_index is one-based".into()))?;
        let grid = DoseGrid::new(r.doses, reference)?;
        let prior = CoefficientPrior::new(r.gamma0, r.var0, r.gamma1, r.var1)?;
        Ok(DoseResponseModel::new(r.link, grid, prior))
    }
}

impl From<DoseResponseModel> for ModelRepr {
    fn from(m: DoseResponseModel) -> Self {
        ModelRepr {
            link: m.link,
            ref_index: m.grid.reference().number(),
            doses: m.grid.doses().to_vec(),
            gamma0: m.prior.gamma0,
            var0: m.prior.var0,
            gamma1: m.prior.gamma1,
            var1: m.prior.var1,
        }
    }
}

impl DoseResponseModel {
    pub fn new(link: Link, grid: DoseGrid, prior: CoefficientPrior) -> Self {
        let log_ratios = grid.log_ratios();
        Self {
            link,
            grid,
            prior,
            log_ratios,
        }
    }

    pub fn link(&self) -> Link {
        self.link
    }

    pub fn grid(&self) -> &DoseGrid {
        &self.grid
    }

    pub fn prior(&self) -> &CoefficientPrior {
        &self.prior
    }

    pub fn with_prior(&self, prior: CoefficientPrior) -> Self {
        Self::new(self.link, self.grid.clone(), prior)
    }

    pub fn log_ratios(&self) -> &[f64] {
        &self.log_ratios
    }

    /// DLT probability at an arbitrary positive dose.
    pub fn prob(&self, beta0: f64, beta1: f64, dose: f64) -> Result<f64> {
        if !(dose > 0.0 && dose.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "dose must be positive, got {dose}"
            )));
        }
        let x = beta0 + beta1.exp() * (dose / self.grid.reference_dose()).ln();
        Ok(self.link.inverse(x))
    }

    /// DLT probabilities at every grid dose.
    pub fn probs(&self, beta0: f64, beta1: f64) -> Vec<f64> {
        let slope = beta1.exp();
        self.log_ratios
            .iter()
            .map(|lr| self.link.inverse(beta0 + slope * lr))
            .collect()
    }

    pub fn log_likelihood(&self, data: &DoseData, beta0: f64, beta1: f64) -> f64 {
        let slope = beta1.exp();
        data.observed(&self.log_ratios)
            .map(|(lr, n, m)| {
                let (lp, lq) = self.link.log_probs(beta0 + slope * lr);
                m * lp + (n - m) * lq
            })
            .sum()
    }

    /// Binomial log-likelihood plus normal log prior, up to a constant.
    pub fn log_posterior(&self, data: &DoseData, beta0: f64, beta1: f64) -> f64 {
        self.log_likelihood(data, beta0, beta1) + self.prior.log_density(beta0, beta1)
    }

    pub(crate) fn check_data(&self, data: &DoseData) -> Result<()> {
        if data.len() != self.grid.len() {
            return Err(Error::InvalidArgument(format!(
                "data covers {} doses but the model has {}",
                data.len(),
                self.grid.len()
            )));
        }
        if data.n.iter().zip(&data.m).any(|(n, m)| m > n) {
            return Err(Error::InvalidArgument("m_j must not exceed n_j".into()));
        }
        Ok(())
    }
}

/// Which posterior functional is reported as the per-dose estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PointEstimate {
    #[default]
    Mean,
    Median,
}

/// Lattice covering `gamma +- half_width * sd` on each coefficient axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub points: usize,
    pub half_width: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            points: 201,
            half_width: 6.0,
        }
    }
}

impl GridSpec {
    pub const MIN_POINTS: usize = 201;
    pub const MIN_HALF_WIDTH: f64 = 6.0;

    pub fn refined(self) -> Self {
        Self {
            points: 2 * (self.points - 1) + 1,
            ..self
        }
    }

    fn validate(&self) -> Result<()> {
        if self.points < Self::MIN_POINTS || self.half_width < Self::MIN_HALF_WIDTH {
            return Err(Error::InvalidArgument(format!(
                "grid needs >= {} points over >= +-{} prior sd per axis",
                Self::MIN_POINTS,
                Self::MIN_HALF_WIDTH
            )));
        }
        Ok(())
    }

    fn axis(&self, mean: f64, sd: f64) -> Vec<f64> {
        let step = 2.0 * self.half_width / (self.points - 1) as f64;
        (0..self.points)
            .map(|i| mean + sd * (-self.half_width + step * i as f64))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Engine {
    Grid,
    Mcmc,
}

impl fmt::Display for Engine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Engine::Grid => "grid",
            Engine::Mcmc => "mcmc",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSummary {
    /// Per-dose posterior estimate of the DLT probability.
    pub estimates: Vec<f64>,
    pub point: PointEstimate,
    pub engine: Engine,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostics: Option<SamplerDiagnostics>,
}

/// Grid points whose log weight trails the maximum by more than this
/// contribute below 1e-17 in total and are skipped when accumulating.
const NEGLIGIBLE_LOG_WEIGHT: f64 = -40.0;

/// Normalized posterior over a coefficient lattice.
pub struct GridPosterior {
    pub beta0: Vec<f64>,
    pub beta1: Vec<f64>,
    /// Row-major by `beta1`, then `beta0`; sums to one.
    pub weights: Vec<f64>,
}

impl GridPosterior {
    pub fn compute(model: &DoseResponseModel, data: &DoseData, spec: GridSpec) -> Result<Self> {
        spec.validate()?;
        model.check_data(data)?;
        let prior = model.prior();
        let beta0 = spec.axis(prior.gamma0, prior.sd0());
        let beta1 = spec.axis(prior.gamma1, prior.sd1());
        let observed: Vec<(f64, f64, f64)> = data.observed(model.log_ratios()).collect();
        let link = model.link();

        let mut log_w = Vec::with_capacity(beta0.len() * beta1.len());
        for &b1 in &beta1 {
            let slope = b1.exp();
            let prior1 = -0.5 * (b1 - prior.gamma1).powi(2) / prior.var1;
            for &b0 in &beta0 {
                let prior0 = -0.5 * (b0 - prior.gamma0).powi(2) / prior.var0;
                let ll: f64 = observed
                    .iter()
                    .map(|&(lr, n, m)| {
                        let (lp, lq) = link.log_probs(b0 + slope * lr);
                        m * lp + (n - m) * lq
                    })
                    .sum();
                log_w.push(ll + prior0 + prior1);
            }
        }

        let max = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !max.is_finite() {
            return Err(Error::PosteriorUnderflow);
        }
        let mut weights: Vec<f64> = log_w.iter().map(|lw| (lw - max).exp()).collect();
        let total: f64 = weights.iter().sum();
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::PosteriorUnderflow);
        }
        weights.iter_mut().for_each(|w| *w /= total);
        Ok(Self {
            beta0,
            beta1,
            weights,
        })
    }

    fn points(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        let n0 = self.beta0.len();
        self.weights
            .iter()
            .enumerate()
            .map(move |(i, &w)| (self.beta0[i % n0], self.beta1[i / n0], w))
    }

    pub fn means(&self, model: &DoseResponseModel) -> Vec<f64> {
        let cutoff = self.weights.iter().copied().fold(0.0, f64::max) * NEGLIGIBLE_LOG_WEIGHT.exp();
        let mut sums = vec![0.0; model.grid().len()];
        for (b0, b1, w) in self.points() {
            if w < cutoff {
                continue;
            }
            let slope = b1.exp();
            for (sum, lr) in sums.iter_mut().zip(model.log_ratios()) {
                *sum += w * model.link().inverse(b0 + slope * lr);
            }
        }
        sums
    }

    /// Weighted medians. The DLT probability at each dose is monotone in the
    /// linear predictor, so the median is taken on the predictor scale.
    pub fn medians(&self, model: &DoseResponseModel) -> Vec<f64> {
        model
            .log_ratios()
            .iter()
            .map(|&lr| {
                let mut eta: Vec<(f64, f64)> = self
                    .points()
                    .map(|(b0, b1, w)| (b0 + b1.exp() * lr, w))
                    .collect();
                eta.sort_by(|a, b| a.0.total_cmp(&b.0));
                model.link().inverse(weighted_median(&eta))
            })
            .collect()
    }

    pub fn summary(&self, model: &DoseResponseModel, point: PointEstimate) -> PosteriorSummary {
        let estimates = match point {
            PointEstimate::Mean => self.means(model),
            PointEstimate::Median => self.medians(model),
        };
        PosteriorSummary {
            estimates,
            point,
            engine: Engine::Grid,
            diagnostics: None,
        }
    }
}

/// Median of sorted `(value, weight)` pairs whose weights sum to one.
pub(crate) fn weighted_median(sorted: &[(f64, f64)]) -> f64 {
    let mut acc = 0.0;
    for (i, &(v, w)) in sorted.iter().enumerate() {
        acc += w;
        if acc >= 0.5 {
            // exact half: average with the next support point
            if (acc - 0.5).abs() < 1e-15 {
                if let Some(&(next, _)) = sorted[i + 1..].iter().find(|(_, w)| *w > 0.0) {
                    return 0.5 * (v + next);
                }
            }
            return v;
        }
    }
    sorted.last().map_or(f64::NAN, |p| p.0)
}

pub fn grid_posterior(
    model: &DoseResponseModel,
    data: &DoseData,
    spec: GridSpec,
    point: PointEstimate,
) -> Result<PosteriorSummary> {
    Ok(GridPosterior::compute(model, data, spec)?.summary(model, point))
}

/// Closest admissible estimate to `phi`; ties go to the lower dose.
pub fn select_mtd_drm(
    summary: &PosteriorSummary,
    phi: f64,
    admissible: &[bool],
) -> Option<DoseLevel> {
    let estimates: Vec<Option<f64>> = summary.estimates.iter().copied().map(Some).collect();
    crate::pava::closest_to_target(&estimates, admissible, phi)
}

/// Convenience: grid posterior plus selection for a finished trial.
pub fn select_for_state(
    model: &DoseResponseModel,
    state: &TrialState,
    design: &TrialDesign,
    spec: GridSpec,
    point: PointEstimate,
) -> Result<(PosteriorSummary, Vec<bool>, Option<DoseLevel>)> {
    let admissible = state.admissible(design);
    let summary = grid_posterior(model, &DoseData::from_state(state), spec, point)?;
    let mtd = select_mtd_drm(&summary, design.phi(), &admissible);
    Ok((summary, admissible, mtd))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    pub(crate) fn reference_logit_model() -> DoseResponseModel {
        DoseResponseModel::new(
            Link::Logit,
            DoseGrid::reference_grid(),
            CoefficientPrior::new(-1.592, 1.371, 0.412, 0.784).unwrap(),
        )
    }

    #[test]
    fn reference_dose_identity() {
        for link in Link::ALL {
            let model = reference_logit_model();
            let model = DoseResponseModel::new(link, model.grid().clone(), *model.prior());
            let b0 = link.forward(0.3);
            for b1 in [-2.0, 0.0, 1.5] {
                assert!((model.prob(b0, b1, 30.0).unwrap() - 0.3).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn hand_evaluated_probabilities() {
        let model = reference_logit_model();
        let p20 = model.prob(-0.973965, 0.297435, 20.0).unwrap();
        let p45 = model.prob(-0.973965, 0.297435, 45.0).unwrap();
        assert!((p20 - 0.1795).abs() < 5e-5, "{p20}");
        assert!((p45 - 0.3946).abs() < 5e-5, "{p45}");
        assert!(model.prob(0.0, 0.0, 0.0).is_err());
        assert!(model.prob(0.0, 0.0, -3.0).is_err());
    }

    #[test]
    fn empty_data_gives_prior_density() {
        let model = reference_logit_model();
        let data = DoseData::empty(6);
        for (b0, b1) in [(0.0, 0.0), (-1.0, 0.5), (2.0, -1.0)] {
            let lp = model.log_posterior(&data, b0, b1);
            assert!((lp - model.prior().log_density(b0, b1)).abs() < 1e-14);
        }
    }

    #[test]
    fn one_extra_dlt_adds_log_odds() {
        let model = reference_logit_model();
        let base = DoseData::new(vec![3, 6, 3, 0, 0, 0], vec![0, 1, 0, 0, 0, 0]).unwrap();
        let bumped = DoseData::new(vec![3, 6, 3, 0, 0, 0], vec![0, 1, 1, 0, 0, 0]).unwrap();
        for (b0, b1) in [(-1.0, 0.3), (0.5, -0.2)] {
            let diff = model.log_posterior(&bumped, b0, b1) - model.log_posterior(&base, b0, b1);
            let p = model.probs(b0, b1)[2];
            assert!((diff - (p / (1.0 - p)).ln()).abs() < 1e-10);
        }
    }

    /// Straight transcription of the binomial/normal formula.
    fn slow_log_posterior(
        model: &DoseResponseModel,
        n: &[u32],
        m: &[u32],
        b0: f64,
        b1: f64,
    ) -> f64 {
        let doses = model.grid().doses();
        let dstar = model.grid().reference_dose();
        let mut total = 0.0;
        for j in 0..doses.len() {
            if n[j] == 0 {
                continue;
            }
            let x = b0 + b1.exp() * (doses[j] / dstar).ln();
            let p = match model.link() {
                Link::Logit => 1.0 / (1.0 + (-x).exp()),
                Link::LogLog => (-(-x).exp()).exp(),
                Link::CLogLog => 1.0 - (-(x.exp())).exp(),
            };
            total += f64::from(m[j]) * p.ln() + f64::from(n[j] - m[j]) * (1.0 - p).ln();
        }
        let pr = model.prior();
        total
            - (b0 - pr.gamma0).powi(2) / (2.0 * pr.var0)
            - (b1 - pr.gamma1).powi(2) / (2.0 * pr.var1)
    }

    #[test]
    fn log_posterior_matches_slow_reference() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for link in Link::ALL {
            let model = DoseResponseModel::new(
                link,
                DoseGrid::reference_grid(),
                CoefficientPrior::new(-1.0, 1.2, 0.2, 0.7).unwrap(),
            );
            for _ in 0..5 {
                let n: Vec<u32> = (0..6).map(|_| rng.random_range(0..=12)).collect();
                let m: Vec<u32> = n.iter().map(|&n| rng.random_range(0..=n)).collect();
                let b0: f64 = rng.random_range(-2.0..1.0);
                let b1: f64 = rng.random_range(-1.0..1.0);
                let data = DoseData::new(n.clone(), m.clone()).unwrap();
                let fast = model.log_posterior(&data, b0, b1);
                let slow = slow_log_posterior(&model, &n, &m, b0, b1);
                assert!((fast - slow).abs() < 1e-9, "{link}: {fast} vs {slow}");
            }
        }
    }

    #[test]
    fn grid_weights_normalize() {
        let model = reference_logit_model();
        let data = DoseData::new(vec![3, 6, 9, 3, 0, 0], vec![0, 1, 3, 2, 0, 0]).unwrap();
        let post = GridPosterior::compute(&model, &data, GridSpec::default()).unwrap();
        let total: f64 = post.weights.iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
        let means = post.means(&model);
        assert!(means.windows(2).all(|w| w[0] <= w[1]), "{means:?}");
        assert!(means.iter().all(|&p| p > 0.0 && p < 1.0));
    }

    #[test]
    fn prior_only_means_match_monte_carlo() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        for link in Link::ALL {
            let model = DoseResponseModel::new(
                link,
                DoseGrid::reference_grid(),
                *reference_logit_model().prior(),
            );
            let summary = grid_posterior(
                &model,
                &DoseData::empty(6),
                GridSpec::default(),
                PointEstimate::Mean,
            )
            .unwrap();
            let draws = 1_000_000;
            let mut sums = [0.0; 6];
            let pr = model.prior();
            for _ in 0..draws {
                let z0: f64 = rng.sample(StandardNormal);
                let z1: f64 = rng.sample(StandardNormal);
                let probs = model.probs(pr.gamma0 + pr.sd0() * z0, pr.gamma1 + pr.sd1() * z1);
                sums.iter_mut().zip(probs).for_each(|(s, p)| *s += p);
            }
            for (j, s) in sums.iter().enumerate() {
                let mc = s / f64::from(draws);
                assert!(
                    (mc - summary.estimates[j]).abs() < 0.003,
                    "{link} dose {j}: {mc} vs {}",
                    summary.estimates[j]
                );
            }
        }
    }

    #[test]
    fn degenerate_prior_pins_reference_dose() {
        let b0 = Link::Logit.forward(0.3);
        let model = DoseResponseModel::new(
            Link::Logit,
            DoseGrid::reference_grid(),
            CoefficientPrior::new(b0, 1e-8, 0.1, 1e-8).unwrap(),
        );
        let data = DoseData::new(vec![3, 6, 12, 9, 6, 0], vec![0, 0, 9, 8, 6, 0]).unwrap();
        let summary =
            grid_posterior(&model, &data, GridSpec::default(), PointEstimate::Mean).unwrap();
        assert!(
            (summary.estimates[2] - 0.3).abs() < 1e-3,
            "{:?}",
            summary.estimates
        );
    }

    #[test]
    fn refinement_changes_means_little() {
        let model = reference_logit_model();
        let data = DoseData::new(vec![3, 3, 9, 12, 6, 3], vec![0, 0, 2, 4, 3, 2]).unwrap();
        let coarse =
            grid_posterior(&model, &data, GridSpec::default(), PointEstimate::Mean).unwrap();
        let fine = grid_posterior(
            &model,
            &data,
            GridSpec::default().refined(),
            PointEstimate::Mean,
        )
        .unwrap();
        for (a, b) in coarse.estimates.iter().zip(&fine.estimates) {
            assert!((a - b).abs() < 0.002);
        }
    }

    #[test]
    fn medians_are_monotone_and_near_means() {
        let model = reference_logit_model();
        let data = DoseData::new(vec![3, 9, 12, 9, 3, 0], vec![0, 1, 3, 4, 2, 0]).unwrap();
        let post = GridPosterior::compute(&model, &data, GridSpec::default()).unwrap();
        let med = post.medians(&model);
        let mean = post.means(&model);
        assert!(med.windows(2).all(|w| w[0] <= w[1]));
        for (a, b) in med.iter().zip(&mean) {
            assert!((a - b).abs() < 0.1);
        }
    }

    #[test]
    fn grid_spec_and_data_are_validated() {
        let model = reference_logit_model();
        let small = GridSpec {
            points: 51,
            half_width: 6.0,
        };
        assert!(grid_posterior(&model, &DoseData::empty(6), small, PointEstimate::Mean).is_err());
        assert!(grid_posterior(
            &model,
            &DoseData::empty(5),
            GridSpec::default(),
            PointEstimate::Mean
        )
        .is_err());
    }

    #[test]
    fn selection_examples() {
        let summary = |e: Vec<f64>| PosteriorSummary {
            estimates: e,
            point: PointEstimate::Mean,
            engine: Engine::Grid,
            diagnostics: None,
        };
        let s = summary(vec![0.10, 0.29, 0.50]);
        assert_eq!(
            select_mtd_drm(&s, 0.3, &[true; 3]).map(|l| l.number()),
            Some(2)
        );
        let s = summary(vec![0.28, 0.32, 0.60]);
        assert_eq!(
            select_mtd_drm(&s, 0.3, &[false, true, true]).map(|l| l.number()),
            Some(2)
        );
        assert_eq!(select_mtd_drm(&s, 0.3, &[false; 3]), None);
    }

    #[test]
    fn model_json_shape() {
        let model = reference_logit_model();
        let v = serde_json::to_value(&model).unwrap();
        for key in [
            "link",
            "doses",
            "ref_index",
            "gamma0",
            "var0",
            "gamma1",
            "var1",
        ] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
        assert_eq!(v["ref_index"], 3);
        let back: DoseResponseModel = serde_json::from_value(v).unwrap();
        assert_eq!(back, model);
        let bad = r#"{"link":"logit","doses":[10,20],"ref_index":1,"gamma0":0,"var0":0,"gamma1":0,"var1":1}"#;
        assert!(serde_json::from_str::<DoseResponseModel>(bad).is_err());
    }

    proptest::proptest! {
        #[test]
        fn model_prob_increases_with_dose(b0 in -8.0f64..8.0, b1 in -3.0f64..2.5, li in 0usize..3) {
            let link = Link::ALL[li];
            let model = DoseResponseModel::new(link, DoseGrid::reference_grid(), *reference_logit_model().prior());
            let probs = model.probs(b0, b1);
            proptest::prop_assert!(probs.windows(2).all(|w| w[0] <= w[1]));
        }
    }
}
