//! Prior elicitation: minimally informative unimodal Beta targets at each
//! dose, then quantile matching of the coefficient prior.

use std::cmp::Ordering;

use argmin::core::{CostFunction, Executor, State};
use argmin::solver::neldermead::NelderMead;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::design::DoseGrid;
use crate::drm::CoefficientPrior;
use crate::error::{Error, Result};
use crate::link::Link;

pub const DEFAULT_LEVELS: [f64; 3] = [0.025, 0.5, 0.975];
pub const MIN_CRN_SIZE: usize = 10_000;

/// Beta(a, b) restricted to the family where one shape equals one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaSpec {
    pub a: f64,
    pub b: f64,
}

impl BetaSpec {
    pub fn new(a: f64, b: f64) -> Self {
        Self { a, b }
    }

    fn check(&self) -> Result<()> {
        if self.a == 1.0 || self.b == 1.0 {
            Ok(())
        } else {
            Err(Error::UnsupportedBetaFamily {
                a: self.a,
                b: self.b,
            })
        }
    }

    pub fn cdf(&self, x: f64) -> Result<f64> {
        self.check()?;
        let x = x.clamp(0.0, 1.0);
        Ok(if self.b == 1.0 {
            x.powf(self.a)
        } else {
            1.0 - (1.0 - x).powf(self.b)
        })
    }

    pub fn quantile(&self, p: f64) -> Result<f64> {
        self.check()?;
        Ok(if self.b == 1.0 {
            p.powf(1.0 / self.a)
        } else {
            1.0 - (1.0 - p).powf(1.0 / self.b)
        })
    }

    pub fn median(&self) -> Result<f64> {
        self.quantile(0.5)
    }

    /// Beta with the given median, skewed by which side of 1/2 it falls on.
    pub fn from_median(mu: f64) -> Result<Self> {
        if !(mu > 0.0 && mu < 1.0) {
            return Err(Error::InvalidElicitation(format!(
                "median {mu} outside (0, 1)"
            )));
        }
        Ok(if mu < 0.5 {
            Self::new(1.0, 0.5f64.ln() / (1.0 - mu).ln())
        } else if mu > 0.5 {
            Self::new(0.5f64.ln() / mu.ln(), 1.0)
        } else {
            Self::new(1.0, 1.0)
        })
    }
}

/// Smallest-`a + b` unimodal Beta with `P(X <= q) = p`.
pub fn min_info_beta(p: f64, q: f64) -> Result<BetaSpec> {
    if !(p > 0.0 && p < 1.0 && q > 0.0 && q < 1.0) {
        return Err(Error::InvalidElicitation(format!(
            "need p, q in (0, 1), got p={p}, q={q}"
        )));
    }
    Ok(if q > p {
        BetaSpec::new(p.ln() / q.ln(), 1.0)
    } else if q < p {
        BetaSpec::new(1.0, (1.0 - p).ln() / (1.0 - q).ln())
    } else {
        BetaSpec::new(1.0, 1.0)
    })
}

/// Solves the two-point line through the endpoint medians on the link scale.
/// Returns `(beta0, beta1)` with `exp(beta1)` the slope.
pub fn anchor_coefficients(mu1: f64, mu_j: f64, grid: &DoseGrid, link: Link) -> Result<(f64, f64)> {
    if !(mu1 > 0.0 && mu_j < 1.0 && mu1 < mu_j) {
        return Err(Error::InvalidElicitation(format!(
            "endpoint medians must satisfy 0 < mu1 < muJ < 1, got {mu1} and {mu_j}"
        )));
    }
    let lr = grid.log_ratios();
    let (first, last) = (lr[0], lr[lr.len() - 1]);
    let slope = (link.forward(mu_j) - link.forward(mu1)) / (last - first);
    let beta0 = link.forward(mu_j) - slope * last;
    Ok((beta0, slope.ln()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileTargets {
    pub levels: Vec<f64>,
    /// One row per dose, one column per level.
    pub values: Vec<Vec<f64>>,
}

impl QuantileTargets {
    pub fn new(levels: Vec<f64>, values: Vec<Vec<f64>>) -> Result<Self> {
        validate_levels(&levels)?;
        if values.iter().any(|row| row.len() != levels.len()) {
            return Err(Error::InvalidElicitation(
                "every row needs one value per level".into(),
            ));
        }
        Ok(Self { levels, values })
    }

    pub fn loss(&self, other: &[Vec<f64>]) -> f64 {
        self.values
            .iter()
            .zip(other)
            .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).powi(2)))
            .sum()
    }
}

fn validate_levels(levels: &[f64]) -> Result<()> {
    if levels.is_empty()
        || levels.iter().any(|&l| !(l > 0.0 && l < 1.0))
        || levels.windows(2).any(|w| w[0] >= w[1])
    {
        return Err(Error::InvalidElicitation(
            "levels must be strictly increasing inside (0, 1)".into(),
        ));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElicitationInput {
    /// `P(pi(d_1) > phi)`.
    pub p1: f64,
    /// `P(pi(d_J) <= phi)`.
    pub pj: f64,
    pub phi: f64,
    pub grid: DoseGrid,
    pub link: Link,
    #[serde(default = "default_levels")]
    pub levels: Vec<f64>,
}

fn default_levels() -> Vec<f64> {
    DEFAULT_LEVELS.to_vec()
}

impl ElicitationInput {
    pub fn new(grid: DoseGrid, link: Link) -> Self {
        Self {
            p1: 0.05,
            pj: 0.21,
            phi: 0.3,
            grid,
            link,
            levels: default_levels(),
        }
    }

    pub fn with_probabilities(mut self, p1: f64, pj: f64) -> Self {
        self.p1 = p1;
        self.pj = pj;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.phi > 0.0 && self.phi < 1.0) {
            return Err(Error::InvalidElicitation(format!(
                "phi {} outside (0, 1)",
                self.phi
            )));
        }
        if !(self.p1 > 0.0 && self.p1 <= 0.95) {
            return Err(Error::InvalidElicitation(format!(
                "p1 {} outside (0, 0.95]",
                self.p1
            )));
        }
        if !(self.pj >= 0.05 && self.pj < 1.0) {
            return Err(Error::InvalidElicitation(format!(
                "pJ {} outside [0.05, 1)",
                self.pj
            )));
        }
        validate_levels(&self.levels)
    }
}

/// Every intermediate of the target construction, kept for audit output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Elicitation {
    pub betas: Vec<BetaSpec>,
    pub medians: Vec<f64>,
    pub anchor_beta0: f64,
    pub anchor_beta1: f64,
    pub targets: QuantileTargets,
}

pub fn elicit(input: &ElicitationInput) -> Result<Elicitation> {
    input.validate()?;
    let link = input.link;
    let first = min_info_beta(1.0 - input.p1, input.phi)?;
    let last = min_info_beta(input.pj, input.phi)?;
    let (mu1, mu_j) = (first.median()?, last.median()?);
    let (beta0, beta1) = anchor_coefficients(mu1, mu_j, &input.grid, link)?;

    let lr = input.grid.log_ratios();
    let j = lr.len();
    let mut medians = Vec::with_capacity(j);
    let mut betas = Vec::with_capacity(j);
    for (i, &r) in lr.iter().enumerate() {
        let (mu, beta) = if i == 0 {
            (mu1, first)
        } else if i == j - 1 {
            (mu_j, last)
        } else {
            let mu = link.inverse(beta0 + beta1.exp() * r);
            (mu, BetaSpec::from_median(mu)?)
        };
        medians.push(mu);
        betas.push(beta);
    }
    let values = betas
        .iter()
        .map(|b| {
            input
                .levels
                .iter()
                .map(|&p| b.quantile(p))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Elicitation {
        betas,
        medians,
        anchor_beta0: beta0,
        anchor_beta1: beta1,
        targets: QuantileTargets::new(input.levels.clone(), values)?,
    })
}

pub fn build_targets(input: &ElicitationInput) -> Result<QuantileTargets> {
    Ok(elicit(input)?.targets)
}

/// Fixed standard-normal pairs reused across every objective evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct CrnSample {
    z: Vec<[f64; 2]>,
    seed: u64,
}

impl CrnSample {
    pub fn new(size: usize, seed: u64) -> Result<Self> {
        if size < MIN_CRN_SIZE {
            return Err(Error::InvalidArgument(format!(
                "CRN sample needs >= {MIN_CRN_SIZE} pairs"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let z = (0..size)
            .map(|_| [rng.sample(StandardNormal), rng.sample(StandardNormal)])
            .collect();
        Ok(Self { z, seed })
    }

    pub fn len(&self) -> usize {
        self.z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z.is_empty()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
}

/// Sample quantile with linear interpolation between order statistics
/// (position `(n - 1) p`). Reorders `xs`.
fn quantile_in_place(xs: &mut [f64], p: f64) -> f64 {
    let h = (xs.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let (_, &mut x_lo, upper) = xs.select_nth_unstable_by(lo, f64::total_cmp);
    if upper.is_empty() {
        return x_lo;
    }
    let x_hi = upper.iter().copied().fold(f64::INFINITY, f64::min);
    x_lo + (h - lo as f64) * (x_hi - x_lo)
}

/// Monte-Carlo quantiles of `pi(d_j)` under a coefficient prior.
pub fn implied_quantiles(
    prior: &CoefficientPrior,
    grid: &DoseGrid,
    link: Link,
    levels: &[f64],
    crn: &CrnSample,
) -> Vec<Vec<f64>> {
    implied_with_ratios(prior, &grid.log_ratios(), link, levels, crn)
}

fn implied_with_ratios(
    prior: &CoefficientPrior,
    log_ratios: &[f64],
    link: Link,
    levels: &[f64],
    crn: &CrnSample,
) -> Vec<Vec<f64>> {
    let (sd0, sd1) = (prior.sd0(), prior.sd1());
    let coefs: Vec<(f64, f64)> = crn
        .z
        .iter()
        .map(|z| (prior.gamma0 + sd0 * z[0], (prior.gamma1 + sd1 * z[1]).exp()))
        .collect();
    let mut probs = vec![0.0; coefs.len()];
    log_ratios
        .iter()
        .map(|&lr| {
            for (p, &(b0, slope)) in probs.iter_mut().zip(&coefs) {
                *p = link.inverse(b0 + slope * lr);
            }
            levels
                .iter()
                .map(|&l| quantile_in_place(&mut probs, l))
                .collect()
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizeOptions {
    pub restarts: usize,
    pub var_floor: f64,
    pub mean_bound: f64,
    pub crn_size: usize,
    pub seed: u64,
    pub max_iters: u64,
}

impl Default for OptimizeOptions {
    fn default() -> Self {
        Self {
            restarts: 20,
            var_floor: 0.5,
            mean_bound: 10.0,
            crn_size: MIN_CRN_SIZE,
            seed: 20_240_601,
            max_iters: 3000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorFit {
    pub prior: CoefficientPrior,
    pub loss: f64,
    pub targets: QuantileTargets,
    pub achieved: Vec<Vec<f64>>,
    pub restart_losses: Vec<f64>,
}

#[derive(Clone, Copy)]
struct QuantileLoss<'a> {
    targets: &'a QuantileTargets,
    log_ratios: &'a [f64],
    link: Link,
    crn: &'a CrnSample,
    var_floor: f64,
    mean_bound: f64,
}

impl QuantileLoss<'_> {
    /// Unconstrained `(gamma0, log var0, gamma1, log var1)` to a prior.
    fn decode(&self, x: &[f64]) -> CoefficientPrior {
        CoefficientPrior {
            gamma0: x[0],
            var0: x[1].exp().max(self.var_floor),
            gamma1: x[2],
            var1: x[3].exp().max(self.var_floor),
        }
    }

    fn eval(&self, x: &[f64]) -> f64 {
        if x.iter().any(|v| !v.is_finite()) || x[1] > 20.0 || x[3] > 20.0 {
            return f64::MAX;
        }
        let excess =
            (x[0].abs() - self.mean_bound).max(0.0) + (x[2].abs() - self.mean_bound).max(0.0);
        if excess > 0.0 {
            return 1e3 * (1.0 + excess);
        }
        let prior = self.decode(x);
        let q = implied_with_ratios(
            &prior,
            self.log_ratios,
            self.link,
            &self.targets.levels,
            self.crn,
        );
        self.targets.loss(&q)
    }
}

impl CostFunction for QuantileLoss<'_> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, x: &Self::Param) -> std::result::Result<f64, argmin::core::Error> {
        Ok(self.eval(x))
    }
}

/// Evaluates the quantile-matching loss of a given prior on the same CRN
/// sample the optimizer uses.
pub fn prior_loss(
    prior: &CoefficientPrior,
    targets: &QuantileTargets,
    grid: &DoseGrid,
    link: Link,
    crn: &CrnSample,
) -> f64 {
    targets.loss(&implied_quantiles(prior, grid, link, &targets.levels, crn))
}

/// Nelder-Mead restarts on the quantile loss. The first restart begins at
/// `start`, the rest at random points drawn from the options seed.
pub fn optimize_prior(
    targets: &QuantileTargets,
    grid: &DoseGrid,
    link: Link,
    start: (f64, f64),
    options: &OptimizeOptions,
    crn: &CrnSample,
) -> Result<PriorFit> {
    if targets.values.len() != grid.len() {
        return Err(Error::InvalidElicitation(
            "targets and dose grid differ in length".into(),
        ));
    }
    if options.restarts == 0 || options.var_floor.partial_cmp(&0.0) != Some(Ordering::Greater) {
        return Err(Error::InvalidArgument(
            "need at least one restart and a positive variance floor".into(),
        ));
    }
    let log_ratios = grid.log_ratios();
    let problem = QuantileLoss {
        targets,
        log_ratios: &log_ratios,
        link,
        crn,
        var_floor: options.var_floor,
        mean_bound: options.mean_bound,
    };

    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let floor_log = options.var_floor.ln();
    let mut starts = vec![vec![
        start.0,
        floor_log.max(0.0),
        start.1,
        floor_log.max(0.0),
    ]];
    while starts.len() < options.restarts {
        starts.push(vec![
            rng.random_range(-3.0..1.5),
            rng.random_range(floor_log..2.0),
            rng.random_range(-2.0..1.5),
            rng.random_range(floor_log..2.0),
        ]);
    }

    let runs: Vec<(f64, f64, Vec<f64>)> = starts
        .par_iter()
        .map(|x0| {
            let initial = problem.eval(x0);
            let mut simplex = vec![x0.clone()];
            for i in 0..x0.len() {
                let mut v = x0.clone();
                v[i] += if i % 2 == 0 { 0.5 } else { 0.7 };
                simplex.push(v);
            }
            let solver = NelderMead::new(simplex)
                .with_sd_tolerance(1e-12)
                .expect("tolerance is positive");
            let result = Executor::new(problem, solver)
                .configure(|s| s.max_iters(options.max_iters))
                .run();
            match result {
                Ok(res) => {
                    let state = res.state();
                    let best = state
                        .get_best_param()
                        .cloned()
                        .unwrap_or_else(|| x0.clone());
                    (initial, state.get_best_cost(), best)
                }
                Err(_) => (initial, initial, x0.clone()),
            }
        })
        .collect();

    let best_initial = runs.iter().map(|r| r.0).fold(f64::INFINITY, f64::min);
    let (best_idx, best) = runs
        .iter()
        .enumerate()
        .min_by(|a, b| a.1 .1.total_cmp(&b.1 .1).then(a.0.cmp(&b.0)))
        .expect("at least one restart");
    if best.1.partial_cmp(&best_initial) != Some(Ordering::Less) {
        return Err(Error::OptimizationFailed(format!(
            "no restart improved on its start; best start loss {best_initial:.6}, restart {best_idx} loss {:.6}",
            best.1
        )));
    }
    let prior = problem.decode(&best.2);
    let achieved = implied_with_ratios(&prior, &log_ratios, link, &targets.levels, crn);
    Ok(PriorFit {
        prior,
        loss: targets.loss(&achieved),
        targets: targets.clone(),
        achieved,
        restart_losses: runs.iter().map(|r| r.1).collect(),
    })
}

/// Full chain: targets from the input, then the prior fit started at the
/// anchor coefficients.
pub fn elicit_prior(
    input: &ElicitationInput,
    options: &OptimizeOptions,
) -> Result<(Elicitation, PriorFit)> {
    let elicitation = elicit(input)?;
    let crn = CrnSample::new(options.crn_size, options.seed)?;
    let fit = optimize_prior(
        &elicitation.targets,
        &input.grid,
        input.link,
        (elicitation.anchor_beta0, elicitation.anchor_beta1),
        options,
        &crn,
    )?;
    Ok((elicitation, fit))
}
