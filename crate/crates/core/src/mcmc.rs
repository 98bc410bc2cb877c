//! Adaptive random-walk Metropolis on `(beta0, beta1)`.
//!
//! During burn-in the proposal covariance tracks the running chain
//! covariance and a global scale is tuned toward the target acceptance
//! rate. Both are frozen once burn-in ends, so retained draws come from a
//! fixed Metropolis kernel.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::drm::{DoseData, DoseResponseModel, Engine, PointEstimate, PosteriorSummary};
use crate::error::{Error, Result};

pub const TARGET_ACCEPTANCE: f64 = 0.234;
const ACCEPTANCE_WARN_LOW: f64 = 0.05;
const ACCEPTANCE_WARN_HIGH: f64 = 0.7;
/// Iterations before the empirical covariance replaces the prior one.
const COV_WARMUP: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McmcConfig {
    pub n_iter: usize,
    pub n_burn: usize,
    pub seed: u64,
}

impl Default for McmcConfig {
    fn default() -> Self {
        Self {
            n_iter: 10_500,
            n_burn: 500,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerDiagnostics {
    /// Acceptance rate over retained iterations.
    pub acceptance_rate: f64,
    /// Smaller of the two per-coefficient effective sample sizes.
    pub effective_draws: f64,
    pub retained: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct McmcOutput {
    pub summary: PosteriorSummary,
    /// Retained `(beta0, beta1)` draws in chain order.
    pub draws: Vec<[f64; 2]>,
}

/// Lower Cholesky factor of a 2x2 covariance `[[a, b], [b, c]]`.
fn cholesky2(a: f64, b: f64, c: f64) -> [f64; 3] {
    let l11 = a.sqrt();
    let l21 = b / l11;
    let l22 = (c - l21 * l21).max(1e-12 * c).sqrt();
    [l11, l21, l22]
}

/// Running mean and covariance (Welford).
#[derive(Default)]
struct Moments {
    n: f64,
    mean: [f64; 2],
    m2: [f64; 3],
}

impl Moments {
    fn push(&mut self, x: [f64; 2]) {
        self.n += 1.0;
        let d0 = x[0] - self.mean[0];
        let d1 = x[1] - self.mean[1];
        self.mean[0] += d0 / self.n;
        self.mean[1] += d1 / self.n;
        let e0 = x[0] - self.mean[0];
        let e1 = x[1] - self.mean[1];
        self.m2[0] += d0 * e0;
        self.m2[1] += d0 * e1;
        self.m2[2] += d1 * e1;
    }

    fn cov(&self) -> [f64; 3] {
        let k = (self.n - 1.0).max(1.0);
        [self.m2[0] / k, self.m2[1] / k, self.m2[2] / k]
    }
}

pub fn mcmc_sample(
    model: &DoseResponseModel,
    data: &DoseData,
    config: McmcConfig,
    point: PointEstimate,
) -> Result<McmcOutput> {
    if config.n_iter <= config.n_burn {
        return Err(Error::InvalidArgument(format!(
            "n_iter ({}) must exceed n_burn ({})",
            config.n_iter, config.n_burn
        )));
    }
    model.check_data(data)?;
    let prior = *model.prior();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let mut x = [prior.gamma0, prior.gamma1];
    let mut lp = model.log_posterior(data, x[0], x[1]);
    if !lp.is_finite() {
        return Err(Error::PosteriorUnderflow);
    }

    // 2.38^2 / d with d = 2
    let base_scale = 2.38 * 2.38 / 2.0;
    let ridge = 1e-6 * prior.var0.min(prior.var1);
    let mut log_scale = 0.0f64;
    let mut chol = cholesky2(prior.var0 * 0.25, 0.0, prior.var1 * 0.25);
    let mut moments = Moments::default();

    let retained = config.n_iter - config.n_burn;
    let mut draws = Vec::with_capacity(retained);
    let mut accepted = 0usize;

    for t in 0..config.n_iter {
        let adapting = t < config.n_burn;
        let s = (base_scale * log_scale.exp()).sqrt();
        let z0: f64 = rng.sample(StandardNormal);
        let z1: f64 = rng.sample(StandardNormal);
        let prop = [
            x[0] + s * chol[0] * z0,
            x[1] + s * (chol[1] * z0 + chol[2] * z1),
        ];
        let lp_prop = model.log_posterior(data, prop[0], prop[1]);
        let log_alpha = if lp_prop.is_finite() {
            (lp_prop - lp).min(0.0)
        } else {
            f64::NEG_INFINITY
        };
        let u: f64 = rng.random();
        let accept = u.ln() < log_alpha;
        if accept {
            x = prop;
            lp = lp_prop;
        }

        if adapting {
            let gain = (t as f64 + 1.0).powf(-0.6);
            log_scale += gain * (log_alpha.exp() - TARGET_ACCEPTANCE);
            log_scale = log_scale.clamp(-10.0, 10.0);
            moments.push(x);
            if t + 1 >= COV_WARMUP {
                let c = moments.cov();
                if c[0] > 0.0 && c[2] > 0.0 && c[0] * c[2] > c[1] * c[1] {
                    chol = cholesky2(c[0] + ridge, c[1], c[2] + ridge);
                }
            }
        } else {
            if accept {
                accepted += 1;
            }
            draws.push(x);
        }
    }

    let acceptance_rate = accepted as f64 / retained as f64;
    let warning = (!(ACCEPTANCE_WARN_LOW..=ACCEPTANCE_WARN_HIGH).contains(&acceptance_rate)).then(|| {
        format!("acceptance rate {acceptance_rate:.3} outside [{ACCEPTANCE_WARN_LOW}, {ACCEPTANCE_WARN_HIGH}]")
    });
    let ess0 = effective_sample_size(&draws.iter().map(|d| d[0]).collect::<Vec<_>>());
    let ess1 = effective_sample_size(&draws.iter().map(|d| d[1]).collect::<Vec<_>>());

    let estimates = summarize_draws(model, &draws, point);
    Ok(McmcOutput {
        summary: PosteriorSummary {
            estimates,
            point,
            engine: Engine::Mcmc,
            diagnostics: Some(SamplerDiagnostics {
                acceptance_rate,
                effective_draws: ess0.min(ess1),
                retained,
                warning,
            }),
        },
        draws,
    })
}

fn summarize_draws(
    model: &DoseResponseModel,
    draws: &[[f64; 2]],
    point: PointEstimate,
) -> Vec<f64> {
    let link = model.link();
    model
        .log_ratios()
        .iter()
        .map(|&lr| {
            let mut probs: Vec<f64> = draws
                .iter()
                .map(|d| link.inverse(d[0] + d[1].exp() * lr))
                .collect();
            match point {
                PointEstimate::Mean => probs.iter().sum::<f64>() / probs.len() as f64,
                PointEstimate::Median => {
                    probs.sort_by(f64::total_cmp);
                    let n = probs.len();
                    if n % 2 == 1 {
                        probs[n / 2]
                    } else {
                        0.5 * (probs[n / 2 - 1] + probs[n / 2])
                    }
                }
            }
        })
        .collect()
}

/// Effective sample size with Geyer's initial positive sequence truncation.
pub fn effective_sample_size(x: &[f64]) -> f64 {
    let n = x.len();
    if n < 4 {
        return n as f64;
    }
    let mean = x.iter().sum::<f64>() / n as f64;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
    if var <= 0.0 {
        return n as f64;
    }
    let rho = |lag: usize| -> f64 {
        (0..n - lag)
            .map(|i| (x[i] - mean) * (x[i + lag] - mean))
            .sum::<f64>()
            / (n as f64 * var)
    };
    let mut sum = 0.0;
    let mut lag = 0;
    while lag + 1 < n {
        let pair = rho(lag) + rho(lag + 1);
        if pair <= 0.0 {
            break;
        }
        sum += pair;
        lag += 2;
    }
    // sum covers rho_0 = 1 once; tau = 2 * sum - 1
    let tau = (2.0 * sum - 1.0).max(1.0 / n as f64);
    n as f64 / tau
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::DoseGrid;
    use crate::drm::{grid_posterior, CoefficientPrior, GridSpec};
    use crate::link::Link;

    fn model(link: Link) -> DoseResponseModel {
        DoseResponseModel::new(
            link,
            DoseGrid::reference_grid(),
            CoefficientPrior::new(-1.592, 1.371, 0.412, 0.784).unwrap(),
        )
    }

    #[test]
    fn same_seed_same_draws() {
        let m = model(Link::Logit);
        let data = DoseData::new(vec![3, 6, 9, 0, 0, 0], vec![0, 1, 3, 0, 0, 0]).unwrap();
        let cfg = McmcConfig {
            n_iter: 2000,
            n_burn: 500,
            seed: 9,
        };
        let a = mcmc_sample(&m, &data, cfg, PointEstimate::Mean).unwrap();
        let b = mcmc_sample(&m, &data, cfg, PointEstimate::Mean).unwrap();
        assert_eq!(a.draws, b.draws);
        assert_eq!(a.summary, b.summary);
        let c = mcmc_sample(
            &m,
            &data,
            McmcConfig { seed: 10, ..cfg },
            PointEstimate::Mean,
        )
        .unwrap();
        assert_ne!(a.draws, c.draws);
    }

    #[test]
    fn agrees_with_grid() {
        let data = DoseData::new(vec![3, 6, 12, 9, 6, 0], vec![0, 1, 2, 3, 3, 0]).unwrap();
        for link in Link::ALL {
            let m = model(link);
            let mc = mcmc_sample(&m, &data, McmcConfig::default(), PointEstimate::Mean).unwrap();
            let grid = grid_posterior(&m, &data, GridSpec::default(), PointEstimate::Mean).unwrap();
            for (a, b) in mc.summary.estimates.iter().zip(&grid.estimates) {
                assert!((a - b).abs() < 0.02, "{link}: {a} vs {b}");
            }
            let diag = mc.summary.diagnostics.unwrap();
            assert!(diag.warning.is_none(), "{diag:?}");
            assert!(diag.effective_draws > 200.0, "{diag:?}");
        }
    }

    #[test]
    fn rejects_bad_iteration_counts() {
        let m = model(Link::Logit);
        let cfg = McmcConfig {
            n_iter: 500,
            n_burn: 500,
            seed: 1,
        };
        assert!(mcmc_sample(&m, &DoseData::empty(6), cfg, PointEstimate::Mean).is_err());
    }

    #[test]
    fn ess_of_independent_and_sticky_chains() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let iid: Vec<f64> = (0..5000).map(|_| rng.sample(StandardNormal)).collect();
        let ess = effective_sample_size(&iid);
        assert!(ess > 3500.0 && ess < 6500.0, "{ess}");
        let mut ar = vec![0.0f64; 5000];
        for i in 1..ar.len() {
            let e: f64 = rng.sample(StandardNormal);
            ar[i] = 0.9 * ar[i - 1] + e;
        }
        // theoretical n (1 - 0.9) / (1 + 0.9) ~ 263
        let ess = effective_sample_size(&ar);
        assert!(ess > 130.0 && ess < 500.0, "{ess}");
    }
}
