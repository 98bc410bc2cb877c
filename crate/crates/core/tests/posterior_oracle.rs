//! Independent quadrature check of the grid posterior: composite Simpson on
//! a wider, finer lattice, with the likelihood and prior written out from
//! scratch.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{Continuous, Normal};

use dosefind::drm::grid_posterior;
use dosefind::{
    CoefficientPrior, DoseData, DoseGrid, DoseResponseModel, GridSpec, Link, PointEstimate,
};

const POINTS: usize = 801;
const HALF_WIDTH: f64 = 8.0;

fn simpson_weights(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| match i {
            0 => 1.0,
            i if i == n - 1 => 1.0,
            i if i % 2 == 1 => 4.0,
            _ => 2.0,
        })
        .collect()
}

fn axis(mean: f64, sd: f64) -> Vec<f64> {
    let step = 2.0 * HALF_WIDTH * sd / (POINTS - 1) as f64;
    (0..POINTS)
        .map(|i| mean - HALF_WIDTH * sd + step * i as f64)
        .collect()
}

fn oracle_means(
    link: Link,
    grid: &DoseGrid,
    prior: &CoefficientPrior,
    n: &[u32],
    m: &[u32],
) -> Vec<f64> {
    let b0 = axis(prior.gamma0, prior.var0.sqrt());
    let b1 = axis(prior.gamma1, prior.var1.sqrt());
    let p0 = Normal::new(prior.gamma0, prior.var0.sqrt()).unwrap();
    let p1 = Normal::new(prior.gamma1, prior.var1.sqrt()).unwrap();
    let x: Vec<f64> = grid
        .doses()
        .iter()
        .map(|d| (d / grid.reference_dose()).ln())
        .collect();
    let w = simpson_weights(POINTS);

    let probs = |a: f64, b: f64| -> Vec<f64> {
        x.iter()
            .map(|xj| link.inverse(a + b.exp() * xj).clamp(1e-12, 1.0 - 1e-12))
            .collect()
    };
    let mut logs = vec![0.0; POINTS * POINTS];
    let mut max = f64::NEG_INFINITY;
    for (i, &b) in b1.iter().enumerate() {
        for (k, &a) in b0.iter().enumerate() {
            let p = probs(a, b);
            let mut l = p0.ln_pdf(a) + p1.ln_pdf(b);
            for j in 0..p.len() {
                l += m[j] as f64 * p[j].ln() + (n[j] - m[j]) as f64 * (1.0 - p[j]).ln();
            }
            logs[i * POINTS + k] = l;
            max = max.max(l);
        }
    }
    let mut total = 0.0;
    let mut acc = vec![0.0; x.len()];
    for (i, &b) in b1.iter().enumerate() {
        for (k, &a) in b0.iter().enumerate() {
            let wt = w[i] * w[k] * (logs[i * POINTS + k] - max).exp();
            if wt == 0.0 {
                continue;
            }
            total += wt;
            for (s, p) in acc.iter_mut().zip(probs(a, b)) {
                *s += wt * p;
            }
        }
    }
    acc.into_iter().map(|s| s / total).collect()
}

#[test]
fn grid_means_match_simpson_oracle() {
    let priors = [
        (
            Link::Logit,
            CoefficientPrior::new(-1.592, 1.371, 0.412, 0.784).unwrap(),
        ),
        (
            Link::LogLog,
            CoefficientPrior::new(-0.231, 0.847, 0.068, 0.544).unwrap(),
        ),
        (
            Link::CLogLog,
            CoefficientPrior::new(-1.549, 0.943, 0.142, 0.743).unwrap(),
        ),
    ];
    let grid = DoseGrid::reference_grid();
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let mut worst: f64 = 0.0;
    for case in 0..20 {
        let (link, prior) = priors[case % 3];
        let n: Vec<u32> = (0..6).map(|_| 3 * rng.random_range(0..=4)).collect();
        let m: Vec<u32> = n.iter().map(|&nj| rng.random_range(0..=nj)).collect();
        let model = DoseResponseModel::new(link, grid.clone(), prior);
        let data = DoseData::new(n.clone(), m.clone()).unwrap();
        let fast = grid_posterior(&model, &data, GridSpec::default(), PointEstimate::Mean).unwrap();
        let slow = oracle_means(link, &grid, &prior, &n, &m);
        for (a, b) in fast.estimates.iter().zip(&slow) {
            worst = worst.max((a - b).abs());
        }
    }
    assert!(worst < 0.002, "max deviation {worst}");
}
