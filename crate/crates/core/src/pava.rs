//! Conventional terminal estimator: Beta(0.05, 0.05) smoothed per-dose
//! estimates made monotone by variance-weighted pool-adjacent-violators.

use serde::{Deserialize, Serialize};

use crate::design::{DoseLevel, TrialDesign};
use crate::trial::TrialState;

/// Tie-break increment added per admissible position after pooling.
pub const TIE_BREAK_EPS: f64 = 1.0e-10;

/// Posterior mean of the DLT probability under a Beta(0.05, 0.05) prior.
pub fn posterior_point(n: u32, m: u32) -> f64 {
    (f64::from(m) + 0.05) / (f64::from(n) + 0.1)
}

/// Posterior variance matching [`posterior_point`].
pub fn posterior_var(n: u32, m: u32) -> f64 {
    let (n, m) = (f64::from(n), f64::from(m));
    (m + 0.05) * (n - m + 0.05) / ((n + 0.1).powi(2) * (n + 0.1 + 1.0))
}

/// Weighted isotonic (nondecreasing) least-squares fit.
///
/// Adjacent violating blocks are pooled into their weighted mean until the
/// sequence is monotone. Block weights are sums of the original weights.
pub fn pava_fit(y: &[f64], weights: &[f64]) -> Vec<f64> {
    assert_eq!(
        y.len(),
        weights.len(),
        "values and weights differ in length"
    );
    // (value, weight, members)
    let mut blocks: Vec<(f64, f64, usize)> = Vec::with_capacity(y.len());
    for (&value, &weight) in y.iter().zip(weights) {
        blocks.push((value, weight, 1));
        while blocks.len() > 1 {
            let (v2, w2, c2) = blocks[blocks.len() - 1];
            let (v1, w1, c1) = blocks[blocks.len() - 2];
            if v1 <= v2 {
                break;
            }
            blocks.pop();
            let w = w1 + w2;
            *blocks.last_mut().unwrap() = ((v1 * w1 + v2 * w2) / w, w, c1 + c2);
        }
    }
    blocks
        .into_iter()
        .flat_map(|(value, _, count)| std::iter::repeat_n(value, count))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsotonicFit {
    /// Raw smoothed estimates, `None` where no patients were treated.
    pub y_hat: Vec<Option<f64>>,
    pub var: Vec<Option<f64>>,
    /// Final monotone estimates with the tie-break increment; defined on
    /// admissible doses only.
    pub p_hat: Vec<Option<f64>>,
    pub admissible: Vec<bool>,
}

/// Fits the isotonic estimates over the admissible doses of a finished trial.
pub fn isotonic_fit(state: &TrialState, admissible: &[bool]) -> IsotonicFit {
    let k = state.n_doses();
    let y_hat: Vec<Option<f64>> = (0..k)
        .map(|j| (state.n[j] > 0).then(|| posterior_point(state.n[j], state.m[j])))
        .collect();
    let var: Vec<Option<f64>> = (0..k)
        .map(|j| (state.n[j] > 0).then(|| posterior_var(state.n[j], state.m[j])))
        .collect();

    let idx: Vec<usize> = (0..k).filter(|&j| admissible[j]).collect();
    let y: Vec<f64> = idx.iter().map(|&j| y_hat[j].unwrap()).collect();
    let w: Vec<f64> = idx.iter().map(|&j| 1.0 / var[j].unwrap()).collect();
    let z = pava_fit(&y, &w);

    let mut p_hat = vec![None; k];
    for (pos, (&j, z)) in idx.iter().zip(z).enumerate() {
        p_hat[j] = Some(z + (pos + 1) as f64 * TIE_BREAK_EPS);
    }
    IsotonicFit {
        y_hat,
        var,
        p_hat,
        admissible: admissible.to_vec(),
    }
}

/// Index of the admissible estimate closest to `phi`; ties go to the lower
/// dose. `None` when nothing is admissible.
pub fn closest_to_target(
    estimates: &[Option<f64>],
    admissible: &[bool],
    phi: f64,
) -> Option<DoseLevel> {
    let mut best: Option<(usize, f64)> = None;
    for (j, est) in estimates.iter().enumerate() {
        if !admissible[j] {
            continue;
        }
        let Some(p) = est else { continue };
        let dist = (p - phi).abs();
        if best.is_none_or(|(_, d)| dist < d) {
            best = Some((j, dist));
        }
    }
    best.map(|(j, _)| DoseLevel::from_index(j))
}

/// PAVA-based MTD selection for a finished trial.
pub fn select_mtd_pava(
    state: &TrialState,
    design: &TrialDesign,
) -> (IsotonicFit, Option<DoseLevel>) {
    let admissible = state.admissible(design);
    let fit = isotonic_fit(state, &admissible);
    let mtd = closest_to_target(&fit.p_hat, &fit.admissible, design.phi());
    (fit, mtd)
}
