//! Joint maximum likelihood for the center and the symmetric log-concave
//! density, by grid search over the profile criterion
//! `θ ↦ (1/n) Σ ψ̂_θ(X_i − θ) − 1`.

use crate::error::{Error, Result};
use crate::lcmle::{FitConfig, LogConcaveFit};
use crate::symlc::fit_symmetric_logconcave;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub coarse_points: usize,
    pub refine_rounds: usize,
    /// Each refinement round shrinks the search half-width by this factor.
    pub refine_shrink: f64,
    /// Points per refinement round.
    #[serde(default = "default_refine_points")]
    pub refine_points: usize,
    #[serde(default)]
    pub fit: FitConfig,
}

fn default_refine_points() -> usize {
    21
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            coarse_points: 101,
            refine_rounds: 4,
            refine_shrink: 0.1,
            refine_points: default_refine_points(),
            fit: FitConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MleEstimate {
    pub theta: f64,
    /// Symmetric log-density of `X - theta`.
    pub fit: LogConcaveFit,
    pub criterion: f64,
    /// Every `(theta, criterion)` pair visited, in evaluation order.
    pub grid_trace: Vec<(f64, f64)>,
}

/// Profile log-likelihood at `theta`.
pub fn profile_criterion(sample: &[f64], theta: f64) -> Result<f64> {
    profile_criterion_with(sample, theta, &FitConfig::default())
}

pub fn profile_criterion_with(sample: &[f64], theta: f64, cfg: &FitConfig) -> Result<f64> {
    Ok(fit_symmetric_logconcave(sample, theta, cfg)?.criterion_value())
}

fn check_sample(sample: &[f64]) -> Result<(f64, f64)> {
    if sample.is_empty() {
        return Err(Error::EmptySample);
    }
    if sample.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidInput(
            "sample contains non-finite values".into(),
        ));
    }
    let lo = sample.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = sample.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return Err(Error::DegenerateSample);
    }
    Ok((lo, hi))
}

fn linspace(a: f64, b: f64, m: usize) -> Vec<f64> {
    if m == 1 {
        return vec![0.5 * (a + b)];
    }
    (0..m)
        .map(|i| {
            if i == m - 1 {
                b
            } else {
                a + (b - a) * i as f64 / (m - 1) as f64
            }
        })
        .collect()
}

/// Maximizes the profile criterion over `[X_(1), X_(n)]` by a coarse grid
/// followed by shrinking grids around the incumbent. Ties go to the smaller
/// `theta`.
pub fn fit_full_mle(sample: &[f64], grid: &GridConfig) -> Result<MleEstimate> {
    let (lo, hi) = check_sample(sample)?;
    if grid.coarse_points < 3 {
        return Err(Error::InvalidInput(
            "coarse grid needs at least 3 points".into(),
        ));
    }
    if !(grid.refine_shrink > 0.0 && grid.refine_shrink < 1.0) {
        return Err(Error::InvalidInput(
            "refine_shrink must lie in (0, 1)".into(),
        ));
    }
    let eval = |thetas: &[f64]| -> Result<Vec<(f64, f64)>> {
        thetas
            .par_iter()
            .map(|&t| profile_criterion_with(sample, t, &grid.fit).map(|c| (t, c)))
            .collect()
    };
    let better = |cand: (f64, f64), best: (f64, f64)| {
        cand.1 > best.1 || (cand.1 == best.1 && cand.0 < best.0)
    };
    let mut trace = eval(&linspace(lo, hi, grid.coarse_points))?;
    let mut best = trace[0];
    for &p in &trace[1..] {
        if better(p, best) {
            best = p;
        }
    }
    let mut half = 0.5 * (hi - lo);
    for _ in 0..grid.refine_rounds {
        half *= grid.refine_shrink;
        let a = (best.0 - half).max(lo);
        let b = (best.0 + half).min(hi);
        let round = eval(&linspace(a, b, grid.refine_points.max(2)))?;
        for &p in &round {
            if better(p, best) {
                best = p;
            }
        }
        trace.extend(round);
    }
    let fit = fit_symmetric_logconcave(sample, best.0, &grid.fit)?;
    Ok(MleEstimate {
        theta: best.0,
        criterion: fit.criterion_value(),
        fit,
        grid_trace: trace,
    })
}
