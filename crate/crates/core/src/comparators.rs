//! Classical adaptive location estimators used as benchmarks: Stone's
//! kernel one-step estimator and Beran's rank estimator with a Fourier score
//! estimate, plus the tabulated tuning constants for both.

use crate::error::{Error, Result};
use crate::onestep::{confidence_interval, median, LocationEstimate};
use crate::refdists::Family;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::f64::consts::{PI, SQRT_2};

#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct StoneConfig {
    /// Truncation multiplier: scores are used for `|x - median| <= d * MAD`.
    pub d: f64,
    /// Bandwidth multiplier: the kernel bandwidth is `t * MAD`.
    pub t: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct BeranConfig {
    pub basis_count: usize,
    /// Half-width of the difference quotient, in units of the MAD.
    pub rho: f64,
}

/// Median absolute deviation from the median, unscaled.
pub fn mad(sample: &[f64]) -> f64 {
    let m = median(sample);
    let dev: Vec<f64> = sample.iter().map(|x| (x - m).abs()).collect();
    median(&dev)
}

fn check(sample: &[f64]) -> Result<()> {
    if sample.len() < 2 {
        return Err(Error::DegenerateSample);
    }
    if sample.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidInput(
            "sample contains non-finite values".into(),
        ));
    }
    Ok(())
}

/// Gaussian kernel estimate over the residuals and their negations.
#[derive(Debug, Clone)]
pub struct SymmetrizedKernel {
    pooled: Vec<f64>,
    bandwidth: f64,
}

impl SymmetrizedKernel {
    pub fn new(residuals: &[f64], bandwidth: f64) -> Self {
        let mut pooled: Vec<f64> = residuals.iter().flat_map(|&r| [r, -r]).collect();
        pooled.sort_by(f64::total_cmp);
        Self { pooled, bandwidth }
    }

    /// Log-density and score at `x`.
    pub fn log_density_and_score(&self, x: f64) -> (f64, f64) {
        // evaluate at |x| so the score is exactly odd
        let a = x.abs();
        let h = self.bandwidth;
        let expo: Vec<f64> = self
            .pooled
            .iter()
            .map(|p| {
                let u = (a - p) / h;
                -0.5 * u * u
            })
            .collect();
        let top = expo.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        let mut lever = 0.0;
        for (e, p) in expo.iter().zip(&self.pooled) {
            let w = (e - top).exp();
            sum += w;
            lever += w * (p - a);
        }
        let n = self.pooled.len() as f64;
        let log_f = top + sum.ln() - n.ln() - h.ln() - 0.5 * (2.0 * PI).ln();
        let score = lever / (sum * h * h);
        (log_f, if x < 0.0 { -score } else { score })
    }

    pub fn density(&self, x: f64) -> f64 {
        self.log_density_and_score(x).0.exp()
    }

    pub fn score(&self, x: f64) -> f64 {
        self.log_density_and_score(x).1
    }
}

/// Stone's estimator: the median corrected by one step with the symmetrized
/// Gaussian-kernel score, truncated at `d * MAD`.
pub fn stone_estimate(sample: &[f64], cfg: &StoneConfig, level: f64) -> Result<LocationEstimate> {
    check(sample)?;
    if !(cfg.d > 0.0 && cfg.t > 0.0) {
        return Err(Error::InvalidInput(
            "Stone tuning constants must be positive".into(),
        ));
    }
    let m = median(sample);
    let s = mad(sample);
    if !(s > 0.0) {
        return Err(Error::ZeroMad);
    }
    let resid: Vec<f64> = sample.iter().map(|x| x - m).collect();
    let kernel = SymmetrizedKernel::new(&resid, cfg.t * s);
    let cut = cfg.d * s;
    let n = sample.len() as f64;
    let mut total = 0.0;
    let mut info = 0.0;
    for &r in resid.iter().filter(|r| r.abs() <= cut) {
        let sc = kernel.score(r);
        total += sc;
        info += sc * sc;
    }
    info /= n;
    if !(info > 0.0) {
        return Err(Error::ZeroInformation);
    }
    let theta = m - total / (n * info);
    let (ci_low, ci_high) = confidence_interval(theta, info, sample.len(), level)?;
    Ok(LocationEstimate {
        theta,
        preliminary_theta: m,
        fisher_info: info,
        eta: 0.0,
        xi: cut,
        n: sample.len(),
        ci_low,
        ci_high,
        level,
    })
}

// Residuals closer than this many MADs count as tied, so that rounding in
// `x - median` cannot reorder values that are equal in exact arithmetic.
const TIE_TOLERANCE: f64 = 1e-10;

// midranks (1-based) of `v`, with runs of gaps at most `tol` tied
fn midranks(v: &[f64], tol: f64) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut ranks = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] - v[idx[j]] <= tol {
            j += 1;
        }
        let r = 0.5 * ((i + 1) + (j + 1)) as f64;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Estimated Fourier coefficients `c_k`, `k = 1..=basis_count`, of the score
/// on the probability scale in the basis `√2 sin(2πku)`. Residuals within
/// `tie` of each other share a midrank.
pub fn beran_coefficients(residuals: &[f64], basis_count: usize, delta: f64, tie: f64) -> Vec<f64> {
    let mut pooled: Vec<f64> = residuals.iter().flat_map(|&r| [r, -r]).collect();
    pooled.sort_by(f64::total_cmp);
    let big_n = pooled.len();
    let nf = big_n as f64;
    let ranks = midranks(&pooled, tie);
    // difference-quotient density at each pooled point
    let dens: Vec<f64> = pooled
        .iter()
        .map(|&z| {
            let lo = pooled.partition_point(|&p| p < z - delta);
            let hi = pooled.partition_point(|&p| p <= z + delta);
            (hi - lo) as f64 / (2.0 * delta * nf)
        })
        .collect();
    (1..=basis_count)
        .map(|k| {
            let w = 2.0 * PI * k as f64;
            // c_k = ∫ ψ e_k(F) f = -E[e_k'(F(X)) f(X)]
            let acc: f64 = ranks
                .iter()
                .zip(&dens)
                .map(|(&r, &f)| SQRT_2 * w * (w * r / (nf + 1.0)).cos() * f)
                .sum();
            -acc / nf
        })
        .collect()
}

/// Beran's estimator: the median corrected by the rank statistic built from
/// the Fourier score estimate.
pub fn beran_estimate(sample: &[f64], cfg: &BeranConfig, level: f64) -> Result<LocationEstimate> {
    check(sample)?;
    if cfg.basis_count == 0 || !(cfg.rho > 0.0) {
        return Err(Error::InvalidInput(
            "Beran needs at least one basis function and a positive rho".into(),
        ));
    }
    let m = median(sample);
    let s = mad(sample);
    if !(s > 0.0) {
        return Err(Error::DegenerateSample);
    }
    let resid: Vec<f64> = sample.iter().map(|x| x - m).collect();
    let tie = TIE_TOLERANCE * s;
    let coef = beran_coefficients(&resid, cfg.basis_count, cfg.rho * s, tie);
    let info: f64 = coef.iter().map(|c| c * c).sum();
    if !(info > 0.0) {
        return Err(Error::ZeroInformation);
    }
    let n = sample.len();
    let abs: Vec<f64> = resid.iter().map(|r| r.abs()).collect();
    let ranks = midranks(&abs, tie);
    let score_at = |u: f64| -> f64 {
        coef.iter()
            .enumerate()
            .map(|(k, c)| c * SQRT_2 * (2.0 * PI * (k + 1) as f64 * u).sin())
            .sum()
    };
    let mut total = 0.0;
    for (r, rank) in resid.iter().zip(&ranks) {
        if r.abs() <= tie {
            continue;
        }
        let u = 0.5 * (1.0 + rank / (n as f64 + 1.0));
        total += r.signum() * score_at(u);
    }
    let theta = m - total / (n as f64 * info);
    let (ci_low, ci_high) = confidence_interval(theta, info, n, level)?;
    Ok(LocationEstimate {
        theta,
        preliminary_theta: m,
        fisher_info: info,
        eta: 0.0,
        xi: f64::INFINITY,
        n,
        ci_low,
        ci_high,
        level,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Stone,
    Beran,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Optimal,
    NonOptimal,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Stone => "stone",
            Method::Beran => "beran",
        })
    }
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Regime::Optimal => "optimal",
            Regime::NonOptimal => "non_optimal",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TunedConfig {
    Stone(StoneConfig),
    Beran(BeranConfig),
}

type Nested = BTreeMap<Method, BTreeMap<Regime, BTreeMap<String, BTreeMap<String, (f64, f64)>>>>;

/// Tuning constants indexed by method, regime, sample size and family.
#[derive(Debug, Clone, PartialEq)]
pub struct TuningTable {
    entries: Nested,
}

const BUILTIN: &str = include_str!("../assets/tuning.json");

impl TuningTable {
    /// The shipped table of grid-searched constants for sample sizes 40,
    /// 100, 200 and 500.
    pub fn builtin() -> Self {
        Self::from_json(BUILTIN).expect("bundled tuning table parses")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let entries: Nested = serde_json::from_str(text)
            .map_err(|e| Error::InvalidInput(format!("tuning table: {e}")))?;
        Ok(Self { entries })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.entries).expect("tuning table serializes")
    }

    /// Sample sizes with entries for the given method and regime.
    pub fn sample_sizes(&self, method: Method, regime: Regime) -> Vec<usize> {
        let mut v: Vec<usize> = self
            .entries
            .get(&method)
            .and_then(|m| m.get(&regime))
            .map(|r| r.keys().filter_map(|k| k.parse().ok()).collect())
            .unwrap_or_default();
        v.sort_unstable();
        v
    }

    /// The tabulated sample size closest to `n`; ties go to the smaller size.
    pub fn nearest_n(&self, method: Method, regime: Regime, n: usize) -> Option<usize> {
        self.sample_sizes(method, regime)
            .into_iter()
            .min_by_key(|&m| (m.abs_diff(n), m))
    }

    /// Raw tabulated pair.
    pub fn pair(
        &self,
        method: Method,
        family: Family,
        n: usize,
        regime: Regime,
    ) -> Result<(f64, f64)> {
        let key = format!("{method}/{regime}/n={n}/{family}");
        self.entries
            .get(&method)
            .and_then(|m| m.get(&regime))
            .and_then(|r| r.get(&n.to_string()))
            .and_then(|row| row.get(&family.to_string()))
            .copied()
            .ok_or(Error::MissingEntry(key))
    }
}

/// Looks up the exact entry for `(method, family, n, regime)`.
pub fn tuning_lookup(
    table: &TuningTable,
    method: Method,
    family: Family,
    n: usize,
    regime: Regime,
) -> Result<TunedConfig> {
    let (a, b) = table.pair(method, family, n, regime)?;
    Ok(match method {
        Method::Stone => TunedConfig::Stone(StoneConfig { d: a, t: b }),
        Method::Beran => TunedConfig::Beran(BeranConfig {
            basis_count: a as usize,
            rho: b,
        }),
    })
}
