//! One-step estimators of the center of symmetry.
//!
//! Given a preliminary estimate `θ̄` and an estimate `ψ̃'` of the score of the
//! centered density, the (possibly truncated) one-step estimator is
//!
//! ```text
//! θ̃ = θ̄ − Σ_{|X_i−θ̄| ≤ ξ} ψ̃'(X_i − θ̄) / (n Î)
//! ```
//!
//! where `ξ` is the upper `η` quantile of the estimated density (`ξ` covers
//! the whole support when `η = 0`) and `Î` estimates the Fisher information
//! over the same window.

use crate::error::{Error, Result};
use crate::lcmle::FitConfig;
use crate::normal;
use crate::quad::{integrate_with_breaks, QuadConfig};
use crate::symlc::{score_estimate, ScoreKind, SymmetricDensity};
use serde::{Deserialize, Serialize, Serializer};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "fraction")]
pub enum Preliminary {
    Mean,
    Median,
    TrimmedMean(f64),
}

impl std::str::FromStr for Preliminary {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        match lower.as_str() {
            "mean" => Ok(Preliminary::Mean),
            "median" => Ok(Preliminary::Median),
            _ => {
                let frac = lower
                    .strip_prefix("trimmed:")
                    .or_else(|| lower.strip_prefix("trimmed-mean:"))
                    .and_then(|f| f.parse::<f64>().ok())
                    .ok_or_else(|| {
                        Error::InvalidInput(format!("unknown preliminary estimator '{s}'"))
                    })?;
                if !(frac > 0.0 && frac < 0.5) {
                    return Err(Error::InvalidInput(format!(
                        "trim fraction {frac} outside (0, 0.5)"
                    )));
                }
                Ok(Preliminary::TrimmedMean(frac))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InfoVariant {
    /// Average of squared scores over the observations in the window.
    Empirical,
    /// Integral of the squared score against the estimated density.
    Smoothed,
}

impl std::str::FromStr for InfoVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "empirical" => Ok(InfoVariant::Empirical),
            "smoothed" => Ok(InfoVariant::Smoothed),
            other => Err(Error::InvalidInput(format!(
                "unknown information variant '{other}'"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OneStepConfig {
    pub preliminary: Preliminary,
    /// Tail mass cut from each side; zero gives the untruncated estimator.
    pub eta: f64,
    pub info_variant: InfoVariant,
    pub score_kind: ScoreKind,
    #[serde(default)]
    pub fit: FitConfig,
}

impl Default for OneStepConfig {
    fn default() -> Self {
        Self {
            preliminary: Preliminary::Mean,
            eta: 0.0,
            info_variant: InfoVariant::Empirical,
            score_kind: ScoreKind::SymSmoothed,
            fit: FitConfig::default(),
        }
    }
}

impl OneStepConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta >= 0.0 && self.eta < 0.5) {
            return Err(Error::InvalidInput(format!(
                "eta {} outside [0, 0.5)",
                self.eta
            )));
        }
        if let Preliminary::TrimmedMean(f) = self.preliminary {
            if !(f > 0.0 && f < 0.5) {
                return Err(Error::InvalidInput(format!(
                    "trim fraction {f} outside (0, 0.5)"
                )));
            }
        }
        Ok(())
    }
}

/// Truncation level `η = C n^{-2p/5}` with `p` the Hellinger rate exponent
/// of the score estimator: ¼ for the partial MLE, 2/5 for the geometric
/// symmetrization and 1/5 for the smoothed symmetrization.
pub fn eta_for(kind: ScoreKind, n: usize, c: f64) -> f64 {
    let p = match kind {
        ScoreKind::PartialMle => 0.25,
        ScoreKind::GeoSym => 0.4,
        ScoreKind::SymSmoothed => 0.2,
    };
    c * (n as f64).powf(-2.0 * p / 5.0)
}

/// A point estimate with its information estimate and Wald interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocationEstimate {
    pub theta: f64,
    pub preliminary_theta: f64,
    pub fisher_info: f64,
    pub eta: f64,
    /// Half-width of the score window; infinite when untruncated over an
    /// unbounded support.
    #[serde(serialize_with = "ser_extended", deserialize_with = "de_extended")]
    pub xi: f64,
    pub n: usize,
    pub ci_low: f64,
    pub ci_high: f64,
    pub level: f64,
}

fn ser_extended<S: Serializer>(x: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if x.is_infinite() {
        s.serialize_str(if *x > 0.0 { "inf" } else { "-inf" })
    } else {
        s.serialize_f64(*x)
    }
}

fn de_extended<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Ext {
        Num(f64),
        Text(String),
    }
    match Ext::deserialize(d)? {
        Ext::Num(x) => Ok(x),
        Ext::Text(t) => match t.as_str() {
            "inf" => Ok(f64::INFINITY),
            "-inf" => Ok(f64::NEG_INFINITY),
            other => Err(serde::de::Error::custom(format!(
                "expected a number or \"inf\", got {other}"
            ))),
        },
    }
}

fn sorted(sample: &[f64]) -> Vec<f64> {
    let mut v = sample.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

pub(crate) fn median(sample: &[f64]) -> f64 {
    let v = sorted(sample);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

pub(crate) fn mean(sample: &[f64]) -> f64 {
    sample.iter().sum::<f64>() / sample.len() as f64
}

/// Preliminary estimate of the center.
pub fn preliminary(sample: &[f64], kind: Preliminary) -> Result<f64> {
    if sample.is_empty() {
        return Err(Error::EmptySample);
    }
    if sample.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidInput(
            "sample contains non-finite values".into(),
        ));
    }
    Ok(match kind {
        Preliminary::Mean => mean(sample),
        Preliminary::Median => median(sample),
        Preliminary::TrimmedMean(f) => {
            let v = sorted(sample);
            let cut = (f * v.len() as f64).floor() as usize;
            if 2 * cut >= v.len() {
                return Err(Error::InvalidInput(format!(
                    "trim fraction {f} leaves no observations"
                )));
            }
            mean(&v[cut..v.len() - cut])
        }
    })
}

/// `ξ`, the upper `eta` quantile of the symmetric estimate. The lower cut is
/// `-ξ` by symmetry.
pub fn truncation_quantile<D: SymmetricDensity + ?Sized>(estimate: &D, eta: f64) -> Result<f64> {
    if !(eta > 0.0 && eta < 0.5) {
        return Err(Error::QuantileOutOfRange(1.0 - eta));
    }
    Ok(estimate.upper_quantile(eta)?.max(0.0))
}

// ξ for a level, with η = 0 meaning the whole support
fn window_radius<D: SymmetricDensity + ?Sized>(estimate: &D, eta: f64) -> Result<f64> {
    if eta == 0.0 {
        Ok(estimate.support_radius())
    } else {
        truncation_quantile(estimate, eta)
    }
}

const INFO_QUAD: QuadConfig = QuadConfig {
    abs_tol: 1e-13,
    rel_tol: 1e-10,
    max_subdivisions: 4000,
};

// Î given the window half-width
fn info_in_window<D: SymmetricDensity + ?Sized>(
    sample: &[f64],
    theta_bar: f64,
    estimate: &D,
    xi: f64,
    variant: InfoVariant,
) -> Result<f64> {
    let info = match variant {
        InfoVariant::Empirical => {
            let n = sample.len() as f64;
            sample
                .iter()
                .map(|&x| x - theta_bar)
                .filter(|z| z.abs() <= xi)
                .map(|z| estimate.score(z).powi(2))
                .sum::<f64>()
                / n
        }
        InfoVariant::Smoothed => {
            // the integrand is even, so integrate over [0, ξ] and double
            let top = xi.min(estimate.effective_radius());
            let f = |z: f64| {
                let s = estimate.score(z);
                if s == 0.0 {
                    0.0
                } else {
                    s * s * estimate.density(z)
                }
            };
            2.0 * integrate_with_breaks(f, 0.0, top, &estimate.breakpoints(), &INFO_QUAD)?
        }
    };
    if !(info > 0.0) {
        return Err(Error::ZeroInformation);
    }
    Ok(info)
}

/// Truncated Fisher information estimate. `eta = 0` uses the whole support.
pub fn fisher_info_estimate<D: SymmetricDensity + ?Sized>(
    sample: &[f64],
    theta_bar: f64,
    estimate: &D,
    eta: f64,
    variant: InfoVariant,
) -> Result<f64> {
    if sample.is_empty() {
        return Err(Error::EmptySample);
    }
    let xi = window_radius(estimate, eta)?;
    info_in_window(sample, theta_bar, estimate, xi, variant)
}

/// Wald interval `θ ± z_{(1+level)/2} / √(n I)`.
pub fn confidence_interval(theta: f64, info: f64, n: usize, level: f64) -> Result<(f64, f64)> {
    if !(info > 0.0) {
        return Err(Error::ZeroInformation);
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidInput(format!("level {level} outside (0, 1)")));
    }
    let half = normal::quantile(0.5 * (1.0 + level)) / (n as f64 * info).sqrt();
    Ok((theta - half, theta + half))
}

/// One-step correction of `theta_bar` with a given centered density estimate.
pub fn onestep_with<D: SymmetricDensity + ?Sized>(
    sample: &[f64],
    theta_bar: f64,
    estimate: &D,
    eta: f64,
    variant: InfoVariant,
    level: f64,
) -> Result<LocationEstimate> {
    if !(eta >= 0.0 && eta < 0.5) {
        return Err(Error::InvalidInput(format!("eta {eta} outside [0, 0.5)")));
    }
    if sample.is_empty() {
        return Err(Error::EmptySample);
    }
    let xi = window_radius(estimate, eta)?;
    let info = info_in_window(sample, theta_bar, estimate, xi, variant)?;
    let n = sample.len();
    let total: f64 = sample
        .iter()
        .map(|&x| x - theta_bar)
        .filter(|z| z.abs() <= xi)
        .map(|z| estimate.score(z))
        .sum();
    let theta = theta_bar - total / (n as f64 * info);
    let (ci_low, ci_high) = confidence_interval(theta, info, n, level)?;
    Ok(LocationEstimate {
        theta,
        preliminary_theta: theta_bar,
        fisher_info: info,
        eta,
        xi,
        n,
        ci_low,
        ci_high,
        level,
    })
}

/// The one-step estimator with the score estimator named in `cfg`.
pub fn onestep_estimate(
    sample: &[f64],
    cfg: &OneStepConfig,
    level: f64,
) -> Result<LocationEstimate> {
    cfg.validate()?;
    if sample.len() < 2 {
        return Err(Error::DegenerateSample);
    }
    let theta_bar = preliminary(sample, cfg.preliminary)?;
    let estimate = score_estimate(cfg.score_kind, sample, theta_bar, &cfg.fit)?;
    onestep_with(
        sample,
        theta_bar,
        &estimate,
        cfg.eta,
        cfg.info_variant,
        level,
    )
}
