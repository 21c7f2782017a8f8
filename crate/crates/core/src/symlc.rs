//! Symmetric density and score estimates built on the log-concave MLE.
//!
//! Three estimators of the centered density `g` are provided, all evaluated
//! at `z = x - center`:
//!
//! * [`partial_mle`]: the symmetric log-concave MLE of the centered data,
//!   computed as the ordinary MLE of the reflected sample `{±(X_i - θ)}`.
//! * [`geo_sym`]: the normalized geometric mean `C (f̂(θ+z) f̂(θ-z))^{1/2}` of
//!   the unconstrained MLE `f̂`.
//! * [`sym_smoothed`]: the symmetrized Gaussian smoothing of `f̂`,
//!   `½ (f̂_sm(θ+z) + f̂_sm(θ-z))`.

use crate::error::{Error, Result};
use crate::lcmle::{
    fit_logconcave, fit_weighted_logconcave, Density, FitConfig, LogConcaveFit, WeightedSample,
};
use crate::normal;
use crate::quad::{integrate_with_breaks, QuadConfig};
use serde::{Deserialize, Serialize};

/// Distance in bandwidths beyond which the smoothed density is treated as zero.
const GAUSS_CUTOFF: f64 = 40.0;

// relative tolerance for tail integrals of smooth densities
const TAIL_QUAD: QuadConfig = QuadConfig {
    abs_tol: 0.0,
    rel_tol: 1e-11,
    max_subdivisions: 4000,
};

/// A density symmetric about zero with a (right-derivative) score.
pub trait SymmetricDensity {
    fn density(&self, z: f64) -> f64;
    fn log_density(&self, z: f64) -> f64;
    fn score(&self, z: f64) -> f64;
    /// Half-width of the support; infinite when the density is positive
    /// everywhere.
    fn support_radius(&self) -> f64;
    /// A finite radius beyond which the remaining mass is negligible.
    fn effective_radius(&self) -> f64 {
        self.support_radius()
    }
    /// Non-negative points where the density or score may be non-smooth.
    fn breakpoints(&self) -> Vec<f64> {
        Vec::new()
    }
    /// `P(Z > z)`.
    fn upper_tail(&self, z: f64) -> Result<f64>;
    /// The `z` with `upper_tail(z) = tail`; non-negative for `tail <= ½`.
    fn upper_quantile(&self, tail: f64) -> Result<f64> {
        invert_upper_tail(self, tail)
    }
}

pub(crate) fn invert_upper_tail<D: SymmetricDensity + ?Sized>(d: &D, tail: f64) -> Result<f64> {
    if !(tail > 0.0 && tail < 1.0) {
        return Err(Error::QuantileOutOfRange(1.0 - tail));
    }
    if tail > 0.5 {
        return invert_upper_tail(d, 1.0 - tail).map(|z| -z);
    }
    if tail == 0.5 {
        return Ok(0.0);
    }
    let (mut lo, mut hi) = (0.0, d.effective_radius());
    let mut z = 0.5 * (lo + hi);
    for _ in 0..200 {
        let gap = d.upper_tail(z)? - tail;
        if gap == 0.0 {
            return Ok(z);
        }
        if gap > 0.0 {
            lo = z;
        } else {
            hi = z;
        }
        let dens = d.density(z);
        let newton = z + gap / dens;
        let next = if dens > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if (next - z).abs() <= 1e-15 * z.abs().max(1e-300) || hi - lo <= 4.0 * f64::EPSILON * hi {
            return Ok(next);
        }
        z = next;
    }
    Ok(z)
}

/// The reflected sample `{±(x_i - θ)}` with weight `1/(2n)` on each point.
pub fn reflect_sample(sample: &[f64], theta: f64) -> Result<WeightedSample> {
    if sample.is_empty() {
        return Err(Error::EmptySample);
    }
    let mut points = Vec::with_capacity(2 * sample.len());
    for &x in sample {
        let d = x - theta;
        points.push(d);
        points.push(-d);
    }
    WeightedSample::from_observations(&points)
}

/// Symmetric log-concave MLE of `sample - theta`, returned as a log-density
/// symmetric about zero.
pub fn fit_symmetric_logconcave(
    sample: &[f64],
    theta: f64,
    cfg: &FitConfig,
) -> Result<LogConcaveFit> {
    let reflected = reflect_sample(sample, theta)?;
    if reflected.len() < 2 {
        return Err(Error::DegenerateSample);
    }
    let raw = fit_weighted_logconcave(&reflected, cfg)?;
    // average φ(t) and φ(-t) so the result is symmetric to the last bit
    let mut half: Vec<f64> = raw.knots().iter().map(|k| k.abs()).collect();
    half.push(0.0);
    half.sort_by(f64::total_cmp);
    half.dedup();
    let vals: Vec<f64> = half
        .iter()
        .map(|&t| 0.5 * (raw.log_density(t) + raw.log_density(-t)))
        .collect();
    let fit = mirror_half(half, vals)?;
    let n = sample.len() as f64;
    let data: f64 = sample
        .iter()
        .map(|&x| fit.log_density(x - theta))
        .sum::<f64>()
        / n;
    Ok(fit.with_criterion(data - 1.0))
}

// Builds an even piecewise-linear log-density from its values on
// 0 = t_0 < t_1 < ... < t_m = a, dropping knots without a kink and
// normalizing to unit mass.
fn mirror_half(mut t: Vec<f64>, mut v: Vec<f64>) -> Result<LogConcaveFit> {
    debug_assert!(t[0] == 0.0 && t.len() >= 2);
    let slope = |t: &[f64], v: &[f64], i: usize| (v[i + 1] - v[i]) / (t[i + 1] - t[i]);
    // interior knots first, from the right
    let mut i = t.len() - 2;
    while i >= 1 {
        let (l, r) = (slope(&t, &v, i - 1), slope(&t, &v, i));
        if l - r <= 1e-10 * l.abs().max(r.abs()).max(1.0) {
            t.remove(i);
            v.remove(i);
        }
        i -= 1;
    }
    // the kink at zero is -2 times the first slope
    let keep_zero = -2.0 * slope(&t, &v, 0) > 1e-10 * slope(&t, &v, 0).abs().max(1.0);
    let start = if keep_zero { 0 } else { 1 };
    let mut knots: Vec<f64> = t[start..].iter().rev().map(|x| -x).collect();
    let mut logvals: Vec<f64> = v[start..].iter().rev().copied().collect();
    if keep_zero {
        knots.pop();
        logvals.pop();
    }
    knots.extend_from_slice(&t[start..]);
    logvals.extend_from_slice(&v[start..]);
    let fit = LogConcaveFit::from_parts(knots.clone(), logvals.clone())?;
    let shift = fit.normalization_residual().ln_1p();
    logvals.iter_mut().for_each(|x| *x -= shift);
    LogConcaveFit::from_parts(knots, logvals)
}

/// `λ = √(σ̂² − σ̃²)` with `σ̂²` the sample variance (denominator `n − 1`)
/// and `σ̃²` the variance of the fitted density.
pub fn smoothing_bandwidth(sample: &[f64], full_fit: &LogConcaveFit) -> Result<f64> {
    let n = sample.len();
    if n < 2 {
        return Err(Error::DegenerateSample);
    }
    let mean = sample.iter().sum::<f64>() / n as f64;
    let var = sample.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
    let (_, fitted) = full_fit.moments();
    let gap = var - fitted;
    if !(gap > 1e-12 * var) {
        return Err(Error::NonPositiveBandwidth(gap));
    }
    Ok(gap.sqrt())
}

/// A log-concave fit convolved with a centered Gaussian of standard
/// deviation `bandwidth`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoothedFit {
    pub base: LogConcaveFit,
    pub bandwidth: f64,
}

/// Builds the smoothed fit.
pub fn smoothed_mle(full_fit: LogConcaveFit, bandwidth: f64) -> Result<SmoothedFit> {
    if !(bandwidth > 0.0 && bandwidth.is_finite()) {
        return Err(Error::NonPositiveBandwidth(bandwidth));
    }
    Ok(SmoothedFit {
        base: full_fit,
        bandwidth,
    })
}

impl SmoothedFit {
    /// Log-density and its derivative at `x`.
    pub fn log_density_and_score(&self, x: f64) -> (f64, f64) {
        let lam = self.bandwidth;
        let knots = self.base.knots();
        let vals = self.base.logvals();
        let slopes = self.base.slopes();
        let ln_lam = lam.ln();
        let mut terms: Vec<(f64, f64)> = Vec::with_capacity(slopes.len() + 2);
        for (k, &b) in slopes.iter().enumerate() {
            let mu = x + b * lam * lam;
            let lo = (knots[k] - mu) / lam;
            let hi = (knots[k + 1] - mu) / lam;
            let log_i = vals[k]
                + b * (x - knots[k])
                + 0.5 * b * b * lam * lam
                + normal::ln_cdf_diff(lo, hi);
            terms.push((log_i, b));
        }
        // boundary terms of the derivative, from the jumps of f at the ends
        let last = knots.len() - 1;
        let left = vals[0] + normal::ln_pdf((x - knots[0]) / lam) - ln_lam;
        let right = vals[last] + normal::ln_pdf((x - knots[last]) / lam) - ln_lam;
        let top = terms.iter().map(|t| t.0).fold(f64::NEG_INFINITY, f64::max);
        if top == f64::NEG_INFINITY {
            return (f64::NEG_INFINITY, 0.0);
        }
        let mut sum = 0.0;
        let mut deriv = 0.0;
        for &(li, b) in &terms {
            let e = (li - top).exp();
            sum += e;
            deriv += b * e;
        }
        deriv += (left - top).exp() - (right - top).exp();
        let log_f = top + sum.ln();
        (log_f, deriv / sum)
    }

    pub fn log_density(&self, x: f64) -> f64 {
        self.log_density_and_score(x).0
    }

    pub fn density(&self, x: f64) -> f64 {
        self.log_density(x).exp()
    }

    /// Derivative of the log-density.
    pub fn score(&self, x: f64) -> f64 {
        self.log_density_and_score(x).1
    }

    /// Derivative of the density.
    pub fn derivative(&self, x: f64) -> f64 {
        let (l, s) = self.log_density_and_score(x);
        l.exp() * s
    }

    /// Interval outside of which the density is below any representable mass.
    pub fn effective_support(&self) -> (f64, f64) {
        let (lo, hi) = self.base.support();
        (
            lo - GAUSS_CUTOFF * self.bandwidth,
            hi + GAUSS_CUTOFF * self.bandwidth,
        )
    }

    fn breaks(&self) -> Vec<f64> {
        self.base.knots().to_vec()
    }

    /// `P(Y > x)` by quadrature of the closed-form density.
    pub fn sf(&self, x: f64) -> Result<f64> {
        let (lo, hi) = self.effective_support();
        if x >= hi {
            return Ok(0.0);
        }
        let a = x.max(lo);
        let tail = integrate_with_breaks(|y| self.density(y), a, hi, &self.breaks(), &TAIL_QUAD)?;
        if x > lo {
            Ok(tail)
        } else {
            Ok(tail.min(1.0))
        }
    }

    /// `P(Y <= x)` by quadrature of the closed-form density.
    pub fn cdf(&self, x: f64) -> Result<f64> {
        let (lo, hi) = self.effective_support();
        if x <= lo {
            return Ok(0.0);
        }
        let b = x.min(hi);
        let mass = integrate_with_breaks(|y| self.density(y), lo, b, &self.breaks(), &TAIL_QUAD)?;
        Ok(mass.min(1.0))
    }
}

impl Density for SmoothedFit {
    fn pdf(&self, x: f64) -> f64 {
        self.density(x)
    }
    fn breakpoints(&self) -> Vec<f64> {
        self.breaks()
    }
    fn support(&self) -> (f64, f64) {
        self.effective_support()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreKind {
    PartialMle,
    GeoSym,
    SymSmoothed,
}

impl ScoreKind {
    pub const ALL: [ScoreKind; 3] = [
        ScoreKind::PartialMle,
        ScoreKind::GeoSym,
        ScoreKind::SymSmoothed,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ScoreKind::PartialMle => "partial-mle",
            ScoreKind::GeoSym => "geo-sym",
            ScoreKind::SymSmoothed => "sym-smoothed",
        }
    }
}

impl std::str::FromStr for ScoreKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "partial-mle" | "partial" => Ok(ScoreKind::PartialMle),
            "geo-sym" | "geosym" => Ok(ScoreKind::GeoSym),
            "sym-smoothed" | "smoothed" => Ok(ScoreKind::SymSmoothed),
            other => Err(Error::InvalidInput(format!("unknown score kind '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Body {
    LogConcave(LogConcaveFit),
    Smoothed(SmoothedFit),
}

/// An estimate of the symmetric density `g` of `X - center`, with its score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawScoreEstimate", into = "RawScoreEstimate")]
pub struct ScoreEstimate {
    kind: ScoreKind,
    center: f64,
    body: Body,
}

#[derive(Serialize, Deserialize)]
struct RawScoreEstimate {
    kind: ScoreKind,
    center: f64,
    /// The symmetric fit for the log-concave kinds, the unconstrained MLE for
    /// the smoothed kind.
    fit: LogConcaveFit,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    bandwidth: Option<f64>,
}

impl From<ScoreEstimate> for RawScoreEstimate {
    fn from(e: ScoreEstimate) -> Self {
        match e.body {
            Body::LogConcave(fit) => RawScoreEstimate {
                kind: e.kind,
                center: e.center,
                fit,
                bandwidth: None,
            },
            Body::Smoothed(sm) => RawScoreEstimate {
                kind: e.kind,
                center: e.center,
                fit: sm.base,
                bandwidth: Some(sm.bandwidth),
            },
        }
    }
}

impl TryFrom<RawScoreEstimate> for ScoreEstimate {
    type Error = Error;

    fn try_from(raw: RawScoreEstimate) -> Result<Self> {
        let body = match (raw.kind, raw.bandwidth) {
            (ScoreKind::SymSmoothed, Some(bw)) => Body::Smoothed(smoothed_mle(raw.fit, bw)?),
            (ScoreKind::SymSmoothed, None) => {
                return Err(Error::InvalidInput(
                    "smoothed estimate without a bandwidth".into(),
                ))
            }
            (_, Some(_)) => {
                return Err(Error::InvalidInput(
                    "bandwidth given for a log-concave estimate".into(),
                ))
            }
            (_, None) => {
                let fit = raw.fit;
                let symmetric = fit
                    .knots()
                    .iter()
                    .zip(fit.knots().iter().rev())
                    .all(|(a, b)| (a + b).abs() <= 1e-9 * a.abs().max(1.0))
                    && fit
                        .logvals()
                        .iter()
                        .zip(fit.logvals().iter().rev())
                        .all(|(a, b)| (a - b).abs() <= 1e-9 * a.abs().max(1.0));
                if !symmetric {
                    return Err(Error::InvalidInput(
                        "fit is not symmetric about zero".into(),
                    ));
                }
                Body::LogConcave(fit)
            }
        };
        Ok(ScoreEstimate {
            kind: raw.kind,
            center: raw.center,
            body,
        })
    }
}

/// Partial MLE: the symmetric log-concave MLE of `sample - theta_bar`.
pub fn partial_mle(sample: &[f64], theta_bar: f64, cfg: &FitConfig) -> Result<ScoreEstimate> {
    let fit = fit_symmetric_logconcave(sample, theta_bar, cfg)?;
    Ok(ScoreEstimate {
        kind: ScoreKind::PartialMle,
        center: theta_bar,
        body: Body::LogConcave(fit),
    })
}

/// Normalized geometric mean of the unconstrained MLE reflected about
/// `theta_bar`, supported on `[-a, a]` with `a = min(X_(n) - θ̄, θ̄ - X_(1))`.
pub fn geo_sym(sample: &[f64], theta_bar: f64, cfg: &FitConfig) -> Result<ScoreEstimate> {
    let full = fit_logconcave(sample, cfg)?;
    geo_sym_from_fit(&full, theta_bar)
}

/// [`geo_sym`] from an already computed unconstrained fit.
pub fn geo_sym_from_fit(full: &LogConcaveFit, theta_bar: f64) -> Result<ScoreEstimate> {
    let (lo, hi) = full.support();
    let a = (hi - theta_bar).min(theta_bar - lo);
    if !(a > 0.0) {
        return Err(Error::EmptySupport {
            center: theta_bar,
            low: lo,
            high: hi,
        });
    }
    let mut half: Vec<f64> = full
        .knots()
        .iter()
        .map(|k| (k - theta_bar).abs())
        .filter(|&t| t > 0.0 && t < a)
        .collect();
    half.push(0.0);
    half.push(a);
    half.sort_by(f64::total_cmp);
    half.dedup();
    let phi = |x: f64| full.log_density(x.clamp(lo, hi));
    let vals: Vec<f64> = half
        .iter()
        .map(|&t| 0.5 * (phi(theta_bar + t) + phi(theta_bar - t)))
        .collect();
    let fit = mirror_half(half, vals)?;
    Ok(ScoreEstimate {
        kind: ScoreKind::GeoSym,
        center: theta_bar,
        body: Body::LogConcave(fit),
    })
}

/// Symmetrized smoothed MLE `½ (f̂_sm(θ̄ + z) + f̂_sm(θ̄ − z))`.
pub fn sym_smoothed(sample: &[f64], theta_bar: f64, cfg: &FitConfig) -> Result<ScoreEstimate> {
    let full = fit_logconcave(sample, cfg)?;
    let bw = smoothing_bandwidth(sample, &full)?;
    sym_smoothed_from_fit(smoothed_mle(full, bw)?, theta_bar)
}

/// [`sym_smoothed`] from an already smoothed fit.
pub fn sym_smoothed_from_fit(smoothed: SmoothedFit, theta_bar: f64) -> Result<ScoreEstimate> {
    Ok(ScoreEstimate {
        kind: ScoreKind::SymSmoothed,
        center: theta_bar,
        body: Body::Smoothed(smoothed),
    })
}

/// Builds the requested estimator of the centered density at `theta_bar`.
pub fn score_estimate(
    kind: ScoreKind,
    sample: &[f64],
    theta_bar: f64,
    cfg: &FitConfig,
) -> Result<ScoreEstimate> {
    match kind {
        ScoreKind::PartialMle => partial_mle(sample, theta_bar, cfg),
        ScoreKind::GeoSym => geo_sym(sample, theta_bar, cfg),
        ScoreKind::SymSmoothed => sym_smoothed(sample, theta_bar, cfg),
    }
}

impl ScoreEstimate {
    pub fn kind(&self) -> ScoreKind {
        self.kind
    }

    pub fn center(&self) -> f64 {
        self.center
    }

    /// The symmetric log-concave fit, for the partial MLE and geometric kinds.
    pub fn symmetric_fit(&self) -> Option<&LogConcaveFit> {
        match &self.body {
            Body::LogConcave(f) => Some(f),
            Body::Smoothed(_) => None,
        }
    }

    /// The smoothed unconstrained fit, for the smoothed kind.
    pub fn smoothed_fit(&self) -> Option<&SmoothedFit> {
        match &self.body {
            Body::LogConcave(_) => None,
            Body::Smoothed(s) => Some(s),
        }
    }

    pub fn bandwidth(&self) -> Option<f64> {
        self.smoothed_fit().map(|s| s.bandwidth)
    }

    // log f_sm at center ± z and the mixture weight ϱ of the `+` side
    fn smoothed_parts(&self, sm: &SmoothedFit, z: f64) -> ((f64, f64), (f64, f64)) {
        let plus = sm.log_density_and_score(self.center + z);
        let minus = sm.log_density_and_score(self.center - z);
        (plus, minus)
    }

    /// Density, log-density and score at `z` in one pass.
    pub fn evaluate(&self, z: f64) -> (f64, f64, f64) {
        match &self.body {
            Body::LogConcave(f) => {
                let e = f.evaluate(z);
                (e.pdf, e.logpdf, e.score)
            }
            Body::Smoothed(sm) => {
                // evaluate at |z| so evenness and oddness are exact
                let a = z.abs();
                let ((lp, sp), (lm, sm_)) = self.smoothed_parts(sm, a);
                let top = lp.max(lm);
                if top == f64::NEG_INFINITY {
                    return (0.0, f64::NEG_INFINITY, 0.0);
                }
                let (ep, em) = ((lp - top).exp(), (lm - top).exp());
                let log_g = top + (0.5 * (ep + em)).ln();
                let rho = ep / (ep + em);
                let s = rho * sp - (1.0 - rho) * sm_;
                let s = if z < 0.0 { -s } else { s };
                (log_g.exp(), log_g, s)
            }
        }
    }
}

impl SymmetricDensity for ScoreEstimate {
    fn density(&self, z: f64) -> f64 {
        self.evaluate(z).0
    }

    fn log_density(&self, z: f64) -> f64 {
        match &self.body {
            Body::LogConcave(f) => f.log_density(z),
            Body::Smoothed(_) => self.evaluate(z).1,
        }
    }

    fn score(&self, z: f64) -> f64 {
        match &self.body {
            Body::LogConcave(f) => f.score(z),
            Body::Smoothed(_) => self.evaluate(z).2,
        }
    }

    fn support_radius(&self) -> f64 {
        match &self.body {
            Body::LogConcave(f) => f.support().1,
            Body::Smoothed(_) => f64::INFINITY,
        }
    }

    fn effective_radius(&self) -> f64 {
        match &self.body {
            Body::LogConcave(f) => f.support().1,
            Body::Smoothed(sm) => {
                let (lo, hi) = sm.effective_support();
                (hi - self.center).max(self.center - lo)
            }
        }
    }

    fn breakpoints(&self) -> Vec<f64> {
        let mut b: Vec<f64> = match &self.body {
            Body::LogConcave(f) => f.knots().iter().filter(|&&k| k >= 0.0).copied().collect(),
            Body::Smoothed(sm) => sm
                .base
                .knots()
                .iter()
                .map(|k| (k - self.center).abs())
                .collect(),
        };
        b.sort_by(f64::total_cmp);
        b.dedup();
        b
    }

    fn upper_tail(&self, z: f64) -> Result<f64> {
        match &self.body {
            Body::LogConcave(f) => Ok(f.sf(z)),
            Body::Smoothed(sm) => {
                if z < 0.0 {
                    return self.upper_tail(-z).map(|t| 1.0 - t);
                }
                let right = sm.sf(self.center + z)?;
                let left = sm.cdf(self.center - z)?;
                Ok(0.5 * (right + left))
            }
        }
    }

    fn upper_quantile(&self, tail: f64) -> Result<f64> {
        match &self.body {
            Body::LogConcave(f) => {
                if !(tail > 0.0 && tail < 1.0) {
                    return Err(Error::QuantileOutOfRange(1.0 - tail));
                }
                if tail > 0.5 {
                    return f.upper_quantile(1.0 - tail).map(|z| -z);
                }
                f.upper_quantile(tail)
            }
            Body::Smoothed(_) => invert_upper_tail(self, tail),
        }
    }
}

impl Density for ScoreEstimate {
    fn pdf(&self, x: f64) -> f64 {
        SymmetricDensity::density(self, x)
    }
    fn breakpoints(&self) -> Vec<f64> {
        let pos = SymmetricDensity::breakpoints(self);
        pos.iter().flat_map(|&b| [b, -b]).collect()
    }
    fn support(&self) -> (f64, f64) {
        let r = self.effective_radius();
        (-r, r)
    }
}
