//! Weighted log-concave maximum likelihood.
//!
//! For a weighted sample `(x_i, w_i)` the estimator maximizes
//!
//! ```text
//! L(φ) = Σ w_i φ(x_i) - ∫ exp φ(x) dx
//! ```
//!
//! over concave `φ`. The maximizer is piecewise linear with knots among the
//! sample points, is `-∞` outside `[x_min, x_max]`, and integrates to one
//! automatically. The solver is an active-set method: for a fixed set of
//! knots the problem is smooth and strictly concave in the knot values and is
//! solved by damped Newton steps (tridiagonal Hessian, exact segment
//! integrals); knots are inserted where the directional derivative along a
//! concave hinge is positive and removed when the unconstrained optimum
//! breaks concavity.

use crate::error::{Error, Result};
use crate::quad::{integrate_with_breaks, QuadConfig};
use serde::{Deserialize, Serialize};

/// A discrete probability measure on strictly increasing support points.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedSample {
    points: Vec<f64>,
    weights: Vec<f64>,
}

impl WeightedSample {
    /// Builds a sample from points in any order. Tied points are merged with
    /// their weights summed and the weights are normalized to total one.
    pub fn new(points: &[f64], weights: &[f64]) -> Result<Self> {
        if points.len() != weights.len() {
            return Err(Error::InvalidInput(format!(
                "{} points but {} weights",
                points.len(),
                weights.len()
            )));
        }
        if points.is_empty() {
            return Err(Error::EmptySample);
        }
        if let Some(p) = points.iter().find(|p| !p.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite point {p}")));
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
            return Err(Error::InvalidInput(format!("weight {w} is not positive")));
        }
        let mut pairs: Vec<(f64, f64)> = points
            .iter()
            .copied()
            .zip(weights.iter().copied())
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut pts: Vec<f64> = Vec::with_capacity(pairs.len());
        let mut wts: Vec<f64> = Vec::with_capacity(pairs.len());
        for (p, w) in pairs {
            match pts.last() {
                Some(&last) if last == p => *wts.last_mut().unwrap() += w,
                _ => {
                    pts.push(p);
                    wts.push(w);
                }
            }
        }
        let total: f64 = wts.iter().sum();
        wts.iter_mut().for_each(|w| *w /= total);
        Ok(Self {
            points: pts,
            weights: wts,
        })
    }

    /// Equal weights `1/n` on each observation.
    pub fn from_observations(xs: &[f64]) -> Result<Self> {
        Self::new(xs, &vec![1.0; xs.len()])
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Number of distinct support points.
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    /// Cap on Newton iterations per knot set and on active-set sweeps.
    pub max_iterations: usize,
    /// Knot insertion stops once every hinge directional derivative of the
    /// criterion (in range-standardized coordinates) is below this value.
    pub criterion_tolerance: f64,
    /// Slope changes at or below this value (standardized coordinates) are
    /// treated as zero when deciding which knots to drop.
    pub slope_tolerance: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            criterion_tolerance: 1e-9,
            slope_tolerance: 1e-9,
        }
    }
}

/// A concave piecewise-linear log-density, `-∞` outside `[knots[0], knots[last]]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawFit", into = "RawFit")]
pub struct LogConcaveFit {
    knots: Vec<f64>,
    logvals: Vec<f64>,
    criterion_value: f64,
    normalization_residual: f64,
}

#[derive(Serialize, Deserialize)]
struct RawFit {
    knots: Vec<f64>,
    logvals: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    criterion_value: Option<f64>,
}

impl From<LogConcaveFit> for RawFit {
    fn from(f: LogConcaveFit) -> Self {
        RawFit {
            knots: f.knots,
            logvals: f.logvals,
            criterion_value: f.criterion_value.is_finite().then_some(f.criterion_value),
        }
    }
}

impl TryFrom<RawFit> for LogConcaveFit {
    type Error = Error;

    fn try_from(raw: RawFit) -> Result<Self> {
        let mut fit = LogConcaveFit::from_parts(raw.knots, raw.logvals)?;
        if fit.normalization_residual.abs() > 1e-8 {
            return Err(Error::InvalidInput(format!(
                "fit integrates to 1 {:+e}",
                fit.normalization_residual
            )));
        }
        if let Some(c) = raw.criterion_value {
            fit.criterion_value = c;
        }
        Ok(fit)
    }
}

/// Density, log-density and score (right derivative of the log-density).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub pdf: f64,
    pub logpdf: f64,
    pub score: f64,
}

impl LogConcaveFit {
    /// Builds a fit from knots and log-density values, checking ordering and
    /// concavity. The criterion value is left undefined (NaN).
    pub fn from_parts(knots: Vec<f64>, logvals: Vec<f64>) -> Result<Self> {
        if knots.len() != logvals.len() || knots.len() < 2 {
            return Err(Error::InvalidInput(
                "a fit needs at least two knots and one value per knot".into(),
            ));
        }
        if knots.windows(2).any(|w| !(w[0] < w[1])) || knots.iter().any(|k| !k.is_finite()) {
            return Err(Error::InvalidInput(
                "knots must be finite and strictly increasing".into(),
            ));
        }
        if logvals.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(
                "log-density values must be finite".into(),
            ));
        }
        let mut fit = LogConcaveFit {
            knots,
            logvals,
            criterion_value: f64::NAN,
            normalization_residual: 0.0,
        };
        let slopes = fit.slopes();
        for w in slopes.windows(2) {
            if w[1] > w[0] + 1e-9 * w[0].abs().max(1.0) {
                return Err(Error::InvalidInput(format!(
                    "log-density is not concave: slope {} followed by {}",
                    w[0], w[1]
                )));
            }
        }
        fit.normalization_residual = fit.integral() - 1.0;
        Ok(fit)
    }

    pub(crate) fn with_criterion(mut self, value: f64) -> Self {
        self.criterion_value = value;
        self
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn logvals(&self) -> &[f64] {
        &self.logvals
    }

    /// Value of `Σ w_i φ(x_i) - ∫ exp φ` at the fit, for fits produced by the solver.
    pub fn criterion_value(&self) -> f64 {
        self.criterion_value
    }

    /// `∫ exp φ - 1`.
    pub fn normalization_residual(&self) -> f64 {
        self.normalization_residual
    }

    pub fn support(&self) -> (f64, f64) {
        (self.knots[0], *self.knots.last().unwrap())
    }

    /// Slope of each of the `knots.len() - 1` segments.
    pub fn slopes(&self) -> Vec<f64> {
        self.knots
            .windows(2)
            .zip(self.logvals.windows(2))
            .map(|(k, v)| (v[1] - v[0]) / (k[1] - k[0]))
            .collect()
    }

    fn slope(&self, k: usize) -> f64 {
        (self.logvals[k + 1] - self.logvals[k]) / (self.knots[k + 1] - self.knots[k])
    }

    // index of the segment [t_k, t_{k+1}) containing x; the last knot maps to
    // the last segment
    fn segment(&self, x: f64) -> usize {
        let k = self.knots.partition_point(|&t| t <= x);
        k.saturating_sub(1).min(self.knots.len() - 2)
    }

    pub fn log_density(&self, x: f64) -> f64 {
        let (lo, hi) = self.support();
        if !(x >= lo && x <= hi) {
            return f64::NEG_INFINITY;
        }
        if x == hi {
            return *self.logvals.last().unwrap();
        }
        let k = self.segment(x);
        self.logvals[k] + self.slope(k) * (x - self.knots[k])
    }

    pub fn density(&self, x: f64) -> f64 {
        self.log_density(x).exp()
    }

    /// Right derivative of the log-density; zero outside the support. At the
    /// right endpoint the slope of the last segment is returned.
    pub fn score(&self, x: f64) -> f64 {
        let (lo, hi) = self.support();
        if !(x >= lo && x <= hi) {
            return 0.0;
        }
        self.slope(self.segment(x))
    }

    pub fn evaluate(&self, x: f64) -> Evaluation {
        let logpdf = self.log_density(x);
        Evaluation {
            pdf: logpdf.exp(),
            logpdf,
            score: self.score(x),
        }
    }

    /// Mass of each segment.
    pub fn segment_masses(&self) -> Vec<f64> {
        (0..self.knots.len() - 1)
            .map(|k| {
                let delta = self.knots[k + 1] - self.knots[k];
                let (scale, m) = seg_moments(self.logvals[k], self.logvals[k + 1]);
                delta * scale.exp() * m[0]
            })
            .collect()
    }

    /// `∫ exp φ` over the support.
    pub fn integral(&self) -> f64 {
        self.segment_masses().iter().sum()
    }

    /// Distribution function, normalized by the fitted total mass.
    pub fn cdf(&self, x: f64) -> f64 {
        let (lo, hi) = self.support();
        if x <= lo {
            return 0.0;
        }
        if x >= hi {
            return 1.0;
        }
        let masses = self.segment_masses();
        let total: f64 = masses.iter().sum();
        let k = self.segment(x);
        let below: f64 = masses[..k].iter().sum();
        let len = x - self.knots[k];
        let partial = self.logvals[k].exp() * len * exprel(self.slope(k) * len);
        ((below + partial) / total).min(1.0)
    }

    /// Upper tail `1 - cdf(x)`, accumulated from the right end.
    pub fn sf(&self, x: f64) -> f64 {
        let (lo, hi) = self.support();
        if x <= lo {
            return 1.0;
        }
        if x >= hi {
            return 0.0;
        }
        let masses = self.segment_masses();
        let total: f64 = masses.iter().sum();
        let k = self.segment(x);
        let above: f64 = masses[k + 1..].iter().sum();
        let len = self.knots[k + 1] - x;
        let partial = self.logvals[k + 1].exp() * len * exprel(-self.slope(k) * len);
        ((above + partial) / total).min(1.0)
    }

    /// Inverse of [`cdf`](Self::cdf). Levels above one half are solved from
    /// the right tail so that symmetric fits give mirror-image quantiles.
    pub fn quantile(&self, q: f64) -> Result<f64> {
        if !(q > 0.0 && q < 1.0) {
            return Err(Error::QuantileOutOfRange(q));
        }
        if q > 0.5 {
            return self.upper_quantile(1.0 - q);
        }
        let masses = self.segment_masses();
        let total: f64 = masses.iter().sum();
        let target = q * total;
        let mut below = 0.0;
        for (k, &m) in masses.iter().enumerate() {
            if below + m >= target || k == masses.len() - 1 {
                let rem = (target - below).max(0.0);
                let delta = self.knots[k + 1] - self.knots[k];
                let len = solve_exp_segment(self.logvals[k], self.slope(k), rem).min(delta);
                return Ok(self.knots[k] + len);
            }
            below += m;
        }
        unreachable!()
    }

    /// The point `x` with `sf(x) = tail`, for `tail` in `(0, 1)`.
    pub fn upper_quantile(&self, tail: f64) -> Result<f64> {
        if !(tail > 0.0 && tail < 1.0) {
            return Err(Error::QuantileOutOfRange(1.0 - tail));
        }
        let masses = self.segment_masses();
        let total: f64 = masses.iter().sum();
        let target = tail * total;
        let mut above = 0.0;
        for k in (0..masses.len()).rev() {
            let m = masses[k];
            if above + m >= target || k == 0 {
                let rem = (target - above).max(0.0);
                let delta = self.knots[k + 1] - self.knots[k];
                let len = solve_exp_segment(self.logvals[k + 1], -self.slope(k), rem).min(delta);
                return Ok(self.knots[k + 1] - len);
            }
            above += m;
        }
        unreachable!()
    }

    /// Mean and variance by exact integration of each log-linear piece.
    pub fn moments(&self) -> (f64, f64) {
        let n = self.knots.len() - 1;
        let mut pieces = Vec::with_capacity(n);
        let mut total = 0.0;
        let mut first = 0.0;
        for k in 0..n {
            let delta = self.knots[k + 1] - self.knots[k];
            let (scale, m) = seg_moments(self.logvals[k], self.logvals[k + 1]);
            let c = delta * scale.exp();
            total += c * m[0];
            first += c * (self.knots[k] * m[0] + delta * m[1]);
            pieces.push((c, delta, m));
        }
        let mean = first / total;
        let mut second = 0.0;
        for (k, (c, delta, m)) in pieces.into_iter().enumerate() {
            let d = self.knots[k] - mean;
            second += c * (d * d * m[0] + 2.0 * d * delta * m[1] + delta * delta * m[2]);
        }
        (mean, (second / total).max(0.0))
    }
}

/// Shorthand for [`fit_weighted_logconcave`] with equal weights on `xs`.
pub fn fit_logconcave(xs: &[f64], cfg: &FitConfig) -> Result<LogConcaveFit> {
    fit_weighted_logconcave(&WeightedSample::from_observations(xs)?, cfg)
}

/// Maximizes `Σ w_i φ(x_i) - ∫ exp φ` over concave `φ`.
pub fn fit_weighted_logconcave(sample: &WeightedSample, cfg: &FitConfig) -> Result<LogConcaveFit> {
    let m = sample.len();
    if m < 2 {
        return Err(Error::DegenerateSample);
    }
    let x = sample.points();
    let lo = x[0];
    let range = x[m - 1] - lo;
    let s: Vec<f64> = x.iter().map(|&xi| (xi - lo) / range).collect();
    let solver = Solver {
        s: &s,
        w: sample.weights(),
        cfg,
    };
    let (knot_idx, values) = solver.solve()?;
    let phi = solver.interpolate(&knot_idx, &values);
    let crit_std = solver.objective_from_points(&phi);
    let log_range = range.ln();
    let knots: Vec<f64> = knot_idx.iter().map(|&i| x[i]).collect();
    let logvals: Vec<f64> = values.iter().map(|v| v - log_range).collect();
    let mut fit = LogConcaveFit::from_parts(knots, logvals)?;
    fit.criterion_value = crit_std - log_range;
    Ok(fit)
}

struct Solver<'a> {
    s: &'a [f64],
    w: &'a [f64],
    cfg: &'a FitConfig,
}

impl Solver<'_> {
    fn solve(&self) -> Result<(Vec<usize>, Vec<f64>)> {
        let m = self.s.len();
        let mut knots = vec![0, m - 1];
        let mut values = vec![0.0, 0.0];
        self.newton(&knots, &mut values)?;
        for _ in 0..self.cfg.max_iterations {
            let phi = self.interpolate(&knots, &values);
            let h = self.hinge_derivatives(&phi);
            let mut best: Option<(usize, f64)> = None;
            let mut ki = 1;
            for (j, &hj) in h.iter().enumerate().take(m - 1).skip(1) {
                while knots[ki] < j {
                    ki += 1;
                }
                if knots[ki] == j {
                    continue;
                }
                if best.is_none_or(|(_, b)| hj > b) {
                    best = Some((j, hj));
                }
            }
            let Some((j, hj)) = best else {
                return Ok((knots, values));
            };
            if hj <= self.cfg.criterion_tolerance {
                return Ok((knots, values));
            }
            let pos = knots.partition_point(|&k| k < j);
            knots.insert(pos, j);
            let mut feasible: Vec<f64> = knots.iter().map(|&k| phi[k]).collect();
            loop {
                let mut cand = feasible.clone();
                self.newton(&knots, &mut cand)?;
                let new_kinks = self.kinks(&knots, &cand);
                if new_kinks.iter().all(|&c| c >= 0.0) {
                    values = cand;
                    break;
                }
                let old_kinks = self.kinks(&knots, &feasible);
                let mut t = 1.0f64;
                for (co, cn) in old_kinks.iter().zip(&new_kinks) {
                    if *cn < 0.0 {
                        t = t.min((co / (co - cn)).max(0.0));
                    }
                }
                let mixed: Vec<f64> = feasible
                    .iter()
                    .zip(&cand)
                    .map(|(a, b)| a + t * (b - a))
                    .collect();
                let mixed_kinks = self.kinks(&knots, &mixed);
                let min_kink = mixed_kinks.iter().copied().fold(f64::INFINITY, f64::min);
                let cut = self.cfg.slope_tolerance.max(min_kink);
                let mut keep = vec![true; knots.len()];
                for (i, &c) in mixed_kinks.iter().enumerate() {
                    if c <= cut {
                        keep[i + 1] = false;
                    }
                }
                let dropped_only_new = keep.iter().zip(&knots).all(|(&kp, &k)| kp || k == j);
                let new_knots: Vec<usize> = knots
                    .iter()
                    .zip(&keep)
                    .filter(|(_, &kp)| kp)
                    .map(|(&k, _)| k)
                    .collect();
                let new_feasible: Vec<f64> = mixed
                    .iter()
                    .zip(&keep)
                    .filter(|(_, &kp)| kp)
                    .map(|(&v, _)| v)
                    .collect();
                if t <= 0.0 && dropped_only_new {
                    // the new knot cannot carry a concave kink: current fit is optimal
                    knots = new_knots;
                    return Ok((knots, new_feasible));
                }
                knots = new_knots;
                feasible = new_feasible;
            }
        }
        Err(Error::NonConvergence(self.cfg.max_iterations))
    }

    // slope decrease at each interior knot (non-negative for concave φ)
    fn kinks(&self, knots: &[usize], v: &[f64]) -> Vec<f64> {
        let slopes: Vec<f64> = knots
            .windows(2)
            .zip(v.windows(2))
            .map(|(k, v)| (v[1] - v[0]) / (self.s[k[1]] - self.s[k[0]]))
            .collect();
        slopes.windows(2).map(|w| w[0] - w[1]).collect()
    }

    fn interpolate(&self, knots: &[usize], v: &[f64]) -> Vec<f64> {
        let mut phi = vec![0.0; self.s.len()];
        for (k, seg) in knots.windows(2).enumerate() {
            let (a, b) = (seg[0], seg[1]);
            let (sa, sb) = (self.s[a], self.s[b]);
            for (i, p) in phi.iter_mut().enumerate().take(b + 1).skip(a) {
                let lam = (self.s[i] - sa) / (sb - sa);
                *p = (1.0 - lam) * v[k] + lam * v[k + 1];
            }
            phi[a] = v[k];
            phi[b] = v[k + 1];
        }
        phi
    }

    // Σ w φ(s_i) - ∫ exp φ for φ linear between consecutive points
    fn objective_from_points(&self, phi: &[f64]) -> f64 {
        let data: f64 = self.w.iter().zip(phi).map(|(w, p)| w * p).sum();
        let integral: f64 = (0..phi.len() - 1)
            .map(|i| {
                let (scale, m) = seg_moments(phi[i], phi[i + 1]);
                (self.s[i + 1] - self.s[i]) * scale.exp() * m[0]
            })
            .sum();
        data - integral
    }

    fn data_weights(&self, knots: &[usize]) -> Vec<f64> {
        let mut wk = vec![0.0; knots.len()];
        for (k, seg) in knots.windows(2).enumerate() {
            let (a, b) = (seg[0], seg[1]);
            let (sa, sb) = (self.s[a], self.s[b]);
            for i in a..b {
                let lam = (self.s[i] - sa) / (sb - sa);
                wk[k] += self.w[i] * (1.0 - lam);
                wk[k + 1] += self.w[i] * lam;
            }
        }
        *wk.last_mut().unwrap() += *self.w.last().unwrap();
        wk
    }

    fn objective(&self, knots: &[usize], wk: &[f64], v: &[f64]) -> f64 {
        let data: f64 = wk.iter().zip(v).map(|(a, b)| a * b).sum();
        let integral: f64 = knots
            .windows(2)
            .zip(v.windows(2))
            .map(|(k, v)| {
                let (scale, m) = seg_moments(v[0], v[1]);
                (self.s[k[1]] - self.s[k[0]]) * scale.exp() * m[0]
            })
            .sum();
        data - integral
    }

    /// Damped Newton ascent on the knot values for a fixed knot set.
    fn newton(&self, knots: &[usize], v: &mut [f64]) -> Result<()> {
        let n = knots.len();
        let wk = self.data_weights(knots);
        let mut grad = vec![0.0; n];
        let mut diag = vec![0.0; n];
        let mut off = vec![0.0; n - 1];
        for _ in 0..self.cfg.max_iterations {
            grad.copy_from_slice(&wk);
            diag.iter_mut().for_each(|d| *d = 0.0);
            for k in 0..n - 1 {
                let delta = self.s[knots[k + 1]] - self.s[knots[k]];
                let (scale, m) = seg_moments(v[k], v[k + 1]);
                let c = delta * scale.exp();
                // u-moments of exp((1-u) v_k + u v_{k+1})
                let (m0, m1, m2) = (m[0], m[1], m[2]);
                grad[k] -= c * (m0 - m1);
                grad[k + 1] -= c * m1;
                diag[k] += c * (m0 - 2.0 * m1 + m2);
                diag[k + 1] += c * m2;
                off[k] = c * (m1 - m2);
            }
            let dir = solve_tridiagonal(&diag, &off, &grad);
            let decrement: f64 = grad.iter().zip(&dir).map(|(g, d)| g * d).sum();
            if !(decrement > 1e-26) {
                return Ok(());
            }
            if decrement < 1e-10 {
                // quadratic convergence region: take the full step
                v.iter_mut().zip(&dir).for_each(|(a, d)| *a += d);
                continue;
            }
            let f0 = self.objective(knots, &wk, v);
            let mut t = 1.0;
            loop {
                let trial: Vec<f64> = v.iter().zip(&dir).map(|(a, d)| a + t * d).collect();
                let f1 = self.objective(knots, &wk, &trial);
                if f1 >= f0 + 0.25 * t * decrement {
                    v.copy_from_slice(&trial);
                    break;
                }
                t *= 0.5;
                if t < 1e-12 {
                    return Ok(());
                }
            }
        }
        Err(Error::NonConvergence(self.cfg.max_iterations))
    }

    /// Directional derivative of the criterion along `-(x - s_j)_+` for each point.
    fn hinge_derivatives(&self, phi: &[f64]) -> Vec<f64> {
        let m = self.s.len();
        let mut h = vec![0.0; m];
        let mut mass_right = 0.0; // ∫_{s_{j+1}}^1 exp φ
        let mut lever = 0.0; // ∫_{s_{j+1}}^1 (s - s_{j+1}) exp φ
        let mut wt_right = 0.0; // Σ_{i > j} w_i
        let mut data = 0.0; // Σ_{i > j+1} w_i (s_i - s_{j+1})
        for j in (0..m - 1).rev() {
            let delta = self.s[j + 1] - self.s[j];
            let (scale, mom) = seg_moments(phi[j], phi[j + 1]);
            let c = delta * scale.exp();
            lever += delta * mass_right + c * delta * mom[1];
            mass_right += c * mom[0];
            wt_right += self.w[j + 1];
            data += delta * wt_right;
            h[j] = lever - data;
        }
        h
    }
}

fn solve_tridiagonal(diag: &[f64], off: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    c[0] = if n > 1 { off[0] / diag[0] } else { 0.0 };
    d[0] = rhs[0] / diag[0];
    for i in 1..n {
        let denom = diag[i] - off[i - 1] * c[i - 1];
        if i < n - 1 {
            c[i] = off[i] / denom;
        }
        d[i] = (rhs[i] - off[i - 1] * d[i - 1]) / denom;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    x
}

/// `∫_0^1 v^k exp(-a v) dv` for `k = 0, 1, 2` and `a >= 0`.
fn decay_moments(a: f64) -> [f64; 3] {
    if a < 1.0 {
        let mut out = [0.0; 3];
        let mut term = 1.0; // (-a)^j / j!
        for j in 0..30 {
            for (k, o) in out.iter_mut().enumerate() {
                *o += term / (k + j + 1) as f64;
            }
            term *= -a / (j + 1) as f64;
            if term.abs() < 1e-18 {
                break;
            }
        }
        out
    } else {
        let e = (-a).exp();
        let m0 = -(-a).exp_m1() / a;
        let m1 = (1.0 - e * (1.0 + a)) / (a * a);
        let m2 = (2.0 - e * (2.0 + 2.0 * a + a * a)) / (a * a * a);
        [m0, m1, m2]
    }
}

/// Moments `∫_0^1 u^p exp((1-u) l + u r) du` for `p = 0, 1, 2`, returned as
/// `(ln scale, [m0, m1, m2])` with the integrals equal to `exp(scale) * m_p`.
pub(crate) fn seg_moments(l: f64, r: f64) -> (f64, [f64; 3]) {
    if r >= l {
        let [d0, d1, d2] = decay_moments(r - l);
        // substitute v = 1 - u
        (r, [d0, d0 - d1, d0 - 2.0 * d1 + d2])
    } else {
        (l, decay_moments(l - r))
    }
}

/// `(e^y - 1) / y`, with the removable singularity filled in.
pub(crate) fn exprel(y: f64) -> f64 {
    if y == 0.0 {
        1.0
    } else if y.abs() < 1e-5 {
        1.0 + y / 2.0 + y * y / 6.0
    } else {
        y.exp_m1() / y
    }
}

// length L with ∫_0^L exp(v0 + b u) du = mass
fn solve_exp_segment(v0: f64, b: f64, mass: f64) -> f64 {
    if mass <= 0.0 {
        return 0.0;
    }
    let scaled = (mass.ln() - v0).exp(); // mass * exp(-v0)
    if b == 0.0 {
        return scaled;
    }
    let arg = b * scaled;
    if arg <= -1.0 {
        return f64::INFINITY;
    }
    arg.ln_1p() / b
}

/// A density that can be integrated numerically.
pub trait Density {
    fn pdf(&self, x: f64) -> f64;
    /// Points where the density or its derivative may be discontinuous.
    fn breakpoints(&self) -> Vec<f64> {
        Vec::new()
    }
    /// Closed interval outside of which the density vanishes.
    fn support(&self) -> (f64, f64) {
        (f64::NEG_INFINITY, f64::INFINITY)
    }
}

impl Density for LogConcaveFit {
    fn pdf(&self, x: f64) -> f64 {
        self.density(x)
    }
    fn breakpoints(&self) -> Vec<f64> {
        self.knots.clone()
    }
    fn support(&self) -> (f64, f64) {
        LogConcaveFit::support(self)
    }
}

/// Adapter turning a closure into a [`Density`].
pub struct FnDensity<F> {
    pub pdf: F,
    pub breakpoints: Vec<f64>,
    pub support: (f64, f64),
}

impl<F: Fn(f64) -> f64> FnDensity<F> {
    pub fn new(pdf: F) -> Self {
        Self {
            pdf,
            breakpoints: Vec::new(),
            support: (f64::NEG_INFINITY, f64::INFINITY),
        }
    }

    pub fn with_support(mut self, lo: f64, hi: f64) -> Self {
        self.support = (lo, hi);
        self.breakpoints.extend([lo, hi]);
        self
    }

    pub fn with_breakpoints(mut self, b: &[f64]) -> Self {
        self.breakpoints.extend_from_slice(b);
        self
    }
}

impl<F: Fn(f64) -> f64> Density for FnDensity<F> {
    fn pdf(&self, x: f64) -> f64 {
        (self.pdf)(x)
    }
    fn breakpoints(&self) -> Vec<f64> {
        self.breakpoints.clone()
    }
    fn support(&self) -> (f64, f64) {
        self.support
    }
}

/// Hellinger distance `H` with `H² = ½ ∫ (√f₁ - √f₂)²`, by adaptive quadrature.
pub fn hellinger(a: &dyn Density, b: &dyn Density, quad: &QuadConfig) -> Result<f64> {
    let (la, ha) = a.support();
    let (lb, hb) = b.support();
    let lo = la.min(lb);
    let hi = ha.max(hb);
    let mut breaks = a.breakpoints();
    breaks.extend(b.breakpoints());
    breaks.extend([la, ha, lb, hb]);
    let integrand = |x: f64| {
        let d = a.pdf(x).max(0.0).sqrt() - b.pdf(x).max(0.0).sqrt();
        d * d
    };
    let h2 = 0.5 * integrate_with_breaks(integrand, lo, hi, &breaks, quad)?;
    Ok(h2.clamp(0.0, 1.0).sqrt())
}
