//! Monte-Carlo comparison of location estimators.
//!
//! For every family and sample size, `replications` samples centered at zero
//! are drawn and every configured estimator is applied to the same sample.
//! Per-replication generators are seeded from `(seed, family, n, replication)`
//! so reports do not depend on the number of worker threads.

use crate::comparators::{
    beran_estimate, stone_estimate, tuning_lookup, BeranConfig, Method, Regime, StoneConfig,
    TunedConfig, TuningTable,
};
use crate::error::{Error, Result};
use crate::normal;
use crate::onestep::{mean, median, onestep_estimate, InfoVariant, OneStepConfig, Preliminary};
use crate::profile_mle::{fit_full_mle, GridConfig};
use crate::refdists::{Family, ReferenceDistribution};
use crate::symlc::ScoreKind;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// One estimator in an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum EstimatorSpec {
    Onestep {
        score: ScoreKind,
        #[serde(default)]
        eta: f64,
        #[serde(default = "default_variant")]
        info_variant: InfoVariant,
        #[serde(default = "default_preliminary")]
        preliminary: Preliminary,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        label: Option<String>,
    },
    Mle {
        #[serde(default)]
        grid: GridConfig,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        label: Option<String>,
    },
    /// Stone's estimator, either with tabulated constants (`regime`) or fixed ones.
    Stone {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        regime: Option<Regime>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        config: Option<StoneConfig>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        label: Option<String>,
    },
    Beran {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        regime: Option<Regime>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        config: Option<BeranConfig>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        label: Option<String>,
    },
    /// Sample mean with the interval built from the true variance.
    OracleMean {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        label: Option<String>,
    },
    /// Sample mean with a normal interval from the sample variance.
    Mean {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        label: Option<String>,
    },
    /// Sample median, without an interval.
    Median {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        label: Option<String>,
    },
}

fn default_variant() -> InfoVariant {
    InfoVariant::Empirical
}

fn default_preliminary() -> Preliminary {
    Preliminary::Mean
}

fn regime_tag(r: Regime) -> &'static str {
    match r {
        Regime::Optimal => "o",
        Regime::NonOptimal => "n",
    }
}

impl EstimatorSpec {
    pub fn onestep(score: ScoreKind, eta: f64) -> Self {
        EstimatorSpec::Onestep {
            score,
            eta,
            info_variant: InfoVariant::Empirical,
            preliminary: Preliminary::Mean,
            label: None,
        }
    }

    /// Name used in reports.
    pub fn label(&self) -> String {
        match self {
            EstimatorSpec::Onestep {
                score,
                eta,
                info_variant,
                preliminary,
                label,
            } => label.clone().unwrap_or_else(|| {
                let mut s = format!("onestep:{}:eta={eta}", score.name());
                if *info_variant == InfoVariant::Smoothed {
                    s.push_str(":info=smoothed");
                }
                match preliminary {
                    Preliminary::Mean => {}
                    Preliminary::Median => s.push_str(":prelim=median"),
                    Preliminary::TrimmedMean(f) => s.push_str(&format!(":prelim=trimmed{f}")),
                }
                s
            }),
            EstimatorSpec::Mle { label, .. } => label.clone().unwrap_or_else(|| "mle".into()),
            EstimatorSpec::Stone {
                regime,
                config,
                label,
            } => label.clone().unwrap_or_else(|| match (regime, config) {
                (Some(r), _) => format!("stone({})", regime_tag(*r)),
                (None, Some(c)) => format!("stone(d={};t={})", c.d, c.t),
                (None, None) => "stone".into(),
            }),
            EstimatorSpec::Beran {
                regime,
                config,
                label,
            } => label.clone().unwrap_or_else(|| match (regime, config) {
                (Some(r), _) => format!("beran({})", regime_tag(*r)),
                (None, Some(c)) => format!("beran(b={};rho={})", c.basis_count, c.rho),
                (None, None) => "beran".into(),
            }),
            EstimatorSpec::OracleMean { label } => {
                label.clone().unwrap_or_else(|| "oracle-mean".into())
            }
            EstimatorSpec::Mean { label } => label.clone().unwrap_or_else(|| "mean".into()),
            EstimatorSpec::Median { label } => label.clone().unwrap_or_else(|| "median".into()),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            EstimatorSpec::Onestep { eta, .. } if !(*eta >= 0.0 && *eta < 0.5) => {
                Err(Error::InvalidInput(format!("eta {eta} outside [0, 0.5)")))
            }
            EstimatorSpec::Stone {
                regime: None,
                config: None,
                ..
            }
            | EstimatorSpec::Beran {
                regime: None,
                config: None,
                ..
            } => Err(Error::InvalidInput(
                "comparators need either a regime or explicit tuning constants".into(),
            )),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub families: Vec<Family>,
    pub sample_sizes: Vec<usize>,
    pub replications: usize,
    pub estimators: Vec<EstimatorSpec>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_level")]
    pub level: f64,
    #[serde(default = "default_workers")]
    pub parallel_workers: usize,
}

fn default_level() -> f64 {
    0.95
}

fn default_workers() -> usize {
    1
}

impl ExperimentConfig {
    /// The full benchmark: five families, four sample sizes, 3000
    /// replications, the MLE, one-step estimators with the partial MLE and
    /// smoothed scores at four truncation levels, and both comparators
    /// under both tuning regimes.
    pub fn paper_scale(seed: u64, workers: usize) -> Self {
        let mut estimators = vec![EstimatorSpec::Mle {
            grid: GridConfig::default(),
            label: None,
        }];
        for score in [ScoreKind::PartialMle, ScoreKind::SymSmoothed] {
            for eta in [0.0, 1e-5, 1e-3, 1e-2] {
                estimators.push(EstimatorSpec::onestep(score, eta));
            }
        }
        for regime in [Regime::Optimal, Regime::NonOptimal] {
            estimators.push(EstimatorSpec::Stone {
                regime: Some(regime),
                config: None,
                label: None,
            });
            estimators.push(EstimatorSpec::Beran {
                regime: Some(regime),
                config: None,
                label: None,
            });
        }
        ExperimentConfig {
            families: Family::benchmark_set().to_vec(),
            sample_sizes: vec![30, 100, 200, 500],
            replications: 3000,
            estimators,
            seed,
            level: 0.95,
            parallel_workers: workers,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications < 2 {
            return Err(Error::InvalidInput(
                "at least two replications are needed".into(),
            ));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::InvalidInput(format!(
                "level {} outside (0, 1)",
                self.level
            )));
        }
        if self.families.is_empty() || self.sample_sizes.is_empty() || self.estimators.is_empty() {
            return Err(Error::InvalidInput(
                "families, sample sizes and estimators must be non-empty".into(),
            ));
        }
        if let Some(&n) = self.sample_sizes.iter().find(|&&n| n < 2) {
            return Err(Error::InvalidInput(format!("sample size {n} is below 2")));
        }
        for f in &self.families {
            if let Family::SymBeta(r) = f {
                if *r <= 2.0 {
                    return Err(Error::InfiniteInformation(f.to_string()));
                }
            }
        }
        let mut labels: Vec<String> = self.estimators.iter().map(|e| e.label()).collect();
        labels.sort();
        if labels.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidInput(
                "estimator labels must be distinct".into(),
            ));
        }
        self.estimators.iter().try_for_each(|e| e.validate())
    }
}

/// A value with its Monte-Carlo standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metric {
    pub value: f64,
    pub mc_stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub family: Family,
    pub n: usize,
    pub estimator: String,
    pub replications: usize,
    pub failures: usize,
    pub efficiency: Option<Metric>,
    pub coverage: Option<Metric>,
    pub mean_ci_length: Option<Metric>,
    pub mse: Option<Metric>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub config: ExperimentConfig,
    pub rows: Vec<ReportRow>,
}

/// Seed of one replication, mixed so that nearby inputs give unrelated streams.
pub fn replication_seed(seed: u64, family_index: usize, n: usize, rep: usize) -> u64 {
    let mut h = splitmix(seed);
    for v in [family_index as u64, n as u64, rep as u64] {
        h = splitmix(h ^ v);
    }
    h
}

fn splitmix(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy)]
struct Outcome {
    theta: f64,
    ci: Option<(f64, f64)>,
}

// an estimator with its tuning resolved for one (family, n)
enum Resolved {
    Onestep(OneStepConfig),
    Mle(GridConfig),
    Stone(StoneConfig),
    Beran(BeranConfig),
    OracleMean(f64),
    Mean,
    Median,
}

fn resolve(
    spec: &EstimatorSpec,
    family: Family,
    n: usize,
    table: &TuningTable,
) -> Result<Resolved> {
    let tuned = |method: Method, regime: Regime| -> Result<TunedConfig> {
        // sizes outside the table use the nearest tabulated size
        let m = table
            .nearest_n(method, regime, n)
            .ok_or_else(|| Error::MissingEntry(format!("{method}/{regime}")))?;
        tuning_lookup(table, method, family, m, regime)
    };
    Ok(match spec {
        EstimatorSpec::Onestep {
            score,
            eta,
            info_variant,
            preliminary,
            ..
        } => Resolved::Onestep(OneStepConfig {
            preliminary: *preliminary,
            eta: *eta,
            info_variant: *info_variant,
            score_kind: *score,
            fit: Default::default(),
        }),
        EstimatorSpec::Mle { grid, .. } => Resolved::Mle(*grid),
        EstimatorSpec::Stone {
            config: Some(c), ..
        } => Resolved::Stone(*c),
        EstimatorSpec::Stone {
            regime: Some(r), ..
        } => match tuned(Method::Stone, *r)? {
            TunedConfig::Stone(c) => Resolved::Stone(c),
            TunedConfig::Beran(_) => unreachable!(),
        },
        EstimatorSpec::Beran {
            config: Some(c), ..
        } => Resolved::Beran(*c),
        EstimatorSpec::Beran {
            regime: Some(r), ..
        } => match tuned(Method::Beran, *r)? {
            TunedConfig::Beran(c) => Resolved::Beran(c),
            TunedConfig::Stone(_) => unreachable!(),
        },
        EstimatorSpec::Stone { .. } | EstimatorSpec::Beran { .. } => {
            return Err(Error::InvalidInput("comparator without tuning".into()))
        }
        EstimatorSpec::OracleMean { .. } => Resolved::OracleMean(family.variance()),
        EstimatorSpec::Mean { .. } => Resolved::Mean,
        EstimatorSpec::Median { .. } => Resolved::Median,
    })
}

fn apply(est: &Resolved, x: &[f64], level: f64) -> Result<Outcome> {
    let with_ci = |e: crate::onestep::LocationEstimate| Outcome {
        theta: e.theta,
        ci: Some((e.ci_low, e.ci_high)),
    };
    let z = normal::quantile(0.5 * (1.0 + level));
    let n = x.len() as f64;
    Ok(match est {
        Resolved::Onestep(cfg) => with_ci(onestep_estimate(x, cfg, level)?),
        Resolved::Mle(grid) => Outcome {
            theta: fit_full_mle(x, grid)?.theta,
            ci: None,
        },
        Resolved::Stone(c) => with_ci(stone_estimate(x, c, level)?),
        Resolved::Beran(c) => with_ci(beran_estimate(x, c, level)?),
        Resolved::OracleMean(var) => {
            let m = mean(x);
            let h = z * (var / n).sqrt();
            Outcome {
                theta: m,
                ci: Some((m - h, m + h)),
            }
        }
        Resolved::Mean => {
            let m = mean(x);
            let s2 = x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1.0);
            let h = z * (s2 / n).sqrt();
            Outcome {
                theta: m,
                ci: Some((m - h, m + h)),
            }
        }
        Resolved::Median => Outcome {
            theta: median(x),
            ci: None,
        },
    })
}

fn mean_and_se(v: &[f64]) -> Option<Metric> {
    let k = v.len();
    if k < 2 {
        return None;
    }
    let m = v.iter().sum::<f64>() / k as f64;
    let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (k - 1) as f64;
    Some(Metric {
        value: m,
        mc_stderr: (var / k as f64).sqrt(),
    })
}

/// Efficiency `(1/(nI)) / Var` of a set of estimates of zero, with a delta-method
/// standard error.
pub fn efficiency_metric(thetas: &[f64], n: usize, info: f64) -> Option<Metric> {
    let k = thetas.len();
    if k < 2 {
        return None;
    }
    let m = thetas.iter().sum::<f64>() / k as f64;
    let var = thetas.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (k - 1) as f64;
    if !(var > 0.0) {
        return None;
    }
    let m4 = thetas.iter().map(|x| (x - m).powi(4)).sum::<f64>() / k as f64;
    let var_se = ((m4 - var * var).max(0.0) / k as f64).sqrt();
    let eff = 1.0 / (n as f64 * info) / var;
    Some(Metric {
        value: eff,
        mc_stderr: eff * var_se / var,
    })
}

fn summarize(
    family: Family,
    n: usize,
    label: String,
    info: f64,
    outcomes: &[Option<Outcome>],
) -> ReportRow {
    let ok: Vec<Outcome> = outcomes.iter().flatten().copied().collect();
    let thetas: Vec<f64> = ok.iter().map(|o| o.theta).collect();
    let sq: Vec<f64> = thetas.iter().map(|t| t * t).collect();
    let cis: Vec<(f64, f64)> = ok.iter().filter_map(|o| o.ci).collect();
    let coverage = if cis.is_empty() {
        None
    } else {
        let k = cis.len() as f64;
        let p = cis
            .iter()
            .filter(|(lo, hi)| *lo <= 0.0 && 0.0 <= *hi)
            .count() as f64
            / k;
        Some(Metric {
            value: p,
            mc_stderr: (p * (1.0 - p) / k).sqrt(),
        })
    };
    let lengths: Vec<f64> = cis.iter().map(|(lo, hi)| hi - lo).collect();
    ReportRow {
        family,
        n,
        estimator: label,
        replications: outcomes.len(),
        failures: outcomes.len() - ok.len(),
        efficiency: efficiency_metric(&thetas, n, info),
        coverage,
        mean_ci_length: mean_and_se(&lengths),
        mse: mean_and_se(&sq),
    }
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::InvalidInput(format!("thread pool: {e}")))
}

/// Runs the experiment. Rows are ordered by family, then sample size, then
/// estimator, following the configuration.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<SimulationReport> {
    cfg.validate()?;
    let table = TuningTable::builtin();
    let workers = pool(cfg.parallel_workers)?;
    let mut rows = Vec::new();
    for (fi, &family) in cfg.families.iter().enumerate() {
        let info = family.fisher_info()?;
        if !info.is_finite() {
            return Err(Error::InfiniteInformation(family.to_string()));
        }
        let dist = ReferenceDistribution::new(family, 0.0);
        for &n in &cfg.sample_sizes {
            let resolved: Vec<Resolved> = cfg
                .estimators
                .iter()
                .map(|e| resolve(e, family, n, &table))
                .collect::<Result<_>>()?;
            let per_rep: Vec<Vec<Option<Outcome>>> = workers.install(|| {
                (0..cfg.replications)
                    .into_par_iter()
                    .map(|rep| {
                        let mut rng =
                            ChaCha8Rng::seed_from_u64(replication_seed(cfg.seed, fi, n, rep));
                        let x = dist.sample(n, &mut rng);
                        resolved
                            .iter()
                            .map(|r| apply(r, &x, cfg.level).ok())
                            .collect()
                    })
                    .collect()
            });
            for (j, spec) in cfg.estimators.iter().enumerate() {
                let outcomes: Vec<Option<Outcome>> = per_rep.iter().map(|r| r[j]).collect();
                rows.push(summarize(family, n, spec.label(), info, &outcomes));
            }
        }
    }
    Ok(SimulationReport {
        config: cfg.clone(),
        rows,
    })
}

const METRICS: [&str; 4] = ["efficiency", "coverage", "mean_ci_length", "mse"];

impl ReportRow {
    pub fn metric(&self, name: &str) -> Option<Metric> {
        match name {
            "efficiency" => self.efficiency,
            "coverage" => self.coverage,
            "mean_ci_length" => self.mean_ci_length,
            "mse" => self.mse,
            _ => None,
        }
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_else(|| "NA".into())
}

impl SimulationReport {
    pub fn row(&self, family: Family, n: usize, estimator: &str) -> Option<&ReportRow> {
        self.rows
            .iter()
            .find(|r| r.family == family && r.n == n && r.estimator == estimator)
    }

    /// Long-format CSV: one line per (family, n, estimator, metric), plus the
    /// replication and failure counts.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| Error::InvalidInput(format!("csv: {e}"));
        w.write_record(["family", "n", "estimator", "metric", "value", "mc_stderr"])
            .map_err(io)?;
        for r in &self.rows {
            let fam = r.family.to_string();
            let n = r.n.to_string();
            for (name, v) in [("replications", r.replications), ("failures", r.failures)] {
                w.write_record([fam.as_str(), &n, &r.estimator, name, &v.to_string(), "NA"])
                    .map_err(io)?;
            }
            for m in METRICS {
                let v = r.metric(m);
                w.write_record([
                    fam.as_str(),
                    &n,
                    &r.estimator,
                    m,
                    &fmt_opt(v.map(|x| x.value)),
                    &fmt_opt(v.map(|x| x.mc_stderr)),
                ])
                .map_err(io)?;
            }
        }
        finish(w)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// One CSV per metric laid out for plotting: a panel per family, a line
    /// per estimator over `n`, with ±2 standard-error bars.
    pub fn plot_data(&self) -> Result<Vec<(String, String)>> {
        let io = |e: csv::Error| Error::InvalidInput(format!("csv: {e}"));
        let mut out = Vec::new();
        for m in METRICS {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["panel", "estimator", "n", "value", "lower", "upper"])
                .map_err(io)?;
            for r in &self.rows {
                if let Some(v) = r.metric(m) {
                    w.write_record([
                        r.family.to_string(),
                        r.estimator.clone(),
                        r.n.to_string(),
                        v.value.to_string(),
                        (v.value - 2.0 * v.mc_stderr).to_string(),
                        (v.value + 2.0 * v.mc_stderr).to_string(),
                    ])
                    .map_err(io)?;
                }
            }
            out.push((format!("fig_{m}.csv"), finish(w)?));
        }
        Ok(out)
    }
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w
        .into_inner()
        .map_err(|e| Error::InvalidInput(format!("csv: {e}")))?;
    String::from_utf8(bytes).map_err(|e| Error::InvalidInput(format!("csv: {e}")))
}

/// Picks the configuration with the highest Monte-Carlo efficiency. All
/// candidates see the same `inner_replications` samples; ties go to the
/// smaller configuration in the `PartialOrd` order. Returns the winner and
/// every candidate's efficiency (NaN when it failed on every sample).
pub fn tune_grid_search<C, F>(
    family: Family,
    n: usize,
    grid: &[C],
    estimator: F,
    inner_replications: usize,
    seed: u64,
) -> Result<(C, Vec<(C, f64)>)>
where
    C: Clone + PartialOrd + Send + Sync,
    F: Fn(&[f64], &C) -> Result<f64> + Sync,
{
    if grid.is_empty() {
        return Err(Error::InvalidInput("empty tuning grid".into()));
    }
    if inner_replications < 2 {
        return Err(Error::InvalidInput(
            "at least two replications are needed".into(),
        ));
    }
    let info = family.fisher_info()?;
    let dist = ReferenceDistribution::new(family, 0.0);
    let samples: Vec<Vec<f64>> = (0..inner_replications)
        .map(|rep| {
            let mut rng = ChaCha8Rng::seed_from_u64(replication_seed(seed, 0, n, rep));
            dist.sample(n, &mut rng)
        })
        .collect();
    let scores: Vec<f64> = grid
        .par_iter()
        .map(|c| {
            let thetas: Vec<f64> = samples
                .iter()
                .filter_map(|x| estimator(x, c).ok())
                .collect();
            efficiency_metric(&thetas, n, info).map_or(f64::NAN, |m| m.value)
        })
        .collect();
    let mut best: Option<usize> = None;
    for (i, &s) in scores.iter().enumerate() {
        if s.is_nan() {
            continue;
        }
        best = match best {
            None => Some(i),
            Some(b) => {
                let better = s > scores[b]
                    || (s == scores[b]
                        && grid[i].partial_cmp(&grid[b]) == Some(std::cmp::Ordering::Less));
                Some(if better { i } else { b })
            }
        };
    }
    let b = best.ok_or(Error::ZeroInformation)?;
    Ok((grid[b].clone(), grid.iter().cloned().zip(scores).collect()))
}

/// `d ∈ {10, ..., 80}`, `t ∈ {0.1, ..., 0.6}`.
pub fn stone_grid() -> Vec<StoneConfig> {
    let mut g = Vec::new();
    for d in (1..=8).map(|k| 10.0 * k as f64) {
        for t in (1..=6).map(|k| k as f64 / 10.0) {
            g.push(StoneConfig { d, t });
        }
    }
    g
}

/// `b ∈ {10, ..., 50}`, `ρ ∈ {0.1, ..., 1.5}`.
pub fn beran_grid() -> Vec<BeranConfig> {
    let mut g = Vec::new();
    for b in (1..=5).map(|k| 10 * k) {
        for rho in (1..=15).map(|k| k as f64 / 10.0) {
            g.push(BeranConfig {
                basis_count: b,
                rho,
            });
        }
    }
    g
}
