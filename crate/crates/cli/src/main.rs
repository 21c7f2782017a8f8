use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use loclace::comparators::{
    beran_estimate, stone_estimate, tuning_lookup, BeranConfig, Method, Regime, StoneConfig,
    TunedConfig, TuningTable,
};
use loclace::onestep::{onestep_estimate, InfoVariant, OneStepConfig, Preliminary};
use loclace::profile_mle::{fit_full_mle, GridConfig};
use loclace::refdists::Family;
use loclace::simharness::{
    beran_grid, run_experiment, stone_grid, tune_grid_search, ExperimentConfig,
};
use loclace::symlc::{fit_symmetric_logconcave, ScoreKind};
use loclace::{fit_logconcave, FitConfig, LocationEstimate};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "loclace",
    version,
    about = "Location estimation for symmetric log-concave data"
)]
struct Cli {
    /// Print a short human-readable summary instead of JSON.
    #[arg(long, global = true)]
    human: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum EstimateMethod {
    Onestep,
    Mle,
    Stone,
    Beran,
}

#[derive(Clone, Copy, ValueEnum)]
enum Comparator {
    Stone,
    Beran,
}

#[derive(Subcommand)]
enum Command {
    /// Fit the log-concave MLE, or the symmetric one about --center.
    Fit {
        input: PathBuf,
        #[arg(long)]
        center: Option<f64>,
    },
    /// Estimate the center of symmetry.
    Estimate {
        input: PathBuf,
        #[arg(long, value_enum, default_value = "onestep")]
        method: EstimateMethod,
        /// partial-mle, geo-sym or sym-smoothed.
        #[arg(long, default_value = "sym-smoothed")]
        score: String,
        #[arg(long, default_value_t = 0.0)]
        eta: f64,
        /// empirical or smoothed.
        #[arg(long, default_value = "empirical")]
        info_variant: String,
        /// mean, median or trimmed:<fraction>.
        #[arg(long, default_value = "mean")]
        preliminary: String,
        #[arg(long, default_value_t = 0.95)]
        level: f64,
        /// Stone: truncation multiplier.
        #[arg(long)]
        d: Option<f64>,
        /// Stone: bandwidth multiplier.
        #[arg(long)]
        t: Option<f64>,
        /// Beran: number of basis functions.
        #[arg(long)]
        basis_count: Option<usize>,
        /// Beran: difference-quotient scale.
        #[arg(long)]
        rho: Option<f64>,
    },
    /// Joint maximum likelihood of center and density.
    Mle { input: PathBuf },
    /// Run a Monte-Carlo experiment and write report CSVs.
    Simulate {
        config: Option<PathBuf>,
        #[arg(short = 'o', long = "output", default_value = ".")]
        output: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, env = "LOCLACE_WORKERS")]
        workers: Option<usize>,
        /// Use the full benchmark configuration instead of a config file.
        #[arg(long)]
        paper_scale: bool,
    },
    /// Grid-search tuning constants for a comparator.
    Tune {
        #[arg(long)]
        family: String,
        #[arg(long)]
        n: usize,
        #[arg(long, value_enum)]
        method: Comparator,
        #[arg(long, default_value_t = 100)]
        replications: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, env = "LOCLACE_WORKERS")]
        workers: Option<usize>,
    },
    /// Fisher information of a reference family, and tabulated tunings.
    Info {
        #[arg(long)]
        family: String,
        /// Also show the tabulated comparator constants for this sample size.
        #[arg(long)]
        n: Option<usize>,
    },
}

fn read_sample(path: &Path) -> Result<Vec<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("cannot read {}", path.display()))?;
    let mut out = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec?;
        if rec.len() != 1 {
            bail!(
                "line {}: expected a single column, found {}",
                i + 1,
                rec.len()
            );
        }
        let field = &rec[0];
        if i == 0 && field.eq_ignore_ascii_case("x") {
            continue;
        }
        let v: f64 = field
            .parse()
            .map_err(|_| anyhow!("line {}: '{}' is not a number", i + 1, field))?;
        if !v.is_finite() {
            bail!("line {}: non-finite value", i + 1);
        }
        out.push(v);
    }
    Ok(out)
}

fn emit<T: serde::Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn human_estimate(e: &LocationEstimate) {
    println!(
        "theta = {:.6}  ({:.0}% CI [{:.6}, {:.6}])  I = {:.6}  n = {}",
        e.theta,
        100.0 * e.level,
        e.ci_low,
        e.ci_high,
        e.fisher_info,
        e.n
    );
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Fit { input, center } => {
            let x = read_sample(&input)?;
            let fit = match center {
                Some(c) => fit_symmetric_logconcave(&x, c, &FitConfig::default())?,
                None => fit_logconcave(&x, &FitConfig::default())?,
            };
            if cli.human {
                println!(
                    "{} knots on [{}, {}]",
                    fit.knots().len(),
                    fit.support().0,
                    fit.support().1
                );
            } else {
                emit(&fit)?;
            }
        }
        Command::Estimate {
            input,
            method,
            score,
            eta,
            info_variant,
            preliminary,
            level,
            d,
            t,
            basis_count,
            rho,
        } => {
            let x = read_sample(&input)?;
            if !(level > 0.0 && level < 1.0) {
                bail!("--level must lie in (0, 1)");
            }
            let est = match method {
                EstimateMethod::Onestep => {
                    let cfg = OneStepConfig {
                        preliminary: preliminary.parse::<Preliminary>()?,
                        eta,
                        info_variant: info_variant.parse::<InfoVariant>()?,
                        score_kind: score.parse::<ScoreKind>()?,
                        fit: FitConfig::default(),
                    };
                    onestep_estimate(&x, &cfg, level)?
                }
                EstimateMethod::Stone => {
                    let cfg = StoneConfig {
                        d: d.unwrap_or(20.0),
                        t: t.unwrap_or(0.6),
                    };
                    stone_estimate(&x, &cfg, level)?
                }
                EstimateMethod::Beran => {
                    let cfg = BeranConfig {
                        basis_count: basis_count.unwrap_or(10),
                        rho: rho.unwrap_or(1.0),
                    };
                    beran_estimate(&x, &cfg, level)?
                }
                EstimateMethod::Mle => {
                    let m = fit_full_mle(&x, &GridConfig::default())?;
                    if cli.human {
                        println!("theta = {:.6}  criterion = {:.6}", m.theta, m.criterion);
                    } else {
                        emit(&m)?;
                    }
                    return Ok(());
                }
            };
            if cli.human {
                human_estimate(&est);
            } else {
                emit(&est)?;
            }
        }
        Command::Mle { input } => {
            let x = read_sample(&input)?;
            let m = fit_full_mle(&x, &GridConfig::default())?;
            if cli.human {
                println!("theta = {:.6}  criterion = {:.6}", m.theta, m.criterion);
            } else {
                emit(&m)?;
            }
        }
        Command::Simulate {
            config,
            output,
            seed,
            workers,
            paper_scale,
        } => {
            let mut cfg = match (config, paper_scale) {
                (Some(_), true) => bail!("give either a config file or --paper-scale, not both"),
                (Some(path), false) => {
                    let text = fs::read_to_string(&path)
                        .with_context(|| format!("cannot read {}", path.display()))?;
                    serde_json::from_str::<ExperimentConfig>(&text)
                        .with_context(|| format!("invalid config {}", path.display()))?
                }
                (None, true) => ExperimentConfig::paper_scale(0, 1),
                (None, false) => bail!("a config file or --paper-scale is required"),
            };
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(w) = workers {
                cfg.parallel_workers = w;
            }
            let report = run_experiment(&cfg)?;
            fs::create_dir_all(&output)?;
            fs::write(output.join("report.csv"), report.to_csv()?)?;
            fs::write(output.join("report.json"), report.to_json())?;
            for (name, body) in report.plot_data()? {
                fs::write(output.join(name), body)?;
            }
            if cli.human {
                for r in &report.rows {
                    let eff = r
                        .efficiency
                        .map_or("NA".to_string(), |m| format!("{:.3}", m.value));
                    let cov = r
                        .coverage
                        .map_or("NA".to_string(), |m| format!("{:.3}", m.value));
                    println!(
                        "{:<14} n={:<5} {:<36} eff={eff} cov={cov}",
                        r.family.to_string(),
                        r.n,
                        r.estimator
                    );
                }
            } else {
                emit(&serde_json::json!({
                    "output": output.display().to_string(),
                    "rows": report.rows.len(),
                }))?;
            }
        }
        Command::Tune {
            family,
            n,
            method,
            replications,
            seed,
            workers,
        } => {
            let family: Family = family.parse()?;
            let pool = rayon_pool(workers)?;
            let result = pool.install(|| -> Result<serde_json::Value> {
                Ok(match method {
                    Comparator::Stone => {
                        let (best, all) = tune_grid_search(
                            family,
                            n,
                            &stone_grid(),
                            |x, c| stone_estimate(x, c, 0.95).map(|e| e.theta),
                            replications,
                            seed,
                        )?;
                        serde_json::json!({"method": "stone", "best": best, "efficiency": all.iter().map(|(c, e)| serde_json::json!({"config": c, "efficiency": finite_or_null(*e)})).collect::<Vec<_>>()})
                    }
                    Comparator::Beran => {
                        let (best, all) = tune_grid_search(
                            family,
                            n,
                            &beran_grid(),
                            |x, c| beran_estimate(x, c, 0.95).map(|e| e.theta),
                            replications,
                            seed,
                        )?;
                        serde_json::json!({"method": "beran", "best": best, "efficiency": all.iter().map(|(c, e)| serde_json::json!({"config": c, "efficiency": finite_or_null(*e)})).collect::<Vec<_>>()})
                    }
                })
            })?;
            if cli.human {
                println!("best: {}", result["best"]);
            } else {
                emit(&result)?;
            }
        }
        Command::Info { family, n } => {
            let family: Family = family.parse()?;
            let info = family.fisher_info()?;
            let mut out = serde_json::json!({
                "family": family.to_string(),
                "fisher_info": if info.is_finite() { serde_json::json!(info) } else { serde_json::json!("inf") },
                "variance": family.variance(),
            });
            if let Some(n) = n {
                let table = TuningTable::builtin();
                let mut tunings = serde_json::Map::new();
                for method in [Method::Stone, Method::Beran] {
                    for regime in [Regime::Optimal, Regime::NonOptimal] {
                        let v = match tuning_lookup(&table, method, family, n, regime) {
                            Ok(TunedConfig::Stone(c)) => serde_json::json!(c),
                            Ok(TunedConfig::Beran(c)) => serde_json::json!(c),
                            Err(_) => serde_json::Value::Null,
                        };
                        tunings.insert(format!("{method}/{regime}"), v);
                    }
                }
                out["tuning"] = serde_json::Value::Object(tunings);
            }
            if cli.human {
                println!("I = {info:?}");
            } else {
                emit(&out)?;
            }
        }
    }
    Ok(())
}

fn finite_or_null(x: f64) -> serde_json::Value {
    if x.is_finite() {
        serde_json::json!(x)
    } else {
        serde_json::Value::Null
    }
}

fn rayon_pool(workers: Option<usize>) -> Result<rayon::ThreadPool> {
    Ok(rayon::ThreadPoolBuilder::new()
        .num_threads(workers.unwrap_or(1).max(1))
        .build()?)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
