use loclace::comparators::Regime;
use loclace::simharness::{
    beran_grid, efficiency_metric, replication_seed, run_experiment, stone_grid, tune_grid_search,
    EstimatorSpec, ExperimentConfig,
};
use loclace::{Error, Family, ScoreKind};

fn config(
    families: Vec<Family>,
    sample_sizes: Vec<usize>,
    replications: usize,
    estimators: Vec<EstimatorSpec>,
) -> ExperimentConfig {
    ExperimentConfig {
        families,
        sample_sizes,
        replications,
        estimators,
        seed: 2024,
        level: 0.95,
        parallel_workers: 1,
    }
}

#[test]
fn efficiency_metric_examples() {
    let m = efficiency_metric(&[-1.0, 1.0], 1, 1.0).unwrap();
    assert_eq!(m.value, 0.5);
    assert!(efficiency_metric(&[0.3], 10, 1.0).is_none());
    assert!(efficiency_metric(&[0.3, 0.3, 0.3], 10, 1.0).is_none());
}

#[test]
fn oracle_mean_efficiency_and_coverage() {
    let oracle = EstimatorSpec::OracleMean { label: None };
    let cfg = config(
        vec![Family::Gaussian, Family::Laplace, Family::Logistic],
        vec![20],
        4000,
        vec![oracle],
    );
    let report = run_experiment(&cfg).unwrap();
    // 1/(I·Var) for the mean: 1, 1/2 and 9/π²
    let expected = [1.0, 0.5, 9.0 / std::f64::consts::PI.powi(2)];
    for (f, e) in cfg.families.iter().zip(expected) {
        let row = report.row(*f, 20, "oracle-mean").unwrap();
        let eff = row.efficiency.unwrap();
        assert!(
            (eff.value - e).abs() < 4.0 * eff.mc_stderr,
            "{f}: {} ± {}",
            eff.value,
            eff.mc_stderr
        );
        if *f == Family::Gaussian {
            // normal theta: the relative error of a variance is √(2/R)
            assert!((eff.mc_stderr / (2.0f64 / 4000.0).sqrt() - 1.0).abs() < 0.2);
        }
        let cov = row.coverage.unwrap();
        // the Laplace mean at n = 20 is close enough to normal for a loose check
        assert!(
            (cov.value - 0.95).abs() < 0.015,
            "{f}: coverage {}",
            cov.value
        );
        assert_eq!(row.failures, 0);
        assert_eq!(row.replications, 4000);
    }
}

#[test]
fn singleton_grid_and_row_order() {
    let cfg = config(
        vec![Family::Logistic],
        vec![25],
        10,
        vec![
            EstimatorSpec::Median { label: None },
            EstimatorSpec::Mean { label: None },
        ],
    );
    let report = run_experiment(&cfg).unwrap();
    assert_eq!(report.rows.len(), 2);
    assert_eq!(report.rows[0].estimator, "median");
    assert_eq!(report.rows[1].estimator, "mean");
    assert!(report.rows[0].coverage.is_none());
    assert!(report.rows[1].coverage.is_some());
    let mse = report.rows[1].mse.unwrap();
    assert!(mse.value > 0.0 && mse.mc_stderr > 0.0);
}

fn mixed_estimators() -> Vec<EstimatorSpec> {
    vec![
        EstimatorSpec::onestep(ScoreKind::SymSmoothed, 0.0),
        EstimatorSpec::onestep(ScoreKind::PartialMle, 1e-2),
        EstimatorSpec::Stone {
            regime: Some(Regime::Optimal),
            config: None,
            label: None,
        },
        EstimatorSpec::Beran {
            regime: Some(Regime::NonOptimal),
            config: None,
            label: None,
        },
        EstimatorSpec::Median { label: None },
    ]
}

#[test]
fn reports_do_not_depend_on_worker_count() {
    let mut cfg = config(
        vec![Family::Laplace, Family::SymBeta(4.5)],
        vec![30, 40],
        24,
        mixed_estimators(),
    );
    let one = run_experiment(&cfg).unwrap().to_csv().unwrap();
    cfg.parallel_workers = 8;
    let eight = run_experiment(&cfg).unwrap().to_csv().unwrap();
    assert_eq!(one, eight);
    cfg.seed += 1;
    assert_ne!(run_experiment(&cfg).unwrap().to_csv().unwrap(), one);
}

#[test]
fn replication_seeds_are_distinct() {
    let mut seeds: Vec<u64> = (0..3)
        .flat_map(|f| {
            [30, 100]
                .into_iter()
                .flat_map(move |n| (0..50).map(move |r| replication_seed(7, f, n, r)))
        })
        .collect();
    let total = seeds.len();
    seeds.sort_unstable();
    seeds.dedup();
    assert_eq!(seeds.len(), total);
}

#[test]
fn long_format_csv_and_plot_data() {
    let cfg = config(vec![Family::Gaussian], vec![30], 12, mixed_estimators());
    let report = run_experiment(&cfg).unwrap();
    for r in &report.rows {
        let ok = r.replications - r.failures;
        assert!(ok <= r.replications);
        assert_eq!(r.replications, 12);
    }
    let csv = report.to_csv().unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "family,n,estimator,metric,value,mc_stderr");
    assert_eq!(lines.len(), 1 + 6 * report.rows.len());
    assert!(lines.contains(&"gaussian,30,median,coverage,NA,NA"));
    assert!(lines.contains(&"gaussian,30,median,replications,12,NA"));

    let plots = report.plot_data().unwrap();
    let names: Vec<&str> = plots.iter().map(|(n, _)| n.as_str()).collect();
    assert_eq!(
        names,
        [
            "fig_efficiency.csv",
            "fig_coverage.csv",
            "fig_mean_ci_length.csv",
            "fig_mse.csv"
        ]
    );
    for (_, body) in &plots {
        assert!(body.starts_with("panel,estimator,n,value,lower,upper"));
    }

    let back: loclace::simharness::SimulationReport =
        serde_json::from_str(&report.to_json()).unwrap();
    assert_eq!(back.rows.len(), report.rows.len());
}

#[test]
fn validation() {
    let est = vec![EstimatorSpec::Median { label: None }];
    let bad = config(vec![Family::SymBeta(2.0)], vec![30], 10, est.clone());
    assert!(matches!(
        run_experiment(&bad),
        Err(Error::InfiniteInformation(_))
    ));
    let dup = config(
        vec![Family::Gaussian],
        vec![30],
        10,
        vec![est[0].clone(), est[0].clone()],
    );
    assert!(matches!(dup.validate(), Err(Error::InvalidInput(_))));
    let eta = config(
        vec![Family::Gaussian],
        vec![30],
        10,
        vec![EstimatorSpec::onestep(ScoreKind::GeoSym, 0.5)],
    );
    assert!(eta.validate().is_err());
    let one_rep = config(vec![Family::Gaussian], vec![30], 1, est.clone());
    assert!(one_rep.validate().is_err());
    let tiny = config(vec![Family::Gaussian], vec![1], 10, est.clone());
    assert!(tiny.validate().is_err());
    let untuned = config(
        vec![Family::Gaussian],
        vec![30],
        10,
        vec![EstimatorSpec::Stone {
            regime: None,
            config: None,
            label: None,
        }],
    );
    assert!(untuned.validate().is_err());
    assert!(ExperimentConfig::paper_scale(1, 1).validate().is_ok());
}

#[test]
fn config_defaults_from_json() {
    let text = r#"{
        "families": ["gaussian", "symbeta:4.5"],
        "sample_sizes": [40],
        "replications": 5,
        "estimators": [{"type": "onestep", "score": "geo_sym"}, {"type": "mle"}]
    }"#;
    let cfg: ExperimentConfig = serde_json::from_str(text).unwrap();
    assert_eq!(cfg.level, 0.95);
    assert_eq!(cfg.parallel_workers, 1);
    assert_eq!(
        cfg.estimators[0],
        EstimatorSpec::onestep(ScoreKind::GeoSym, 0.0)
    );
    assert_eq!(cfg.estimators[1].label(), "mle");
    cfg.validate().unwrap();
}

#[test]
fn grid_search_picks_the_most_efficient_candidate() {
    let shrink = |x: &[f64], c: &f64| Ok(c * x.iter().sum::<f64>() / x.len() as f64);
    let (best, scores) =
        tune_grid_search(Family::Gaussian, 20, &[2.0, 1.0, 0.5], shrink, 200, 3).unwrap();
    assert_eq!(best, 0.5);
    // efficiency scales as 1/c²
    assert!((scores[2].1 / scores[1].1 - 4.0).abs() < 1e-9);
    let flat = |x: &[f64], _: &f64| Ok(x[0]);
    let (best, _) = tune_grid_search(Family::Gaussian, 20, &[3.0, 1.0, 2.0], flat, 50, 3).unwrap();
    assert_eq!(best, 1.0);
    let failing = |_: &[f64], _: &f64| -> loclace::Result<f64> { Err(Error::ZeroInformation) };
    assert!(tune_grid_search(Family::Gaussian, 20, &[1.0], failing, 50, 3).is_err());
    assert!(tune_grid_search::<f64, _>(Family::Gaussian, 20, &[], shrink, 50, 3).is_err());
    assert_eq!(stone_grid().len(), 48);
    assert_eq!(beran_grid().len(), 75);
}
