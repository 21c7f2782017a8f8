use loclace::profile_mle::{profile_criterion, profile_criterion_with};
use loclace::refdists::ref_sample;
use loclace::{
    fit_full_mle, Error, Family, FitConfig, GridConfig, MleEstimate, ReferenceDistribution,
};
use proptest::prelude::*;

#[test]
fn two_point_criterion() {
    let c = profile_criterion(&[1.0, 3.0], 2.0).unwrap();
    assert!((c - (0.5f64.ln() - 1.0)).abs() < 1e-10);
    assert_eq!(
        profile_criterion(&[2.0, 2.0], 2.0).unwrap_err(),
        Error::DegenerateSample
    );
}

#[test]
fn criterion_is_translation_invariant_and_falls_off_outside_the_data() {
    let x = ref_sample(&ReferenceDistribution::new(Family::Logistic, 0.0), 25, 3);
    let shifted: Vec<f64> = x.iter().map(|v| v + 7.0).collect();
    for theta in [-0.5, 0.0, 0.3] {
        let a = profile_criterion(&x, theta).unwrap();
        let b = profile_criterion(&shifted, theta + 7.0).unwrap();
        assert!((a - b).abs() < 1e-12);
    }
    let lo = x.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let at_lo = profile_criterion(&x, lo).unwrap();
    let at_hi = profile_criterion(&x, hi).unwrap();
    assert!(profile_criterion(&x, lo - 1.0).unwrap() < at_lo);
    assert!(profile_criterion(&x, lo - 5.0).unwrap() < profile_criterion(&x, lo - 1.0).unwrap());
    assert!(profile_criterion(&x, hi + 2.0).unwrap() < at_hi);
}

#[test]
fn symmetric_multiset_recovers_its_center() {
    let c = -1.75;
    let x: Vec<f64> = [0.2, 0.5, 1.1, 1.6, 2.4]
        .iter()
        .flat_map(|d| [c + d, c - d])
        .collect();
    let est = fit_full_mle(&x, &GridConfig::default()).unwrap();
    let spacing = (x[8] - x[9]) * 0.5 * 0.1f64.powi(4) / 10.0;
    assert!((est.theta - c).abs() <= spacing, "{} vs {c}", est.theta);
}

#[test]
fn estimate_structure() {
    let x = ref_sample(&ReferenceDistribution::new(Family::Gaussian, 2.0), 60, 10);
    let grid = GridConfig::default();
    let est = fit_full_mle(&x, &grid).unwrap();
    let lo = x.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    assert!(lo <= est.theta && est.theta <= hi);
    assert!(
        (est.criterion - profile_criterion_with(&x, est.theta, &grid.fit).unwrap()).abs() <= 1e-9
    );
    assert_eq!(est.grid_trace.len(), 101 + 4 * 21);
    for &(_, c) in &est.grid_trace {
        assert!(est.criterion >= c);
    }
    // symmetric fit with support out to the farthest observation
    let a = x.iter().map(|v| (v - est.theta).abs()).fold(0.0, f64::max);
    assert_eq!(est.fit.support(), (-a, a));
    for (k, v) in est.fit.knots().iter().zip(est.fit.logvals()) {
        assert!((est.fit.log_density(-k) - v).abs() <= 1e-9);
    }
    assert_eq!(est.fit.log_density(a * 1.0001), f64::NEG_INFINITY);

    let text = serde_json::to_string(&est).unwrap();
    let back: MleEstimate = serde_json::from_str(&text).unwrap();
    assert_eq!(back.grid_trace, est.grid_trace);
}

#[test]
fn degenerate_and_invalid_inputs() {
    let grid = GridConfig::default();
    assert_eq!(
        fit_full_mle(&[4.0], &grid).unwrap_err(),
        Error::DegenerateSample
    );
    assert_eq!(
        fit_full_mle(&[4.0, 4.0, 4.0], &grid).unwrap_err(),
        Error::DegenerateSample
    );
    assert_eq!(fit_full_mle(&[], &grid).unwrap_err(), Error::EmptySample);
    let small = GridConfig {
        coarse_points: 2,
        ..grid
    };
    assert!(matches!(
        fit_full_mle(&[0.0, 1.0], &small),
        Err(Error::InvalidInput(_))
    ));
}

#[test]
fn theta_stays_in_the_data_range_over_many_samples() {
    let grid = GridConfig {
        coarse_points: 41,
        refine_rounds: 2,
        ..GridConfig::default()
    };
    let dist = ReferenceDistribution::new(Family::Gaussian, 0.0);
    for seed in 0..1000 {
        let x = ref_sample(&dist, 12, seed);
        let est = fit_full_mle(&x, &grid).unwrap();
        let lo = x.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        assert!(lo <= est.theta && est.theta <= hi);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn affine_equivariance(seed in 0u64..1000, a in 0.2f64..5.0, b in -10.0f64..10.0) {
        let x = ref_sample(&ReferenceDistribution::new(Family::Laplace, 0.0), 30, seed);
        let moved: Vec<f64> = x.iter().map(|v| a * v + b).collect();
        let cfg = GridConfig { fit: FitConfig::default(), ..GridConfig::default() };
        let base = fit_full_mle(&x, &cfg).unwrap();
        let est = fit_full_mle(&moved, &cfg).unwrap();
        let lo = x.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        // finest grid spacing after the refinement rounds
        let resolution = a * (hi - lo) * 0.5 * 0.1f64.powi(4) / 10.0;
        prop_assert!((est.theta - (a * base.theta + b)).abs() <= resolution + 1e-9);
    }
}
