use loclace::lcmle::{hellinger, Density, FnDensity};
use loclace::quad::{integrate_with_breaks, QuadConfig};
use loclace::{
    fit_logconcave, fit_weighted_logconcave, normal, Error, FitConfig, LogConcaveFit,
    WeightedSample,
};
use proptest::prelude::*;

fn weighted(points: &[f64], weights: &[f64]) -> LogConcaveFit {
    fit_weighted_logconcave(
        &WeightedSample::new(points, weights).unwrap(),
        &FitConfig::default(),
    )
    .unwrap()
}

// Profiled criterion of the symmetric tent on {-h, 0, h} with end weights w
// and slope magnitude s: the level at zero is optimized out.
fn tent_criterion(h: f64, w: f64, s: f64) -> f64 {
    let mass = if s == 0.0 {
        2.0 * h
    } else {
        2.0 * (-(-s * h).exp_m1()) / s
    };
    -2.0 * w * s * h - mass.ln() - 1.0
}

// golden-section maximizer on [0, hi]
fn argmax(f: impl Fn(f64) -> f64, hi: f64) -> f64 {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (0.0, hi);
    while b - a > 1e-12 {
        let c = b - g * (b - a);
        let d = a + g * (b - a);
        if f(c) >= f(d) {
            b = d;
        } else {
            a = c;
        }
    }
    0.5 * (a + b)
}

#[test]
fn two_points_give_the_uniform() {
    let fit = weighted(&[-1.0, 1.0], &[0.5, 0.5]);
    assert_eq!(fit.support(), (-1.0, 1.0));
    for &v in fit.logvals() {
        assert!((v - 0.5f64.ln()).abs() < 1e-10);
    }
    assert!((fit.criterion_value() - (0.5f64.ln() - 1.0)).abs() < 1e-10);
}

#[test]
fn single_point_is_degenerate() {
    let err = fit_weighted_logconcave(
        &WeightedSample::new(&[0.0], &[1.0]).unwrap(),
        &FitConfig::default(),
    );
    assert_eq!(err.unwrap_err(), Error::DegenerateSample);
    assert_eq!(
        fit_logconcave(&[2.0, 2.0, 2.0], &FitConfig::default()).unwrap_err(),
        Error::DegenerateSample
    );
}

#[test]
fn equal_thirds_on_three_points_stay_flat() {
    // the profiled tent criterion decreases from s = 0
    let s = argmax(|s| tent_criterion(1.0, 1.0 / 3.0, s), 10.0);
    assert!(s < 1e-6);
    let third = 1.0 / 3.0;
    let fit = weighted(&[-1.0, 0.0, 1.0], &[third, third, third]);
    for slope in fit.slopes() {
        assert!(slope.abs() < 1e-6);
    }
    assert!((fit.density(0.3) - 0.5).abs() < 1e-6);
}

#[test]
fn peaked_weights_give_a_tent() {
    let s = argmax(|s| tent_criterion(2.0, 0.2, s), 10.0);
    assert!(s > 0.1);
    let fit = weighted(&[-2.0, 0.0, 2.0], &[0.2, 0.6, 0.2]);
    assert_eq!(fit.knots(), &[-2.0, 0.0, 2.0]);
    let slopes = fit.slopes();
    assert!((slopes[0] - s).abs() < 1e-6, "{} vs {s}", slopes[0]);
    assert!((slopes[1] + s).abs() < 1e-6);
    // right derivative inside the left segment
    assert!((fit.score(-0.5) - s).abs() < 1e-6);
    assert!((fit.criterion_value() - tent_criterion(2.0, 0.2, s)).abs() < 1e-9);
    let (mean, _) = fit.moments();
    assert!(mean.abs() < 1e-12);

    // upper quantile from the closed-form cdf, inverted by bisection
    let peak = s / (2.0 * (-(-2.0 * s).exp_m1()));
    let cdf = |x: f64| 0.5 + peak * (-(-s * x).exp_m1()) / s;
    let (mut a, mut b) = (0.0, 2.0);
    while b - a > 1e-14 {
        let m = 0.5 * (a + b);
        if cdf(m) < 0.975 {
            a = m;
        } else {
            b = m;
        }
    }
    assert!((fit.quantile(0.975).unwrap() - a).abs() < 1e-6);
}

#[test]
fn evaluation_outside_and_inside_the_support() {
    let fit = weighted(&[-1.0, 1.0], &[0.5, 0.5]);
    let e = fit.evaluate(0.0);
    assert!((e.pdf - 0.5).abs() < 1e-12);
    assert_eq!(e.score, 0.0);
    let out = fit.evaluate(1.5);
    assert_eq!(out.pdf, 0.0);
    assert_eq!(out.logpdf, f64::NEG_INFINITY);
    assert_eq!(out.score, 0.0);
    assert_eq!(fit.evaluate(-1.0001).pdf, 0.0);
}

#[test]
fn uniform_cdf_quantile_and_moments() {
    let fit = weighted(&[-1.0, 1.0], &[0.5, 0.5]);
    assert!(fit.quantile(0.5).unwrap().abs() < 1e-12);
    assert!((fit.cdf(0.5) - 0.75).abs() < 1e-12);
    assert_eq!(
        fit.quantile(0.0).unwrap_err(),
        Error::QuantileOutOfRange(0.0)
    );
    assert!(matches!(
        fit.quantile(1.2),
        Err(Error::QuantileOutOfRange(_))
    ));
    let (m, v) = fit.moments();
    assert!(m.abs() < 1e-12 && (v - 1.0 / 3.0).abs() < 1e-12);

    let shifted = fit_logconcave(&[1.0, 3.0], &FitConfig::default()).unwrap();
    let (m, v) = shifted.moments();
    assert!((m - 2.0).abs() < 1e-12 && (v - 1.0 / 3.0).abs() < 1e-12);
}

#[test]
fn hellinger_oracles() {
    let quad = QuadConfig::default();
    let g = FnDensity::new(normal::pdf);
    assert!(hellinger(&g, &g, &quad).unwrap() < 1e-7);

    // for unit-variance Gaussians H² = 1 - exp(-y²/8), close to y²/8 for small y
    for y in [0.01, 0.1, 0.5] {
        let shifted = FnDensity::new(move |x: f64| normal::pdf(x - y));
        let h = hellinger(&g, &shifted, &quad).unwrap();
        let exact = (-(-y * y / 8.0).exp_m1()).sqrt();
        assert!((h - exact).abs() < 1e-9, "{h} vs {exact}");
        assert!((h / (y / 8f64.sqrt()) - 1.0).abs() < 0.01);
    }

    // the overlap of the two uniforms is one half
    let a = FnDensity::new(|x: f64| if (-1.0..=1.0).contains(&x) { 0.5 } else { 0.0 })
        .with_support(-1.0, 1.0);
    let b = FnDensity::new(|x: f64| if (0.0..=2.0).contains(&x) { 0.5 } else { 0.0 })
        .with_support(0.0, 2.0);
    let h = hellinger(&a, &b, &quad).unwrap();
    assert!((h - 0.5f64.sqrt()).abs() < 1e-10);
}

#[test]
fn fits_round_trip_through_json() {
    let fit = fit_logconcave(&[0.3, -1.2, 2.5, 0.9, 1.1, -0.4], &FitConfig::default()).unwrap();
    let text = serde_json::to_string(&fit).unwrap();
    let value: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert!(value.get("knots").is_some() && value.get("logvals").is_some());
    let back: LogConcaveFit = serde_json::from_str(&text).unwrap();
    assert_eq!(back.knots(), fit.knots());
    assert_eq!(back.logvals(), fit.logvals());

    let convex = r#"{"knots":[0,1,2],"logvals":[0,-1,0]}"#;
    assert!(serde_json::from_str::<LogConcaveFit>(convex).is_err());
    let unsorted = r#"{"knots":[1,0],"logvals":[0,0]}"#;
    assert!(serde_json::from_str::<LogConcaveFit>(unsorted).is_err());
}

#[test]
fn weighted_sample_validation() {
    assert!(WeightedSample::new(&[0.0, 1.0], &[0.5]).is_err());
    assert!(WeightedSample::new(&[0.0, 1.0], &[1.0, -0.5]).is_err());
    assert!(WeightedSample::new(&[], &[]).is_err());
    assert!(WeightedSample::new(&[0.0, f64::NAN], &[0.5, 0.5]).is_err());
    let merged = WeightedSample::from_observations(&[1.0, 0.0, 1.0, 1.0]).unwrap();
    assert_eq!(merged.points(), &[0.0, 1.0]);
    assert!((merged.weights()[1] - 0.75).abs() < 1e-15);
}

fn sample_strategy() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-50.0f64..50.0, 2..40).prop_filter("two distinct values", |v| {
        v.iter().any(|x| (x - v[0]).abs() > 1e-3)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn fits_are_concave_and_normalized(x in sample_strategy()) {
        let fit = fit_logconcave(&x, &FitConfig::default()).unwrap();
        for w in fit.slopes().windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-9);
        }
        prop_assert!(fit.normalization_residual().abs() <= 1e-8);
        let (lo, hi) = fit.support();
        let mass = integrate_with_breaks(|t| fit.density(t), lo, hi, &fit.breakpoints(), &QuadConfig::default()).unwrap();
        prop_assert!((mass - 1.0).abs() <= 1e-8);
        let xmin = x.iter().copied().fold(f64::INFINITY, f64::min);
        let xmax = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        prop_assert_eq!((lo, hi), (xmin, xmax));
    }

    #[test]
    fn cdf_inverts_quantile(x in sample_strategy()) {
        let fit = fit_logconcave(&x, &FitConfig::default()).unwrap();
        for i in 1..100 {
            let q = i as f64 / 100.0;
            let z = fit.quantile(q).unwrap();
            prop_assert!((fit.cdf(z) - q).abs() <= 1e-10, "q {} cdf {}", q, fit.cdf(z));
        }
    }

    #[test]
    fn fits_are_affine_equivariant(x in sample_strategy(), a in 0.1f64..10.0, b in -20.0f64..20.0) {
        let cfg = FitConfig::default();
        let base = fit_logconcave(&x, &cfg).unwrap();
        let moved: Vec<f64> = x.iter().map(|v| a * v + b).collect();
        let fit = fit_logconcave(&moved, &cfg).unwrap();
        let (lo, hi) = base.support();
        for i in 1..50 {
            let t = lo + (hi - lo) * i as f64 / 50.0;
            let expected = base.log_density(t) - a.ln();
            prop_assert!((fit.log_density(a * t + b) - expected).abs() <= 1e-9,
                "at {}: {} vs {}", t, fit.log_density(a * t + b), expected);
        }
    }
}
