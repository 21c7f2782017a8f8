//! Globally adaptive Gauss–Kronrod (7/15) quadrature with support for
//! infinite endpoints and user-supplied breakpoints.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_subdivisions: usize,
}

impl Default for QuadConfig {
    fn default() -> Self {
        Self {
            abs_tol: 1e-12,
            rel_tol: 1e-10,
            max_subdivisions: 2000,
        }
    }
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

#[derive(Debug, Clone, Copy)]
struct Piece {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Piece {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut res_k = fc * WGK[7];
    let mut res_g = fc * WG[3];
    let mut res_abs = res_k.abs();
    let mut fv1 = [0.0; 7];
    let mut fv2 = [0.0; 7];
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv1[j] = f1;
        fv2[j] = f2;
        res_k += WGK[j] * (f1 + f2);
        res_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            res_g += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = res_k * 0.5;
    let mut res_asc = WGK[7] * (fc - mean).abs();
    for j in 0..7 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let value = res_k * half;
    let res_abs = res_abs * half.abs();
    let res_asc = res_asc * half.abs();
    let mut error = ((res_k - res_g) * half).abs();
    if res_asc != 0.0 && error != 0.0 {
        error = res_asc * (200.0 * error / res_asc).powf(1.5).min(1.0);
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        error = error.max(50.0 * f64::EPSILON * res_abs);
    }
    Piece { a, b, value, error }
}

fn adapt<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, cfg: &QuadConfig) -> Result<(f64, f64)> {
    if a == b {
        return Ok((0.0, 0.0));
    }
    let mut pieces = vec![gk15(f, a, b)];
    loop {
        let total: f64 = pieces.iter().map(|p| p.value).sum();
        let err: f64 = pieces.iter().map(|p| p.error).sum();
        if !total.is_finite() {
            return Err(Error::QuadratureFailure(f64::INFINITY));
        }
        if err <= cfg.abs_tol.max(cfg.rel_tol * total.abs()) {
            return Ok((total, err));
        }
        if pieces.len() >= cfg.max_subdivisions {
            return Err(Error::QuadratureFailure(err));
        }
        let (idx, worst) = pieces
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.error.total_cmp(&y.1.error))
            .map(|(i, p)| (i, *p))
            .unwrap();
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a.min(worst.b) || mid >= worst.a.max(worst.b) {
            // interval can no longer be split in floating point
            if err <= 1e3 * cfg.abs_tol.max(cfg.rel_tol * total.abs()) {
                return Ok((total, err));
            }
            return Err(Error::QuadratureFailure(err));
        }
        pieces[idx] = gk15(f, worst.a, mid);
        pieces.push(gk15(f, mid, worst.b));
    }
}

/// Integrates `f` over `[a, b]`; either endpoint may be infinite.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, cfg: &QuadConfig) -> Result<f64> {
    integrate_with_error(f, a, b, cfg).map(|(v, _)| v)
}

/// Like [`integrate`] but also returns the error estimate.
pub fn integrate_with_error<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    cfg: &QuadConfig,
) -> Result<(f64, f64)> {
    integrate_dyn(&f, a, b, cfg)
}

fn integrate_dyn(f: &dyn Fn(f64) -> f64, a: f64, b: f64, cfg: &QuadConfig) -> Result<(f64, f64)> {
    if a > b {
        return integrate_dyn(f, b, a, cfg).map(|(v, e)| (-v, e));
    }
    match (a.is_finite(), b.is_finite()) {
        (true, true) => adapt(&f, a, b, cfg),
        (true, false) => {
            // x = a + t / (1 - t)
            let g = |t: f64| {
                let s = 1.0 - t;
                f(a + t / s) / (s * s)
            };
            adapt(&g, 0.0, 1.0, cfg)
        }
        (false, true) => {
            let g = |t: f64| {
                let s = 1.0 - t;
                f(b - t / s) / (s * s)
            };
            adapt(&g, 0.0, 1.0, cfg)
        }
        (false, false) => {
            let (l, el) = integrate_dyn(f, f64::NEG_INFINITY, 0.0, cfg)?;
            let (r, er) = integrate_dyn(f, 0.0, f64::INFINITY, cfg)?;
            Ok((l + r, el + er))
        }
    }
}

/// Integrates over `[a, b]` splitting at every breakpoint that falls strictly
/// inside the range.
pub fn integrate_with_breaks<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    breaks: &[f64],
    cfg: &QuadConfig,
) -> Result<f64> {
    let mut cuts: Vec<f64> = breaks
        .iter()
        .copied()
        .filter(|&x| x > a && x < b && x.is_finite())
        .collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut edges = Vec::with_capacity(cuts.len() + 2);
    edges.push(a);
    edges.extend(cuts);
    edges.push(b);
    // share the absolute budget across pieces
    let local = QuadConfig {
        abs_tol: cfg.abs_tol / (edges.len() - 1) as f64,
        ..*cfg
    };
    let mut total = 0.0;
    for w in edges.windows(2) {
        total += integrate(&f, w[0], w[1], &local)?;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomials_are_exact() {
        let cfg = QuadConfig::default();
        let v = integrate(|x| x.powi(5) - 2.0 * x * x + 1.0, -1.0, 2.0, &cfg).unwrap();
        let exact = (64.0 - 1.0) / 6.0 - 2.0 * (8.0 + 1.0) / 3.0 + 3.0;
        assert!((v - exact).abs() < 1e-13);
    }

    #[test]
    fn gaussian_over_the_real_line() {
        let cfg = QuadConfig::default();
        let c = (2.0 * std::f64::consts::PI).sqrt();
        let v = integrate(
            |x| (-0.5 * x * x).exp() / c,
            f64::NEG_INFINITY,
            f64::INFINITY,
            &cfg,
        )
        .unwrap();
        assert!((v - 1.0).abs() < 1e-12);
        let m2 = integrate(
            |x| x * x * (-0.5 * x * x).exp() / c,
            f64::NEG_INFINITY,
            f64::INFINITY,
            &cfg,
        )
        .unwrap();
        assert!((m2 - 1.0).abs() < 1e-11);
    }

    #[test]
    fn kinks_handled_with_breaks() {
        let cfg = QuadConfig::default();
        let v = integrate_with_breaks(|x: f64| (-x.abs()).exp(), -3.0, 5.0, &[0.0], &cfg).unwrap();
        let exact = 2.0 - (-3.0f64).exp() - (-5.0f64).exp();
        assert!((v - exact).abs() < 1e-13);
    }

    #[test]
    fn reversed_limits_flip_sign() {
        let cfg = QuadConfig::default();
        let a = integrate(|x| x.cos(), 0.0, 1.0, &cfg).unwrap();
        let b = integrate(|x| x.cos(), 1.0, 0.0, &cfg).unwrap();
        assert_eq!(a, -b);
    }

    #[test]
    fn non_integrable_reports_failure() {
        let cfg = QuadConfig {
            max_subdivisions: 50,
            ..QuadConfig::default()
        };
        let r = integrate(|x: f64| 1.0 / x, 0.0, 1.0, &cfg);
        assert!(matches!(r, Err(Error::QuadratureFailure(_))));
    }
}
