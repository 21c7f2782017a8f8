//! Standard normal helpers used by the smoothed estimators and the Wald
//! intervals: density, distribution function, tails on the log scale, and
//! the quantile function.

use libm::{erf, erfc};
use std::f64::consts::{FRAC_1_SQRT_2, PI};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

pub fn pdf(x: f64) -> f64 {
    (-0.5 * x * x - LN_SQRT_2PI).exp()
}

pub fn ln_pdf(x: f64) -> f64 {
    -0.5 * x * x - LN_SQRT_2PI
}

pub fn cdf(x: f64) -> f64 {
    0.5 * erfc(-x * FRAC_1_SQRT_2)
}

/// Upper tail `1 - Φ(x)`, accurate in the right tail.
pub fn sf(x: f64) -> f64 {
    0.5 * erfc(x * FRAC_1_SQRT_2)
}

/// Scaled complementary error function `exp(x²) erfc(x)` for `x >= 0`.
pub fn erfcx(x: f64) -> f64 {
    debug_assert!(x >= 0.0);
    if x < 26.0 {
        (x * x).exp() * erfc(x)
    } else {
        // asymptotic series; the seventh term is below 1e-16 relative here
        let inv2 = 1.0 / (2.0 * x * x);
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..8 {
            term *= -((2 * k - 1) as f64) * inv2;
            sum += term;
        }
        sum / (x * PI.sqrt())
    }
}

/// `ln(1 - Φ(x))`.
pub fn ln_sf(x: f64) -> f64 {
    if x < 0.0 {
        sf(x).ln()
    } else {
        (0.5 * erfcx(x * FRAC_1_SQRT_2)).ln() - 0.5 * x * x
    }
}

/// `ln Φ(x)`.
pub fn ln_cdf(x: f64) -> f64 {
    ln_sf(-x)
}

/// `ln(Φ(hi) - Φ(lo))` for `lo < hi`, accurate in both tails and for short
/// intervals away from the origin.
pub fn ln_cdf_diff(lo: f64, hi: f64) -> f64 {
    if hi <= lo {
        return f64::NEG_INFINITY;
    }
    if lo >= 0.0 {
        ln_tail_diff(lo, hi)
    } else if hi <= 0.0 {
        ln_tail_diff(-hi, -lo)
    } else {
        // opposite signs: the two erf values add without cancellation
        (0.5 * (erf(hi * FRAC_1_SQRT_2) - erf(lo * FRAC_1_SQRT_2))).ln()
    }
}

// ln(Q(a) - Q(b)) for 0 <= a < b
fn ln_tail_diff(a: f64, b: f64) -> f64 {
    if b.is_infinite() {
        return ln_sf(a);
    }
    let ea = erfcx(a * FRAC_1_SQRT_2);
    let eb = erfcx(b * FRAC_1_SQRT_2);
    // ln Q(b) - ln Q(a), with the quadratic part factored to keep short
    // intervals accurate
    let delta = -0.5 * (b - a) * (b + a) + (eb / ea).ln();
    ln_sf(a) + (-delta.exp_m1()).ln()
}

/// Standard normal quantile (Wichura's AS 241 rational approximations),
/// polished with one Newton step on the matching tail.
pub fn quantile(p: f64) -> f64 {
    if p.is_nan() {
        return f64::NAN;
    }
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    let mut x = as241(p);
    let err = if x < 0.0 {
        cdf(x) - p
    } else {
        (1.0 - p) - sf(x)
    };
    let d = pdf(x);
    if d > 0.0 && err.is_finite() {
        // Halley correction on top of Newton
        let u = err / d;
        x -= u / (1.0 + 0.5 * x * u);
    }
    x
}

fn poly(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &k| acc * x + k)
}

fn as241(p: f64) -> f64 {
    const A: [f64; 8] = [
        3.387_132_872_796_366_5,
        1.331_416_678_917_843_8e2,
        1.971_590_950_306_551_3e3,
        1.373_169_376_550_946e4,
        4.592_195_393_154_987e4,
        6.726_577_092_700_87e4,
        3.343_057_558_358_813e4,
        2.509_080_928_730_122_7e3,
    ];
    const B: [f64; 8] = [
        1.0,
        4.231_333_070_160_091e1,
        6.872_871_490_314_39e2,
        5.394_196_021_424_751e3,
        2.121_379_430_158_659_7e4,
        3.930_789_580_009_271e4,
        2.872_908_573_572_194_3e4,
        5.226_495_278_852_545e3,
    ];
    const C: [f64; 8] = [
        1.423_437_110_749_683_5,
        4.630_337_846_156_546,
        5.769_497_221_460_691,
        3.647_848_324_763_204_5,
        1.270_458_252_452_368_4,
        2.417_807_251_774_506e-1,
        2.272_384_498_926_918_4e-2,
        7.745_450_142_783_414e-4,
    ];
    const D: [f64; 8] = [
        1.0,
        2.053_191_626_637_759,
        1.676_384_830_183_803_8,
        6.897_673_349_851e-1,
        1.481_039_764_274_800_8e-1,
        1.519_866_656_361_645_7e-2,
        5.475_938_084_995_345e-4,
        1.050_750_071_644_416_9e-9,
    ];
    const E: [f64; 8] = [
        6.657_904_643_501_103,
        5.463_784_911_164_114,
        1.784_826_539_917_291_3,
        2.965_605_718_285_048_7e-1,
        2.653_218_952_657_612_4e-2,
        1.242_660_947_388_078_4e-3,
        2.711_555_568_743_487_6e-5,
        2.010_334_399_292_288_1e-7,
    ];
    const F: [f64; 8] = [
        1.0,
        5.998_322_065_558_88e-1,
        1.369_298_809_227_358e-1,
        1.487_536_129_085_061_5e-2,
        7.868_691_311_456_133e-4,
        1.846_318_317_510_054_8e-5,
        1.421_511_758_316_446e-7,
        2.043_131_992_708_508_7e-15,
    ];
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180_625 - q * q;
        return q * poly(&A, r) / poly(&B, r);
    }
    let r = if q < 0.0 { p } else { 1.0 - p };
    let r = (-r.ln()).sqrt();
    let v = if r <= 5.0 {
        let r = r - 1.6;
        poly(&C, r) / poly(&D, r)
    } else {
        let r = r - 5.0;
        poly(&E, r) / poly(&F, r)
    };
    if q < 0.0 {
        -v
    } else {
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantile_matches_known_values() {
        assert!((quantile(0.975) - 1.959_963_984_540_054).abs() < 1e-13);
        assert!((quantile(1e-10) + 6.361_340_902_404_056).abs() < 1e-11);
        assert!((quantile(0.5)).abs() < 1e-15);
        assert!((quantile(0.05) + 1.644_853_626_951_472_2).abs() < 1e-12);
    }

    #[test]
    fn log_tails_agree_with_direct_values() {
        for &x in &[-3.0, -0.5, 0.0, 0.7, 2.0, 5.0, 20.0] {
            let direct = sf(x).ln();
            assert!(
                (ln_sf(x) - direct).abs() < 1e-12 * direct.abs().max(1.0),
                "x = {x}"
            );
        }
        // far tail: ln Q(x) ≈ -x²/2 - ln(x √(2π))
        let x = 60.0;
        let approx = -0.5 * x * x - (x * (2.0 * PI).sqrt()).ln() - 1.0 / (x * x);
        assert!((ln_sf(x) - approx).abs() < 1e-6);
    }

    #[test]
    fn cdf_differences_are_accurate() {
        let cases = [
            (-1.0, 2.0),
            (0.5, 0.6),
            (3.0, 3.0001),
            (-7.0, -6.5),
            (40.0, 40.5),
        ];
        for &(lo, hi) in &cases {
            // Simpson's rule on a fine grid as an independent route
            let m = 20_000;
            let h = (hi - lo) / m as f64;
            let mut s = 0.0;
            for i in 0..=m {
                let w = if i == 0 || i == m {
                    1.0
                } else if i % 2 == 1 {
                    4.0
                } else {
                    2.0
                };
                s += w * ln_pdf(lo + i as f64 * h).exp();
            }
            s *= h / 3.0;
            let got = ln_cdf_diff(lo, hi);
            if s > 0.0 {
                assert!(
                    (got - s.ln()).abs() < 1e-9,
                    "({lo}, {hi}): {got} vs {}",
                    s.ln()
                );
            }
        }
    }
}
