//! Special functions used by the closed-form risk expressions.
//!
//! `erf`, `erfc` and `lgamma` come from `libm` (a port of the musl/fdlibm
//! routines, accurate to about one ulp). The inverse normal CDF is Wichura's
//! AS 241 (PPND16), which is good to roughly 1e-16 relative.

use crate::error::{Error, Result};

/// `ln Γ(x)` for `x > 0`.
pub fn log_gamma(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::Domain {
            function: "log_gamma",
            value: x,
            domain: "(0, inf)",
        });
    }
    Ok(ln_gamma(x))
}

/// `ln B(a, b)` for `a, b > 0`.
pub fn log_beta(a: f64, b: f64) -> Result<f64> {
    for v in [a, b] {
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::Domain {
                function: "log_beta",
                value: v,
                domain: "(0, inf)",
            });
        }
    }
    Ok(ln_beta(a, b))
}

#[inline]
pub(crate) fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

#[inline]
pub(crate) fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

#[inline]
pub fn erf(x: f64) -> f64 {
    libm::erf(x)
}

#[inline]
pub fn erfc(x: f64) -> f64 {
    libm::erfc(x)
}

/// Standard normal CDF, via `erfc` so the lower tail keeps relative accuracy.
#[inline]
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Inverse of the standard normal CDF on the open interval (0, 1).
pub fn inv_norm_cdf(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain {
            function: "inv_norm_cdf",
            value: p,
            domain: "(0, 1)",
        });
    }
    Ok(ppnd16(p))
}

fn poly(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

// AS 241 coefficients, lowest order first.
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
    6.871_870_074_920_579e2,
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
    1.481_039_764_274_800_7e-1,
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
    2.044_263_103_389_939_7e-15,
];

fn ppnd16(p: f64) -> f64 {
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        return q * poly(&A, r) / poly(&B, r);
    }
    let r = if q < 0.0 { p } else { 1.0 - p };
    let r = (-r.ln()).sqrt();
    let x = if r <= 5.0 {
        let r = r - 1.6;
        poly(&C, r) / poly(&D, r)
    } else {
        let r = r - 5.0;
        poly(&E, r) / poly(&F, r)
    };
    if q < 0.0 {
        -x
    } else {
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn factorial(n: u64) -> f64 {
        (1..=n).map(|k| k as f64).product()
    }

    #[test]
    fn log_gamma_factorials() {
        assert_eq!(log_gamma(1.0).unwrap(), 0.0);
        assert_eq!(log_gamma(2.0).unwrap(), 0.0);
        assert!((log_gamma(5.0).unwrap() - 24f64.ln()).abs() < 1e-15);
        for n in 1..=20u64 {
            let want = factorial(n - 1).ln();
            let got = log_gamma(n as f64).unwrap();
            let rel = if want == 0.0 { got.abs() } else { ((got - want) / want).abs() };
            assert!(rel <= 1e-12, "n={n} got={got} want={want}");
        }
    }

    #[test]
    fn log_gamma_half_integers_and_large_arguments() {
        // Γ(1/2) = √π and Γ(x+1) = xΓ(x)
        let sqrt_pi = std::f64::consts::PI.sqrt();
        assert!((log_gamma(0.5).unwrap() - sqrt_pi.ln()).abs() < 1e-15);
        for &x in &[0.3, 1.7, 12.25, 987.5, 45_000.125, 999_999.0] {
            let lhs = log_gamma(x + 1.0).unwrap();
            let rhs = x.ln() + log_gamma(x).unwrap();
            assert!(((lhs - rhs) / lhs).abs() <= 1e-12, "x={x}");
        }
        // Stirling series as an independent route at 1e6.
        let x = 1.0e6_f64;
        let stirling = (x - 0.5) * x.ln() - x + 0.5 * (2.0 * std::f64::consts::PI).ln()
            + 1.0 / (12.0 * x)
            - 1.0 / (360.0 * x.powi(3));
        let got = log_gamma(x).unwrap();
        assert!(((got - stirling) / stirling).abs() <= 1e-12);
    }

    #[test]
    fn log_beta_matches_gamma_definition() {
        // B(2,3) = 1/12
        assert!((log_beta(2.0, 3.0).unwrap() - (1.0f64 / 12.0).ln()).abs() < 1e-14);
        assert!((log_beta(1.0, 1.0).unwrap()).abs() < 1e-15);
        assert!(log_beta(0.0, 1.0).is_err());
        assert!(log_beta(1.0, -2.0).is_err());
    }

    #[test]
    fn log_gamma_domain() {
        assert!(log_gamma(0.0).is_err());
        assert!(log_gamma(-1.5).is_err());
        assert!(log_gamma(f64::NAN).is_err());
    }

    #[test]
    fn erf_reference_values() {
        assert_eq!(erf(0.0), 0.0);
        // Abramowitz & Stegun table values
        let table = [
            (0.3, 0.328_626_759_459_127_4),
            (1.0, 0.842_700_792_949_714_9),
            (1.8, 0.989_090_501_635_730_7),
            (3.5, 0.999_999_256_901_627_7),
        ];
        for (x, want) in table {
            assert!((erf(x) - want).abs() <= 1e-12, "x={x}");
            assert_eq!(erf(-x), -erf(x));
        }
        assert!((erfc(1.0) - (1.0 - erf(1.0))).abs() < 1e-15);
    }

    #[test]
    fn inv_norm_cdf_median_and_roundtrip() {
        assert_eq!(inv_norm_cdf(0.5).unwrap(), 0.0);
        assert!((inv_norm_cdf(0.975).unwrap() - 1.959_963_984_540_054).abs() < 1e-12);
        assert!((inv_norm_cdf(0.005).unwrap() + 2.575_829_303_548_901).abs() < 1e-12);
        for &p in &[1e-15, 1e-10, 1e-5, 0.01, 0.2, 0.5, 0.7, 0.99, 1.0 - 1e-10, 1.0 - 1e-15] {
            let x = inv_norm_cdf(p).unwrap();
            // Φ(x) = p, compared through the density-scaled error
            let back = if p < 0.5 { norm_cdf(x) } else { 1.0 - norm_cdf(-x) };
            let density = (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
            let dx = (back - p).abs() / density;
            assert!(dx <= 1e-9, "p={p} x={x} dx={dx}");
        }
    }

    #[test]
    fn inv_norm_cdf_domain() {
        assert!(inv_norm_cdf(0.0).is_err());
        assert!(inv_norm_cdf(1.0).is_err());
        assert!(inv_norm_cdf(f64::NAN).is_err());
    }
}
