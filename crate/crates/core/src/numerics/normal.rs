use super::NumericsError;

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Upper tail `1 − Φ(x)` without cancellation.
pub fn normal_sf(x: f64) -> f64 {
    0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
}

/// Two-sided p-value for a standard normal statistic.
pub fn two_sided_p(z: f64) -> f64 {
    libm::erfc(z.abs() / std::f64::consts::SQRT_2).min(1.0)
}

/// Inverse standard normal CDF (Wichura's AS 241, double precision branch).
#[allow(clippy::excessive_precision)]
pub fn normal_quantile(p: f64) -> Result<f64, NumericsError> {
    if !(p > 0.0 && p < 1.0) {
        return Err(NumericsError::Domain(format!(
            "quantile probability must lie in (0, 1), got {p}"
        )));
    }
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        let num = poly(
            r,
            &[
                3.387_132_872_796_366_608,
                1.331_416_678_917_843_774_5e2,
                1.971_590_950_306_551_442_7e3,
                1.373_169_376_550_946_112_5e4,
                4.592_195_393_154_987_145_7e4,
                6.726_577_092_700_870_085_3e4,
                3.343_057_558_358_812_810_5e4,
                2.509_080_928_730_122_672_7e3,
            ],
        );
        let den = poly(
            r,
            &[
                1.0,
                4.231_333_070_160_091_125_2e1,
                6.871_870_074_920_579_083e2,
                5.394_196_021_424_751_107_7e3,
                2.121_379_430_158_659_586_7e4,
                3.930_789_580_009_271_061e4,
                2.872_908_573_572_194_267_4e4,
                5.226_495_278_852_854_561e3,
            ],
        );
        return Ok(q * num / den);
    }
    let tail = if q < 0.0 { p } else { 1.0 - p };
    let mut r = (-tail.ln()).sqrt();
    let val = if r <= 5.0 {
        r -= 1.6;
        poly(
            r,
            &[
                1.423_437_110_749_683_577_34,
                4.630_337_846_156_545_295_9,
                5.769_497_221_460_691_405_5,
                3.647_848_324_763_204_605_04,
                1.270_458_252_452_368_382_58,
                2.417_807_251_774_506_117_7e-1,
                2.272_384_498_926_918_458_33e-2,
                7.745_450_142_783_414_076_4e-4,
            ],
        ) / poly(
            r,
            &[
                1.0,
                2.053_191_626_637_758_821_87,
                1.676_384_830_183_803_849_4,
                6.897_673_349_851_000_045_5e-1,
                1.481_039_764_274_800_745_9e-1,
                1.519_866_656_361_645_719_66e-2,
                5.475_938_084_995_344_946e-4,
                1.050_750_071_644_416_843_24e-9,
            ],
        )
    } else {
        r -= 5.0;
        poly(
            r,
            &[
                6.657_904_643_501_103_777_2,
                5.463_784_911_164_114_369_9,
                1.784_826_539_917_291_335_8,
                2.965_605_718_285_048_912_3e-1,
                2.653_218_952_657_612_309_3e-2,
                1.242_660_947_388_078_438_6e-3,
                2.711_555_568_743_487_578_15e-5,
                2.010_334_399_292_288_132_65e-7,
            ],
        ) / poly(
            r,
            &[
                1.0,
                5.998_322_065_558_879_376_9e-1,
                1.369_298_809_227_358_053_1e-1,
                1.487_536_129_085_061_485_25e-2,
                7.868_691_311_456_132_591e-4,
                1.846_318_317_510_054_681_8e-5,
                1.421_511_758_316_445_888_7e-7,
                2.044_263_103_389_939_785_64e-15,
            ],
        )
    };
    Ok(if q < 0.0 { -val } else { val })
}

// Horner, coefficients in ascending order.
fn poly(x: f64, c: &[f64]) -> f64 {
    c.iter().rev().fold(0.0, |acc, &ci| acc * x + ci)
}

#[cfg(test)]
mod tests {
    use super::*;

    // Independent Φ: Maclaurin series of erf near 0, Lentz continued fraction for erfc in the tail.
    fn oracle_cdf(x: f64) -> f64 {
        let z = x.abs() / std::f64::consts::SQRT_2;
        let upper = if z < 2.5 {
            let mut term = z;
            let mut sum = z;
            let mut k = 0.0;
            loop {
                k += 1.0;
                term *= -z * z / k;
                let add = term / (2.0 * k + 1.0);
                sum += add;
                if add.abs() < 1e-18 {
                    break;
                }
            }
            let erf = 2.0 / std::f64::consts::PI.sqrt() * sum;
            0.5 * (1.0 - erf)
        } else {
            // erfc(z) = exp(-z²)/√π · 1/(z + (1/2)/(z + 1/(z + (3/2)/(z + ...))))
            let tiny = 1e-300;
            let mut f = z;
            let mut c = z;
            let mut d = 0.0;
            for m in 1..500 {
                let a = m as f64 / 2.0;
                d = z + a * d;
                if d.abs() < tiny {
                    d = tiny;
                }
                c = z + a / c;
                if c.abs() < tiny {
                    c = tiny;
                }
                d = 1.0 / d;
                let delta = c * d;
                f *= delta;
                if (delta - 1.0).abs() < 1e-16 {
                    break;
                }
            }
            0.5 * (-z * z).exp() / std::f64::consts::PI.sqrt() / f
        };
        if x >= 0.0 {
            1.0 - upper
        } else {
            upper
        }
    }

    fn oracle_quantile(p: f64) -> f64 {
        let (mut lo, mut hi) = (-10.0, 10.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if oracle_cdf(mid) < p {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn oracle_cdf_known_value() {
        // Φ(1.959963984540054) = 0.975
        assert!((oracle_cdf(1.959_963_984_540_054) - 0.975).abs() < 1e-14);
        assert!((oracle_cdf(-3.090_232_306_167_813_5) - 0.001).abs() < 1e-14);
    }

    #[test]
    fn median_is_zero() {
        assert_eq!(normal_quantile(0.5).unwrap(), 0.0);
    }

    #[test]
    fn upper_975() {
        let z = normal_quantile(0.975).unwrap();
        assert!((z - 1.959_964).abs() < 1e-6);
        assert!((z - oracle_quantile(0.975)).abs() < 1e-9);
    }

    #[test]
    fn symmetry() {
        let a = normal_quantile(0.31).unwrap();
        let b = normal_quantile(0.69).unwrap();
        assert!((a + b).abs() < 1e-15);
    }

    #[test]
    fn matches_bisection_oracle() {
        for i in 1..1000 {
            let p = i as f64 / 1000.0;
            let z = normal_quantile(p).unwrap();
            assert!((z - oracle_quantile(p)).abs() < 1e-9, "p = {p}");
        }
        for &p in &[1e-10, 1e-7, 1e-5, 1.0 - 1e-7] {
            let z = normal_quantile(p).unwrap();
            assert!((z - oracle_quantile(p)).abs() < 1e-9, "p = {p}");
        }
    }

    #[test]
    fn round_trip_grid() {
        for i in 1..1000 {
            let p = i as f64 / 1000.0;
            let back = normal_cdf(normal_quantile(p).unwrap());
            assert!((back - p).abs() < 1e-9, "p = {p}");
        }
    }

    #[test]
    fn domain_errors() {
        for p in [0.0, 1.0, -0.1, 1.5, f64::NAN] {
            assert!(normal_quantile(p).is_err());
        }
    }

    #[test]
    fn p_values() {
        assert!((two_sided_p(1.959_963_984_540_054) - 0.05).abs() < 1e-12);
        assert_eq!(two_sided_p(0.0), 1.0);
        assert!((normal_sf(0.0) - 0.5).abs() < 1e-16);
    }
}
