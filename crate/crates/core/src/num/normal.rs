//! Standard normal distribution and density functions.

use crate::error::{Error, Result};

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Standard normal density.
#[inline]
pub fn std_normal_pdf(x: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Standard normal distribution function Φ(x).
pub fn std_normal_cdf(x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::NonFinite("std_normal_cdf argument"));
    }
    Ok(phi(x))
}

// Cody's rational Chebyshev approximations (ACM TOMS 715), as used by R's pnorm.
const CA: [f64; 5] = [
    2.235_252_035_460_683_9,
    1.610_282_310_685_558_8e2,
    1.067_689_485_460_371e3,
    1.815_498_125_334_356_1e4,
    6.568_233_791_820_745e-2,
];
const CB: [f64; 4] = [
    4.720_258_190_468_824e1,
    9.760_985_517_377_767e2,
    1.026_093_220_861_897_8e4,
    4.550_778_933_502_673e4,
];
const CC: [f64; 9] = [
    3.989_415_120_881_346_7e-1,
    8.883_149_794_388_376,
    9.350_665_613_217_785e1,
    5.972_702_763_948_002e2,
    2.494_537_585_290_372_6e3,
    6.848_190_450_536_282e3,
    1.160_265_143_764_735e4,
    9.842_714_838_383_978e3,
    1.076_557_677_372_019_2e-8,
];
const CD: [f64; 8] = [
    2.226_668_804_432_811_6e1,
    2.353_879_017_826_25e2,
    1.519_377_599_407_554_8e3,
    6.485_558_298_266_761e3,
    1.861_557_164_088_51e4,
    3.490_095_272_114_598e4,
    3.891_200_328_609_327e4,
    1.968_542_967_685_999e4,
];
const CP: [f64; 6] = [
    2.158_985_340_579_569_9e-1,
    1.274_011_611_602_473_6e-1,
    2.223_527_787_064_980_7e-2,
    1.421_619_193_227_893_5e-3,
    2.911_287_495_116_879_2e-5,
    2.307_344_176_494_017_3e-2,
];
const CQ: [f64; 5] = [
    1.284_260_096_144_911_2,
    4.682_382_124_808_651e-1,
    6.598_813_786_892_855e-2,
    3.782_396_332_027_582_4e-3,
    7.297_515_550_839_662e-5,
];

/// exp(−y²/2) without losing precision in y² for large y.
#[inline]
fn half_gauss(y: f64) -> f64 {
    let ysq = (y * 16.0).trunc() / 16.0;
    let del = (y - ysq) * (y + ysq);
    (-ysq * ysq * 0.5).exp() * (-del * 0.5).exp()
}

/// Unchecked Φ; infinite arguments map to 0 or 1.
pub(crate) fn phi(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    let y = x.abs();
    if y <= 0.674_489_75 {
        let (mut num, mut den) = (0.0, 0.0);
        if y > 1e-300 {
            let xsq = x * x;
            num = CA[4] * xsq;
            den = xsq;
            for i in 0..3 {
                num = (num + CA[i]) * xsq;
                den = (den + CB[i]) * xsq;
            }
        }
        return 0.5 + x * (num + CA[3]) / (den + CB[3]);
    }
    // Upper-tail mass 1 − Φ(|x|).
    let tail = if y <= 32f64.sqrt() {
        let mut num = CC[8] * y;
        let mut den = y;
        for i in 0..7 {
            num = (num + CC[i]) * y;
            den = (den + CD[i]) * y;
        }
        half_gauss(y) * (num + CC[7]) / (den + CD[7])
    } else if y < 40.0 {
        let xsq = 1.0 / (x * x);
        let mut num = CP[5] * xsq;
        let mut den = xsq;
        for i in 0..4 {
            num = (num + CP[i]) * xsq;
            den = (den + CQ[i]) * xsq;
        }
        let r = xsq * (num + CP[4]) / (den + CQ[4]);
        half_gauss(y) * (INV_SQRT_2PI - r) / y
    } else {
        0.0
    };
    if x > 0.0 {
        1.0 - tail
    } else {
        tail
    }
}

/// Lower-tail standard normal quantile Φ⁻¹(p) for p in (0, 1).
pub fn std_normal_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "quantile probability must lie in (0, 1), got {p}"
        )));
    }
    Ok(phi_inv(p))
}

// Acklam's rational approximation, relative error ~1.2e-9 before refinement.
const A: [f64; 6] = [
    -3.969_683_028_665_376e1,
    2.209_460_984_245_205e2,
    -2.759_285_104_469_687e2,
    1.383_577_518_672_69e2,
    -3.066_479_806_614_716e1,
    2.506_628_277_459_239,
];
const B: [f64; 5] = [
    -5.447_609_879_822_406e1,
    1.615_858_368_580_409e2,
    -1.556_989_798_598_866e2,
    6.680_131_188_771_972e1,
    -1.328_068_155_288_572e1,
];
const C: [f64; 6] = [
    -7.784_894_002_430_293e-3,
    -3.223_964_580_411_365e-1,
    -2.400_758_277_161_838,
    -2.549_732_539_343_734,
    4.374_664_141_464_968,
    2.938_163_982_698_783,
];
const D: [f64; 4] = [
    7.784_695_709_041_462e-3,
    3.224_671_290_700_398e-1,
    2.445_134_137_142_996,
    3.754_408_661_907_416,
];
const P_LOW: f64 = 0.024_25;

fn acklam(p: f64) -> f64 {
    if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    }
}

/// Unchecked Φ⁻¹: rational start plus one Halley step on Φ.
#[inline]
pub(crate) fn phi_inv(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    // Work in the lower tail so the residual Φ(x) − p keeps relative precision.
    let (p_low, sign) = if p > 0.5 { (1.0 - p, -1.0) } else { (p, 1.0) };
    let mut x = acklam(p_low);
    let e = phi(x) - p_low;
    let u = e * (2.0 * std::f64::consts::PI).sqrt() * (0.5 * x * x).exp();
    x -= u / (1.0 + 0.5 * x * u);
    sign * x
}

#[cfg(test)]
mod tests {
    use super::*;

    const SQRT_2: f64 = std::f64::consts::SQRT_2;

    /// Φ by the Taylor series of erf about 0; exact enough for |x| ≤ 4.
    fn series_cdf(x: f64) -> f64 {
        let z = x / SQRT_2;
        let mut term = z;
        let mut sum = z;
        let mut n = 0.0;
        loop {
            n += 1.0;
            term *= -z * z / n;
            let add = term / (2.0 * n + 1.0);
            sum += add;
            if add.abs() < 1e-18 {
                break;
            }
        }
        0.5 + sum / std::f64::consts::PI.sqrt()
    }

    #[test]
    fn cdf_known_values() {
        assert_eq!(std_normal_cdf(0.0).unwrap(), 0.5);
        assert!((std_normal_cdf(1.6449).unwrap() - 0.95).abs() < 1e-4);
        assert!((std_normal_cdf(-3.0).unwrap() - 0.0013499).abs() < 1e-6);
    }

    #[test]
    fn cdf_matches_series_oracle() {
        for i in -40..=40 {
            let x = i as f64 * 0.1;
            let got = std_normal_cdf(x).unwrap();
            let want = series_cdf(x);
            assert!((got - want).abs() < 1e-12, "x={x}: {got} vs {want}");
        }
    }

    #[test]
    fn cdf_rejects_non_finite() {
        assert!(std_normal_cdf(f64::NAN).is_err());
        assert!(std_normal_cdf(f64::INFINITY).is_err());
    }

    #[test]
    fn cdf_symmetry() {
        for i in 0..=800 {
            let x = i as f64 * 0.01;
            let s = std_normal_cdf(x).unwrap() + std_normal_cdf(-x).unwrap();
            assert!((s - 1.0).abs() <= 1e-14, "x={x}: {s}");
        }
    }

    #[test]
    fn quantile_known_values() {
        assert_eq!(std_normal_quantile(0.5).unwrap(), 0.0);
        assert!((std_normal_quantile(0.975).unwrap() - 1.95996).abs() < 1e-4);
        assert!((std_normal_quantile(0.95).unwrap() - 1.64485).abs() < 1e-4);
    }

    #[test]
    fn quantile_inverts_cdf() {
        for &p in &[1e-12, 1e-6, 0.001, 0.02, 0.1, 0.3, 0.5, 0.7, 0.9, 0.99, 0.999999] {
            let x = std_normal_quantile(p).unwrap();
            let back = std_normal_cdf(x).unwrap();
            assert!((back - p).abs() <= 1e-10, "p={p}: {back}");
        }
    }

    #[test]
    fn quantile_domain() {
        assert!(std_normal_quantile(0.0).is_err());
        assert!(std_normal_quantile(1.0).is_err());
        assert!(std_normal_quantile(f64::NAN).is_err());
    }
}
