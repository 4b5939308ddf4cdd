//! Self-contained special functions: standard normal pdf/cdf/quantile and
//! the Erlang (integer-shape gamma) distribution function.
//!
//! The normal CDF is built on Cody's rational Chebyshev approximations for
//! erf/erfc (double precision, relative error around 1e-16). The quantile
//! couples Acklam's rational approximation with one Newton refinement
//! against [`normal_cdf`], which brings it well below the 1e-9 target. The
//! Erlang CDF is an anchored finite sum accumulated in log space so that
//! shapes in the thousands stay representable.

// coefficient tables and frozen oracle values are quoted exactly as published
#![allow(clippy::excessive_precision)]

use crate::{Error, Result};

/// 1/sqrt(2*pi)
pub const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_677_9;
const FRAC_1_SQRT_PI: f64 = 0.564_189_583_547_756_286_9;
const SQRT_2: f64 = std::f64::consts::SQRT_2;

/// Standard normal density.
pub fn normal_pdf(x: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Standard normal distribution function. Saturates at 0/1 for extreme
/// arguments; absolute error below 1e-14 everywhere.
pub fn normal_cdf(a: f64) -> f64 {
    if a.is_nan() {
        return f64::NAN;
    }
    0.5 * erfc(-a / SQRT_2)
}

/// Inverse of [`normal_cdf`] on (0, 1).
pub fn normal_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain(format!(
            "normal_quantile requires p in (0, 1), got {p}"
        )));
    }
    // Symmetric by construction; 1 - p is exact for p >= 0.5 (Sterbenz),
    // and the lower half keeps full relative precision in the Newton
    // residual because Phi(x) is small there.
    if p > 0.5 {
        Ok(-quantile_lower_half(1.0 - p))
    } else {
        Ok(quantile_lower_half(p))
    }
}

/// Quantile on (0, 0.5]: Acklam start plus one Newton step against the CDF.
fn quantile_lower_half(p: f64) -> f64 {
    let x = acklam_quantile(p);
    let slope = normal_pdf(x);
    if slope > 0.0 {
        x - (normal_cdf(x) - p) / slope
    } else {
        x
    }
}

/// Erlang(k, gamma) distribution function
/// `1 - exp(-gamma x) * sum_{j<k} (gamma x)^j / j!`.
pub fn erlang_cdf(x: f64, k: u32, gamma: f64) -> Result<f64> {
    Ok(1.0 - erlang_sf(x, k, gamma)?)
}

/// Erlang(k, gamma) survival function, exact in both far tails where a
/// plain `1 - cdf` would round away.
pub fn erlang_sf(x: f64, k: u32, gamma: f64) -> Result<f64> {
    if k == 0 {
        return Err(Error::Domain("erlang shape k must be >= 1".into()));
    }
    if !gamma.is_finite() || gamma <= 0.0 {
        return Err(Error::Domain(format!(
            "erlang rate must be positive and finite, got {gamma}"
        )));
    }
    if x.is_nan() || x < 0.0 {
        return Err(Error::Domain(format!("erlang argument must be >= 0, got {x}")));
    }
    if x == 0.0 {
        return Ok(1.0);
    }
    let lam = gamma * x;
    if !lam.is_finite() {
        return Ok(0.0);
    }
    // U(x; k, gamma) = P(Poisson(lam) >= k). Sum whichever Poisson tail is
    // the small one; the other side follows by complement without
    // cancellation, since the summed side never exceeds ~0.6.
    let kahan = |s: &mut f64, c: &mut f64, v: f64| {
        let y = v - *c;
        let t = *s + y;
        *c = (t - *s) - y;
        *s = t;
    };
    if lam < f64::from(k) {
        // cdf = sum_{j >= k} pois_j; term ratio lam/(j+1) < 1 throughout
        let first = u64::from(k);
        let log_first = ln_poisson(first, lam);
        let mut sum = 1.0_f64;
        let mut comp = 0.0_f64;
        let mut cur = 1.0_f64;
        let mut j = first;
        loop {
            cur *= lam / ((j + 1) as f64);
            if cur < 1e-19 {
                break;
            }
            kahan(&mut sum, &mut comp, cur);
            j += 1;
        }
        let log_cdf = log_first + sum.ln();
        let cdf = if log_cdf >= 0.0 { 1.0 } else { log_cdf.exp() };
        Ok((1.0 - cdf).max(0.0))
    } else {
        // sf = sum_{j <= k-1} pois_j; term ratio j/lam < 1 going down
        let first = u64::from(k - 1);
        let log_first = ln_poisson(first, lam);
        let mut sum = 1.0_f64;
        let mut comp = 0.0_f64;
        let mut cur = 1.0_f64;
        let mut j = first;
        while j > 0 {
            cur *= (j as f64) / lam;
            if cur < 1e-19 {
                break;
            }
            kahan(&mut sum, &mut comp, cur);
            j -= 1;
        }
        let log_sf = log_first + sum.ln();
        Ok(if log_sf >= 0.0 { 1.0 } else { log_sf.exp() })
    }
}

/// log Poisson(lam) mass at j.
fn ln_poisson(j: u64, lam: f64) -> f64 {
    -lam + (j as f64) * lam.ln() - ln_factorial(j)
}

/// log(n!) for the Erlang anchor term.
fn ln_factorial(n: u64) -> f64 {
    if n < 2 {
        0.0
    } else {
        ln_gamma((n + 1) as f64)
    }
}

/// Lanczos approximation (g = 7, 9 coefficients), relative error ~1e-14.
fn ln_gamma(z: f64) -> f64 {
    const G: f64 = 7.0;
    const C: [f64; 9] = [
        0.999_999_999_999_809_93,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_13,
        -176.615_029_162_140_59,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_571_6e-6,
        1.505_632_735_149_311_6e-7,
    ];
    debug_assert!(z > 0.0);
    let z = z - 1.0;
    let mut x = C[0];
    for (i, c) in C.iter().enumerate().skip(1) {
        x += c / (z + i as f64);
    }
    let t = z + G + 0.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (z + 0.5) * t.ln() - t + x.ln()
}

// ---------------------------------------------------------------------------
// erf/erfc, W. J. Cody's SPECFUN rational approximations.

const ERF_A: [f64; 5] = [
    3.161_123_743_870_565_6e0,
    1.138_641_541_510_501_56e2,
    3.774_852_376_853_020_2e2,
    3.209_377_589_138_469_47e3,
    1.857_777_061_846_031_53e-1,
];
const ERF_B: [f64; 4] = [
    2.360_129_095_234_412_09e1,
    2.440_246_379_344_441_73e2,
    1.282_616_526_077_372_28e3,
    2.844_236_833_439_170_62e3,
];
const ERFC_C: [f64; 9] = [
    5.641_884_969_886_700_89e-1,
    8.883_149_794_388_375_94e0,
    6.611_919_063_714_162_95e1,
    2.986_351_381_974_001_31e2,
    8.819_522_212_417_690_9e2,
    1.712_047_612_634_070_58e3,
    2.051_078_377_826_071_47e3,
    1.230_339_354_797_997_25e3,
    2.153_115_354_744_038_46e-8,
];
const ERFC_D: [f64; 8] = [
    1.574_492_611_070_983_47e1,
    1.176_939_508_913_124_99e2,
    5.371_811_018_620_098_58e2,
    1.621_389_574_566_690_19e3,
    3.290_799_235_733_459_63e3,
    4.362_619_090_143_247_16e3,
    3.439_367_674_143_721_64e3,
    1.230_339_354_803_749_42e3,
];
const ERFC_P: [f64; 6] = [
    3.053_266_349_612_323_44e-1,
    3.603_448_999_498_044_39e-1,
    1.257_817_261_112_292_46e-1,
    1.608_378_514_874_227_66e-2,
    6.587_491_615_298_378_03e-4,
    1.631_538_713_730_209_78e-2,
];
const ERFC_Q: [f64; 5] = [
    2.568_520_192_289_822_42e0,
    1.872_952_849_923_460_47e0,
    5.279_051_029_514_284_12e-1,
    6.051_834_131_244_131_91e-2,
    2.335_204_976_268_691_85e-3,
];

fn erf(x: f64) -> f64 {
    let ax = x.abs();
    if ax <= 0.46875 {
        let z = x * x;
        let mut num = ERF_A[4] * z;
        let mut den = z;
        for i in 0..3 {
            num = (num + ERF_A[i]) * z;
            den = (den + ERF_B[i]) * z;
        }
        x * (num + ERF_A[3]) / (den + ERF_B[3])
    } else {
        let v = 1.0 - erfc_abs(ax);
        if x < 0.0 {
            -v
        } else {
            v
        }
    }
}

fn erfc(x: f64) -> f64 {
    let ax = x.abs();
    if ax <= 0.46875 {
        return 1.0 - erf(x);
    }
    let v = erfc_abs(ax);
    if x < 0.0 {
        2.0 - v
    } else {
        v
    }
}

/// erfc on (0.46875, inf).
fn erfc_abs(ax: f64) -> f64 {
    if ax >= 26.6 {
        return 0.0; // underflows at ~26.543
    }
    let r = if ax <= 4.0 {
        let mut num = ERFC_C[8] * ax;
        let mut den = ax;
        for i in 0..7 {
            num = (num + ERFC_C[i]) * ax;
            den = (den + ERFC_D[i]) * ax;
        }
        (num + ERFC_C[7]) / (den + ERFC_D[7])
    } else {
        let z = 1.0 / (ax * ax);
        let mut num = ERFC_P[5] * z;
        let mut den = z;
        for i in 0..4 {
            num = (num + ERFC_P[i]) * z;
            den = (den + ERFC_Q[i]) * z;
        }
        let poly = z * (num + ERFC_P[4]) / (den + ERFC_Q[4]);
        (FRAC_1_SQRT_PI - poly) / ax
    };
    // split exp(-x^2) to limit argument rounding
    let ysq = (ax * 16.0).trunc() / 16.0;
    let del = (ax - ysq) * (ax + ysq);
    (-ysq * ysq).exp() * (-del).exp() * r
}

/// Acklam's rational approximation to the normal quantile (abs error ~1e-9
/// before refinement).
fn acklam_quantile(p: f64) -> f64 {
    const A: [f64; 6] = [
        -39.696_830_286_653_8,
        220.946_098_424_521,
        -275.928_510_446_969,
        138.357_751_867_269,
        -30.664_798_066_147_2,
        2.506_628_277_459_24,
    ];
    const B: [f64; 5] = [
        -54.476_098_798_224_1,
        161.585_836_858_041,
        -155.698_979_859_887,
        66.801_311_887_719_7,
        -13.280_681_552_885_7,
    ];
    const C: [f64; 6] = [
        -7.784_894_002_430_29e-3,
        -0.322_396_458_041_136,
        -2.400_758_277_161_84,
        -2.549_732_539_343_73,
        4.374_664_141_464_97,
        2.938_163_982_698_78,
    ];
    const D: [f64; 4] = [
        7.784_695_709_041_46e-3,
        0.322_467_129_070_04,
        2.445_134_137_143,
        3.754_408_661_907_42,
    ];
    const P_LOW: f64 = 0.02425;

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

#[cfg(test)]
mod tests {
    use super::*;

    // Frozen against a 50-digit offline evaluation of Phi and the Erlang sum.
    const PHI_CASES: [(f64, f64); 10] = [
        (-8.0, 6.220_960_574_271_784e-16),
        (-6.0, 9.865_876_450_376_981e-10),
        (-3.0, 1.349_898_031_630_094_5e-3),
        (-1.281_551_565_5, 0.100_000_000_007_827_31),
        (-0.5, 0.308_537_538_725_986_9),
        (0.0, 0.5),
        (0.5, 0.691_462_461_274_013_1),
        (1.0, 0.841_344_746_068_543),
        (1.96, 0.975_002_104_851_779_6),
        (3.0, 0.998_650_101_968_369_9),
    ];

    #[test]
    fn cdf_matches_high_precision_values() {
        for (x, want) in PHI_CASES {
            let got = normal_cdf(x);
            assert!(
                (got - want).abs() <= 1e-12,
                "Phi({x}) = {got}, want {want}"
            );
        }
    }

    #[test]
    fn cdf_saturates() {
        assert_eq!(normal_cdf(40.0), 1.0);
        assert_eq!(normal_cdf(-40.0), 0.0);
        assert!((normal_cdf(8.0) - 0.999_999_999_999_999_4).abs() < 1e-15);
        assert!(normal_cdf(f64::NAN).is_nan());
    }

    #[test]
    fn quantile_known_values() {
        assert_eq!(normal_quantile(0.5).unwrap(), 0.0);
        let q = normal_quantile(0.1).unwrap();
        assert!((q - (-1.281_551_565_544_600_5)).abs() < 1e-8, "got {q}");
        let q = normal_quantile(0.2).unwrap();
        assert!((q - (-0.841_621_233_572_914_2)).abs() < 1e-10, "got {q}");
    }

    #[test]
    fn quantile_rejects_out_of_domain() {
        for p in [0.0, 1.0, -0.1, 1.1, f64::NAN] {
            assert!(normal_quantile(p).is_err(), "p = {p} should be rejected");
        }
    }

    #[test]
    fn quantile_is_symmetric() {
        for p in [0.01, 0.1, 0.25, 0.4, 0.499] {
            let lo = normal_quantile(p).unwrap();
            let hi = normal_quantile(1.0 - p).unwrap();
            assert!((lo + hi).abs() < 1e-12, "p = {p}: {lo} vs {hi}");
        }
        // dyadic p has an exactly representable complement, so the two
        // quantiles are exact negatives, even deep in the tails
        for p in [0.000_976_562_5, 3.814_697_265_625e-6] {
            let lo = normal_quantile(p).unwrap();
            let hi = normal_quantile(1.0 - p).unwrap();
            assert_eq!(lo, -hi, "p = {p}");
        }
    }

    #[test]
    fn quantile_cdf_roundtrip_on_grid() {
        // identity within 1e-8 on [-6, 6]
        let mut x = -6.0;
        while x <= 6.0 {
            let p = normal_cdf(x);
            let back = normal_quantile(p).unwrap();
            assert!((back - x).abs() < 1e-8, "x = {x}, back = {back}");
            x += 0.05;
        }
    }

    #[test]
    fn erlang_shape_one_is_exponential() {
        for (x, g) in [(0.3_f64, 1.0_f64), (1.0, 1.0), (2.5, 0.7), (10.0, 3.0)] {
            let want = 1.0 - (-g * x).exp();
            let got = erlang_cdf(x, 1, g).unwrap();
            assert!((got - want).abs() < 1e-14, "U({x};1,{g}) = {got}, want {want}");
        }
    }

    #[test]
    fn erlang_at_zero_is_zero() {
        assert_eq!(erlang_cdf(0.0, 7, 2.0).unwrap(), 0.0);
        assert_eq!(erlang_sf(0.0, 7, 2.0).unwrap(), 1.0);
    }

    #[test]
    fn erlang_frozen_values() {
        // direct high-precision summation oracle, evaluated offline
        let cases = [
            (5.0, 3u32, 1.0, 0.875_347_980_516_918_9),
            (2.0, 5, 3.0, 0.714_943_499_683_368_8),
            (0.5, 200, 400.0, 0.509_403_418_007_236_33),
        ];
        for (x, k, g, want) in cases {
            let got = erlang_cdf(x, k, g).unwrap();
            assert!(
                (got - want).abs() < 1e-12,
                "U({x};{k},{g}) = {got}, want {want}"
            );
        }
    }

    #[test]
    fn erlang_rejects_bad_parameters() {
        assert!(erlang_cdf(-1.0, 3, 1.0).is_err());
        assert!(erlang_cdf(1.0, 0, 1.0).is_err());
        assert!(erlang_cdf(1.0, 3, 0.0).is_err());
        assert!(erlang_cdf(1.0, 3, -2.0).is_err());
        assert!(erlang_cdf(f64::NAN, 3, 1.0).is_err());
    }

    #[test]
    fn erlang_large_shape_is_stable() {
        // gamma*x far above the shape: CDF pinned to 1, no NaN
        let hi = erlang_cdf(30.0, 10_000, 400.0).unwrap();
        assert!((hi - 1.0).abs() < 1e-12, "got {hi}");
        // gamma*x far below the shape: CDF tiny but finite
        let lo = erlang_cdf(10.0, 10_000, 400.0).unwrap();
        assert!((0.0..1e-100).contains(&lo), "got {lo}");
    }

    // Independent second route: regularized lower incomplete gamma via the
    // Numerical-Recipes series/continued-fraction pair. Shares nothing with
    // the implementation above (log-factorials are summed directly).
    fn reg_lower_gamma(a: f64, x: f64) -> f64 {
        fn ln_gamma_direct(a: f64) -> f64 {
            // a is a positive integer here
            let n = a as u64;
            (2..n).map(|i| (i as f64).ln()).sum()
        }
        if x <= 0.0 {
            return 0.0;
        }
        let lng = ln_gamma_direct(a);
        if x < a + 1.0 {
            // series for P(a, x)
            let mut ap = a;
            let mut sum = 1.0 / a;
            let mut del = sum;
            for _ in 0..10_000 {
                ap += 1.0;
                del *= x / ap;
                sum += del;
                if del.abs() < sum.abs() * 1e-16 {
                    break;
                }
            }
            sum * (-x + a * x.ln() - lng).exp()
        } else {
            // continued fraction for Q(a, x)
            let mut b = x + 1.0 - a;
            let mut c = 1e308;
            let mut d = 1.0 / b;
            let mut h = d;
            for i in 1..10_000 {
                let an = -(i as f64) * (i as f64 - a);
                b += 2.0;
                d = an * d + b;
                if d.abs() < 1e-300 {
                    d = 1e-300;
                }
                c = b + an / c;
                if c.abs() < 1e-300 {
                    c = 1e-300;
                }
                d = 1.0 / d;
                let delta = d * c;
                h *= delta;
                if (delta - 1.0).abs() < 1e-16 {
                    break;
                }
            }
            1.0 - (-x + a * x.ln() - lng).exp() * h
        }
    }

    #[test]
    fn erlang_agrees_with_incomplete_gamma() {
        for k in [1u32, 2, 3, 5, 10, 50, 200, 1000] {
            for t in [0.1, 0.5, 1.0, 2.0] {
                // probe below, at, and above the mean k/gamma
                let gamma = 1.3;
                let x = t * k as f64 / gamma;
                let ours = erlang_cdf(x, k, gamma).unwrap();
                let theirs = reg_lower_gamma(k as f64, gamma * x);
                assert!(
                    (ours - theirs).abs() < 1e-10,
                    "k={k} x={x}: {ours} vs {theirs}"
                );
            }
        }
    }
}

#[cfg(test)]
mod proptests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(256))]

        #[test]
        fn cdf_is_nondecreasing(x1 in -40.0_f64..40.0, x2 in -40.0_f64..40.0) {
            let (lo, hi) = if x1 <= x2 { (x1, x2) } else { (x2, x1) };
            prop_assert!(normal_cdf(lo) <= normal_cdf(hi));
        }

        #[test]
        fn cdf_in_unit_interval(x in -1e6_f64..1e6) {
            let c = normal_cdf(x);
            prop_assert!((0.0..=1.0).contains(&c));
        }

        #[test]
        fn quantile_inverts_cdf(x in -6.0_f64..6.0) {
            let p = normal_cdf(x);
            let back = normal_quantile(p).unwrap();
            prop_assert!((back - x).abs() < 1e-8, "x={x} back={back}");
        }

        #[test]
        fn quantile_is_strictly_increasing(p1 in 1e-9_f64..0.999_999_999, p2 in 1e-9_f64..0.999_999_999) {
            prop_assume!((p1 - p2).abs() > 1e-12);
            let (lo, hi) = if p1 < p2 { (p1, p2) } else { (p2, p1) };
            prop_assert!(normal_quantile(lo).unwrap() < normal_quantile(hi).unwrap());
        }

        #[test]
        fn erlang_is_monotone_in_x(k in 1u32..500, g in 0.05_f64..50.0, x1 in 0.0_f64..200.0, x2 in 0.0_f64..200.0) {
            let (lo, hi) = if x1 <= x2 { (x1, x2) } else { (x2, x1) };
            let a = erlang_cdf(lo, k, g).unwrap();
            let b = erlang_cdf(hi, k, g).unwrap();
            prop_assert!(a <= b + 1e-14, "k={k} g={g}: U({lo})={a} > U({hi})={b}");
            prop_assert!((0.0..=1.0).contains(&a) && (0.0..=1.0).contains(&b));
        }
    }
}
