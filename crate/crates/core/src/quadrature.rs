//! Globally adaptive Gauss-Kronrod (G10/K21) quadrature on finite intervals.
//!
//! Infinite ranges are handled by the callers, which truncate where their
//! integrands fall below double precision relative to the peak.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerances and limits of the adaptive integrator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadratureConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_subdivisions: usize,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            abs_tol: 1e-10,
            rel_tol: 1e-10,
            max_subdivisions: 4000,
        }
    }
}

impl QuadratureConfig {
    pub fn with_tolerance(abs_tol: f64, rel_tol: f64) -> Self {
        Self {
            abs_tol,
            rel_tol,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_208_965_080_656,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

// 10-point Gauss weights for XGK[1], XGK[3], ..., XGK[9]
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

fn kronrod21<F>(f: &mut F, a: f64, b: f64) -> Result<Segment>
where
    F: FnMut(f64) -> Result<f64>,
{
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center)?;
    let mut res_g = 0.0;
    let mut res_k = WGK[10] * fc;
    let mut res_abs = res_k.abs();
    let mut fv1 = [0.0; 10];
    let mut fv2 = [0.0; 10];
    for j in 0..5 {
        let jt = 2 * j + 1;
        let x = half * XGK[jt];
        let f1 = f(center - x)?;
        let f2 = f(center + x)?;
        fv1[jt] = f1;
        fv2[jt] = f2;
        res_g += WG[j] * (f1 + f2);
        res_k += WGK[jt] * (f1 + f2);
        res_abs += WGK[jt] * (f1.abs() + f2.abs());
    }
    for j in 0..5 {
        let jt = 2 * j;
        let x = half * XGK[jt];
        let f1 = f(center - x)?;
        let f2 = f(center + x)?;
        fv1[jt] = f1;
        fv2[jt] = f2;
        res_k += WGK[jt] * (f1 + f2);
        res_abs += WGK[jt] * (f1.abs() + f2.abs());
    }
    let mean = 0.5 * res_k;
    let mut res_asc = WGK[10] * (fc - mean).abs();
    for j in 0..10 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let abs_half = half.abs();
    res_abs *= abs_half;
    res_asc *= abs_half;
    let mut error = ((res_k - res_g) * half).abs();
    if res_asc != 0.0 && error != 0.0 {
        error = res_asc * (200.0 * error / res_asc).powf(1.5).min(1.0);
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        error = error.max(50.0 * f64::EPSILON * res_abs);
    }
    Ok(Segment {
        a,
        b,
        value: res_k * half,
        error,
    })
}

/// ∫_a^b f(x) dx for an integrand that may itself fail.
pub fn integrate_fallible<F>(mut f: F, a: f64, b: f64, cfg: &QuadratureConfig) -> Result<Estimate>
where
    F: FnMut(f64) -> Result<f64>,
{
    if a == b {
        return Ok(Estimate {
            value: 0.0,
            error: 0.0,
        });
    }
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "quadrature bounds must be finite, got [{a}, {b}]"
        )));
    }
    let mut segments = vec![kronrod21(&mut f, a, b)?];
    loop {
        let value: f64 = segments.iter().map(|s| s.value).sum();
        let error: f64 = segments.iter().map(|s| s.error).sum();
        let tolerance = cfg.abs_tol.max(cfg.rel_tol * value.abs());
        if error <= tolerance {
            return Ok(Estimate { value, error });
        }
        if segments.len() >= cfg.max_subdivisions {
            return Err(Error::Quadrature {
                estimate: value,
                error,
                tolerance,
            });
        }
        let (worst, _) = segments
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.error.total_cmp(&y.1.error))
            .expect("at least one segment");
        let seg = segments.swap_remove(worst);
        let mid = 0.5 * (seg.a + seg.b);
        if mid <= seg.a || mid >= seg.b {
            // interval can no longer be split in floating point
            return Err(Error::Quadrature {
                estimate: value,
                error,
                tolerance,
            });
        }
        segments.push(kronrod21(&mut f, seg.a, mid)?);
        segments.push(kronrod21(&mut f, mid, seg.b)?);
    }
}

/// ∫_a^b f(x) dx.
pub fn integrate<F>(mut f: F, a: f64, b: f64, cfg: &QuadratureConfig) -> Result<Estimate>
where
    F: FnMut(f64) -> f64,
{
    integrate_fallible(|x| Ok(f(x)), a, b, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_rule_is_exact_for_high_degree_polynomials() {
        let mut f = |x: f64| Ok(x.powi(30) - 3.0 * x.powi(7) + 1.0);
        let seg = kronrod21(&mut f, -1.0, 2.0).unwrap();
        let exact = (2f64.powi(31) + 1.0) / 31.0 - 3.0 * (2f64.powi(8) - 1.0) / 8.0 + 3.0;
        assert!((seg.value - exact).abs() < 1e-9 * exact.abs());
    }

    #[test]
    fn gaussian_integral() {
        let cfg = QuadratureConfig::with_tolerance(1e-14, 1e-13);
        let est = integrate(|x| (-x * x).exp(), -12.0, 12.0, &cfg).unwrap();
        assert!((est.value - std::f64::consts::PI.sqrt()).abs() < 1e-13);
    }

    #[test]
    fn oscillatory_integral() {
        let cfg = QuadratureConfig::default();
        let est = integrate(|x| (50.0 * x).sin() * x, 0.0, 3.0, &cfg).unwrap();
        let exact = ((150.0f64).sin() - 150.0 * (150.0f64).cos()) / 2500.0;
        assert!((est.value - exact).abs() < 1e-10);
    }

    #[test]
    fn endpoint_singularity_converges() {
        let cfg = QuadratureConfig::with_tolerance(1e-10, 1e-10);
        let est = integrate(|x: f64| 1.0 / x.sqrt(), 0.0, 1.0, &cfg).unwrap();
        assert!((est.value - 2.0).abs() < 1e-8);
    }

    #[test]
    fn exhausted_budget_is_reported() {
        let cfg = QuadratureConfig {
            abs_tol: 1e-15,
            rel_tol: 0.0,
            max_subdivisions: 3,
        };
        let err = integrate(|x| (1.0 / x).sin(), 1e-6, 1.0, &cfg).unwrap_err();
        assert!(matches!(err, Error::Quadrature { .. }));
    }

    #[test]
    fn failing_integrand_propagates() {
        let cfg = QuadratureConfig::default();
        let res = integrate_fallible(|_| Err(Error::Fit("boom".into())), 0.0, 1.0, &cfg);
        assert!(matches!(res, Err(Error::Fit(_))));
    }
}
