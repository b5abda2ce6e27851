//! Maxwell-Boltzmann dynamic structure factor and the quantities derived from
//! it: detailed balance, the dynamic response function, the real
//! correlation functions φ±, and the van Hove cross-section.
//!
//! Energy and momentum transfers are counted positive when they go to the
//! test particle.

use std::f64::consts::PI;

use crate::error::{invalid, Result};
use crate::model::{GasModel, PotentialSpec};
use crate::quadrature::{integrate, QuadratureConfig};

/// `sqrt(2 ln 10^16)`: half-width, in standard deviations, beyond which the
/// energy Gaussian of S(Q, E) drops below 1e-16 of its peak.
pub const ENERGY_TRUNCATION_SIGMAS: f64 = 8.583_939_075_530_8;

/// A (Q, E) argument of the structure factor with Q > 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SfPoint {
    q: f64,
    e: f64,
}

impl SfPoint {
    pub fn new(q: f64, e: f64) -> Result<Self> {
        if !(q > 0.0 && q.is_finite()) {
            return invalid(format!("momentum transfer must be > 0, got {q}"));
        }
        if !e.is_finite() {
            return invalid(format!("energy transfer must be finite, got {e}"));
        }
        Ok(Self { q, e })
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn e(&self) -> f64 {
        self.e
    }

    /// The point (Q, −E).
    pub fn reversed(&self) -> Self {
        Self {
            q: self.q,
            e: -self.e,
        }
    }
}

/// E(Q, P) = ((P+Q)² − P²)/2M.
pub fn energy_transfer(q: &[f64], p: &[f64], mass: f64) -> f64 {
    debug_assert_eq!(q.len(), p.len());
    let pq: f64 = q.iter().zip(p).map(|(a, b)| a * b).sum();
    let qq: f64 = q.iter().map(|a| a * a).sum();
    (2.0 * pq + qq) / (2.0 * mass)
}

/// Scalar form of [`energy_transfer`] for collinear kinematics.
#[inline]
pub fn energy_transfer_1d(q: f64, p: f64, mass: f64) -> f64 {
    (2.0 * p * q + q * q) / (2.0 * mass)
}

/// Unchecked S(Q, E) for Q ≠ 0, used in inner loops.
#[inline]
pub fn s_mb_unchecked(q: f64, e: f64, gas: &GasModel) -> f64 {
    let q = q.abs();
    let m = gas.mass();
    let beta = gas.beta();
    let u = (2.0 * m * e + q * q) / q;
    (beta * m / (2.0 * PI)).sqrt() / q * (-beta / (8.0 * m) * u * u).exp()
}

/// Dynamic structure factor of a free Maxwell-Boltzmann gas.
pub fn s_mb(point: SfPoint, gas: &GasModel) -> f64 {
    s_mb_unchecked(point.q, point.e, gas)
}

/// Energy window [E₀ − kσ, E₀ + kσ] outside which S(Q, ·) is below 1e-16 of
/// its peak; E₀ = −Q²/2m is the recoil peak and σ² = Q²/βm.
pub fn energy_window(q: f64, gas: &GasModel) -> (f64, f64) {
    let center = -q * q / (2.0 * gas.mass());
    let sigma = q / (gas.beta() * gas.mass()).sqrt();
    (
        center - ENERGY_TRUNCATION_SIGMAS * sigma,
        center + ENERGY_TRUNCATION_SIGMAS * sigma,
    )
}

/// S(Q, E) − e^{−βE} S(−Q, −E); S depends on Q through |Q| only.
pub fn detailed_balance_residual(point: SfPoint, gas: &GasModel) -> f64 {
    let forward = s_mb(point, gas);
    let backward = s_mb(point.reversed(), gas);
    forward - (-gas.beta() * point.e).exp() * backward
}

/// χ''(Q, E) = π (1 − e^{βE}) S(Q, E).
pub fn response_function(point: SfPoint, gas: &GasModel) -> f64 {
    if point.e == 0.0 {
        return 0.0;
    }
    -PI * (gas.beta() * point.e).exp_m1() * s_mb(point, gas)
}

/// (1 − e^{x}) coth(x/2), whose removable singularity at x = 0 has limit −2.
///
/// Algebraically the product equals −(1 + e^{x}); that form is used
/// everywhere since it has no cancellation.
pub fn coth_weight(x: f64) -> f64 {
    -(1.0 + x.exp())
}

fn negative_energy_window(q: f64, gas: &GasModel) -> Option<(f64, f64)> {
    let (lo, hi) = energy_window(q, gas);
    let hi = hi.min(0.0);
    (hi > lo).then_some((lo, hi))
}

fn check_q(q: f64) -> Result<()> {
    if q > 0.0 && q.is_finite() {
        Ok(())
    } else {
        invalid(format!("momentum transfer must be > 0, got {q}"))
    }
}

/// φ⁻(Q, t) = −2 ∫_{−∞}^0 dE sin(Et) (1 − e^{βE}) S(Q, E).
pub fn fdt_phi_minus(q: f64, t: f64, gas: &GasModel, quad: &QuadratureConfig) -> Result<f64> {
    check_q(q)?;
    let Some((lo, hi)) = negative_energy_window(q, gas) else {
        return Ok(0.0);
    };
    let beta = gas.beta();
    let est = integrate(
        |e| (e * t).sin() * -(beta * e).exp_m1() * s_mb_unchecked(q, e, gas),
        lo,
        hi,
        quad,
    )?;
    Ok(-2.0 * est.value)
}

/// φ⁺(Q, t) = −2 ∫_{−∞}^0 dE cos(Et) coth(βE/2) (1 − e^{βE}) S(Q, E).
pub fn fdt_phi_plus(q: f64, t: f64, gas: &GasModel, quad: &QuadratureConfig) -> Result<f64> {
    check_q(q)?;
    let Some((lo, hi)) = negative_energy_window(q, gas) else {
        return Ok(0.0);
    };
    let beta = gas.beta();
    let est = integrate(
        |e| (e * t).cos() * coth_weight(beta * e) * s_mb_unchecked(q, e, gas),
        lo,
        hi,
        quad,
    )?;
    Ok(-2.0 * est.value)
}

/// Double-differential van Hove cross-section for a probe of mass `mass`
/// scattered from `p_in` to `p_in + q_vec`.
pub fn van_hove_cross_section(
    p_in: &[f64],
    q_vec: &[f64],
    mass: f64,
    gas: &GasModel,
    pot: &PotentialSpec,
) -> Result<f64> {
    let p = norm(p_in);
    let q = norm(q_vec);
    if p == 0.0 {
        return invalid("incoming momentum must be nonzero");
    }
    check_q(q)?;
    let p_out: Vec<f64> = p_in.iter().zip(q_vec).map(|(a, b)| a + b).collect();
    let e = energy_transfer(q_vec, p_in, mass);
    let two_pi = 2.0 * PI;
    let prefactor = two_pi.powi(6) * (mass / two_pi).powi(2);
    Ok(prefactor * (norm(&p_out) / p) * pot.vsq(q) * s_mb_unchecked(q, e, gas))
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}
