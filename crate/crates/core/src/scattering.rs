//! Collision operators beyond the Born approximation, written in terms of a
//! scattering amplitude and the Maxwell-Boltzmann gas momentum distribution.

use std::f64::consts::PI;

use log::warn;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::model::{GasModel, ParticleModel};
use crate::quadrature::{integrate, integrate_fallible, QuadratureConfig};
use crate::structure_factor::{energy_transfer, s_mb_unchecked};

pub type Vec3 = [f64; 3];

fn dot(a: &Vec3, b: &Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn norm(a: &Vec3) -> f64 {
    dot(a, a).sqrt()
}

fn axpy(s: f64, x: &Vec3, y: &Vec3) -> Vec3 {
    [s * x[0] + y[0], s * x[1] + y[1], s * x[2] + y[2]]
}

fn scale(s: f64, x: &Vec3) -> Vec3 {
    [s * x[0], s * x[1], s * x[2]]
}

fn cross(a: &Vec3, b: &Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// Two unit vectors spanning the plane orthogonal to the unit vector `n`.
fn orthonormal_pair(n: &Vec3) -> (Vec3, Vec3) {
    let helper = if n[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
    let e1 = cross(n, &helper);
    let e1 = scale(1.0 / norm(&e1), &e1);
    let e2 = cross(n, &e1);
    (e1, e2)
}

/// Elastic scattering amplitude f(p_f, p_i) in relative momenta.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScatteringAmplitude {
    /// f ≡ f0.
    Constant { f0: f64 },
    /// Born amplitude of a Gaussian potential, f = −g exp(−σ²|p_f − p_i|²/2).
    BornGaussian { g: f64, sigma: f64 },
}

impl ScatteringAmplitude {
    pub fn validate(&self) -> Result<()> {
        match *self {
            ScatteringAmplitude::Constant { f0 } if !f0.is_finite() => {
                invalid(format!("amplitude f0 must be finite (got {f0})"))
            }
            ScatteringAmplitude::BornGaussian { g, sigma } if !g.is_finite() || !(sigma > 0.0) => {
                invalid(format!("born amplitude needs finite g and sigma > 0 (got {g}, {sigma})"))
            }
            _ => Ok(()),
        }
    }

    pub fn eval(&self, p_f: &Vec3, p_i: &Vec3) -> Complex64 {
        match *self {
            ScatteringAmplitude::Constant { f0 } => Complex64::new(f0, 0.0),
            ScatteringAmplitude::BornGaussian { g, sigma } => {
                let q = [p_f[0] - p_i[0], p_f[1] - p_i[1], p_f[2] - p_i[2]];
                Complex64::new(-g * (-0.5 * sigma * sigma * dot(&q, &q)).exp(), 0.0)
            }
        }
    }

    /// Transfer beyond which |f|² is below e^{-40} of its peak, if bounded.
    fn support_radius(&self) -> f64 {
        match *self {
            ScatteringAmplitude::Constant { .. } => f64::INFINITY,
            ScatteringAmplitude::BornGaussian { sigma, .. } => 40f64.sqrt() / sigma,
        }
    }
}

/// Decomposition of a vector into parts parallel and perpendicular to a
/// momentum transfer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KinematicSplit {
    pub q_vec: Vec3,
    pub p_perp: Vec3,
    pub p_par: Vec3,
}

impl KinematicSplit {
    pub fn new(v: &Vec3, q_vec: &Vec3) -> Result<Self> {
        let q2 = dot(q_vec, q_vec);
        if !(q2 > 0.0) {
            return invalid("momentum transfer must be nonzero");
        }
        let p_par = scale(dot(v, q_vec) / q2, q_vec);
        let p_perp = axpy(-1.0, &p_par, v);
        Ok(Self {
            q_vec: *q_vec,
            p_perp,
            p_par,
        })
    }
}

/// rel(p, P) = (m*/m) p − (m*/M) P.
pub fn rel_momentum(p: &Vec3, big_p: &Vec3, gas: &GasModel, particle: &ParticleModel) -> Vec3 {
    let ms = particle.reduced_mass(gas);
    axpy(ms / gas.mass(), p, &scale(-ms / particle.mass(), big_p))
}

fn perpendicular_part(p: &Vec3, q_vec: &Vec3) -> Result<Vec3> {
    let split = KinematicSplit::new(p, q_vec)?;
    let tol = 1e-12 * norm(p).max(f64::MIN_POSITIVE);
    if norm(&split.p_par) > tol {
        warn!("gas momentum not orthogonal to the transfer; projecting");
    }
    Ok(split.p_perp)
}

fn amplitude_at(
    p_perp: &Vec3,
    big_p: &Vec3,
    q_vec: &Vec3,
    amp: &ScatteringAmplitude,
    gas: &GasModel,
    particle: &ParticleModel,
) -> Result<Complex64> {
    let big = KinematicSplit::new(big_p, q_vec)?;
    let rel = rel_momentum(p_perp, &big.p_perp, gas, particle);
    Ok(amp.eval(&axpy(-0.5, q_vec, &rel), &axpy(0.5, q_vec, &rel)))
}

/// Argument p⊥ + (m/m*)Q/2 + (m/M)P_∥ of the gas distribution.
fn shifted_gas_momentum(p_perp: &Vec3, big_p: &Vec3, q_vec: &Vec3, gas: &GasModel, particle: &ParticleModel) -> Result<Vec3> {
    let big = KinematicSplit::new(big_p, q_vec)?;
    let ms = particle.reduced_mass(gas);
    let m = gas.mass();
    Ok(axpy(
        m / particle.mass(),
        &big.p_par,
        &axpy(0.5 * m / ms, q_vec, p_perp),
    ))
}

/// L(p, P; Q) in the form that contains the gas distribution at a shifted
/// argument.
pub fn lindblad_l(
    p: &Vec3,
    big_p: &Vec3,
    q_vec: &Vec3,
    amp: &ScatteringAmplitude,
    gas: &GasModel,
    particle: &ParticleModel,
) -> Result<Complex64> {
    let p_perp = perpendicular_part(p, q_vec)?;
    let q = norm(q_vec);
    let ms = particle.reduced_mass(gas);
    let f = amplitude_at(&p_perp, big_p, q_vec, amp, gas, particle)?;
    let arg = shifted_gas_momentum(&p_perp, big_p, q_vec, gas, particle)?;
    let pre = (gas.density() * gas.mass() / (ms * ms * q)).sqrt();
    Ok(f * pre * gas.momentum_density(dot(&arg, &arg)).sqrt())
}

/// L(p, P; Q) written with the transverse gas distribution and √S.
pub fn lindblad_l_rewritten(
    p: &Vec3,
    big_p: &Vec3,
    q_vec: &Vec3,
    amp: &ScatteringAmplitude,
    gas: &GasModel,
    particle: &ParticleModel,
) -> Result<Complex64> {
    let p_perp = perpendicular_part(p, q_vec)?;
    let q = norm(q_vec);
    let ms = particle.reduced_mass(gas);
    let f = amplitude_at(&p_perp, big_p, q_vec, amp, gas, particle)?;
    let e = energy_transfer(q_vec, big_p, particle.mass());
    let pre = (gas.density() / (ms * ms)).sqrt();
    let mu_t = gas.transverse_momentum_density(dot(&p_perp, &p_perp));
    Ok(f * pre * mu_t.sqrt() * s_mb_unchecked(q, e, gas).sqrt())
}

/// The three printed forms of the gas-distribution identity, in order.
pub fn mb_identity_forms(
    p_perp: &Vec3,
    big_p: &Vec3,
    q_vec: &Vec3,
    gas: &GasModel,
    particle: &ParticleModel,
) -> Result<[f64; 3]> {
    let p_perp = perpendicular_part(p_perp, q_vec)?;
    let q = norm(q_vec);
    let m = gas.mass();
    let first_arg = shifted_gas_momentum(&p_perp, big_p, q_vec, gas, particle)?;
    let first = m / q * gas.momentum_density(dot(&first_arg, &first_arg));

    let e = energy_transfer(q_vec, big_p, particle.mass());
    let middle_arg = axpy(0.5 * (2.0 * m * e + q * q) / (q * q), q_vec, &p_perp);
    let middle = m / q * gas.momentum_density(dot(&middle_arg, &middle_arg));

    let last = gas.transverse_momentum_density(dot(&p_perp, &p_perp)) * s_mb_unchecked(q, e, gas);
    Ok([first, middle, last])
}

/// (m/Q) μ(p⊥ + (m/m*)Q/2 + (m/M)P_∥) − μ⊥(p⊥) S(Q, E(Q, P)).
pub fn mb_identity_residual(
    p_perp: &Vec3,
    big_p: &Vec3,
    q_vec: &Vec3,
    gas: &GasModel,
    particle: &ParticleModel,
) -> Result<f64> {
    let [first, _, last] = mb_identity_forms(p_perp, big_p, q_vec, gas, particle)?;
    Ok(first - last)
}

const ANGULAR_NODES: usize = 16;

/// ∫_{Q⊥} d²p |f(rel⊥ − Q/2, rel⊥ + Q/2)|² μ⊥(p), in polar coordinates with
/// u = βr²/2m radially and a periodic trapezoid rule in angle.
fn transverse_average(
    big_p: &Vec3,
    q_vec: &Vec3,
    amp: &ScatteringAmplitude,
    gas: &GasModel,
    particle: &ParticleModel,
    quad: &QuadratureConfig,
) -> Result<f64> {
    let q = norm(q_vec);
    let (e1, e2) = orthonormal_pair(&scale(1.0 / q, q_vec));
    let radius_of = |u: f64| (2.0 * gas.mass() * u / gas.beta()).sqrt();
    let est = integrate_fallible(
        |u| {
            let r = radius_of(u);
            let mut acc = 0.0;
            for k in 0..ANGULAR_NODES {
                let phi = 2.0 * PI * k as f64 / ANGULAR_NODES as f64;
                let p = axpy(r * phi.sin(), &e2, &scale(r * phi.cos(), &e1));
                acc += amplitude_at(&p, big_p, q_vec, amp, gas, particle)?.norm_sqr();
            }
            Ok(acc / ANGULAR_NODES as f64 * (-u).exp())
        },
        0.0,
        40.0,
        quad,
    )?;
    Ok(est.value)
}

/// M_out(P) = ∫d³Q ∫_{Q⊥} d²p |L(p, P; Q)|², the total collision rate at
/// sharp momentum P.
pub fn total_rate_full(
    big_p: &Vec3,
    amp: &ScatteringAmplitude,
    gas: &GasModel,
    particle: &ParticleModel,
    quad: &QuadratureConfig,
) -> Result<f64> {
    amp.validate()?;
    let pn = norm(big_p);
    let axis = if pn > 0.0 { scale(1.0 / pn, big_p) } else { [0.0, 0.0, 1.0] };
    let (side, _) = orthonormal_pair(&axis);
    let ms = particle.reduced_mass(gas);
    let m = gas.mass();
    let mass = particle.mass();
    // beyond q_max the energy Gaussian of S is below e^{-40}
    let q_kin = ms / m * ((320.0 * m / gas.beta()).sqrt() + 2.0 * m / mass * pn);
    let q_max = q_kin.min(amp.support_radius());
    let pre = gas.density() / (ms * ms);
    let inner_quad = QuadratureConfig {
        abs_tol: quad.abs_tol * 1e-2,
        rel_tol: quad.rel_tol * 1e-2,
        ..*quad
    };

    let angular = |q: f64| -> Result<f64> {
        if q == 0.0 {
            return Ok(0.0);
        }
        let est = integrate_fallible(
            |c| {
                let s = (1.0 - c * c).max(0.0).sqrt();
                let q_vec = axpy(q * c, &axis, &scale(q * s, &side));
                let e = (2.0 * q * pn * c + q * q) / (2.0 * mass);
                let sf = s_mb_unchecked(q, e, gas);
                if sf == 0.0 {
                    return Ok(0.0);
                }
                Ok(sf * transverse_average(big_p, &q_vec, amp, gas, particle, &inner_quad)?)
            },
            -1.0,
            1.0,
            &inner_quad,
        )?;
        Ok(est.value)
    };
    let est = integrate_fallible(|q| Ok(2.0 * PI * q * q * angular(q)?), 0.0, q_max, quad)?;
    Ok(pre * est.value)
}

/// n σ ⟨|v − P/M|⟩ for a constant amplitude, σ = 4π f0², by one-dimensional
/// quadrature of the closed-form angular average over gas velocities.
pub fn classical_constant_rate(big_p: &Vec3, f0: f64, gas: &GasModel, particle: &ParticleModel) -> Result<f64> {
    let vp = norm(big_p) / particle.mass();
    let m = gas.mass();
    let beta = gas.beta();
    let sigma_tot = 4.0 * PI * f0 * f0;
    let mean_speed = (8.0 / (PI * beta * m)).sqrt();
    if vp == 0.0 {
        return Ok(gas.density() * sigma_tot * mean_speed);
    }
    // ⟨|v − u|⟩ over the angle of v is (v² + 3u²)/(3u) for v < u, (3v² + u²)/(3v) else
    let speed_density = |v: f64| {
        4.0 * PI * v * v * (beta * m / (2.0 * PI)).powf(1.5) * (-beta * m * v * v / 2.0).exp()
    };
    let v_max = (80.0 / (beta * m)).sqrt() + vp;
    let cfg = QuadratureConfig::with_tolerance(1e-14, 1e-13);
    let below = integrate(|v| speed_density(v) * (v * v + 3.0 * vp * vp) / (3.0 * vp), 0.0, vp, &cfg)?;
    let above = integrate(|v| speed_density(v) * (3.0 * v * v + vp * vp) / (3.0 * v), vp, v_max.max(vp), &cfg)?;
    Ok(gas.density() * sigma_tot * (below.value + above.value))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn models() -> (GasModel, ParticleModel) {
        (GasModel::new(1.0, 1.0, 0.3).unwrap(), ParticleModel::new(4.0).unwrap())
    }

    #[test]
    fn relative_momentum_cases() {
        let gas = GasModel::new(1.0, 2.0, 1.0).unwrap();
        let same = ParticleModel::new(2.0).unwrap();
        let v = [0.3, -1.0, 2.0];
        assert_eq!(rel_momentum(&v, &v, &gas, &same), [0.0; 3]);
        let heavy = ParticleModel::new(2e6).unwrap();
        let r = rel_momentum(&v, &[0.0; 3], &gas, &heavy);
        let ms = heavy.reduced_mass(&gas);
        for i in 0..3 {
            assert_eq!(r[i], ms / 2.0 * v[i]);
            assert!((r[i] - v[i]).abs() <= 1e-5 * v[i].abs());
        }
    }

    #[test]
    fn split_is_orthogonal_and_complete() {
        let v = [1.3, -0.2, 0.7];
        let q = [0.4, 0.9, -1.1];
        let s = KinematicSplit::new(&v, &q).unwrap();
        assert!(dot(&s.p_perp, &q).abs() <= 1e-14 * norm(&v) * norm(&q));
        for i in 0..3 {
            assert!((s.p_perp[i] + s.p_par[i] - v[i]).abs() < 1e-15);
        }
        assert!(KinematicSplit::new(&v, &[0.0; 3]).is_err());
    }

    #[test]
    fn constant_amplitude_factorizes() {
        let (gas, particle) = models();
        let amp = ScatteringAmplitude::Constant { f0: 0.8 };
        let q = [0.0, 0.0, 1.2];
        let p = [0.5, -0.3, 0.0];
        let big_p = [0.2, 1.0, -0.7];
        let l = lindblad_l(&p, &big_p, &q, &amp, &gas, &particle).unwrap();
        let ms = particle.reduced_mass(&gas);
        let arg = shifted_gas_momentum(&p, &big_p, &q, &gas, &particle).unwrap();
        let expected = gas.density() * gas.mass() / (ms * ms * 1.2) * 0.64 * gas.momentum_density(dot(&arg, &arg));
        assert!((l.norm_sqr() - expected).abs() <= 1e-14 * expected);
        assert!(lindblad_l(&p, &big_p, &[0.0; 3], &amp, &gas, &particle).is_err());
    }

    #[test]
    fn identity_at_rest() {
        let (gas, particle) = models();
        for q in [0.1, 1.0, 3.0] {
            let forms = mb_identity_forms(&[0.4, 0.1, 0.0], &[0.0; 3], &[0.0, 0.0, q], &gas, &particle).unwrap();
            assert!((forms[0] - forms[2]).abs() <= 1e-12 * forms[2]);
        }
    }

    #[test]
    fn born_amplitude_depends_on_transfer_only() {
        let amp = ScatteringAmplitude::BornGaussian { g: 1.5, sigma: 0.7 };
        let a = amp.eval(&[1.0, 2.0, 3.0], &[0.5, 2.0, 3.0]);
        let b = amp.eval(&[-4.0, 0.0, 1.0], &[-4.5, 0.0, 1.0]);
        assert_eq!(a, b);
        assert_eq!(a.im, 0.0);
    }

    fn random_vec(rng: &mut ChaCha8Rng, s: f64) -> Vec3 {
        [
            s * rng.sample::<f64, _>(StandardNormal),
            s * rng.sample::<f64, _>(StandardNormal),
            s * rng.sample::<f64, _>(StandardNormal),
        ]
    }

    proptest! {
        #[test]
        fn identity_forms_agree(
            seed in 0u64..u64::MAX, beta in 0.2f64..5.0, m in 0.2f64..5.0, big_m in 0.5f64..50.0,
        ) {
            let gas = GasModel::new(beta, m, 0.5).unwrap();
            let particle = ParticleModel::new(big_m).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let q = random_vec(&mut rng, 1.0);
            prop_assume!(norm(&q) > 1e-3);
            let p = KinematicSplit::new(&random_vec(&mut rng, (m / beta).sqrt()), &q).unwrap().p_perp;
            let big_p = random_vec(&mut rng, (big_m / beta).sqrt());
            let forms = mb_identity_forms(&p, &big_p, &q, &gas, &particle).unwrap();
            prop_assume!(forms[2] > 1e-290);
            prop_assert!((forms[0] - forms[2]).abs() <= 1e-12 * forms[2]);
            prop_assert!((forms[1] - forms[0]).abs() <= 1e-13 * forms[0]);
            // rescaling β keeps the identity
            let hot = gas.with_beta(2.0 * beta).unwrap();
            let [a, _, c] = mb_identity_forms(&p, &big_p, &q, &hot, &particle).unwrap();
            prop_assume!(c > 1e-290);
            prop_assert!((a - c).abs() <= 1e-12 * c);
        }

        #[test]
        fn rewritten_operator_has_same_modulus(seed in 0u64..u64::MAX, g in 0.1f64..3.0, sigma in 0.1f64..2.0) {
            let (gas, particle) = models();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let q = random_vec(&mut rng, 1.0);
            prop_assume!(norm(&q) > 1e-3);
            let p = KinematicSplit::new(&random_vec(&mut rng, 1.0), &q).unwrap().p_perp;
            let big_p = random_vec(&mut rng, 2.0);
            for amp in [ScatteringAmplitude::BornGaussian { g, sigma }, ScatteringAmplitude::Constant { f0: g }] {
                let a = lindblad_l(&p, &big_p, &q, &amp, &gas, &particle).unwrap().norm();
                let b = lindblad_l_rewritten(&p, &big_p, &q, &amp, &gas, &particle).unwrap().norm();
                prop_assume!(b > 1e-150);
                prop_assert!((a - b).abs() <= 1e-12 * b);
            }
        }
    }

    /// Monte Carlo estimate of ⟨|v − u|⟩ over Maxwell-Boltzmann velocities.
    fn mc_mean_relative_speed(gas: &GasModel, u: &Vec3, samples: usize, seed: u64) -> (f64, f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = 1.0 / (gas.beta() * gas.mass()).sqrt();
        let mut sum = 0.0;
        let mut sum2 = 0.0;
        for _ in 0..samples {
            let v = random_vec(&mut rng, s);
            let d = norm(&axpy(-1.0, u, &v));
            sum += d;
            sum2 += d * d;
        }
        let mean = sum / samples as f64;
        let var = sum2 / samples as f64 - mean * mean;
        (mean, (var / samples as f64).sqrt())
    }

    #[test]
    fn constant_amplitude_rate_is_classical_kinetic_rate() {
        let (gas, particle) = models();
        let f0 = 0.6;
        let amp = ScatteringAmplitude::Constant { f0 };
        let quad = QuadratureConfig::with_tolerance(1e-9, 1e-7);
        let mut last = 0.0;
        for (i, pm) in [0.0, 1.0, 3.0, 6.0].iter().enumerate() {
            let big_p = [0.0, 0.0, *pm];
            let rate = total_rate_full(&big_p, &amp, &gas, &particle, &quad).unwrap();
            let (mean, err) = mc_mean_relative_speed(&gas, &scale(1.0 / particle.mass(), &big_p), 400_000, 7 + i as u64);
            let oracle = gas.density() * 4.0 * PI * f0 * f0 * mean;
            let tol = (0.005 * oracle).max(4.0 * err * gas.density() * 4.0 * PI * f0 * f0);
            assert!((rate - oracle).abs() < tol, "P={pm}: {rate} vs {oracle}");
            let closed = classical_constant_rate(&big_p, f0, &gas, &particle).unwrap();
            assert!((rate - closed).abs() < 1e-6 * closed, "P={pm}: {rate} vs {closed}");
            assert!(rate > last);
            last = rate;
        }
    }

    #[test]
    fn rate_is_isotropic() {
        let (gas, particle) = models();
        let amp = ScatteringAmplitude::BornGaussian { g: 1.0, sigma: 0.8 };
        let quad = QuadratureConfig::with_tolerance(1e-10, 1e-8);
        let base = total_rate_full(&[0.0, 0.0, 2.0], &amp, &gas, &particle, &quad).unwrap();
        let s = 2.0 / 3f64.sqrt();
        for v in [[2.0, 0.0, 0.0], [s, s, -s], [0.0, -1.2, 1.6]] {
            let r = total_rate_full(&v, &amp, &gas, &particle, &quad).unwrap();
            assert!((r - base).abs() < 1e-6 * base);
        }
    }

    #[test]
    fn born_rates_are_proportional_to_structure_factor_rates() {
        // the Born-level rate is γ ∫d³Q |Ṽ|² S with γ = (2π)⁴ n; the ratio to
        // the amplitude form must not depend on P
        let (gas, particle) = models();
        let (g, sigma) = (1.0, 0.8);
        let amp = ScatteringAmplitude::BornGaussian { g, sigma };
        let quad = QuadratureConfig::with_tolerance(1e-10, 1e-8);
        let cfg = QuadratureConfig::with_tolerance(1e-12, 1e-10);
        let mut ratios = Vec::new();
        for pm in [0.0, 1.5, 4.0] {
            let full = total_rate_full(&[0.0, 0.0, pm], &amp, &gas, &particle, &quad).unwrap();
            let born = integrate(
                |q| {
                    if q == 0.0 {
                        return 0.0;
                    }
                    integrate(
                        |c| {
                            let e = (2.0 * q * pm * c + q * q) / (2.0 * particle.mass());
                            s_mb_unchecked(q, e, &gas)
                        },
                        -1.0,
                        1.0,
                        &cfg,
                    )
                    .unwrap()
                    .value
                        * 2.0
                        * PI
                        * q
                        * q
                        * g
                        * g
                        * (-sigma * sigma * q * q).exp()
                },
                0.0,
                10.0,
                &cfg,
            )
            .unwrap()
            .value
                * (2.0 * PI).powi(4)
                * gas.density();
            ratios.push(born / full);
        }
        let ms = particle.reduced_mass(&gas);
        for r in &ratios {
            assert!((r / ratios[0] - 1.0).abs() < 1e-6);
            assert!((r / ((2.0 * PI).powi(4) * ms * ms) - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn classical_rate_closed_form_limits() {
        let (gas, particle) = models();
        let at_rest = classical_constant_rate(&[0.0; 3], 1.0, &gas, &particle).unwrap();
        let slow = classical_constant_rate(&[0.0, 0.0, 1e-6], 1.0, &gas, &particle).unwrap();
        assert!((at_rest - slow).abs() < 1e-9 * at_rest);
        let fast = classical_constant_rate(&[0.0, 0.0, 400.0], 1.0, &gas, &particle).unwrap();
        let v = 100.0;
        let expected = gas.density() * 4.0 * PI * (v + 1.0 / (gas.beta() * gas.mass() * v));
        assert!((fast - expected).abs() < 1e-6 * expected);
    }
}
