//! Finite-volume solver for the Kramers-type equation obeyed by the Wigner
//! function in the Brownian limit, in one spatial dimension.
//!
//! Positions are periodic and advected with first-order upwinding. In the
//! momentum direction the drift-diffusion flux uses exponential fitting, so
//! the sampled thermal Gaussian is an exact discrete stationary state. The
//! momentum ends carry no flux.

use rayon::prelude::*;
use serde::Serialize;

use super::CLCoefficients;
use crate::error::{invalid, Error, Result};
use crate::generator::EvolutionConfig;
use crate::model::ParticleModel;

/// Largest allowed value of the combined explicit step bound.
pub const CFL_LIMIT: f64 = 0.5;

/// W(X, P) on `nx` periodic cells `X_i = x_min + iΔX` and momenta
/// `P_j = (j − n)ΔP`, `j ∈ [0, 2n]`, stored row-major by position.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseSpaceField {
    x_min: f64,
    dx: f64,
    nx: usize,
    dp: f64,
    p_half: usize,
    values: Vec<f64>,
}

impl PhaseSpaceField {
    pub fn new(x_min: f64, dx: f64, nx: usize, dp: f64, p_half: usize, values: Vec<f64>) -> Result<Self> {
        if !(dx > 0.0 && dp > 0.0) || nx < 3 || p_half == 0 || !x_min.is_finite() {
            return invalid("phase-space grid needs dx, dp > 0, at least 3 cells and p_half >= 1");
        }
        let np = 2 * p_half + 1;
        if values.len() != nx * np {
            return invalid(format!("expected {} values, got {}", nx * np, values.len()));
        }
        let field = Self {
            x_min,
            dx,
            nx,
            dp,
            p_half,
            values,
        };
        if field.values.iter().any(|v| !v.is_finite()) || field.min_value() < -1e-12 {
            return invalid("field values must be finite and nonnegative");
        }
        if (field.norm() - 1.0).abs() > 1e-10 {
            return invalid(format!("field must integrate to 1, got {}", field.norm()));
        }
        Ok(field)
    }

    /// Field built from a nonnegative function and normalized on the grid.
    pub fn from_fn(
        x_min: f64,
        dx: f64,
        nx: usize,
        dp: f64,
        p_half: usize,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Self> {
        let np = 2 * p_half + 1;
        let mut values = Vec::with_capacity(nx * np);
        for i in 0..nx {
            for j in 0..np {
                values.push(f(x_min + i as f64 * dx, (j as f64 - p_half as f64) * dp));
            }
        }
        let total: f64 = values.iter().sum::<f64>() * dx * dp;
        if !(total > 0.0) {
            return invalid("field has no weight on the grid");
        }
        values.iter_mut().for_each(|v| *v /= total);
        Self::new(x_min, dx, nx, dp, p_half, values)
    }

    /// Product of a Gaussian in X and a Gaussian in P.
    #[allow(clippy::too_many_arguments)]
    pub fn gaussian(
        x_min: f64,
        dx: f64,
        nx: usize,
        dp: f64,
        p_half: usize,
        mean: (f64, f64),
        var: (f64, f64),
    ) -> Result<Self> {
        Self::from_fn(x_min, dx, nx, dp, p_half, |x, p| {
            (-(x - mean.0).powi(2) / (2.0 * var.0) - (p - mean.1).powi(2) / (2.0 * var.1)).exp()
        })
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn np(&self) -> usize {
        2 * self.p_half + 1
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn dp(&self) -> f64 {
        self.dp
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.dx
    }

    pub fn p(&self, j: usize) -> f64 {
        (j as f64 - self.p_half as f64) * self.dp
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.np() + j]
    }

    /// ΣΣ W ΔX ΔP.
    pub fn norm(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.dx * self.dp
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    fn weighted(&self, f: impl Fn(f64, f64) -> f64) -> f64 {
        let np = self.np();
        let mut acc = 0.0;
        for i in 0..self.nx {
            let x = self.x(i);
            for j in 0..np {
                acc += f(x, self.p(j)) * self.values[i * np + j];
            }
        }
        acc * self.dx * self.dp
    }

    pub fn mean_x(&self) -> f64 {
        self.weighted(|x, _| x)
    }

    pub fn mean_p(&self) -> f64 {
        self.weighted(|_, p| p)
    }

    pub fn var_x(&self) -> f64 {
        let m = self.mean_x();
        self.weighted(|x, _| (x - m).powi(2))
    }

    pub fn var_p(&self) -> f64 {
        let m = self.mean_p();
        self.weighted(|_, p| (p - m).powi(2))
    }

    pub fn cov_xp(&self) -> f64 {
        let (mx, mp) = (self.mean_x(), self.mean_p());
        self.weighted(|x, p| (x - mx) * (p - mp))
    }

    fn same_layout(&self, other: &Self) -> bool {
        self.nx == other.nx && self.p_half == other.p_half && self.dx == other.dx && self.dp == other.dp
    }
}

#[derive(Debug, Clone)]
pub struct FieldSnapshot {
    pub time: f64,
    pub field: PhaseSpaceField,
}

/// z/(e^z − 1), continued to 1 at z = 0.
fn bernoulli(z: f64) -> f64 {
    if z.abs() < 1e-8 {
        1.0 - 0.5 * z
    } else {
        z / z.exp_m1()
    }
}

struct Stepper {
    nx: usize,
    np: usize,
    dx: f64,
    velocity: Vec<f64>,
    d_xx: f64,
    // momentum-face fluxes are F = coef_lo W_j − coef_hi W_{j+1}
    face_lo: Vec<f64>,
    face_hi: Vec<f64>,
    dp: f64,
}

impl Stepper {
    fn new(coeffs: &CLCoefficients, particle: &ParticleModel, f: &PhaseSpaceField) -> Self {
        let np = f.np();
        let velocity = (0..np).map(|j| f.p(j) / particle.mass()).collect();
        let mut face_lo = Vec::with_capacity(np - 1);
        let mut face_hi = Vec::with_capacity(np - 1);
        for j in 0..np - 1 {
            let drift = -coeffs.eta * 0.5 * (f.p(j) + f.p(j + 1));
            if coeffs.d_pp > 0.0 {
                let z = drift * f.dp / coeffs.d_pp;
                let k = coeffs.d_pp / f.dp;
                face_lo.push(k * bernoulli(-z));
                face_hi.push(k * bernoulli(z));
            } else {
                face_lo.push(drift.max(0.0));
                face_hi.push(-drift.min(0.0));
            }
        }
        Self {
            nx: f.nx,
            np,
            dx: f.dx,
            velocity,
            d_xx: coeffs.d_xx,
            face_lo,
            face_hi,
            dp: f.dp,
        }
    }

    fn rate(&self, w: &[f64], out: &mut [f64]) {
        let (nx, np) = (self.nx, self.np);
        let inv_dx = 1.0 / self.dx;
        let diff_x = self.d_xx / (self.dx * self.dx);
        let inv_dp = 1.0 / self.dp;
        out.par_chunks_mut(np).enumerate().for_each(|(i, row)| {
            let prev = &w[((i + nx - 1) % nx) * np..][..np];
            let cur = &w[i * np..][..np];
            let next = &w[((i + 1) % nx) * np..][..np];
            for j in 0..np {
                let v = self.velocity[j];
                let adv = if v > 0.0 {
                    -v * (cur[j] - prev[j]) * inv_dx
                } else {
                    -v * (next[j] - cur[j]) * inv_dx
                };
                row[j] = adv + diff_x * (next[j] - 2.0 * cur[j] + prev[j]);
            }
            let mut flux_below = 0.0;
            for j in 0..np {
                let flux_above = if j + 1 < np {
                    self.face_lo[j] * cur[j] - self.face_hi[j] * cur[j + 1]
                } else {
                    0.0
                };
                row[j] -= (flux_above - flux_below) * inv_dp;
                flux_below = flux_above;
            }
        });
    }
}

fn step_bound(coeffs: &CLCoefficients, particle: &ParticleModel, f: &PhaseSpaceField) -> f64 {
    let p_max = f.p(f.np() - 1);
    p_max / particle.mass() / f.dx
        + coeffs.eta * p_max / f.dp
        + 2.0 * coeffs.d_pp / (f.dp * f.dp)
        + 2.0 * coeffs.d_xx / (f.dx * f.dx)
}

/// Largest time step satisfying the explicit stability bound.
pub fn max_stable_wigner_dt(coeffs: &CLCoefficients, particle: &ParticleModel, f: &PhaseSpaceField) -> f64 {
    let b = step_bound(coeffs, particle, f);
    if b == 0.0 {
        f64::INFINITY
    } else {
        CFL_LIMIT / b
    }
}

/// RK4 evolution of the Wigner function, recording the initial field and
/// every `record_every`-th step plus the final one.
pub fn wigner_kramers_evolve(
    coeffs: &CLCoefficients,
    particle: &ParticleModel,
    field: &PhaseSpaceField,
    cfg: &EvolutionConfig,
) -> Result<Vec<FieldSnapshot>> {
    if coeffs.eta < 0.0 || coeffs.d_pp < 0.0 || coeffs.d_xx < 0.0 {
        return invalid("coefficients must be nonnegative");
    }
    let (steps, dt) = cfg.steps();
    let mut out = vec![FieldSnapshot {
        time: 0.0,
        field: field.clone(),
    }];
    if steps == 0 {
        return Ok(out);
    }
    let bound = dt * step_bound(coeffs, particle, field);
    if bound > CFL_LIMIT * (1.0 + 1e-12) {
        return Err(Error::Config(format!(
            "time step {dt:e} violates the stability bound ({bound:.3} > {CFL_LIMIT}); use dt <= {:e}",
            max_stable_wigner_dt(coeffs, particle, field)
        )));
    }
    let stepper = Stepper::new(coeffs, particle, field);
    let n = field.values.len();
    let mut w = field.values.clone();
    let mut k = [vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    let mut tmp = vec![0.0; n];
    for step in 1..=steps {
        stepper.rate(&w, &mut k[0]);
        for stage in 1..4 {
            let h = if stage == 3 { dt } else { 0.5 * dt };
            let (done, rest) = k.split_at_mut(stage);
            tmp.par_iter_mut()
                .zip(&w)
                .zip(&done[stage - 1])
                .for_each(|((t, a), b)| *t = a + h * b);
            stepper.rate(&tmp, &mut rest[0]);
        }
        w.par_iter_mut().enumerate().for_each(|(i, v)| {
            *v += dt / 6.0 * (k[0][i] + 2.0 * (k[1][i] + k[2][i]) + k[3][i]);
        });
        if step % cfg.record_every == 0 || step == steps {
            let snap = PhaseSpaceField {
                values: w.clone(),
                ..field.clone()
            };
            debug_assert!(snap.same_layout(field));
            out.push(FieldSnapshot {
                time: step as f64 * dt,
                field: snap,
            });
        }
    }
    Ok(out)
}
