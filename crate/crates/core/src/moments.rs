//! Closed linear equations for first and second phase-space moments in three
//! dimensions.
//!
//! Phase-space coordinates are ordered `z = (X1, X2, X3, P1, P2, P3)`. The
//! moment vector holds the six means followed by the 21 symmetrized second
//! moments `⟨z_a z_b + z_b z_a⟩/2` with `a ≤ b`, in row-major upper-triangular
//! order.

use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, Result};

pub const PHASE_DIM: usize = 6;
pub const MOMENT_DIM: usize = PHASE_DIM + PHASE_DIM * (PHASE_DIM + 1) / 2;

/// Index of the symmetrized second moment of `z_a z_b`.
pub fn second_index(a: usize, b: usize) -> usize {
    let (a, b) = if a <= b { (a, b) } else { (b, a) };
    // row r of the upper triangle holds PHASE_DIM - r entries
    PHASE_DIM + a * PHASE_DIM - a * a.saturating_sub(1) / 2 + (b - a)
}

/// d m/dt = A m + b on the moment vector.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentSystem {
    matrix: DMatrix<f64>,
    offset: DVector<f64>,
}

impl MomentSystem {
    pub fn new(matrix: DMatrix<f64>, offset: DVector<f64>) -> Result<Self> {
        if matrix.nrows() != MOMENT_DIM || matrix.ncols() != MOMENT_DIM || offset.len() != MOMENT_DIM {
            return invalid(format!("moment system must be {MOMENT_DIM}-dimensional"));
        }
        Ok(Self { matrix, offset })
    }

    pub fn zeros() -> Self {
        Self {
            matrix: DMatrix::zeros(MOMENT_DIM, MOMENT_DIM),
            offset: DVector::zeros(MOMENT_DIM),
        }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn offset(&self) -> &DVector<f64> {
        &self.offset
    }

    pub(crate) fn matrix_mut(&mut self) -> &mut DMatrix<f64> {
        &mut self.matrix
    }

    pub(crate) fn offset_mut(&mut self) -> &mut DVector<f64> {
        &mut self.offset
    }

    pub fn rate(&self, m: &DVector<f64>) -> DVector<f64> {
        &self.matrix * m + &self.offset
    }

    /// Exact propagation through the exponential of the affine system.
    pub fn evolve(&self, m0: &DVector<f64>, t: f64) -> Result<DVector<f64>> {
        if !(t >= 0.0) {
            return invalid(format!("time must be >= 0 (got {t})"));
        }
        let n = MOMENT_DIM;
        let mut aug = DMatrix::zeros(n + 1, n + 1);
        aug.view_mut((0, 0), (n, n)).copy_from(&(&self.matrix * t));
        aug.view_mut((0, n), (n, 1)).copy_from(&(&self.offset * t));
        let e = aug.exp();
        Ok(e.view((0, 0), (n, n)) * m0 + e.view((0, n), (n, 1)).column(0))
    }

    /// Largest entrywise difference of matrices and offsets.
    pub fn max_abs_difference(&self, other: &MomentSystem) -> f64 {
        let a = (&self.matrix - &other.matrix).amax();
        let b = (&self.offset - &other.offset).amax();
        a.max(b)
    }
}

/// Means and symmetrized second moments of a phase-space state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseMoments {
    pub mean: [f64; PHASE_DIM],
    pub second: [[f64; PHASE_DIM]; PHASE_DIM],
}

impl PhaseMoments {
    /// Gaussian state with given means and covariance.
    pub fn gaussian(mean: [f64; PHASE_DIM], cov: [[f64; PHASE_DIM]; PHASE_DIM]) -> Self {
        let mut second = cov;
        for a in 0..PHASE_DIM {
            for b in 0..PHASE_DIM {
                second[a][b] = 0.5 * (cov[a][b] + cov[b][a]) + mean[a] * mean[b];
            }
        }
        Self { mean, second }
    }

    pub fn to_vector(&self) -> DVector<f64> {
        let mut v = DVector::zeros(MOMENT_DIM);
        for a in 0..PHASE_DIM {
            v[a] = self.mean[a];
            for b in a..PHASE_DIM {
                v[second_index(a, b)] = self.second[a][b];
            }
        }
        v
    }

    pub fn from_vector(v: &DVector<f64>) -> Result<Self> {
        if v.len() != MOMENT_DIM {
            return invalid(format!("moment vector must have {MOMENT_DIM} entries"));
        }
        let mut m = Self {
            mean: [0.0; PHASE_DIM],
            second: [[0.0; PHASE_DIM]; PHASE_DIM],
        };
        for a in 0..PHASE_DIM {
            m.mean[a] = v[a];
            for b in a..PHASE_DIM {
                m.second[a][b] = v[second_index(a, b)];
                m.second[b][a] = v[second_index(a, b)];
            }
        }
        Ok(m)
    }

    pub fn covariance(&self, a: usize, b: usize) -> f64 {
        self.second[a][b] - self.mean[a] * self.mean[b]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn second_moment_indices_are_a_bijection() {
        let mut seen = [false; MOMENT_DIM];
        let mut expected = PHASE_DIM;
        for a in 0..PHASE_DIM {
            for b in a..PHASE_DIM {
                let i = second_index(a, b);
                assert_eq!(i, expected);
                assert_eq!(second_index(b, a), i);
                assert!(!seen[i]);
                seen[i] = true;
                expected += 1;
            }
        }
        assert!(seen[PHASE_DIM..].iter().all(|&s| s));
    }

    #[test]
    fn vector_round_trip() {
        let mut cov = [[0.0; 6]; 6];
        for a in 0..6 {
            cov[a][a] = 1.0 + a as f64;
        }
        cov[0][3] = 0.3;
        cov[3][0] = 0.3;
        let m = PhaseMoments::gaussian([1.0, 2.0, 3.0, -1.0, 0.0, 0.5], cov);
        let back = PhaseMoments::from_vector(&m.to_vector()).unwrap();
        assert_eq!(back, m);
        assert!((back.covariance(0, 3) - 0.3).abs() < 1e-15);
    }

    #[test]
    fn exponential_propagation_matches_decay() {
        let mut sys = MomentSystem::zeros();
        sys.matrix_mut()[(3, 3)] = -2.0;
        sys.offset_mut()[0] = 1.0;
        let mut m0 = DVector::zeros(MOMENT_DIM);
        m0[3] = 1.5;
        let m = sys.evolve(&m0, 0.7).unwrap();
        assert!((m[3] - 1.5 * (-1.4f64).exp()).abs() < 1e-14);
        assert!((m[0] - 0.7).abs() < 1e-14);
        assert!(sys.evolve(&m0, -1.0).is_err());
    }
}
