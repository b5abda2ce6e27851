//! Physical parameters, momentum grids and state representations.
//!
//! Internal units set ħ = 1, so momenta and wave numbers coincide and the
//! collision energy of a transfer `Q` at momentum `P` is `((P+Q)² − P²)/2M`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Ideal gas of Maxwell-Boltzmann particles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GasModel {
    beta: f64,
    mass: f64,
    density: f64,
}

impl GasModel {
    pub fn new(beta: f64, mass: f64, density: f64) -> Result<Self> {
        positive("beta", beta)?;
        positive("gas mass", mass)?;
        positive("gas density", density)?;
        Ok(Self {
            beta,
            mass,
            density,
        })
    }

    /// Inverse temperature β.
    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Mass m of a gas particle.
    pub fn mass(&self) -> f64 {
        self.mass
    }

    /// Number density n_gas.
    pub fn density(&self) -> f64 {
        self.density
    }

    /// Same gas at a different inverse temperature.
    pub fn with_beta(&self, beta: f64) -> Result<Self> {
        Self::new(beta, self.mass, self.density)
    }

    /// Normalized Maxwell-Boltzmann density of gas momenta in three dimensions.
    pub fn momentum_density(&self, p_squared: f64) -> f64 {
        let a = self.beta / (2.0 * std::f64::consts::PI * self.mass);
        a.powf(1.5) * (-self.beta * p_squared / (2.0 * self.mass)).exp()
    }

    /// Maxwell-Boltzmann density of the two momentum components in a plane.
    pub fn transverse_momentum_density(&self, p_squared: f64) -> f64 {
        let a = self.beta / (2.0 * std::f64::consts::PI * self.mass);
        a * (-self.beta * p_squared / (2.0 * self.mass)).exp()
    }
}

/// The massive test particle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ParticleModel {
    mass: f64,
}

impl ParticleModel {
    pub fn new(mass: f64) -> Result<Self> {
        positive("particle mass", mass)?;
        Ok(Self { mass })
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    /// m* = mM/(m+M).
    pub fn reduced_mass(&self, gas: &GasModel) -> f64 {
        gas.mass() * self.mass / (gas.mass() + self.mass)
    }

    /// m/M, small in the Brownian regime.
    pub fn mass_ratio(&self, gas: &GasModel) -> f64 {
        gas.mass() / self.mass
    }

    /// Thermal momentum spread √(M/β) per axis.
    pub fn thermal_momentum(&self, beta: f64) -> f64 {
        (self.mass / beta).sqrt()
    }
}

/// Isotropic family for |Ṽ(Q)|², the squared Fourier transform of the
/// particle-gas interaction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialSpec {
    /// |Ṽ(Q)|² = g² exp(−σ²Q²).
    Gaussian { g: f64, sigma: f64 },
    /// |Ṽ(Q)|² = g² for Q ≤ q_max, zero beyond.
    CutoffConstant { g: f64, q_max: f64 },
}

impl PotentialSpec {
    pub fn gaussian(g: f64, sigma: f64) -> Result<Self> {
        let p = PotentialSpec::Gaussian { g, sigma };
        p.validate()?;
        Ok(p)
    }

    pub fn cutoff_constant(g: f64, q_max: f64) -> Result<Self> {
        let p = PotentialSpec::CutoffConstant { g, q_max };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            PotentialSpec::Gaussian { g, sigma } => {
                finite("potential.g", g)?;
                positive("potential.sigma", sigma)
            }
            PotentialSpec::CutoffConstant { g, q_max } => {
                finite("potential.g", g)?;
                positive("potential.q_max", q_max)
            }
        }
    }

    /// |Ṽ(Q)|² as a function of |Q|.
    pub fn vsq(&self, q: f64) -> f64 {
        let q = q.abs();
        match *self {
            PotentialSpec::Gaussian { g, sigma } => g * g * (-(sigma * q).powi(2)).exp(),
            PotentialSpec::CutoffConstant { g, q_max } => {
                if q <= q_max {
                    g * g
                } else {
                    0.0
                }
            }
        }
    }

    /// True when the coupling vanishes identically.
    pub fn is_zero(&self) -> bool {
        match *self {
            PotentialSpec::Gaussian { g, .. } | PotentialSpec::CutoffConstant { g, .. } => g == 0.0,
        }
    }

    /// ∫₀^∞ Q |Ṽ(Q)|² dQ in closed form.
    pub fn radial_first_moment(&self) -> f64 {
        match *self {
            PotentialSpec::Gaussian { g, sigma } => g * g / (2.0 * sigma * sigma),
            PotentialSpec::CutoffConstant { g, q_max } => 0.5 * g * g * q_max * q_max,
        }
    }

    /// Largest |Q| beyond which |Ṽ(Q)|² is below `exp(-decades_e)` of its peak.
    pub fn support_radius(&self, decades_e: f64) -> f64 {
        match *self {
            PotentialSpec::Gaussian { sigma, .. } => decades_e.sqrt() / sigma,
            PotentialSpec::CutoffConstant { q_max, .. } => q_max,
        }
    }

    /// Same potential with the coupling g scaled by `factor`.
    pub fn scaled_coupling(&self, factor: f64) -> Self {
        match *self {
            PotentialSpec::Gaussian { g, sigma } => PotentialSpec::Gaussian {
                g: g * factor,
                sigma,
            },
            PotentialSpec::CutoffConstant { g, q_max } => PotentialSpec::CutoffConstant {
                g: g * factor,
                q_max,
            },
        }
    }
}

/// Number of spatial dimensions of a momentum grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Dimension {
    One,
    Three,
}

impl Dimension {
    pub fn from_count(d: usize) -> Result<Self> {
        match d {
            1 => Ok(Dimension::One),
            3 => Ok(Dimension::Three),
            _ => invalid(format!("grid dimension must be 1 or 3, got {d}")),
        }
    }

    pub fn count(self) -> usize {
        match self {
            Dimension::One => 1,
            Dimension::Three => 3,
        }
    }
}

/// Uniform momentum lattice `kΔP`, `k ∈ [−n, n]` per axis.
///
/// Momentum transfers are restricted to lattice vectors, so a kick maps grid
/// points to grid points exactly. Transfers that would leave the grid are
/// dropped from both the gain and the loss side of every generator built on
/// it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentumGrid {
    dimension: Dimension,
    spacing: f64,
    half_extent: usize,
}

impl MomentumGrid {
    pub fn new(dimension: Dimension, spacing: f64, half_extent: usize) -> Result<Self> {
        positive("grid spacing", spacing)?;
        if half_extent == 0 {
            return invalid("grid half_extent must be at least 1");
        }
        Ok(Self {
            dimension,
            spacing,
            half_extent,
        })
    }

    pub fn one_d(spacing: f64, half_extent: usize) -> Result<Self> {
        Self::new(Dimension::One, spacing, half_extent)
    }

    pub fn three_d(spacing: f64, half_extent: usize) -> Result<Self> {
        Self::new(Dimension::Three, spacing, half_extent)
    }

    pub fn dimension(&self) -> Dimension {
        self.dimension
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn half_extent(&self) -> usize {
        self.half_extent
    }

    /// 2n + 1.
    pub fn points_per_axis(&self) -> usize {
        2 * self.half_extent + 1
    }

    /// Total number of grid points.
    pub fn len(&self) -> usize {
        self.points_per_axis().pow(self.dimension.count() as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Momentum of lattice index `k ∈ [−n, n]` along one axis.
    pub fn momentum(&self, k: i64) -> f64 {
        k as f64 * self.spacing
    }

    /// Momentum of array position `i ∈ [0, 2n]` along one axis.
    pub fn axis_value(&self, i: usize) -> f64 {
        self.momentum(i as i64 - self.half_extent as i64)
    }

    /// All momenta along one axis, ascending.
    pub fn axis(&self) -> Vec<f64> {
        (0..self.points_per_axis()).map(|i| self.axis_value(i)).collect()
    }

    /// Largest momentum magnitude along an axis.
    pub fn max_momentum(&self) -> f64 {
        self.momentum(self.half_extent as i64)
    }

    /// Axis position of the nearest lattice point, if inside the grid.
    pub fn nearest_index(&self, p: f64) -> Option<usize> {
        let k = (p / self.spacing).round();
        let n = self.half_extent as f64;
        if k.abs() <= n {
            Some((k + n) as usize)
        } else {
            None
        }
    }

    /// Momentum vector of flat index `flat` (row-major over axes).
    pub fn point(&self, flat: usize) -> Vec<f64> {
        let n = self.points_per_axis();
        match self.dimension {
            Dimension::One => vec![self.axis_value(flat)],
            Dimension::Three => {
                let ix = flat / (n * n);
                let iy = (flat / n) % n;
                let iz = flat % n;
                vec![self.axis_value(ix), self.axis_value(iy), self.axis_value(iz)]
            }
        }
    }

    /// |P|² at flat index.
    pub fn momentum_squared(&self, flat: usize) -> f64 {
        self.point(flat).iter().map(|p| p * p).sum()
    }

    /// Flat index of the lattice point with axis positions `idx`.
    pub fn flat_index(&self, idx: &[usize]) -> usize {
        let n = self.points_per_axis();
        idx.iter().fold(0, |acc, &i| acc * n + i)
    }

    /// Flat indices of points on the outer shell of the grid.
    pub fn boundary_indices(&self) -> Vec<usize> {
        let last = self.points_per_axis() - 1;
        let n = self.points_per_axis();
        (0..self.len())
            .filter(|&flat| match self.dimension {
                Dimension::One => flat == 0 || flat == last,
                Dimension::Three => {
                    let ix = flat / (n * n);
                    let iy = (flat / n) % n;
                    let iz = flat % n;
                    [ix, iy, iz].iter().any(|&i| i == 0 || i == last)
                }
            })
            .collect()
    }

    pub(crate) fn same_as(&self, other: &MomentumGrid) -> bool {
        self.dimension == other.dimension
            && self.half_extent == other.half_extent
            && self.spacing == other.spacing
    }

    pub(crate) fn ensure_same(&self, other: &MomentumGrid) -> Result<()> {
        if self.same_as(other) {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!(
                "expected {self:?}, got {other:?}"
            )))
        }
    }

    pub(crate) fn require_one_d(&self, what: &str) -> Result<()> {
        if self.dimension == Dimension::One {
            Ok(())
        } else {
            invalid(format!("{what} requires a one-dimensional grid"))
        }
    }
}

/// Occupancy of the outermost grid points above which a run is flagged as
/// feeling the grid edge.
pub const BOUNDARY_OCCUPANCY_LIMIT: f64 = 1e-8;

const TRACE_TOLERANCE: f64 = 1e-12;
const POSITIVITY_TOLERANCE: f64 = -1e-10;

/// Density matrix ⟨P|ϱ|P'⟩ on a one-dimensional momentum grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    grid: MomentumGrid,
    entries: DMatrix<Complex64>,
}

impl DensityMatrix {
    /// Validates and symmetrizes a candidate state.
    pub fn new(grid: MomentumGrid, entries: DMatrix<Complex64>) -> Result<Self> {
        let state = Self::from_raw(grid, entries)?;
        let tr = state.trace();
        if (tr.re - 1.0).abs() > TRACE_TOLERANCE {
            return invalid(format!("density matrix trace {} differs from 1", tr.re));
        }
        let min_eig = state.min_eigenvalue();
        if min_eig < POSITIVITY_TOLERANCE {
            return invalid(format!(
                "density matrix has negative eigenvalue {min_eig:e}"
            ));
        }
        Ok(state)
    }

    /// Shape check and Hermitian symmetrization only; used for evolved states
    /// whose trace and positivity are monitored by the integrator.
    pub(crate) fn from_raw(grid: MomentumGrid, mut entries: DMatrix<Complex64>) -> Result<Self> {
        grid.require_one_d("a density matrix")?;
        let n = grid.len();
        if entries.nrows() != n || entries.ncols() != n {
            return Err(Error::GridMismatch(format!(
                "matrix is {}x{}, grid has {n} points",
                entries.nrows(),
                entries.ncols()
            )));
        }
        hermitize(&mut entries);
        Ok(Self { grid, entries })
    }

    /// Diagonal state with the given momentum weights.
    pub fn diagonal_state(dist: &MomentumDistribution) -> Result<Self> {
        let grid = *dist.grid();
        grid.require_one_d("a density matrix")?;
        let entries = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            grid.len(),
            dist.weights().iter().map(|&w| Complex64::new(w, 0.0)),
        ));
        Self::new(grid, entries)
    }

    pub fn grid(&self) -> &MomentumGrid {
        &self.grid
    }

    pub fn entries(&self) -> &DMatrix<Complex64> {
        &self.entries
    }

    pub fn into_entries(self) -> DMatrix<Complex64> {
        self.entries
    }

    pub fn trace(&self) -> Complex64 {
        self.entries.trace()
    }

    /// tr(ϱ²).
    pub fn purity(&self) -> f64 {
        // ϱ Hermitian: tr(ϱ²) = Σ |ϱ_ij|²
        self.entries.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        let eig = self.entries.clone().symmetric_eigenvalues();
        let mut v: Vec<f64> = eig.iter().copied().collect();
        v.sort_by(f64::total_cmp);
        v
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues().first().copied().unwrap_or(0.0)
    }

    /// Momentum-space populations ⟨P|ϱ|P⟩.
    pub fn populations(&self) -> Vec<f64> {
        self.entries.diagonal().iter().map(|z| z.re).collect()
    }

    /// ⟨P⟩.
    pub fn mean_momentum(&self) -> f64 {
        self.populations()
            .iter()
            .enumerate()
            .map(|(i, w)| w * self.grid.axis_value(i))
            .sum()
    }

    /// Combined weight of the two outermost grid points.
    pub fn boundary_occupancy(&self) -> f64 {
        let pops = self.populations();
        pops[0].abs() + pops[pops.len() - 1].abs()
    }
}

pub(crate) fn hermitize(m: &mut DMatrix<Complex64>) {
    let n = m.nrows();
    for c in 0..n {
        m[(c, c)].im = 0.0;
        for r in (c + 1)..n {
            let a = m[(r, c)];
            let b = m[(c, r)].conj();
            let avg = (a + b) * 0.5;
            m[(r, c)] = avg;
            m[(c, r)] = avg.conj();
        }
    }
}

/// Nonnegative momentum weights on a 1D or 3D grid.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentumDistribution {
    grid: MomentumGrid,
    weights: Vec<f64>,
}

impl MomentumDistribution {
    pub fn new(grid: MomentumGrid, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} weights for a grid of {} points",
                weights.len(),
                grid.len()
            )));
        }
        if let Some(w) = weights.iter().find(|w| !(**w >= 0.0)) {
            return invalid(format!("negative or non-finite weight {w}"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > TRACE_TOLERANCE {
            return invalid(format!("weights sum to {total}, expected 1"));
        }
        Ok(Self { grid, weights })
    }

    /// Normalizes nonnegative weights.
    pub fn normalized(grid: MomentumGrid, mut weights: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) || !total.is_finite() {
            return invalid("weights have no positive mass");
        }
        weights.iter_mut().for_each(|w| *w /= total);
        Self::new(grid, weights)
    }

    pub fn grid(&self) -> &MomentumGrid {
        &self.grid
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Mean momentum vector.
    pub fn mean(&self) -> Vec<f64> {
        let d = self.grid.dimension().count();
        let mut m = vec![0.0; d];
        for (flat, w) in self.weights.iter().enumerate() {
            for (mi, pi) in m.iter_mut().zip(self.grid.point(flat)) {
                *mi += w * pi;
            }
        }
        m
    }

    /// Per-axis variances.
    pub fn variance(&self) -> Vec<f64> {
        let mean = self.mean();
        let mut v = vec![0.0; mean.len()];
        for (flat, w) in self.weights.iter().enumerate() {
            for ((vi, pi), mi) in v.iter_mut().zip(self.grid.point(flat)).zip(&mean) {
                *vi += w * (pi - mi).powi(2);
            }
        }
        v
    }

    /// ½ Σ |w − w'|.
    pub fn total_variation(&self, other: &MomentumDistribution) -> Result<f64> {
        self.grid.ensure_same(&other.grid)?;
        Ok(total_variation(&self.weights, &other.weights))
    }
}

pub(crate) fn total_variation(a: &[f64], b: &[f64]) -> f64 {
    0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
}

/// Lattice Maxwell-Boltzmann weights ∝ exp(−β|P|²/2·mass).
pub fn maxwell_boltzmann_distribution(
    grid: &MomentumGrid,
    mass: f64,
    beta: f64,
) -> Result<MomentumDistribution> {
    positive("mass", mass)?;
    positive("beta", beta)?;
    let weights = (0..grid.len())
        .map(|flat| (-beta * grid.momentum_squared(flat) / (2.0 * mass)).exp())
        .collect();
    MomentumDistribution::normalized(*grid, weights)
}

/// Pure Gaussian wave packet |ψ⟩⟨ψ| with momentum standard deviation `width`.
pub fn pure_state_gaussian(grid: &MomentumGrid, center: f64, width: f64) -> Result<DensityMatrix> {
    grid.require_one_d("a Gaussian wave packet")?;
    positive("packet width", width)?;
    let axis = grid.axis();
    let resolved = axis.iter().filter(|p| (**p - center).abs() <= width).count();
    if resolved < 4 {
        return invalid(format!(
            "packet width {width} resolves only {resolved} grid points within one standard deviation"
        ));
    }
    let mut amp: Vec<f64> = axis
        .iter()
        .map(|p| (-(p - center).powi(2) / (4.0 * width * width)).exp())
        .collect();
    let norm = amp.iter().map(|a| a * a).sum::<f64>().sqrt();
    amp.iter_mut().for_each(|a| *a /= norm);
    let n = axis.len();
    let entries = DMatrix::from_fn(n, n, |r, c| Complex64::new(amp[r] * amp[c], 0.0));
    DensityMatrix::new(*grid, entries)
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        invalid(format!("{name} must be > 0 (got {v})"))
    }
}

fn finite(name: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        invalid(format!("{name} must be finite (got {v})"))
    }
}
