//! Grids, wavefunctions, potentials and the elementary state operations.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::Spectral;

/// Reduced Planck constant and particle mass. Simulation units default to 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParams {
    pub hbar: f64,
    pub mass: f64,
}

impl Default for PhysicalParams {
    fn default() -> Self {
        Self { hbar: 1.0, mass: 1.0 }
    }
}

impl PhysicalParams {
    pub fn new(hbar: f64, mass: f64) -> Result<Self> {
        let p = Self { hbar, mass };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.hbar.is_finite() && self.hbar > 0.0) {
            return Err(Error::InvalidParams(format!("hbar must be positive, got {}", self.hbar)));
        }
        if !(self.mass.is_finite() && self.mass > 0.0) {
            return Err(Error::InvalidParams(format!("mass must be positive, got {}", self.mass)));
        }
        Ok(())
    }
}

/// Uniform periodic grid `x_i = x_min + i*dx`, `i < n_points`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid1D {
    x_min: f64,
    x_max: f64,
    n_points: usize,
}

impl Grid1D {
    pub fn new(x_min: f64, x_max: f64, n_points: usize) -> Result<Self> {
        if !(x_min.is_finite() && x_max.is_finite() && x_max > x_min) {
            return Err(Error::InvalidGrid(format!("need x_max > x_min, got [{x_min}, {x_max}]")));
        }
        if n_points < 16 || !n_points.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "n_points must be a power of two >= 16, got {n_points}"
            )));
        }
        Ok(Self { x_min, x_max, n_points })
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn length(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn dx(&self) -> f64 {
        self.length() / self.n_points as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.dx()
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_points).map(move |i| self.x(i))
    }

    /// Nearest grid index, or `None` outside `[x_min, x_max)`.
    pub fn nearest_index(&self, x: f64) -> Option<usize> {
        if !(x >= self.x_min && x < self.x_max) {
            return None;
        }
        let i = ((x - self.x_min) / self.dx()).round() as usize;
        Some(i.min(self.n_points - 1))
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.x_min && x <= self.x_max
    }
}

/// Complex amplitudes `psi(x_i, t)` on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Wavefunction {
    grid: Grid1D,
    amplitudes: Vec<Complex64>,
    time: f64,
}

impl Wavefunction {
    pub fn new(grid: Grid1D, amplitudes: Vec<Complex64>, time: f64) -> Result<Self> {
        if amplitudes.len() != grid.n_points() {
            return Err(Error::DimensionMismatch {
                expected: grid.n_points(),
                got: amplitudes.len(),
            });
        }
        Ok(Self { grid, amplitudes, time })
    }

    pub(crate) fn from_parts(grid: Grid1D, amplitudes: Vec<Complex64>, time: f64) -> Self {
        debug_assert_eq!(amplitudes.len(), grid.n_points());
        Self { grid, amplitudes, time }
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amplitudes
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn with_time(mut self, time: f64) -> Self {
        self.time = time;
        self
    }

    pub fn density(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|z| z.norm_sqr()).collect()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.grid.dx()
    }

    pub fn normalized(mut self) -> Self {
        let n = self.norm_sqr().sqrt();
        if n > 0.0 {
            self.amplitudes.iter_mut().for_each(|z| *z /= n);
        }
        self
    }

    pub fn scaled(&self, factor: Complex64) -> Self {
        Self::from_parts(
            self.grid,
            self.amplitudes.iter().map(|z| z * factor).collect(),
            self.time,
        )
    }

    pub fn mean_position(&self) -> f64 {
        self.grid
            .points()
            .zip(&self.amplitudes)
            .map(|(x, z)| x * z.norm_sqr())
            .sum::<f64>()
            * self.grid.dx()
    }

    pub fn mean_momentum(&self, params: &PhysicalParams) -> f64 {
        let p = apply_momentum(self, params);
        inner_product(self, &p).expect("same grid").re
    }

    /// `<p^2>/2M`, evaluated in momentum space.
    pub fn kinetic_energy(&self, params: &PhysicalParams) -> f64 {
        let sp = Spectral::new(&self.grid);
        let spec = sp.spectrum(&self.amplitudes);
        let n = self.grid.n_points() as f64;
        let weighted: f64 = spec
            .iter()
            .zip(sp.wavenumbers())
            .map(|(c, k)| c.norm_sqr() * (params.hbar * k).powi(2))
            .sum();
        weighted / n * self.grid.dx() / (2.0 * params.mass)
    }

    pub fn potential_energy(&self, potential: &Potential) -> f64 {
        self.amplitudes
            .iter()
            .zip(potential.values())
            .map(|(z, v)| z.norm_sqr() * v)
            .sum::<f64>()
            * self.grid.dx()
    }

    pub fn energy(&self, potential: &Potential, params: &PhysicalParams) -> f64 {
        self.kinetic_energy(params) + self.potential_energy(potential)
    }

    /// Probability within `cells` grid cells of either edge.
    pub fn edge_probability(&self, cells: usize) -> f64 {
        let n = self.amplitudes.len();
        let cells = cells.min(n / 2);
        let left: f64 = self.amplitudes[..cells].iter().map(|z| z.norm_sqr()).sum();
        let right: f64 = self.amplitudes[n - cells..].iter().map(|z| z.norm_sqr()).sum();
        (left + right) * self.grid.dx()
    }
}

/// `sum conj(bra_i) ket_i dx`.
pub fn inner_product(bra: &Wavefunction, ket: &Wavefunction) -> Result<Complex64> {
    if bra.grid != ket.grid {
        return Err(Error::GridMismatch);
    }
    let s: Complex64 = bra
        .amplitudes
        .iter()
        .zip(&ket.amplitudes)
        .map(|(b, k)| b.conj() * k)
        .sum();
    Ok(s * bra.grid.dx())
}

/// `-i hbar d/dx`, applied spectrally.
pub fn apply_momentum(state: &Wavefunction, params: &PhysicalParams) -> Wavefunction {
    let sp = Spectral::new(&state.grid);
    let d = sp.derivative(&state.amplitudes, 1);
    let factor = Complex64::new(0.0, -params.hbar);
    Wavefunction::from_parts(state.grid, d.into_iter().map(|z| z * factor).collect(), state.time)
}

/// Gaussian minimum-uncertainty packet of inverse squared width `gamma`,
/// centred at `center` with mean momentum `momentum`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoherentStateSpec {
    pub gamma: f64,
    pub center: f64,
    pub momentum: f64,
}

impl CoherentStateSpec {
    /// Standard deviation of the position density.
    pub fn position_width(&self) -> f64 {
        1.0 / (2.0 * self.gamma).sqrt()
    }

    pub fn amplitude(&self, x: f64, params: &PhysicalParams) -> Complex64 {
        let u = x - self.center;
        let norm = (self.gamma / PI).powf(0.25);
        Complex64::new(-0.5 * self.gamma * u * u, self.momentum * u / params.hbar).exp() * norm
    }
}

pub fn prepare_coherent_state(
    spec: &CoherentStateSpec,
    grid: &Grid1D,
    params: &PhysicalParams,
) -> Result<Wavefunction> {
    params.validate()?;
    if !(spec.gamma.is_finite() && spec.gamma > 0.0) {
        return Err(Error::InvalidParams(format!("gamma must be positive, got {}", spec.gamma)));
    }
    let sigma = spec.position_width();
    if spec.center - 6.0 * sigma < grid.x_min() || spec.center + 6.0 * sigma > grid.x_max() {
        return Err(Error::Containment(format!(
            "packet at {} with width {sigma} does not fit 6 widths inside [{}, {}]",
            spec.center,
            grid.x_min(),
            grid.x_max()
        )));
    }
    let k_max = PI / grid.dx();
    let k_reach = spec.momentum.abs() / params.hbar + 8.0 * spec.gamma.sqrt();
    if k_reach > k_max {
        return Err(Error::Containment(format!(
            "momentum content up to k = {k_reach} exceeds grid cutoff {k_max}"
        )));
    }
    let amps: Vec<Complex64> = grid.points().map(|x| spec.amplitude(x, params)).collect();
    let psi = Wavefunction::from_parts(*grid, amps, 0.0);
    let norm = psi.norm_sqr();
    if (norm - 1.0).abs() > 1e-6 {
        return Err(Error::Containment(format!("grid quadrature norm {norm} is far from 1")));
    }
    Ok(psi.normalized())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PotentialKind {
    Free,
    /// `height * exp(-(x - center)^2 / (2 width^2))`
    GaussianBarrier { height: f64, width: f64, center: f64 },
    /// `height / cosh^2(x / width)`
    Eckart { height: f64, width: f64 },
    /// `M omega^2 (x - center)^2 / 2`; confining, not a scattering potential.
    Harmonic { omega: f64, center: f64 },
    /// `slope * x`; used for Ehrenfest checks, not a scattering potential.
    Linear { slope: f64 },
    /// Values sampled on the grid, linearly interpolated between nodes.
    Table { samples: Vec<f64> },
}

/// A potential together with its samples on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Potential {
    kind: PotentialKind,
    grid: Grid1D,
    mass: f64,
    values: Vec<f64>,
}

impl Potential {
    pub fn new(kind: PotentialKind, grid: &Grid1D, params: &PhysicalParams) -> Result<Self> {
        match &kind {
            PotentialKind::GaussianBarrier { width, .. } | PotentialKind::Eckart { width, .. }
                if !(*width > 0.0) =>
            {
                return Err(Error::InvalidPotential(format!("width must be positive, got {width}")));
            }
            PotentialKind::Table { samples } if samples.len() != grid.n_points() => {
                return Err(Error::InvalidPotential(format!(
                    "table has {} samples for a {}-point grid",
                    samples.len(),
                    grid.n_points()
                )));
            }
            _ => {}
        }
        let mut pot = Self {
            kind,
            grid: *grid,
            mass: params.mass,
            values: Vec::new(),
        };
        pot.values = grid.points().map(|x| pot.value_at(x)).collect();
        if let Some(i) = pot.values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidPotential(format!("non-finite value at x = {}", grid.x(i))));
        }
        Ok(pot)
    }

    pub fn free(grid: &Grid1D) -> Self {
        Self {
            kind: PotentialKind::Free,
            grid: *grid,
            mass: 1.0,
            values: vec![0.0; grid.n_points()],
        }
    }

    pub fn kind(&self) -> &PotentialKind {
        &self.kind
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value_at(&self, x: f64) -> f64 {
        match &self.kind {
            PotentialKind::Free => 0.0,
            PotentialKind::GaussianBarrier { height, width, center } => {
                let u = (x - center) / width;
                height * (-0.5 * u * u).exp()
            }
            PotentialKind::Eckart { height, width } => {
                let c = (x / width).cosh();
                height / (c * c)
            }
            PotentialKind::Harmonic { omega, center } => {
                0.5 * self.mass * omega * omega * (x - center).powi(2)
            }
            PotentialKind::Linear { slope } => slope * x,
            PotentialKind::Table { samples } => interpolate_table(&self.grid, samples, x),
        }
    }

    /// `dV/dx` at an arbitrary point.
    pub fn derivative_at(&self, x: f64) -> f64 {
        match &self.kind {
            PotentialKind::Free => 0.0,
            PotentialKind::GaussianBarrier { height, width, center } => {
                let u = (x - center) / width;
                -height * u / width * (-0.5 * u * u).exp()
            }
            PotentialKind::Eckart { height, width } => {
                let c = (x / width).cosh();
                -2.0 * height * (x / width).tanh() / (c * c * width)
            }
            PotentialKind::Harmonic { omega, center } => self.mass * omega * omega * (x - center),
            PotentialKind::Linear { slope } => *slope,
            PotentialKind::Table { samples } => {
                let h = self.grid.dx();
                (interpolate_table(&self.grid, samples, x + h) - interpolate_table(&self.grid, samples, x - h))
                    / (2.0 * h)
            }
        }
    }

    pub fn derivative_values(&self) -> Vec<f64> {
        self.grid.points().map(|x| self.derivative_at(x)).collect()
    }

    /// Scattering requirement: flat to `1e-9 * max(1, |V|max)` over the first
    /// and last ten cells.
    pub fn check_asymptotically_constant(&self) -> Result<()> {
        let n = self.values.len();
        let scale = self.values.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
        let tol = 1e-9 * scale;
        let left = (self.values[0] - self.values[10]).abs();
        let right = (self.values[n - 1] - self.values[n - 11]).abs();
        if left >= tol || right >= tol {
            return Err(Error::InvalidPotential(format!(
                "not asymptotically constant: edge variation {:e} / {:e} exceeds {tol:e}",
                left, right
            )));
        }
        Ok(())
    }

    /// True when `x` sits where the potential has reached its right-hand
    /// asymptotic value.
    pub fn is_asymptotic_at(&self, x: f64) -> bool {
        (self.value_at(x) - self.value_at(self.grid.x_max())).abs() < 1e-9
    }
}

fn interpolate_table(grid: &Grid1D, samples: &[f64], x: f64) -> f64 {
    let n = samples.len();
    let s = ((x - grid.x_min()) / grid.dx()).clamp(0.0, (n - 1) as f64);
    let i = (s.floor() as usize).min(n - 2);
    let w = s - i as f64;
    samples[i] * (1.0 - w) + samples[i + 1] * w
}
