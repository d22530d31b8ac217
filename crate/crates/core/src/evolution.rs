//! Strang split-operator propagation of the 1D Schrodinger equation.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{PointProbe, Spectral};
use crate::state::{Grid1D, PhysicalParams, Potential, Wavefunction};

/// Cells on each side of the grid watched for leakage.
pub const EDGE_CELLS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PropagatorConfig {
    pub dt: f64,
    pub t_max: f64,
    #[serde(default = "default_threshold")]
    pub boundary_density_threshold: f64,
    #[serde(default = "default_stride")]
    pub record_stride: usize,
}

fn default_threshold() -> f64 {
    1e-8
}

fn default_stride() -> usize {
    1
}

impl PropagatorConfig {
    pub fn new(dt: f64, t_max: f64, record_stride: usize) -> Self {
        Self {
            dt,
            t_max,
            boundary_density_threshold: default_threshold(),
            record_stride,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidProtocol(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_max >= 0.0 && self.t_max.is_finite()) {
            return Err(Error::InvalidProtocol(format!("t_max must be >= 0, got {}", self.t_max)));
        }
        let th = self.boundary_density_threshold;
        if !(th > 0.0 && th < 1.0) {
            return Err(Error::InvalidProtocol(format!("boundary threshold {th} outside (0, 1)")));
        }
        if self.record_stride == 0 {
            return Err(Error::InvalidProtocol("record_stride must be >= 1".into()));
        }
        Ok(())
    }

    pub fn n_steps(&self) -> usize {
        (self.t_max / self.dt).round() as usize
    }
}

/// Precomputed phase factors for one Strang step
/// `exp(-iV dt/2hbar) exp(-ip^2 dt/2M hbar) exp(-iV dt/2hbar)`.
#[derive(Debug, Clone)]
pub struct SplitOperator {
    spectral: Spectral,
    half_potential: Vec<Complex64>,
    kinetic: Vec<Complex64>,
    dt: f64,
}

impl SplitOperator {
    pub fn new(potential: &Potential, params: &PhysicalParams, dt: f64) -> Self {
        let spectral = Spectral::new(potential.grid());
        let half_potential = potential
            .values()
            .iter()
            .map(|v| Complex64::new(0.0, -v * dt / (2.0 * params.hbar)).exp())
            .collect();
        let kinetic = spectral
            .wavenumbers()
            .iter()
            .map(|k| Complex64::new(0.0, -params.hbar * k * k * dt / (2.0 * params.mass)).exp())
            .collect();
        Self {
            spectral,
            half_potential,
            kinetic,
            dt,
        }
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn step_in_place(&self, psi: &mut [Complex64]) {
        psi.iter_mut().zip(&self.half_potential).for_each(|(z, v)| *z *= v);
        self.spectral.forward(psi);
        psi.iter_mut().zip(&self.kinetic).for_each(|(z, k)| *z *= k);
        self.spectral.inverse(psi);
        psi.iter_mut().zip(&self.half_potential).for_each(|(z, v)| *z *= v);
    }

    /// Exact free evolution over `t` in one spectral multiplication.
    pub fn free_evolve(state: &Wavefunction, params: &PhysicalParams, t: f64) -> Wavefunction {
        let sp = Spectral::new(state.grid());
        let mut buf = state.amplitudes().to_vec();
        sp.forward(&mut buf);
        for (z, k) in buf.iter_mut().zip(sp.wavenumbers()) {
            *z *= Complex64::new(0.0, -params.hbar * k * k * t / (2.0 * params.mass)).exp();
        }
        sp.inverse(&mut buf);
        Wavefunction::from_parts(*state.grid(), buf, state.time() + t)
    }
}

/// One Strang step of length `dt`.
pub fn step(state: &Wavefunction, potential: &Potential, params: &PhysicalParams, dt: f64) -> Result<Wavefunction> {
    if state.grid() != potential.grid() {
        return Err(Error::GridMismatch);
    }
    let op = SplitOperator::new(potential, params, dt);
    let mut buf = state.amplitudes().to_vec();
    op.step_in_place(&mut buf);
    Ok(Wavefunction::from_parts(*state.grid(), buf, state.time() + dt))
}

/// Snapshots of a propagation run on a uniform time mesh.
#[derive(Debug, Clone)]
pub struct EvolutionRecord {
    params: PhysicalParams,
    potential: Potential,
    step_dt: f64,
    times: Vec<f64>,
    snapshots: Vec<Wavefunction>,
    norm_drift: f64,
    energy_drift: f64,
}

impl EvolutionRecord {
    pub fn params(&self) -> &PhysicalParams {
        &self.params
    }

    pub fn potential(&self) -> &Potential {
        &self.potential
    }

    pub fn grid(&self) -> &Grid1D {
        self.potential.grid()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn snapshots(&self) -> &[Wavefunction] {
        &self.snapshots
    }

    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }

    /// Propagator time step.
    pub fn step_dt(&self) -> f64 {
        self.step_dt
    }

    /// Spacing of the recorded time mesh.
    pub fn snapshot_spacing(&self) -> f64 {
        if self.times.len() > 1 {
            self.times[1] - self.times[0]
        } else {
            self.step_dt
        }
    }

    pub fn norm_drift(&self) -> f64 {
        self.norm_drift
    }

    pub fn energy_drift(&self) -> f64 {
        self.energy_drift
    }

    pub fn final_state(&self) -> &Wavefunction {
        self.snapshots.last().expect("record holds at least the initial state")
    }

    /// `(psi, dpsi/dx)` at arbitrary positions for every snapshot, indexed
    /// `[snapshot][point]`, by band-limited interpolation.
    pub fn probe(&self, xs: &[f64]) -> Vec<Vec<(Complex64, Complex64)>> {
        let probe = PointProbe::new(self.grid(), xs);
        let spectral = Spectral::new(self.grid());
        self.snapshots
            .par_iter()
            .map(|s| probe.eval(&spectral.spectrum(s.amplitudes())))
            .collect()
    }
}

/// Propagate `state` to `cfg.t_max`, keeping every `record_stride`-th step.
pub fn propagate(
    state: &Wavefunction,
    potential: &Potential,
    cfg: &PropagatorConfig,
    params: &PhysicalParams,
) -> Result<EvolutionRecord> {
    cfg.validate()?;
    params.validate()?;
    if state.grid() != potential.grid() {
        return Err(Error::GridMismatch);
    }
    let op = SplitOperator::new(potential, params, cfg.dt);
    let grid = *state.grid();
    let t0 = state.time();
    let norm0 = state.norm_sqr();
    let energy0 = state.energy(potential, params);

    let mut psi = state.amplitudes().to_vec();
    let mut times = vec![t0];
    let mut snapshots = vec![state.clone()];
    let mut norm_drift = 0.0_f64;
    let mut energy_drift = 0.0_f64;

    for n in 1..=cfg.n_steps() {
        op.step_in_place(&mut psi);
        let t = t0 + n as f64 * cfg.dt;
        let norm = psi.iter().map(|z| z.norm_sqr()).sum::<f64>() * grid.dx();
        norm_drift = norm_drift.max((norm - norm0).abs());
        let edge = edge_probability(&psi, grid.dx());
        if edge > cfg.boundary_density_threshold {
            return Err(Error::BoundaryLeak { time: t, probability: edge });
        }
        if n % cfg.record_stride == 0 {
            let snap = Wavefunction::from_parts(grid, psi.clone(), t);
            energy_drift = energy_drift.max((snap.energy(potential, params) - energy0).abs());
            times.push(t);
            snapshots.push(snap);
        }
    }

    Ok(EvolutionRecord {
        params: *params,
        potential: potential.clone(),
        step_dt: cfg.dt,
        times,
        snapshots,
        norm_drift,
        energy_drift,
    })
}

fn edge_probability(psi: &[Complex64], dx: f64) -> f64 {
    let n = psi.len();
    let left: f64 = psi[..EDGE_CELLS].iter().map(|z| z.norm_sqr()).sum();
    let right: f64 = psi[n - EDGE_CELLS..].iter().map(|z| z.norm_sqr()).sum();
    (left + right) * dx
}
