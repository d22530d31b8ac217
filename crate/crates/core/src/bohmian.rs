//! Polar form of the wavefunction and the Bohmian picture built on it:
//! momentum and osmotic fields, the quantum potential, trajectories,
//! energy partition and the local/averaged force laws.
//!
//! Local fields use the logarithmic derivative `u = psi'/psi`:
//! `p_B = hbar Im u`, `p_O = -hbar Re u` and
//! `Q = -(hbar^2/2M) (a' + a^2)` with `a = Re u`, all from spectral
//! derivatives of the wavefunction.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolution::EvolutionRecord;
use crate::sampling::{seeded_rng, PiecewiseDensity};
use crate::spectral::Spectral;
use crate::state::{Grid1D, PhysicalParams, Potential, Wavefunction};
use crate::weak::EPS_NODE;

/// Density and unwrapped phase of one wavefunction.
#[derive(Debug, Clone, PartialEq)]
pub struct PolarField {
    grid: Grid1D,
    time: f64,
    hbar: f64,
    r: Vec<f64>,
    s: Vec<f64>,
    mask: Vec<bool>,
    source: Vec<Complex64>,
}

impl PolarField {
    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    /// `r = |psi|^2`.
    pub fn density(&self) -> &[f64] {
        &self.r
    }

    /// Phase `S` with `psi = sqrt(r) exp(iS/hbar)`, unwrapped along x.
    pub fn phase(&self) -> &[f64] {
        &self.s
    }

    /// True where the density is below the node threshold.
    pub fn node_mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn reassemble(&self) -> Wavefunction {
        let amps = self
            .r
            .iter()
            .zip(&self.s)
            .map(|(&r, &s)| Complex64::from_polar(r.sqrt(), s / self.hbar))
            .collect();
        Wavefunction::from_parts(self.grid, amps, self.time)
    }

    /// The decomposed wavefunction itself, for spectral derivatives.
    fn state(&self) -> Wavefunction {
        Wavefunction::from_parts(self.grid, self.source.clone(), self.time)
    }
}

/// `r = |psi|^2`, `S = hbar arg psi` unwrapped outward from the density
/// maximum. Points below `EPS_NODE * max r` are masked.
pub fn polar_decompose(state: &Wavefunction, params: &PhysicalParams) -> PolarField {
    let r = state.density();
    let peak = r.iter().cloned().fold(0.0, f64::max);
    let mask: Vec<bool> = r.iter().map(|&v| !(v > EPS_NODE * peak)).collect();
    let amps = state.amplitudes();
    let start = r
        .iter()
        .enumerate()
        .fold(0, |best, (i, &v)| if v > r[best] { i } else { best });
    let mut theta = vec![0.0; amps.len()];
    theta[start] = amps[start].arg();
    for i in start + 1..amps.len() {
        theta[i] = theta[i - 1] + (amps[i] * amps[i - 1].conj()).arg();
    }
    for i in (0..start).rev() {
        theta[i] = theta[i + 1] + (amps[i] * amps[i + 1].conj()).arg();
    }
    PolarField {
        grid: *state.grid(),
        time: state.time(),
        hbar: params.hbar,
        s: theta.iter().map(|t| params.hbar * t).collect(),
        r,
        mask,
        source: amps.to_vec(),
    }
}

/// `u = psi'/psi` and its first two derivatives at unmasked points.
fn log_derivatives(psi: &Wavefunction, mask: &[bool]) -> Vec<Option<[Complex64; 3]>> {
    let sp = Spectral::new(psi.grid());
    let spec = sp.spectrum(psi.amplitudes());
    let d1 = sp.derivative_from_spectrum(&spec, 1);
    let d2 = sp.derivative_from_spectrum(&spec, 2);
    let d3 = sp.derivative_from_spectrum(&spec, 3);
    psi.amplitudes()
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            if mask[i] {
                return None;
            }
            let (a1, a2, a3) = (d1[i] / p, d2[i] / p, d3[i] / p);
            let u = a1;
            let u1 = a2 - u * u;
            let u2 = a3 - 3.0 * u * a2 + 2.0 * u * u * u;
            Some([u, u1, u2])
        })
        .collect()
}

/// `dS/dx`; `None` at masked points.
pub fn bohmian_momentum_field(field: &PolarField) -> Vec<Option<f64>> {
    log_derivatives(&field.state(), &field.mask)
        .into_iter()
        .map(|d| d.map(|[u, _, _]| field.hbar * u.im))
        .collect()
}

/// `dS/dx` by an eighth-order centred difference of the unwrapped phase,
/// independent of the spectral machinery. `None` unless all nine stencil
/// points have relative density above `floor`.
pub fn phase_slope_fd(field: &PolarField, floor: f64) -> Vec<Option<f64>> {
    const W: [f64; 4] = [4.0 / 5.0, -1.0 / 5.0, 4.0 / 105.0, -1.0 / 280.0];
    let peak = field.r.iter().cloned().fold(0.0, f64::max);
    let ok = |i: usize| field.r[i] > floor.max(EPS_NODE) * peak;
    let n = field.s.len();
    let dx = field.grid.dx();
    (0..n)
        .map(|i| {
            if i < 4 || i + 4 >= n || !(i - 4..=i + 4).all(ok) {
                return None;
            }
            let d: f64 = W.iter().enumerate().map(|(m, w)| w * (field.s[i + m + 1] - field.s[i - m - 1])).sum();
            Some(d / dx)
        })
        .collect()
}

/// `-(hbar/2r) dr/dx`; `None` at masked points.
pub fn osmotic_momentum_field(field: &PolarField, params: &PhysicalParams) -> Vec<Option<f64>> {
    log_derivatives(&field.state(), &field.mask)
        .into_iter()
        .map(|d| d.map(|[u, _, _]| -params.hbar * u.re))
        .collect()
}

/// `Q = -(hbar^2 / 2M sqrt(r)) d^2 sqrt(r)/dx^2` and `V_eff = V + Q`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumPotentialField {
    pub grid: Grid1D,
    pub q: Vec<Option<f64>>,
    pub v_eff: Vec<Option<f64>>,
}

pub fn quantum_potential(
    field: &PolarField,
    potential: &Potential,
    params: &PhysicalParams,
) -> Result<QuantumPotentialField> {
    if potential.grid() != field.grid() {
        return Err(Error::GridMismatch);
    }
    let c = -params.hbar * params.hbar / (2.0 * params.mass);
    let q: Vec<Option<f64>> = log_derivatives(&field.state(), &field.mask)
        .into_iter()
        .map(|d| d.map(|[u, u1, _]| c * (u1.re + u.re * u.re)))
        .collect();
    let v_eff = q
        .iter()
        .zip(potential.values())
        .map(|(q, v)| q.map(|q| q + v))
        .collect();
    Ok(QuantumPotentialField { grid: *field.grid(), q, v_eff })
}

/// Density-weighted means of the quantum potential and of `p_O^2/2M`,
/// which agree for a localized state.
pub fn mean_quantum_and_osmotic(field: &PolarField, params: &PhysicalParams) -> (f64, f64) {
    let c = params.hbar * params.hbar / (2.0 * params.mass);
    let dx = field.grid.dx();
    let mut q_mean = 0.0;
    let mut io_mean = 0.0;
    for (d, &r) in log_derivatives(&field.state(), &field.mask).iter().zip(&field.r) {
        if let Some([u, u1, _]) = d {
            q_mean -= r * c * (u1.re + u.re * u.re) * dx;
            io_mean += r * c * u.re * u.re * dx;
        }
    }
    (q_mean, io_mean)
}

/// Grid fields of one snapshot used by trajectories and force checks.
/// Masked points hold NaN.
#[derive(Debug, Clone)]
struct SnapshotFields {
    p_b: Vec<f64>,
    dp_b: Vec<f64>,
    p_o: Vec<f64>,
    q: Vec<f64>,
    dq: Vec<f64>,
}

impl SnapshotFields {
    fn new(state: &Wavefunction, params: &PhysicalParams, floor: f64) -> Self {
        let keep = above_floor(state, floor);
        let mask: Vec<bool> = keep.iter().map(|k| !k).collect();
        let derivs = log_derivatives(state, &mask);
        let (hbar, m) = (params.hbar, params.mass);
        let c = -hbar * hbar / (2.0 * m);
        let n = derivs.len();
        let mut f = Self {
            p_b: vec![f64::NAN; n],
            dp_b: vec![f64::NAN; n],
            p_o: vec![f64::NAN; n],
            q: vec![f64::NAN; n],
            dq: vec![f64::NAN; n],
        };
        for (i, d) in derivs.iter().enumerate() {
            if let Some([u, u1, u2]) = d {
                f.p_b[i] = hbar * u.im;
                f.dp_b[i] = hbar * u1.im;
                f.p_o[i] = -hbar * u.re;
                f.q[i] = c * (u1.re + u.re * u.re);
                f.dq[i] = c * (u2.re + 2.0 * u.re * u1.re);
            }
        }
        f
    }
}

/// Four-point Lagrange interpolation of a grid field; `None` when the
/// stencil leaves the grid or touches a masked point.
fn cubic_at(grid: &Grid1D, field: &[f64], x: f64) -> Option<f64> {
    let s = (x - grid.x_min()) / grid.dx();
    let i = s.floor() as isize;
    if i < 1 || i + 2 >= field.len() as isize {
        return None;
    }
    let t = s - i as f64;
    let i = i as usize;
    let (f0, f1, f2, f3) = (field[i - 1], field[i], field[i + 1], field[i + 2]);
    let v = -t * (t - 1.0) * (t - 2.0) / 6.0 * f0 + (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0 * f1
        - (t + 1.0) * t * (t - 2.0) / 2.0 * f2
        + (t + 1.0) * t * (t - 1.0) / 6.0 * f3;
    v.is_finite().then_some(v)
}

/// Energy terms along a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergySample {
    /// `p_B^2 / 2M`
    pub kinetic: f64,
    /// `p_O^2 / 2M`
    pub osmotic: f64,
    pub potential: f64,
    pub quantum: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BohmianTrajectory {
    pub times: Vec<f64>,
    pub xs: Vec<f64>,
    pub ps: Vec<f64>,
    pub energies: Vec<EnergySample>,
}

/// Momentum, osmotic and quantum-potential fields of every snapshot of a run,
/// ready for trajectory integration.
#[derive(Debug, Clone)]
pub struct BohmianFlow<'a> {
    record: &'a EvolutionRecord,
    fields: Vec<SnapshotFields>,
}

/// Largest snapshot spacing allowed for trajectory integration: a tenth of
/// `2 pi hbar / E_max`, with `E_max` the largest kinetic energy carried by the
/// initial spectrum (weight above `1e-10` of the peak) plus `max |V|`.
pub fn snapshot_spacing_limit(record: &EvolutionRecord) -> f64 {
    let params = record.params();
    let sp = Spectral::new(record.grid());
    let spec = sp.spectrum(record.snapshots()[0].amplitudes());
    let peak = spec.iter().fold(0.0_f64, |m, c| m.max(c.norm_sqr()));
    let k_max = spec
        .iter()
        .zip(sp.wavenumbers())
        .filter(|(c, _)| c.norm_sqr() > 1e-10 * peak)
        .fold(0.0_f64, |m, (_, k)| m.max(k.abs()));
    let v_max = record.potential().values().iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let e_max = (params.hbar * k_max).powi(2) / (2.0 * params.mass) + v_max;
    0.1 * 2.0 * PI * params.hbar / e_max
}

impl<'a> BohmianFlow<'a> {
    pub fn new(record: &'a EvolutionRecord) -> Result<Self> {
        let limit = snapshot_spacing_limit(record);
        let spacing = record.snapshot_spacing();
        if record.len() > 1 && spacing > limit {
            return Err(Error::CoarseSnapshots { spacing, limit });
        }
        let params = *record.params();
        let fields = record
            .snapshots()
            .par_iter()
            .map(|s| SnapshotFields::new(s, &params, EPS_NODE))
            .collect();
        Ok(Self { record, fields })
    }

    pub fn record(&self) -> &EvolutionRecord {
        self.record
    }

    /// Bohmian momentum at `x` between snapshots `k` and `k+1`, weight `w` on `k+1`.
    fn momentum(&self, k: usize, w: f64, x: f64) -> Option<f64> {
        let grid = self.record.grid();
        let a = cubic_at(grid, &self.fields[k].p_b, x)?;
        if w == 0.0 {
            return Some(a);
        }
        let b = cubic_at(grid, &self.fields[k + 1].p_b, x)?;
        Some((1.0 - w) * a + w * b)
    }

    fn energy_at(&self, k: usize, x: f64) -> Option<(f64, EnergySample)> {
        let grid = self.record.grid();
        let f = &self.fields[k];
        let m = self.record.params().mass;
        let p = cubic_at(grid, &f.p_b, x)?;
        let po = cubic_at(grid, &f.p_o, x)?;
        Some((
            p,
            EnergySample {
                kinetic: p * p / (2.0 * m),
                osmotic: po * po / (2.0 * m),
                potential: self.record.potential().value_at(x),
                quantum: cubic_at(grid, &f.q, x)?,
            },
        ))
    }

    /// RK4 on `dx/dt = p_B(x,t)/M` with one step per snapshot interval.
    pub fn trajectory(&self, x0: f64) -> Result<BohmianTrajectory> {
        let times = self.record.times();
        let m = self.record.params().mass;
        let node = |t: f64, x: f64| Error::NodeApproach { time: t, x };
        let mut x = x0;
        let mut xs = Vec::with_capacity(times.len());
        let mut ps = Vec::with_capacity(times.len());
        let mut energies = Vec::with_capacity(times.len());
        for k in 0..times.len() {
            let (p, e) = self.energy_at(k, x).ok_or_else(|| node(times[k], x))?;
            xs.push(x);
            ps.push(p);
            energies.push(e);
            if k + 1 == times.len() {
                break;
            }
            let h = times[k + 1] - times[k];
            let v = |w: f64, y: f64| self.momentum(k, w, y).map(|p| p / m).ok_or_else(|| node(times[k] + w * h, y));
            let k1 = v(0.0, x)?;
            let k2 = v(0.5, x + 0.5 * h * k1)?;
            let k3 = v(0.5, x + 0.5 * h * k2)?;
            let k4 = v(1.0, x + h * k3)?;
            x += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        Ok(BohmianTrajectory {
            times: times.to_vec(),
            xs,
            ps,
            energies,
        })
    }

    /// Trajectories for many starting points, in parallel.
    pub fn ensemble(&self, x0s: &[f64]) -> Result<Vec<BohmianTrajectory>> {
        x0s.par_iter().map(|&x0| self.trajectory(x0)).collect()
    }

    /// `-d(V + Q)/dx` at `x` for snapshot `k`.
    pub fn force_at(&self, k: usize, x: f64) -> Option<f64> {
        let dq = cubic_at(self.record.grid(), &self.fields[k].dq, x)?;
        Some(-(self.record.potential().derivative_at(x) + dq))
    }

    /// Material derivative of `p_B` along `traj` (centred difference in time)
    /// next to `-d V_eff/dx` at the trajectory position, for interior times.
    pub fn along_trajectory_rate(&self, traj: &BohmianTrajectory) -> Result<RateSeries> {
        let n = traj.times.len();
        let mut out = RateSeries::default();
        for k in 2..n.saturating_sub(2) {
            let h = traj.times[k + 1] - traj.times[k];
            let lhs = (traj.ps[k - 2] - 8.0 * traj.ps[k - 1] + 8.0 * traj.ps[k + 1] - traj.ps[k + 2]) / (12.0 * h);
            let rhs = self
                .force_at(k, traj.xs[k])
                .ok_or(Error::NodeApproach { time: traj.times[k], x: traj.xs[k] })?;
            out.push(traj.times[k], lhs, rhs);
        }
        Ok(out)
    }
}

pub fn integrate_trajectory(record: &EvolutionRecord, x0: f64) -> Result<BohmianTrajectory> {
    BohmianFlow::new(record)?.trajectory(x0)
}

/// Starting points drawn from `|psi(x, t0)|^2`, piecewise constant on grid cells.
pub fn sample_initial_positions(record: &EvolutionRecord, n: usize, seed: u64) -> Vec<f64> {
    let law = grid_density_law(&record.snapshots()[0]);
    law.sample(&mut seeded_rng(seed), n)
}

/// `|psi|^2` of a state as a piecewise-constant law on grid cells.
pub fn grid_density_law(state: &Wavefunction) -> PiecewiseDensity {
    let grid = state.grid();
    let centers: Vec<f64> = grid.points().collect();
    PiecewiseDensity::new(&centers, grid.dx(), &state.density())
}

/// Paired time series `lhs(t)`, `rhs(t)` of a local force law.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RateSeries {
    pub times: Vec<f64>,
    pub lhs: Vec<f64>,
    pub rhs: Vec<f64>,
}

impl RateSeries {
    fn push(&mut self, t: f64, lhs: f64, rhs: f64) {
        self.times.push(t);
        self.lhs.push(lhs);
        self.rhs.push(rhs);
    }

    pub fn max_residual(&self) -> f64 {
        self.lhs.iter().zip(&self.rhs).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    /// `max |lhs|`.
    pub fn scale(&self) -> f64 {
        self.lhs.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// At the grid node nearest `x`: the time derivative of `p_B` (fourth-order
/// centred difference) next to `-d/dx (V + Q + p_B^2/2M)`. Times where the
/// relative density at the point is below `floor` in any stencil snapshot
/// are skipped.
pub fn fixed_point_momentum_rate(record: &EvolutionRecord, x: f64, floor: f64) -> Result<RateSeries> {
    let idx = record
        .grid()
        .nearest_index(x)
        .ok_or_else(|| Error::InvalidProtocol(format!("point {x} lies outside the grid")))?;
    let params = *record.params();
    let m = params.mass;
    let dv = record.potential().derivative_values()[idx];
    let snaps = record.snapshots();
    let times = record.times();
    let h = record.snapshot_spacing();
    let local: Vec<Option<(f64, f64, f64)>> = snaps
        .par_iter()
        .map(|s| {
            let f = SnapshotFields::new(s, &params, floor);
            let (p, dp, dq) = (f.p_b[idx], f.dp_b[idx], f.dq[idx]);
            (p.is_finite() && dp.is_finite() && dq.is_finite()).then_some((p, dp, dq))
        })
        .collect();
    let mut out = RateSeries::default();
    for (k, window) in local.windows(5).enumerate() {
        let k = k + 2;
        let Some(w) = window.iter().copied().collect::<Option<Vec<(f64, f64, f64)>>>() else { continue };
        let lhs = (w[0].0 - 8.0 * w[1].0 + 8.0 * w[3].0 - w[4].0) / (12.0 * h);
        let (p, dp, dq) = w[2];
        let rhs = -(dv + dq + p * dp / m);
        out.push(times[k], lhs, rhs);
    }
    Ok(out)
}

/// `d<p>/dt` against `-<dV/dx>` per snapshot interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EhrenfestReport {
    /// Interval midpoints.
    pub times: Vec<f64>,
    /// `(<p>_{k+1} - <p>_k) / h`
    pub momentum_rate: Vec<f64>,
    /// `-(<V'>_k + <V'>_{k+1}) / 2`
    pub mean_force: Vec<f64>,
}

impl EhrenfestReport {
    pub fn max_residual(&self) -> f64 {
        self.momentum_rate
            .iter()
            .zip(&self.mean_force)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn scale(&self) -> f64 {
        self.momentum_rate.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Ehrenfest theorem on the snapshot mesh. The force average uses the
/// trapezoid rule over each interval, which for a record kept at every step
/// is exactly what a symmetric split step does to `<p>`.
pub fn ehrenfest_check(record: &EvolutionRecord, potential: &Potential, params: &PhysicalParams) -> Result<EhrenfestReport> {
    if potential.grid() != record.grid() {
        return Err(Error::GridMismatch);
    }
    let dv = potential.derivative_values();
    let dx = record.grid().dx();
    let (p, f): (Vec<f64>, Vec<f64>) = record
        .snapshots()
        .par_iter()
        .map(|s| {
            let force = s.density().iter().zip(&dv).map(|(r, d)| r * d).sum::<f64>() * dx;
            (s.mean_momentum(params), force)
        })
        .unzip();
    let times = record.times();
    let mut report = EhrenfestReport { times: Vec::new(), momentum_rate: Vec::new(), mean_force: Vec::new() };
    for k in 0..times.len().saturating_sub(1) {
        let h = times[k + 1] - times[k];
        report.times.push(0.5 * (times[k] + times[k + 1]));
        report.momentum_rate.push((p[k + 1] - p[k]) / h);
        report.mean_force.push(-0.5 * (f[k] + f[k + 1]));
    }
    Ok(report)
}

/// Density-weighted energy terms at one time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyMeans {
    pub t: f64,
    pub kinetic: f64,
    pub osmotic: f64,
    pub potential: f64,
    pub total: f64,
}

pub fn energy_partition(record: &EvolutionRecord, potential: &Potential, params: &PhysicalParams) -> Result<Vec<EnergyMeans>> {
    if potential.grid() != record.grid() {
        return Err(Error::GridMismatch);
    }
    let dx = record.grid().dx();
    let m = params.mass;
    Ok(record
        .snapshots()
        .par_iter()
        .map(|s| {
            let polar = polar_decompose(s, params);
            let derivs = log_derivatives(s, &polar.mask);
            let (mut kinetic, mut osmotic) = (0.0, 0.0);
            for (d, &r) in derivs.iter().zip(&polar.r) {
                if let Some([u, _, _]) = d {
                    let (pb, po) = (params.hbar * u.im, params.hbar * u.re);
                    kinetic += r * pb * pb / (2.0 * m) * dx;
                    osmotic += r * po * po / (2.0 * m) * dx;
                }
            }
            let pot = s.potential_energy(potential);
            EnergyMeans {
                t: s.time(),
                kinetic,
                osmotic,
                potential: pot,
                total: kinetic + osmotic + pot,
            }
        })
        .collect())
}

/// Points whose density is at least `floor` times the snapshot maximum.
fn above_floor(state: &Wavefunction, floor: f64) -> Vec<bool> {
    let r = state.density();
    let peak = r.iter().cloned().fold(0.0, f64::max);
    let floor = floor.max(EPS_NODE);
    r.iter().map(|&v| v > floor * peak).collect()
}

/// `max |dS/dt + p_B^2/2M + V + Q|` over interior snapshots and points with
/// relative density above `floor`. `dS/dt` is a fourth-order centred
/// difference of the phase, unwrapped in time point by point through
/// `arg(psi_b conj(psi_a))`.
pub fn hamilton_jacobi_residual(record: &EvolutionRecord, floor: f64) -> Result<f64> {
    let snaps = record.snapshots();
    if snaps.len() < 5 {
        return Err(Error::InvalidProtocol("need at least five snapshots".into()));
    }
    let params = *record.params();
    let h = record.snapshot_spacing();
    let v = record.potential().values();
    let m = params.mass;
    let worst = (2..snaps.len() - 2)
        .into_par_iter()
        .map(|k| {
            let f = SnapshotFields::new(&snaps[k], &params, floor);
            let keep = above_floor(&snaps[k], floor);
            let a = |j: usize| snaps[j].amplitudes();
            let (m2, m1, p1, p2) = (a(k - 2), a(k - 1), a(k + 1), a(k + 2));
            let mut worst = 0.0_f64;
            for i in 0..v.len() {
                if !keep[i] {
                    continue;
                }
                let near = (p1[i] * m1[i].conj()).arg();
                let far = (p2[i] * m2[i].conj()).arg();
                let ds = params.hbar * (8.0 * near - far) / (12.0 * h);
                let res = ds + f.p_b[i] * f.p_b[i] / (2.0 * m) + v[i] + f.q[i];
                worst = worst.max(res.abs());
            }
            worst
        })
        .reduce(|| 0.0, f64::max);
    Ok(worst)
}

/// `max |dr/dt + d(r p_B/M)/dx|` over interior snapshots and points with
/// relative density above `floor`.
pub fn bohmian_continuity_residual(record: &EvolutionRecord, floor: f64) -> Result<f64> {
    let snaps = record.snapshots();
    if snaps.len() < 5 {
        return Err(Error::InvalidProtocol("need at least five snapshots".into()));
    }
    let params = *record.params();
    let h = record.snapshot_spacing();
    let sp = Spectral::new(record.grid());
    let worst = (2..snaps.len() - 2)
        .into_par_iter()
        .map(|k| {
            let polar = polar_decompose(&snaps[k], &params);
            let p_b = bohmian_momentum_field(&polar);
            let flux: Vec<f64> = p_b
                .iter()
                .zip(&polar.r)
                .map(|(p, r)| p.map_or(0.0, |p| r * p / params.mass))
                .collect();
            let dflux = sp.derivative_real(&flux, 1);
            let keep = above_floor(&snaps[k], floor);
            let rho = |j: usize| snaps[j].density();
            let (m2, m1, p1, p2) = (rho(k - 2), rho(k - 1), rho(k + 1), rho(k + 2));
            let mut worst = 0.0_f64;
            for i in 0..flux.len() {
                if !keep[i] {
                    continue;
                }
                let dr = (m2[i] - 8.0 * m1[i] + 8.0 * p1[i] - p2[i]) / (12.0 * h);
                worst = worst.max((dr + dflux[i]).abs());
            }
            worst
        })
        .reduce(|| 0.0, f64::max);
    Ok(worst)
}
