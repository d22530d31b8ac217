//! Time-of-flight protocol: arrival-time distributions at detector points,
//! the weak momentum recovered from them, simulated detector clicks and
//! transmission through a scatterer.
//!
//! All time integrals are rectangle sums on the snapshot mesh of the
//! [`EvolutionRecord`]. Detector positions need not be grid nodes; values
//! there come from band-limited interpolation of each snapshot.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolution::{EvolutionRecord, SplitOperator};
use crate::sampling::{seeded_rng, Binning, PiecewiseDensity};
use crate::spectral::{PointProbe, Spectral};
use crate::state::PhysicalParams;
use crate::weak::EPS_NODE;

/// `|psi(x, t_max)|^2 / peak` above which a time distribution is rejected.
pub const TAIL_RATIO: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistributionKind {
    Density,
    Flux,
}

/// A normalized distribution of arrival times at one detector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeDistribution {
    pub detector_x: f64,
    pub times: Vec<f64>,
    pub dt: f64,
    pub values: Vec<f64>,
    /// Time integral of the unnormalized quantity.
    pub normalization: f64,
    pub kind: DistributionKind,
    /// Set when a flux distribution has negative lobes.
    pub backflow: bool,
}

impl TimeDistribution {
    /// `sum values * dt`, 1 up to roundoff after construction.
    pub fn total(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.dt
    }

    /// Unnormalized values `normalization * values`.
    pub fn raw(&self) -> Vec<f64> {
        self.values.iter().map(|v| v * self.normalization).collect()
    }

    /// The distribution as a piecewise-constant density on cells centred on
    /// the mesh times.
    pub fn piecewise(&self) -> PiecewiseDensity {
        PiecewiseDensity::new(&self.times, self.dt, &self.values)
    }

    pub fn cdf(&self, t: f64) -> f64 {
        self.piecewise().cdf(t)
    }

    fn peak(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// `(psi, dpsi/dx)` over the record's time mesh at each point, `[point][time]`.
pub fn detector_series(record: &EvolutionRecord, xs: &[f64]) -> Result<Vec<Vec<(Complex64, Complex64)>>> {
    for &x in xs {
        if !record.grid().contains(x) {
            return Err(Error::InvalidProtocol(format!("detector at {x} lies outside the grid")));
        }
    }
    let by_time = record.probe(xs);
    Ok((0..xs.len()).map(|p| by_time.iter().map(|row| row[p]).collect()).collect())
}

fn check_tail(x: f64, density: &[f64]) -> Result<()> {
    let peak = density.iter().cloned().fold(0.0, f64::max);
    if !(peak > 0.0) {
        return Err(Error::OpenTail { x, ratio: f64::INFINITY });
    }
    let ratio = density.last().copied().unwrap_or(0.0) / peak;
    if ratio >= TAIL_RATIO {
        return Err(Error::OpenTail { x, ratio });
    }
    Ok(())
}

fn density_from_series(record: &EvolutionRecord, x: f64, series: &[(Complex64, Complex64)]) -> Result<TimeDistribution> {
    let rho: Vec<f64> = series.iter().map(|(psi, _)| psi.norm_sqr()).collect();
    check_tail(x, &rho)?;
    let dt = record.snapshot_spacing();
    let norm = rho.iter().sum::<f64>() * dt;
    Ok(TimeDistribution {
        detector_x: x,
        times: record.times().to_vec(),
        dt,
        values: rho.iter().map(|r| r / norm).collect(),
        normalization: norm,
        kind: DistributionKind::Density,
        backflow: false,
    })
}

/// Probability current `(hbar/M) Im(conj(psi) psi')`.
fn current(psi: Complex64, dpsi: Complex64, params: &PhysicalParams) -> f64 {
    params.hbar / params.mass * (psi.conj() * dpsi).im
}

fn flux_from_series(
    record: &EvolutionRecord,
    x: f64,
    series: &[(Complex64, Complex64)],
) -> Result<TimeDistribution> {
    let rho: Vec<f64> = series.iter().map(|(psi, _)| psi.norm_sqr()).collect();
    check_tail(x, &rho)?;
    let params = record.params();
    let j: Vec<f64> = series.iter().map(|&(psi, d)| current(psi, d, params)).collect();
    let dt = record.snapshot_spacing();
    let norm = j.iter().sum::<f64>() * dt;
    if norm == 0.0 {
        return Err(Error::InvalidProtocol(format!("net flux through {x} vanishes")));
    }
    let values: Vec<f64> = j.iter().map(|v| v / norm).collect();
    let peak = values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let backflow = values.iter().any(|&v| v < -1e-10 * peak);
    Ok(TimeDistribution {
        detector_x: x,
        times: record.times().to_vec(),
        dt,
        values,
        normalization: norm,
        kind: DistributionKind::Flux,
        backflow,
    })
}

/// Arrival-time density `|psi(x,t)|^2 / N(x)` with `N(x) = sum |psi(x,t)|^2 dt`.
pub fn density_in_time(record: &EvolutionRecord, x: f64) -> Result<TimeDistribution> {
    let series = detector_series(record, &[x])?;
    density_from_series(record, x, &series[0])
}

/// Flux arrival-time distribution `j(x,t) / N_f` with `N_f = sum j(x,t) dt`.
pub fn flux_in_time(record: &EvolutionRecord, x: f64) -> Result<TimeDistribution> {
    let series = detector_series(record, &[x])?;
    flux_from_series(record, x, &series[0])
}

/// Both distributions from a single pass over the snapshots.
pub fn density_and_flux(record: &EvolutionRecord, x: f64) -> Result<(TimeDistribution, TimeDistribution)> {
    let series = detector_series(record, &[x])?;
    Ok((
        density_from_series(record, x, &series[0])?,
        flux_from_series(record, x, &series[0])?,
    ))
}

/// `f(t|x) M N_f / (N(x) rho(t|x))`, the real weak momentum recovered from the
/// two distributions. `None` where the density is below the node threshold.
pub fn flux_density_ratio(
    flux: &TimeDistribution,
    density: &TimeDistribution,
    params: &PhysicalParams,
) -> Result<Vec<Option<f64>>> {
    if flux.kind != DistributionKind::Flux || density.kind != DistributionKind::Density {
        return Err(Error::InvalidProtocol("expected a flux and a density distribution".into()));
    }
    if flux.times.len() != density.times.len() || flux.detector_x != density.detector_x {
        return Err(Error::InvalidProtocol("distributions belong to different detectors or meshes".into()));
    }
    let peak = density.peak();
    Ok(flux
        .values
        .iter()
        .zip(&density.values)
        .map(|(&f, &r)| {
            (r > EPS_NODE * peak).then(|| f * params.mass * flux.normalization / (density.normalization * r))
        })
        .collect())
}

/// Imaginary weak momentum from arrival-time densities at `x -/+ step/2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImFromDensities {
    pub detector_x: f64,
    pub step: f64,
    pub times: Vec<f64>,
    /// Estimate per mesh time; `None` where either density is at a node.
    pub values: Vec<Option<f64>>,
    /// `-(hbar/2) d ln N / dx` across the stencil, already included in `values`.
    pub baseline: f64,
}

/// Centred finite difference of the log arrival-time density,
///
/// `-(hbar/2) [ln(N rho)(t|x+h/2) - ln(N rho)(t|x-h/2)] / h`.
///
/// The conditional densities `rho(t|x)` are combined with their normalizations
/// `N(x)`, so the estimate converges to the weak value itself rather than to
/// the weak value shifted by `(hbar/2) d ln N/dx`.
pub fn infer_im_weak_momentum_fd(record: &EvolutionRecord, x: f64, step: f64) -> Result<ImFromDensities> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::InvalidProtocol(format!("finite-difference step must be positive, got {step}")));
    }
    let (lo, hi) = (x - 0.5 * step, x + 0.5 * step);
    for p in [lo, hi] {
        if !record.potential().is_asymptotic_at(p) {
            return Err(Error::InvalidProtocol(format!("stencil point {p} is not in the asymptotic region")));
        }
    }
    let series = detector_series(record, &[lo, hi])?;
    let left = density_from_series(record, lo, &series[0])?;
    let right = density_from_series(record, hi, &series[1])?;
    let hbar = record.params().hbar;
    let baseline = -0.5 * hbar * (right.normalization.ln() - left.normalization.ln()) / step;
    let (pl, pr) = (left.peak(), right.peak());
    let values = left
        .values
        .iter()
        .zip(&right.values)
        .map(|(&a, &b)| {
            (a > EPS_NODE * pl && b > EPS_NODE * pr).then(|| -0.5 * hbar * (b.ln() - a.ln()) / step + baseline)
        })
        .collect();
    Ok(ImFromDensities {
        detector_x: x,
        step,
        times: record.times().to_vec(),
        values,
        baseline,
    })
}

/// Exact momentum weak value `(Re, Im)` at `x` for every mesh time, from the
/// interpolated wavefunction. `None` at nodes.
pub fn weak_momentum_series(record: &EvolutionRecord, x: f64) -> Result<Vec<Option<(f64, f64)>>> {
    let series = detector_series(record, &[x])?;
    let params = record.params();
    let peak = series[0].iter().fold(0.0_f64, |m, (psi, _)| m.max(psi.norm_sqr()));
    Ok(series[0]
        .iter()
        .map(|&(psi, d)| {
            let rho = psi.norm_sqr();
            (rho > EPS_NODE * peak).then(|| {
                let z = psi.conj() * d;
                (params.hbar * z.im / rho, -params.hbar * z.re / rho)
            })
        })
        .collect())
}

/// `<t(x)> = sum t rho(t|x) dt`.
pub fn mean_arrival_time(dist: &TimeDistribution) -> f64 {
    dist.times.iter().zip(&dist.values).map(|(t, v)| t * v).sum::<f64>() * dist.dt
}

/// The two sides of `d<t(x)>/dx = (2/hbar)[<Im> <t> - <t Im>]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanTimeRelation {
    /// Centred difference of the mean arrival time.
    pub lhs: f64,
    /// Covariance of arrival time and imaginary weak momentum.
    pub rhs: f64,
    pub residual: f64,
    /// Time average of the imaginary weak momentum, `-(hbar/2) d ln N/dx`.
    pub mean_im: f64,
}

pub fn verify_mean_time_relation(record: &EvolutionRecord, x: f64, step: f64) -> Result<MeanTimeRelation> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::InvalidProtocol(format!("finite-difference step must be positive, got {step}")));
    }
    let pts = [x - 0.5 * step, x + 0.5 * step, x];
    let series = detector_series(record, &pts)?;
    let t_lo = mean_arrival_time(&density_from_series(record, pts[0], &series[0])?);
    let t_hi = mean_arrival_time(&density_from_series(record, pts[1], &series[1])?);
    let lhs = (t_hi - t_lo) / step;

    let centre = density_from_series(record, x, &series[2])?;
    let hbar = record.params().hbar;
    let mut mean_im = 0.0;
    let mut t_im = 0.0;
    for ((&(psi, d), &t), &r) in series[2].iter().zip(&centre.times).zip(&centre.values) {
        let rho = psi.norm_sqr();
        if rho == 0.0 {
            continue;
        }
        let im = -hbar * (psi.conj() * d).re / rho;
        mean_im += r * im * centre.dt;
        t_im += t * r * im * centre.dt;
    }
    let rhs = 2.0 / hbar * (mean_im * mean_arrival_time(&centre) - t_im);
    Ok(MeanTimeRelation {
        lhs,
        rhs,
        residual: (lhs - rhs).abs(),
        mean_im,
    })
}

/// Simulated detector record: i.i.d. arrival times at one detector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClickSample {
    pub detector_x: f64,
    pub seed: u64,
    pub n_events: usize,
    pub event_times: Vec<f64>,
}

/// Inverse-CDF sampling of a density distribution, uniform within each mesh cell.
pub fn sample_clicks(dist: &TimeDistribution, n_events: usize, seed: u64) -> Result<ClickSample> {
    if dist.kind != DistributionKind::Density {
        return Err(Error::InvalidProtocol("clicks are drawn from a density distribution".into()));
    }
    let law = dist.piecewise();
    let mut rng = seeded_rng(seed);
    Ok(ClickSample {
        detector_x: dist.detector_x,
        seed,
        n_events,
        event_times: law.sample(&mut rng, n_events),
    })
}

/// Histogram estimate of the imaginary weak momentum in one time bin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinEstimate {
    pub bin: usize,
    pub t: f64,
    pub estimate: f64,
    pub stderr: f64,
    pub counts: (u64, u64),
}

/// Log-ratio of click histograms at `x -/+ step/2`, shifted by
/// `-(hbar/2) log_norm_slope` where `log_norm_slope = d ln N / dx`.
///
/// The standard error propagates binomial counting noise,
/// `var ln p = (1 - p)/c`, through the log-ratio. Bins empty on either side
/// are left out.
pub fn estimate_im_from_clicks(
    left: &ClickSample,
    right: &ClickSample,
    step: f64,
    binning: &Binning,
    hbar: f64,
    log_norm_slope: f64,
) -> Result<Vec<BinEstimate>> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::InvalidProtocol(format!("finite-difference step must be positive, got {step}")));
    }
    if left.n_events == 0 || right.n_events == 0 {
        return Err(Error::InvalidProtocol("click samples are empty".into()));
    }
    let cl = binning.counts(&left.event_times);
    let cr = binning.counts(&right.event_times);
    let (nl, nr) = (left.n_events as f64, right.n_events as f64);
    let scale = 0.5 * hbar / step;
    Ok((0..binning.bins)
        .filter(|&b| cl[b] > 0 && cr[b] > 0)
        .map(|b| {
            let (a, c) = (cl[b] as f64, cr[b] as f64);
            let (pa, pc) = (a / nl, c / nr);
            let estimate = -scale * (pc.ln() - pa.ln()) - 0.5 * hbar * log_norm_slope;
            let var = (1.0 - pa) / a + (1.0 - pc) / c;
            BinEstimate {
                bin: b,
                t: binning.center(b),
                estimate,
                stderr: scale * var.sqrt(),
                counts: (cl[b], cr[b]),
            }
        })
        .collect())
}

/// Shutter, source and detectors of a transmission measurement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FluxProtocolConfig {
    pub shutter_time: f64,
    pub source_x: f64,
    pub detector_xs: Vec<f64>,
    /// Finite-difference step; the grid spacing when absent.
    #[serde(default)]
    pub fd_step: Option<f64>,
}

impl FluxProtocolConfig {
    pub fn fd_step_for(&self, record: &EvolutionRecord) -> f64 {
        self.fd_step.unwrap_or_else(|| record.grid().dx())
    }

    /// Detectors asymptotic, shutter well below every mean arrival time.
    pub fn validate(&self, record: &EvolutionRecord) -> Result<()> {
        if !(self.shutter_time > 0.0 && self.shutter_time.is_finite()) {
            return Err(Error::InvalidProtocol(format!(
                "shutter time must be positive, got {}",
                self.shutter_time
            )));
        }
        if let Some(h) = self.fd_step {
            if !(h > 0.0 && h.is_finite()) {
                return Err(Error::InvalidProtocol(format!("fd_step must be positive, got {h}")));
            }
        }
        if self.detector_xs.is_empty() {
            return Err(Error::InvalidProtocol("no detectors".into()));
        }
        if !record.grid().contains(self.source_x) {
            return Err(Error::InvalidProtocol(format!("source at {} lies outside the grid", self.source_x)));
        }
        for &x in &self.detector_xs {
            if !record.potential().is_asymptotic_at(x) {
                return Err(Error::InvalidProtocol(format!("detector at {x} is not in the asymptotic region")));
            }
            let t = mean_arrival_time(&density_in_time(record, x)?) - record.times()[0];
            if self.shutter_time >= 0.1 * t {
                return Err(Error::InvalidProtocol(format!(
                    "shutter time {} is not small against the mean arrival time {t} at {x}",
                    self.shutter_time
                )));
            }
        }
        Ok(())
    }
}

/// Time integral of the flux through `x` over `[t0 - shutter/2, t0 + shutter/2]`,
/// `t0` the initial time of the record. The window straddles `t0`, so the
/// initial state is propagated backward and forward with the record's step.
pub fn source_output(record: &EvolutionRecord, source_x: f64, shutter_time: f64) -> Result<f64> {
    let dt = record.step_dt();
    let half_steps = (0.5 * shutter_time / dt).round() as usize;
    if half_steps == 0 {
        return Err(Error::InvalidProtocol(format!(
            "shutter time {shutter_time} is shorter than the time step {dt}"
        )));
    }
    let params = record.params();
    let grid = record.grid();
    let spectral = Spectral::new(grid);
    let probe = PointProbe::new(grid, &[source_x]);
    let flux_of = |psi: &[Complex64]| {
        let (v, d) = probe.eval(&spectral.spectrum(psi))[0];
        current(v, d, params)
    };
    let initial = record.snapshots()[0].amplitudes();
    // trapezoid weights: the centre sample once, the two window ends halved
    let mut total = flux_of(initial);
    for sign in [-1.0, 1.0] {
        let op = SplitOperator::new(record.potential(), params, sign * dt);
        let mut psi = initial.to_vec();
        for k in 1..=half_steps {
            op.step_in_place(&mut psi);
            let w = if k == half_steps { 0.5 } else { 1.0 };
            total += w * flux_of(&psi);
        }
    }
    Ok(total * dt)
}

/// `T = sum_t j(detector, t) dt / source output`.
pub fn transmission(
    record: &EvolutionRecord,
    source_x: f64,
    detector_x: f64,
    cfg: &FluxProtocolConfig,
) -> Result<f64> {
    if !record.potential().is_asymptotic_at(detector_x) {
        return Err(Error::InvalidProtocol(format!(
            "detector at {detector_x} is not in the asymptotic region"
        )));
    }
    let arrived = flux_in_time(record, detector_x)?.normalization;
    let emitted = source_output(record, source_x, cfg.shutter_time)?;
    if !(emitted > 0.0) {
        return Err(Error::InvalidProtocol(format!("source at {source_x} emits no net flux")));
    }
    Ok(arrived / emitted)
}

/// `max |d rho/dt + dj/dx|` over interior snapshots, with a fourth-order
/// centred time difference and the spectral space derivative.
pub fn continuity_residual(record: &EvolutionRecord) -> Result<f64> {
    let snaps = record.snapshots();
    if snaps.len() < 5 {
        return Err(Error::InvalidProtocol("continuity check needs at least five snapshots".into()));
    }
    let h = record.snapshot_spacing();
    let params = record.params();
    let spectral = Spectral::new(record.grid());
    let mut worst = 0.0_f64;
    for k in 2..snaps.len() - 2 {
        let rho = |i: usize| snaps[i].density();
        let (m2, m1, p1, p2) = (rho(k - 2), rho(k - 1), rho(k + 1), rho(k + 2));
        let psi = snaps[k].amplitudes();
        let dpsi = spectral.derivative(psi, 1);
        let j: Vec<f64> = psi.iter().zip(&dpsi).map(|(&a, &b)| current(a, b, params)).collect();
        let dj = spectral.derivative_real(&j, 1);
        for i in 0..psi.len() {
            let drho = (m2[i] - 8.0 * m1[i] + 8.0 * p1[i] - p2[i]) / (12.0 * h);
            worst = worst.max((drho + dj[i]).abs());
        }
    }
    Ok(worst)
}
