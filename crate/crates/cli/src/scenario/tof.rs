//! Time-of-flight protocol: arrival distributions, both weak-momentum
//! channels at each detector, optional click sampling and transmission.

use serde::Serialize;
use wvsim_core::evolution::{propagate, EvolutionRecord};
use wvsim_core::sampling::{ks_critical_1pct, ks_statistic, Binning};
use wvsim_core::state::prepare_coherent_state;
use wvsim_core::tof::*;

use super::Mode;
use crate::config::{ExperimentConfig, TofSpec};
use crate::error::{CliError, Context};
use crate::output::{Artifact, Csv, Outcome};

/// Points below this fraction of the detector's peak density are left out of
/// the field comparisons.
const WINDOW: f64 = 1e-6;
/// Click budget per stencil side in verify mode.
const VERIFY_CLICKS: usize = 10_000;

#[derive(Serialize)]
struct DetectorSummary {
    x: f64,
    density_normalization: f64,
    flux_normalization: f64,
    backflow: bool,
    mean_arrival_time: f64,
    mean_time_relation: MeanTimeRelation,
    transmission: Option<f64>,
}

fn windowed_max(times: usize, keep: impl Fn(usize) -> bool, dev: impl Fn(usize) -> Option<f64>) -> f64 {
    (0..times).filter(|&k| keep(k)).filter_map(dev).fold(0.0, f64::max)
}

fn interpolate(times: &[f64], values: &[Option<(f64, f64)>], t: f64) -> Option<f64> {
    let k = times.partition_point(|&s| s <= t).clamp(1, times.len() - 1);
    let w = (t - times[k - 1]) / (times[k] - times[k - 1]);
    let (a, b) = (values[k - 1]?.1, values[k]?.1);
    Some(a + w * (b - a))
}

pub fn execute(cfg: &ExperimentConfig, mode: Mode) -> Result<Outcome, CliError> {
    let setup = cfg.wavepacket()?;
    let spec = cfg.tof.as_ref().expect("validated");
    let psi = prepare_coherent_state(&setup.state, &setup.grid, &setup.params).during("state", "prepare_coherent_state")?;
    let record = propagate(&psi, &setup.potential, &setup.propagation, &setup.params).during("evolution", "propagate")?;

    let mut out = Outcome::default();
    out.check("norm drift", record.norm_drift(), 1e-10);
    let e0 = psi.energy(&setup.potential, &setup.params).abs().max(f64::MIN_POSITIVE);
    out.check("relative energy drift", record.energy_drift() / e0, 1e-8);

    let mut summaries = Vec::new();
    for (k, &x) in spec.detectors.iter().enumerate() {
        summaries.push(detector(&mut out, &record, spec, k, x, cfg, mode)?);
    }
    if spec.transmission.is_some() && summaries.len() > 1 {
        let ts: Vec<f64> = summaries.iter().filter_map(|s| s.transmission).collect();
        let spread = ts.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - ts.iter().cloned().fold(f64::INFINITY, f64::min);
        out.check("transmission agreement across detectors", spread, 1e-6);
    }
    out.artifacts.push(Artifact::json("summary.json", &summaries));
    Ok(out)
}

fn detector(
    out: &mut Outcome,
    record: &EvolutionRecord,
    spec: &TofSpec,
    k: usize,
    x: f64,
    cfg: &ExperimentConfig,
    mode: Mode,
) -> Result<DetectorSummary, CliError> {
    let tag = format!("x{k}");
    let times = record.times();
    let (density, flux) = density_and_flux(record, x).during("tof", "density_and_flux")?;
    let ratio = flux_density_ratio(&flux, &density, record.params()).during("tof", "flux_density_ratio")?;
    let exact = weak_momentum_series(record, x).during("tof", "weak_momentum_series")?;
    let fd = infer_im_weak_momentum_fd(record, x, spec.fd_step).during("tof", "infer_im_weak_momentum_fd")?;
    let relation = verify_mean_time_relation(record, x, spec.fd_step).during("tof", "verify_mean_time_relation")?;

    let peak = density.values.iter().cloned().fold(0.0, f64::max);
    let keep = |i: usize| density.values[i] >= WINDOW * peak;
    let re_dev = windowed_max(times.len(), keep, |i| Some((ratio[i]? - exact[i]?.0).abs()));
    let im_dev = windowed_max(times.len(), keep, |i| Some((fd.values[i]? - exact[i]?.1).abs()));
    out.check(format!("{tag}: density normalization |sum rho dt - 1|"), (density.total() - 1.0).abs(), 1e-8);
    out.check(format!("{tag}: flux/density ratio vs exact real part"), re_dev, 1e-6);
    out.check(format!("{tag}: log-density slope vs exact imaginary part"), im_dev, 1e-6);
    out.check(format!("{tag}: mean-time relation residual / |lhs|"), relation.residual / relation.lhs.abs(), 1e-4);

    out.artifacts.push(Artifact::Csv(Csv::series(format!("{tag}_density.csv"), times, &opt(&density.values), None)));
    out.artifacts.push(Artifact::Csv(Csv::series(format!("{tag}_flux.csv"), times, &opt(&flux.values), None)));
    out.artifacts.push(Artifact::Csv(Csv::series(format!("{tag}_re_weak_ratio.csv"), times, &ratio, None)));
    out.artifacts.push(Artifact::Csv(Csv::series(format!("{tag}_im_weak_fd.csv"), times, &fd.values, None)));
    let mut exact_csv = Csv::new(format!("{tag}_weak_exact.csv"), &["t", "re", "im"]);
    for (&t, w) in times.iter().zip(&exact) {
        let (re, im) = w.unwrap_or((f64::NAN, f64::NAN));
        exact_csv.push(&[t, re, im]);
    }
    out.artifacts.push(Artifact::Csv(exact_csv));

    if spec.clicks > 0 {
        let n = match mode {
            Mode::Run => spec.clicks,
            Mode::Verify => spec.clicks.min(VERIFY_CLICKS),
        };
        clicks(out, record, spec, &tag, x, n, cfg.seed()? + 2 * k as u64, &density, &exact)?;
    }

    let transmission = match &spec.transmission {
        Some(t) => {
            let proto = FluxProtocolConfig {
                shutter_time: t.shutter_time,
                source_x: t.source_x,
                detector_xs: spec.detectors.clone(),
                fd_step: Some(spec.fd_step),
            };
            let value = transmission(record, t.source_x, x, &proto).during("tof", "transmission")?;
            out.check(format!("{tag}: transmission excess beyond [0, 1]"), (value - 1.0).max(-value), 1e-6);
            Some(value)
        }
        None => None,
    };

    Ok(DetectorSummary {
        x,
        density_normalization: density.normalization,
        flux_normalization: flux.normalization,
        backflow: flux.backflow,
        mean_arrival_time: mean_arrival_time(&density),
        mean_time_relation: relation,
        transmission,
    })
}

fn opt(values: &[f64]) -> Vec<Option<f64>> {
    values.iter().map(|&v| Some(v)).collect()
}

/// Click histograms at `x -/+ h/2` against the exact imaginary part.
#[allow(clippy::too_many_arguments)]
fn clicks(
    out: &mut Outcome,
    record: &EvolutionRecord,
    spec: &TofSpec,
    tag: &str,
    x: f64,
    n: usize,
    seed: u64,
    centre: &TimeDistribution,
    exact: &[Option<(f64, f64)>],
) -> Result<(), CliError> {
    let h = spec.click_fd_step;
    let lo = density_in_time(record, x - 0.5 * h).during("tof", "density_in_time")?;
    let hi = density_in_time(record, x + 0.5 * h).during("tof", "density_in_time")?;
    let slope = (hi.normalization.ln() - lo.normalization.ln()) / h;
    let left = sample_clicks(&lo, n, seed).during("tof", "sample_clicks")?;
    let right = sample_clicks(&hi, n, seed + 1).during("tof", "sample_clicks")?;
    let law = centre.piecewise();
    let binning = Binning::new(law.quantile(1e-3), law.quantile(1.0 - 1e-3), spec.bins);
    let est = estimate_im_from_clicks(&left, &right, h, &binning, record.params().hbar, slope)
        .during("tof", "estimate_im_from_clicks")?;

    let ks = ks_statistic(&left.event_times, |t| lo.cdf(t));
    out.check(format!("{tag}: KS distance of {n} clicks"), ks, ks_critical_1pct(n));
    let times = record.times();
    let z: Vec<f64> = est
        .iter()
        .filter_map(|b| Some((b.estimate - interpolate(times, exact, b.t)?) / b.stderr))
        .collect();
    let outside = z.iter().filter(|z| z.abs() > 3.0).count() as f64 / z.len().max(1) as f64;
    out.check(format!("{tag}: fraction of {} bins beyond 3 stderr", z.len()), outside, 0.01);

    let t: Vec<f64> = est.iter().map(|b| b.t).collect();
    let v: Vec<Option<f64>> = est.iter().map(|b| Some(b.estimate)).collect();
    let s: Vec<f64> = est.iter().map(|b| b.stderr).collect();
    out.artifacts.push(Artifact::Csv(Csv::series(format!("{tag}_im_weak_clicks.csv"), &t, &v, Some(&s))));
    for (side, sample) in [("lo", &left), ("hi", &right)] {
        let mut events = Csv::new(format!("{tag}_events_{side}.csv"), &["t"]);
        for &e in &sample.event_times {
            events.push(&[e]);
        }
        out.artifacts.push(Artifact::Csv(events));
    }
    Ok(())
}
