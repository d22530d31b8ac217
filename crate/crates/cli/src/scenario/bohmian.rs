//! Bohmian ensemble: trajectory dumps, equivariance, energy bookkeeping and
//! the Ehrenfest law.

use serde::Serialize;
use wvsim_core::bohmian::*;
use wvsim_core::evolution::propagate;
use wvsim_core::sampling::{ks_critical_1pct, ks_statistic, Binning};
use wvsim_core::state::prepare_coherent_state;

use super::Mode;
use crate::config::ExperimentConfig;
use crate::error::{CliError, Context};
use crate::output::{Artifact, Csv, Outcome};

const VERIFY_TRAJECTORIES: usize = 1000;

#[derive(Serialize)]
struct Summary {
    trajectories: usize,
    final_time: f64,
    ks_distance: f64,
    ks_critical: f64,
    initial_energy: EnergyMeans,
    final_energy: EnergyMeans,
}

pub fn execute(cfg: &ExperimentConfig, mode: Mode) -> Result<Outcome, CliError> {
    let setup = cfg.wavepacket()?;
    let spec = cfg.bohmian.expect("validated");
    let n = match mode {
        Mode::Run => spec.trajectories,
        Mode::Verify => spec.trajectories.min(VERIFY_TRAJECTORIES),
    };
    let psi = prepare_coherent_state(&setup.state, &setup.grid, &setup.params).during("state", "prepare_coherent_state")?;
    let record = propagate(&psi, &setup.potential, &setup.propagation, &setup.params).during("evolution", "propagate")?;
    let mut out = Outcome::default();
    out.check("norm drift", record.norm_drift(), 1e-10);

    let x0 = sample_initial_positions(&record, n, cfg.seed()?);
    let flow = BohmianFlow::new(&record).during("bohmian", "trajectory_flow")?;
    let trajectories = flow.ensemble(&x0).during("bohmian", "integrate_trajectory")?;

    let final_state = record.final_state();
    let law = grid_density_law(final_state);
    let finals: Vec<f64> = trajectories.iter().map(|t| *t.xs.last().expect("non-empty record")).collect();
    let ks = ks_statistic(&finals, |x| law.cdf(x));
    let critical = ks_critical_1pct(n);
    out.check(format!("equivariance: KS distance of {n} trajectories at the final time"), ks, critical);

    let parts = energy_partition(&record, &setup.potential, &setup.params).during("bohmian", "energy_partition")?;
    let e0 = parts[0].total;
    let drift = parts.iter().map(|e| (e.total - e0).abs()).fold(0.0, f64::max) / e0.abs().max(f64::MIN_POSITIVE);
    out.check("energy partition relative drift", drift, 1e-7);

    let ehrenfest = ehrenfest_check(&record, &setup.potential, &setup.params).during("bohmian", "ehrenfest_check")?;
    out.check(
        "Ehrenfest residual (absolute floor 1e-10 plus 1e-6 of the largest rate)",
        ehrenfest.max_residual(),
        1e-10 + 1e-6 * ehrenfest.scale(),
    );

    let v = record.potential();
    for (k, traj) in trajectories.iter().take(spec.dump).enumerate() {
        let mut csv = Csv::new(format!("trajectory_{k:04}.csv"), &["t", "x", "p_B", "T_B", "I_O", "V", "Q"]);
        for i in 0..traj.times.len() {
            let e = &traj.energies[i];
            csv.push(&[traj.times[i], traj.xs[i], traj.ps[i], e.kinetic, e.osmotic, v.value_at(traj.xs[i]), e.quantum]);
        }
        out.artifacts.push(Artifact::Csv(csv));
    }

    let mut energy = Csv::new("energy.csv", &["t", "kinetic", "osmotic", "potential", "total"]);
    for e in &parts {
        energy.push(&[e.t, e.kinetic, e.osmotic, e.potential, e.total]);
    }
    out.artifacts.push(Artifact::Csv(energy));

    let mut rates = Csv::new("ehrenfest.csv", &["t", "momentum_rate", "mean_force"]);
    for i in 0..ehrenfest.times.len() {
        rates.push(&[ehrenfest.times[i], ehrenfest.momentum_rate[i], ehrenfest.mean_force[i]]);
    }
    out.artifacts.push(Artifact::Csv(rates));

    // Ensemble histogram against the propagated density over the central
    // 99.8% of the final law.
    let binning = Binning::new(law.quantile(1e-3), law.quantile(1.0 - 1e-3), spec.histogram_bins);
    let counts = binning.counts(&finals);
    let mut hist = Csv::new("histogram_final.csv", &["x", "ensemble", "density"]);
    let w = binning.width();
    for (b, &c) in counts.iter().enumerate() {
        let lo = binning.lo + b as f64 * w;
        let exact = (law.cdf(lo + w) - law.cdf(lo)) / w;
        hist.push(&[binning.center(b), c as f64 / (n as f64 * w), exact]);
    }
    out.artifacts.push(Artifact::Csv(hist));

    out.artifacts.push(Artifact::json(
        "summary.json",
        Summary {
            trajectories: n,
            final_time: final_state.time(),
            ks_distance: ks,
            ks_critical: critical,
            initial_energy: parts[0],
            final_energy: *parts.last().expect("non-empty record"),
        },
    ));
    Ok(out)
}
