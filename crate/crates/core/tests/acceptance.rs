//! Acceptance suite. Each criterion prints one `PASS`/`FAIL` line followed by
//! indented measurements; the process exits non-zero if any criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use wvsim_core::bohmian::*;
use wvsim_core::evolution::{propagate, EvolutionRecord, PropagatorConfig};
use wvsim_core::operator::{normalize, vdot, OperatorMatrix};
use wvsim_core::sampling::{ks_critical_1pct, ks_statistic, seeded_rng, Binning};
use wvsim_core::spin::*;
use wvsim_core::state::*;
use wvsim_core::tof::*;
use wvsim_core::weak::*;

/// Measurements of one criterion, each against its bound.
#[derive(Default)]
struct Checks {
    lines: Vec<String>,
    failed: bool,
}

impl Checks {
    /// Passes when `value <= bound`.
    fn below(&mut self, what: &str, value: f64, bound: f64) {
        self.record(what, value <= bound, format!("{value:.3e} <= {bound:.1e}"));
    }

    /// Passes when `value >= bound`.
    fn above(&mut self, what: &str, value: f64, bound: f64) {
        self.record(what, value >= bound, format!("{value:.4} >= {bound}"));
    }

    fn within(&mut self, what: &str, value: f64, lo: f64, hi: f64) {
        self.record(what, (lo..=hi).contains(&value), format!("{value:.4} in [{lo}, {hi}]"));
    }

    fn holds(&mut self, what: &str, ok: bool) {
        self.record(what, ok, String::new());
    }

    fn record(&mut self, what: &str, ok: bool, detail: String) {
        self.failed |= !ok;
        let mark = if ok { "ok  " } else { "FAIL" };
        self.lines.push(format!("    [{mark}] {what} {detail}"));
    }
}

fn run_criterion(id: usize, title: &str, budget: Duration, body: impl FnOnce(&mut Checks)) -> bool {
    let start = Instant::now();
    let mut checks = Checks::default();
    let outcome = catch_unwind(AssertUnwindSafe(|| body(&mut checks)));
    let elapsed = start.elapsed();
    if let Err(panic) = outcome {
        let msg = panic
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_default();
        checks.record("completed without panic", false, msg);
    }
    checks.below("runtime [s]", elapsed.as_secs_f64(), budget.as_secs_f64());
    let verdict = if checks.failed { "FAIL" } else { "PASS" };
    println!("{verdict} criterion {id}: {title} ({:.1} s)", elapsed.as_secs_f64());
    for line in &checks.lines {
        println!("{line}");
    }
    !checks.failed
}

fn unit() -> PhysicalParams {
    PhysicalParams::default()
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

// ---------------------------------------------------------------------------
// 1. Finite-dimensional identity

fn random_vector<R: Rng>(rng: &mut R, n: usize) -> Vec<Complex64> {
    let v: Vec<Complex64> = (0..n)
        .map(|_| c(rng.sample(StandardNormal), rng.sample(StandardNormal)))
        .collect();
    normalize(&v)
}

fn random_operator<R: Rng>(rng: &mut R, n: usize, hermitian: bool) -> OperatorMatrix {
    let rows = (0..n)
        .map(|_| (0..n).map(|_| c(rng.sample(StandardNormal), rng.sample(StandardNormal))).collect())
        .collect();
    let a = OperatorMatrix::from_rows(rows).unwrap();
    if hermitian {
        (&a + &a.adjoint()).scale(c(0.5, 0.0))
    } else {
        a
    }
}

fn criterion_identity(ck: &mut Checks) {
    let mut rng = seeded_rng(1);
    let mut worst_abs = 0.0_f64;
    let mut worst_scaled = 0.0_f64;
    let mut min_overlap = f64::INFINITY;
    let mut non_hermitian = 0;
    for draw in 0..1000 {
        let n = rng.random_range(2..=8);
        let hermitian = draw % 2 == 0;
        let a = random_operator(&mut rng, n, hermitian);
        let (psi, phi) = loop {
            let psi = random_vector(&mut rng, n);
            let phi = random_vector(&mut rng, n);
            if vdot(&phi, &psi).norm() > 1e-3 {
                break (psi, phi);
            }
        };
        non_hermitian += usize::from(!hermitian);
        let overlap = vdot(&phi, &psi);
        min_overlap = min_overlap.min(overlap.norm());
        // Direct ratio, written out independently of the library.
        let a_psi: Vec<Complex64> = (0..n).map(|i| (0..n).map(|j| a[(i, j)] * psi[j]).sum()).collect();
        let direct = vdot(&phi, &a_psi) / overlap;
        let post = PostSelection::finite(phi).unwrap();
        let strong = weak_value_from_strong(&a, &psi, &post).unwrap();
        let err = (strong.re_channel - direct.re).abs().max((strong.im_channel - direct.im).abs());
        worst_abs = worst_abs.max(err);
        worst_scaled = worst_scaled.max(err / direct.norm().max(1.0));
    }
    ck.holds(&format!("1000 instances, {non_hermitian} non-hermitian, min |<phi|psi>| = {min_overlap:.2e}"), true);
    ck.below("max |strong ratios - direct| / max(1, |w|)", worst_scaled, 1e-12);
    ck.holds(&format!("max absolute deviation {worst_abs:.2e}"), true);
}

// ---------------------------------------------------------------------------
// Time-of-flight scenarios

const TOF_DETECTORS: [f64; 3] = [6.0, 8.0, 10.0];

fn tof_record(barrier: bool) -> EvolutionRecord {
    let p = unit();
    let g = Grid1D::new(-60.0, 60.0, 4096).unwrap();
    let potential = if barrier {
        Potential::new(PotentialKind::GaussianBarrier { height: 32.0, width: 0.5, center: 0.0 }, &g, &p).unwrap()
    } else {
        Potential::free(&g)
    };
    let psi = prepare_coherent_state(&CoherentStateSpec { gamma: 0.5, center: -10.0, momentum: 8.0 }, &g, &p).unwrap();
    propagate(&psi, &potential, &PropagatorConfig::new(1e-3, 5.0, 5), &p).unwrap()
}

/// Mesh times at which the density at `x` is at least `1e-6` of its peak.
fn closed_window(record: &EvolutionRecord, x: f64) -> Vec<bool> {
    let series = detector_series(record, &[x]).unwrap();
    let rho: Vec<f64> = series[0].iter().map(|(psi, _)| psi.norm_sqr()).collect();
    let peak = rho.iter().cloned().fold(0.0, f64::max);
    rho.iter().map(|&r| r >= 1e-6 * peak).collect()
}

fn max_masked_error(estimate: &[Option<f64>], exact: &[Option<f64>], window: &[bool]) -> f64 {
    estimate
        .iter()
        .zip(exact)
        .zip(window)
        .filter(|(_, &w)| w)
        .map(|((a, b), _)| match (a, b) {
            (Some(a), Some(b)) => (a - b).abs(),
            _ => f64::INFINITY,
        })
        .fold(0.0, f64::max)
}

fn exact_channels(record: &EvolutionRecord, x: f64) -> (Vec<Option<f64>>, Vec<Option<f64>>) {
    let series = weak_momentum_series(record, x).unwrap();
    (
        series.iter().map(|v| v.map(|(re, _)| re)).collect(),
        series.iter().map(|v| v.map(|(_, im)| im)).collect(),
    )
}

fn fd_im_error(record: &EvolutionRecord, x: f64, step: f64) -> f64 {
    let fd = infer_im_weak_momentum_fd(record, x, step).unwrap();
    let (_, im) = exact_channels(record, x);
    max_masked_error(&fd.values, &im, &closed_window(record, x))
}

fn criterion_momentum_protocol(ck: &mut Checks, label: &str, record: &EvolutionRecord, barrier: bool) {
    let params = unit();
    let mut worst_re = 0.0_f64;
    let mut worst_im = 0.0_f64;
    for &x in &TOF_DETECTORS {
        let (density, flux) = density_and_flux(record, x).unwrap();
        let ratio = flux_density_ratio(&flux, &density, &params).unwrap();
        let (re, _) = exact_channels(record, x);
        let window = closed_window(record, x);
        worst_re = worst_re.max(max_masked_error(&ratio, &re, &window));
        worst_im = worst_im.max(fd_im_error(record, x, 1e-3));
    }
    ck.below(&format!("{label}: flux ratio vs Re, detectors {TOF_DETECTORS:?}"), worst_re, 1e-6);
    ck.below(&format!("{label}: log-density slope (dx = 1e-3) vs Im"), worst_im, 1e-6);

    let steps = [0.4, 0.2, 0.1];
    let errs: Vec<f64> = steps.iter().map(|&h| fd_im_error(record, 8.0, h)).collect();
    if barrier {
        for k in 0..2 {
            ck.within(
                &format!("{label}: FD error ratio dx {} -> {} ({:.2e} -> {:.2e})", steps[k], steps[k + 1], errs[k], errs[k + 1]),
                errs[k] / errs[k + 1],
                3.6,
                4.4,
            );
        }
    } else {
        // ln rho of a free Gaussian is quadratic in x, so the centred
        // difference is exact and only roundoff remains at every step.
        let worst = errs.iter().cloned().fold(0.0, f64::max);
        ck.below(&format!("{label}: FD error at dx {steps:?} (exact stencil)"), worst, 1e-9);
    }
}

// ---------------------------------------------------------------------------
// 3. Clicks

struct ClickRun {
    estimates: Vec<BinEstimate>,
}

fn click_run(record: &EvolutionRecord, x: f64, step: f64, binning: &Binning, n: usize, seed: u64) -> ClickRun {
    let left = density_in_time(record, x - 0.5 * step).unwrap();
    let right = density_in_time(record, x + 0.5 * step).unwrap();
    let slope = (right.normalization.ln() - left.normalization.ln()) / step;
    let cl = sample_clicks(&left, n, seed).unwrap();
    let cr = sample_clicks(&right, n, seed + 1).unwrap();
    ClickRun {
        estimates: estimate_im_from_clicks(&cl, &cr, step, binning, record.params().hbar, slope).unwrap(),
    }
}

fn interpolate(times: &[f64], values: &[Option<f64>], t: f64) -> f64 {
    let k = times.partition_point(|&s| s <= t).clamp(1, times.len() - 1);
    let w = (t - times[k - 1]) / (times[k] - times[k - 1]);
    match (values[k - 1], values[k]) {
        (Some(a), Some(b)) => a + w * (b - a),
        _ => f64::NAN,
    }
}

fn criterion_clicks(ck: &mut Checks, label: &str, record: &EvolutionRecord) {
    let (x, step) = (8.0, 0.4);
    let centre = density_in_time(record, x).unwrap().piecewise();
    // Enough bins that a 1% miss allowance exceeds the expected 0.27% of
    // 3-sigma excursions by several counts.
    let binning = Binning::new(centre.quantile(1e-3), centre.quantile(1.0 - 1e-3), 400);
    let (_, im) = exact_channels(record, x);
    let times = record.times();

    let full = click_run(record, x, step, &binning, 1_000_000, 101);
    let z: Vec<f64> = full
        .estimates
        .iter()
        .map(|b| (b.estimate - interpolate(times, &im, b.t)) / b.stderr)
        .collect();
    let coverage = z.iter().filter(|z| z.abs() <= 3.0).count() as f64 / z.len() as f64;
    ck.above(&format!("{label}: 3-sigma coverage over {} non-empty bins", z.len()), coverage, 0.99);
    let mean_sq = z.iter().map(|z| z * z).sum::<f64>() / z.len() as f64;
    ck.holds(&format!("{label}: mean squared z-score {mean_sq:.3}"), true);

    let quarter = click_run(record, x, step, &binning, 250_000, 202);
    let mut ratios: Vec<f64> = quarter
        .estimates
        .iter()
        .filter_map(|q| full.estimates.iter().find(|f| f.bin == q.bin).map(|f| q.stderr / f.stderr))
        .collect();
    ratios.sort_by(f64::total_cmp);
    let median = ratios[ratios.len() / 2];
    ck.within(&format!("{label}: median stderr ratio n/4 : n"), median, 1.8, 2.2);
}

// ---------------------------------------------------------------------------
// 4. Mean arrival time

fn criterion_mean_time(ck: &mut Checks, label: &str, record: &EvolutionRecord) {
    let mut worst = 0.0_f64;
    for &x in &TOF_DETECTORS {
        let rel = verify_mean_time_relation(record, x, 1e-3).unwrap();
        worst = worst.max(rel.residual / rel.lhs.abs());
    }
    ck.below(&format!("{label}: relative residual over detectors {TOF_DETECTORS:?}"), worst, 1e-4);
}

// ---------------------------------------------------------------------------
// 5. Bohmian suite

const RESIDUAL_FLOOR: f64 = 1e-10;

struct BohmianScenario {
    label: &'static str,
    record: EvolutionRecord,
}

fn bohmian_record(barrier: Option<(f64, f64)>, n_points: usize, dt: f64, stride: usize) -> EvolutionRecord {
    let p = unit();
    let g = Grid1D::new(-40.0, 40.0, n_points).unwrap();
    let potential = match barrier {
        Some((height, width)) => {
            Potential::new(PotentialKind::GaussianBarrier { height, width, center: 0.0 }, &g, &p).unwrap()
        }
        None => Potential::free(&g),
    };
    let psi = prepare_coherent_state(&CoherentStateSpec { gamma: 0.5, center: -8.0, momentum: 4.0 }, &g, &p).unwrap();
    propagate(&psi, &potential, &PropagatorConfig::new(dt, 3.0, stride), &p).unwrap()
}

/// Largest deviation of the polar fields from the weak-momentum channels
/// over every snapshot.
fn field_channel_deviation(record: &EvolutionRecord) -> (f64, f64) {
    let p = unit();
    record
        .snapshots()
        .par_iter()
        .map(|s| {
            let polar = polar_decompose(s, &p);
            let pb = bohmian_momentum_field(&polar);
            let po = osmotic_momentum_field(&polar, &p);
            let weak = MomentumWeakField::new(s, &p, EPS_NODE);
            let (mut dre, mut dim) = (0.0_f64, 0.0_f64);
            for i in 0..pb.len() {
                if let (Some(b), Some(o), Some(w)) = (pb[i], po[i], weak.at(i)) {
                    dre = dre.max((b - w.re_channel).abs());
                    dim = dim.max((o - w.im_channel).abs());
                }
            }
            (dre, dim)
        })
        .reduce(|| (0.0, 0.0), |a, b| (a.0.max(b.0), a.1.max(b.1)))
}

fn energy_relative_drift(record: &EvolutionRecord) -> f64 {
    let e = energy_partition(record, record.potential(), &unit()).unwrap();
    let e0 = e[0].total;
    e.iter().map(|m| (m.total - e0).abs()).fold(0.0, f64::max) / e0.abs()
}

fn criterion_bohmian(ck: &mut Checks) {
    let p = unit();
    let scenarios = [
        BohmianScenario { label: "free", record: bohmian_record(None, 2048, 1e-3, 2) },
        BohmianScenario { label: "soft barrier", record: bohmian_record(Some((2.0, 1.5)), 2048, 5e-4, 4) },
        BohmianScenario { label: "reflecting barrier", record: bohmian_record(Some((8.0, 1.0)), 2048, 5e-4, 4) },
    ];

    for s in &scenarios {
        let (dre, dim) = field_channel_deviation(&s.record);
        ck.below(&format!("{}: p_B vs Re channel, all snapshots", s.label), dre, 1e-10);
        ck.below(&format!("{}: p_O vs Im channel, all snapshots", s.label), dim, 1e-10);
    }

    // Independent phase-gradient route on a scattered state.
    let fine = bohmian_record(Some((8.0, 1.0)), 4096, 5e-4, 6000);
    let last = fine.final_state();
    // Below a relative density of 1e-8 both routes are limited by roundoff
    // amplified through 1/|psi|, not by the stencil.
    let slope = phase_slope_fd(&polar_decompose(last, &p), 1e-8);
    let weak = MomentumWeakField::new(last, &p, EPS_NODE);
    let fd_dev = slope
        .iter()
        .enumerate()
        .filter_map(|(i, s)| Some((s.as_ref()? - weak.at(i)?.re_channel).abs()))
        .fold(0.0, f64::max);
    ck.below("reflecting barrier: phase finite difference vs Re channel", fd_dev, 1e-8);

    for s in &scenarios {
        let final_t = *s.record.times().last().unwrap();
        let x0 = sample_initial_positions(&s.record, 10_000, 7);
        let flow = BohmianFlow::new(&s.record).unwrap();
        let trajs = flow.ensemble(&x0).unwrap();
        let xs: Vec<f64> = trajs.iter().map(|t| *t.xs.last().unwrap()).collect();
        let law = grid_density_law(s.record.final_state());
        let ks = ks_statistic(&xs, |x| law.cdf(x));
        ck.below(&format!("{}: KS distance at t = {final_t}, 10^4 trajectories", s.label), ks, ks_critical_1pct(10_000));

        if s.label != "reflecting barrier" {
            let (mut worst, mut scale) = (0.0_f64, 0.0_f64);
            for t in trajs.iter().step_by(50) {
                let r = flow.along_trajectory_rate(t).unwrap();
                worst = worst.max(r.max_residual());
                scale = scale.max(r.scale());
            }
            ck.below(&format!("{}: along-trajectory force law / scale", s.label), worst / scale, 1e-4);
        }
    }

    for s in &scenarios {
        ck.below(&format!("{}: energy partition relative drift", s.label), energy_relative_drift(&s.record), 1e-7);
        ck.below(
            &format!("{}: continuity residual", s.label),
            bohmian_continuity_residual(&s.record, RESIDUAL_FLOOR).unwrap(),
            1e-6,
        );
        let mut q_gap = 0.0_f64;
        for snap in s.record.snapshots().iter().step_by(50) {
            let (q, io) = mean_quantum_and_osmotic(&polar_decompose(snap, &p), &p);
            q_gap = q_gap.max((q - io).abs());
        }
        ck.below(&format!("{}: |<Q> - <I_O>|", s.label), q_gap, 1e-8);
    }

    // The trapezoid force average matches a symmetric split step exactly only
    // when every step is recorded.
    for (label, barrier) in [("free", None), ("soft barrier", Some((2.0, 1.5))), ("reflecting barrier", Some((8.0, 1.0)))] {
        let record = bohmian_record(barrier, 2048, 1e-3, 1);
        let e = ehrenfest_check(&record, record.potential(), &p).unwrap();
        if barrier.is_none() {
            ck.below("free: |d<p>/dt| at every step", e.max_residual(), 1e-10);
        } else {
            ck.below(&format!("{label}: Ehrenfest residual / scale at every step"), e.max_residual() / e.scale(), 1e-6);
        }
    }

    for s in scenarios.iter().filter(|s| s.label != "reflecting barrier") {
        ck.below(
            &format!("{}: Hamilton-Jacobi residual", s.label),
            hamilton_jacobi_residual(&s.record, RESIDUAL_FLOOR).unwrap(),
            1e-5,
        );
        let (mut worst, mut scale) = (0.0_f64, 0.0_f64);
        for x in [-8.0, -2.0, 3.0] {
            let r = fixed_point_momentum_rate(&s.record, x, RESIDUAL_FLOOR).unwrap();
            worst = worst.max(r.max_residual());
            scale = scale.max(r.scale());
        }
        ck.below(&format!("{}: fixed-point force law / scale", s.label), worst / scale, 1e-4);
    }
}

// ---------------------------------------------------------------------------
// 6. Spin interferometer

fn criterion_spin(ck: &mut Checks) {
    let chi: f64 = 0.05;
    let pre = [c(std::f64::consts::FRAC_1_SQRT_2, 0.0), Complex64::from_polar(std::f64::consts::FRAC_1_SQRT_2, chi)];
    let pi = std::f64::consts::PI;
    let mut route = 0.0_f64;
    let mut route_abs = 0.0_f64;
    let mut completeness = 0.0_f64;
    let mut anomalous = 0;
    let mut max_re = 0.0_f64;
    let mut in_range = true;
    for i in 0..50 {
        let alpha = (i as f64 + 0.5) * pi / 50.0;
        for j in 0..50 {
            let phi = j as f64 * pi / 50.0;
            let cfg = InterferometerConfig { alpha, path_pre: pre, path_post: [c(phi.cos(), 0.0), c(phi.sin(), 0.0)] };
            // Oracle written out on the path factor.
            let post = cfg.path_post;
            let direct = (post[0].conj() * pre[0] - post[1].conj() * pre[1]) / (post[0].conj() * pre[0] + post[1].conj() * pre[1]);
            let triple = weak_spin_from_triple(&cfg).unwrap().value;
            let table = intensity_table(&cfg).unwrap();
            let from_i = weak_spin_from_intensities(&table, alpha).unwrap().value;
            let lib_direct = weak_spin_direct(&cfg).unwrap().value;
            let dev = [(triple - direct).norm(), (from_i - direct).norm(), (lib_direct - direct).norm()]
                .into_iter()
                .fold(0.0, f64::max);
            route_abs = route_abs.max(dev);
            route = route.max(dev / direct.norm().max(1.0));
            let sums = SpinAxis::ALL.map(|a| table.axis_sum(a));
            completeness = completeness.max((sums[0] - sums[1]).abs()).max((sums[0] - sums[2]).abs());
            in_range &= table.as_array().iter().all(|v| (0.0..=1.0).contains(v));
            if direct.re.abs() > 5.0 {
                anomalous += 1;
            }
            max_re = max_re.max(direct.re.abs());
        }
    }
    ck.above(&format!("anomalous points (|Re w| > 5, largest {max_re:.1})"), anomalous as f64, 1.0);
    ck.below("three-route deviation / max(1, |w|)", route, 1e-12);
    ck.holds(&format!("largest absolute three-route deviation {route_abs:.2e}"), true);
    ck.below("completeness sums, axis spread", completeness, 1e-12);
    ck.holds("all intensities in [0, 1]", in_range);
}

// ---------------------------------------------------------------------------
// 7. Infrastructure

fn drift_case(ck: &mut Checks, label: &str, kind: PotentialKind, spec: CoherentStateSpec, dt: f64) {
    let p = unit();
    let g = Grid1D::new(-80.0, 80.0, 4096).unwrap();
    let potential = Potential::new(kind, &g, &p).unwrap();
    let psi = prepare_coherent_state(&spec, &g, &p).unwrap();
    let rec = propagate(&psi, &potential, &PropagatorConfig::new(dt, 1e4 * dt, 10), &p).unwrap();
    assert_eq!(rec.len(), 1001);
    ck.below(&format!("{label}: norm drift over 10^4 steps (dt = {dt})"), rec.norm_drift(), 1e-10);
    let e0 = psi.energy(&potential, &p);
    ck.below(&format!("{label}: relative energy drift"), rec.energy_drift() / e0.abs(), 1e-8);
}

fn bits(state: &Wavefunction) -> Vec<u64> {
    state.amplitudes().iter().flat_map(|z| [z.re.to_bits(), z.im.to_bits()]).collect()
}

/// Node-free superposition of a broad chirped packet and a narrow boosted one.
fn two_component_state(g: &Grid1D) -> Wavefunction {
    let amps: Vec<Complex64> = g
        .points()
        .map(|x| {
            let broad = Complex64::new(-0.25 * x * x, 0.3 * x * x - 0.8 * x).exp();
            let narrow = 0.4 * Complex64::new(-(x - 1.0).powi(2), 2.0 * x).exp();
            broad + narrow
        })
        .collect();
    Wavefunction::new(*g, amps, 0.0).unwrap().normalized()
}

/// `1 - |<psi|psi_rec>|^2` with the fields taken over the node-free span
/// around the density peak.
fn reconstruction_infidelity(state: &Wavefunction) -> f64 {
    let p = unit();
    let g = state.grid();
    let field = MomentumWeakField::new(state, &p, EPS_NODE);
    let rel: Vec<f64> = (0..g.n_points()).map(|i| field.relative_density(i)).collect();
    let peak = (0..g.n_points()).max_by(|&i, &j| rel[i].total_cmp(&rel[j])).unwrap();
    let keep = |i: usize| rel[i] > 1e-12;
    let mut lo = peak;
    while lo > 0 && keep(lo - 1) {
        lo -= 1;
    }
    let mut hi = peak + 1;
    while hi < g.n_points() && keep(hi) {
        hi += 1;
    }
    let rebuilt = reconstruct_wavefunction(g, &field.re_field(), &field.im_field(), lo..hi, peak, &p).unwrap();
    1.0 - inner_product(state, &rebuilt).unwrap().norm_sqr()
}

fn criterion_infrastructure(ck: &mut Checks) {
    let p = unit();
    drift_case(ck, "free", PotentialKind::Free, CoherentStateSpec { gamma: 1.0, center: -5.0, momentum: 1.0 }, 1e-3);
    // Strang splitting conserves a modified energy; the oscillation of the
    // true energy scales as dt^2 and sits below 1e-8 from dt = 1e-4 on.
    let scattering = CoherentStateSpec { gamma: 0.5, center: -4.0, momentum: 4.0 };
    drift_case(
        ck,
        "harmonic",
        PotentialKind::Harmonic { omega: 1.0, center: 0.0 },
        CoherentStateSpec { gamma: 1.0, center: 2.0, momentum: 0.5 },
        1e-4,
    );
    drift_case(ck, "gaussian barrier", PotentialKind::GaussianBarrier { height: 8.0, width: 1.0, center: 0.0 }, scattering, 1e-4);
    drift_case(ck, "eckart", PotentialKind::Eckart { height: 8.0, width: 1.0 }, scattering, 1e-4);

    // Seeded runs repeat bit for bit.
    let a = tof_record(true);
    let b = tof_record(true);
    ck.holds("propagation repeats bit for bit", a.snapshots().iter().zip(b.snapshots()).all(|(x, y)| bits(x) == bits(y)));
    let dist = density_in_time(&a, 8.0).unwrap();
    let s1 = sample_clicks(&dist, 10_000, 42).unwrap();
    let s2 = sample_clicks(&dist, 10_000, 42).unwrap();
    let s3 = sample_clicks(&dist, 10_000, 43).unwrap();
    let same = s1.event_times.iter().zip(&s2.event_times).all(|(x, y)| x.to_bits() == y.to_bits());
    ck.holds("click samples repeat bit for bit, differ across seeds", same && s1 != s3);
    let soft = bohmian_record(Some((2.0, 1.5)), 1024, 1e-3, 2);
    let flow = BohmianFlow::new(&soft).unwrap();
    let t1 = flow.ensemble(&sample_initial_positions(&soft, 64, 9)).unwrap();
    let t2 = flow.ensemble(&sample_initial_positions(&soft, 64, 9)).unwrap();
    let traj_same = t1
        .iter()
        .zip(&t2)
        .all(|(u, v)| u.xs.iter().zip(&v.xs).all(|(x, y)| x.to_bits() == y.to_bits()));
    ck.holds("trajectory ensembles repeat bit for bit", traj_same);
    let table = intensity_table(&InterferometerConfig::from_angles(1.0, 0.3, 0.9)).unwrap();
    ck.holds(
        "shot-noise estimates repeat bit for bit",
        shot_noise_estimate(&table, 1.0, 100_000, 5).unwrap() == shot_noise_estimate(&table, 1.0, 100_000, 5).unwrap(),
    );

    // Reconstruction from the two weak-momentum channels. The cumulative
    // trapezoid leaves a phase error of order dx^2, so the infidelity falls
    // as dx^4.
    let coarse = Grid1D::new(-20.0, 20.0, 1024).unwrap();
    let g = Grid1D::new(-20.0, 20.0, 2048).unwrap();
    let coherent = prepare_coherent_state(&CoherentStateSpec { gamma: 1.0, center: 0.5, momentum: 1.5 }, &g, &p).unwrap();
    let free_evolved = propagate(&coherent, &Potential::free(&g), &PropagatorConfig::new(1e-3, 1.0, 1000), &p)
        .unwrap()
        .final_state()
        .clone();
    let two_coarse = two_component_state(&coarse);
    let two_fine = two_component_state(&g);
    let coarse_loss = reconstruction_infidelity(&two_coarse);
    let mut worst = 0.0_f64;
    for (name, state) in [("coherent", &coherent), ("two-component", &two_fine), ("spread packet", &free_evolved)] {
        let loss = reconstruction_infidelity(state);
        ck.holds(&format!("{name}: reconstruction fidelity 1 - {loss:.2e}"), true);
        worst = worst.max(loss);
    }
    ck.within(
        &format!("two-component infidelity ratio dx {:.4} -> {:.4}", coarse.dx(), g.dx()),
        coarse_loss / reconstruction_infidelity(&two_fine),
        12.0,
        20.0,
    );
    ck.below("worst reconstruction infidelity", worst, 1e-8);
}

fn main() {
    let mut ok = true;
    ok &= run_criterion(1, "flux and commutator ratios reproduce the weak value", Duration::from_secs(5), criterion_identity);

    let mut records = Vec::new();
    ok &= run_criterion(2, "momentum protocol on a 4096-point grid", Duration::from_secs(240), |ck| {
        for (label, barrier) in [("free", false), ("barrier", true)] {
            let start = Instant::now();
            let rec = tof_record(barrier);
            criterion_momentum_protocol(ck, label, &rec, barrier);
            ck.below(&format!("{label}: runtime [s]"), start.elapsed().as_secs_f64(), 120.0);
            records.push((label, rec));
        }
    });
    ok &= run_criterion(3, "imaginary weak momentum from sampled clicks", Duration::from_secs(60), |ck| {
        for (label, rec) in &records {
            criterion_clicks(ck, label, rec);
        }
    });
    ok &= run_criterion(4, "mean arrival time relation", Duration::from_secs(30), |ck| {
        for (label, rec) in &records {
            criterion_mean_time(ck, label, rec);
        }
    });
    drop(records);
    ok &= run_criterion(5, "Bohmian fields, trajectories and conservation laws", Duration::from_secs(300), criterion_bohmian);
    ok &= run_criterion(6, "spin interferometer three-route agreement", Duration::from_secs(5), criterion_spin);
    ok &= run_criterion(7, "drift bounds, determinism and reconstruction", Duration::from_secs(300), criterion_infrastructure);

    if !ok {
        std::process::exit(1);
    }
}
