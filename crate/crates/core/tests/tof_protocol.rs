//! Time-of-flight protocol against analytic free-flight oracles and flux
//! conservation.

use wvsim_core::evolution::{propagate, EvolutionRecord, PropagatorConfig};
use wvsim_core::sampling::{ks_critical_1pct, ks_statistic};
use wvsim_core::state::*;
use wvsim_core::tof::*;

fn unit() -> PhysicalParams {
    PhysicalParams::default()
}

const SPEC: CoherentStateSpec = CoherentStateSpec { gamma: 0.5, center: -10.0, momentum: 8.0 };

fn record(potential: impl Fn(&Grid1D) -> Potential, dt: f64, stride: usize) -> EvolutionRecord {
    let p = unit();
    let g = Grid1D::new(-60.0, 60.0, 2048).unwrap();
    let psi = prepare_coherent_state(&SPEC, &g, &p).unwrap();
    propagate(&psi, &potential(&g), &PropagatorConfig::new(dt, 5.0, stride), &p).unwrap()
}

fn free_record() -> EvolutionRecord {
    record(Potential::free, 1e-3, 5)
}

fn barrier(g: &Grid1D) -> Potential {
    Potential::new(PotentialKind::GaussianBarrier { height: 32.0, width: 0.5, center: 0.0 }, g, &unit()).unwrap()
}

/// Imaginary weak momentum of the freely spreading Gaussian:
/// `hbar Re(Gamma_t) (x - y - p t/M)` with `Gamma_t = Gamma/(1 + i hbar Gamma t/M)`.
fn analytic_im(x: f64, t: f64) -> f64 {
    let g = SPEC.gamma;
    let re_gamma = g / (1.0 + (g * t).powi(2));
    re_gamma * (x - SPEC.center - SPEC.momentum * t)
}

#[test]
fn density_mode_and_normalization() {
    let rec = free_record();
    for x in [6.0, 10.0] {
        let d = density_in_time(&rec, x).unwrap();
        assert!((d.total() - 1.0).abs() < 1e-8);
        let (k, _) = d.values.iter().enumerate().fold((0, 0.0), |m, (k, &v)| if v > m.1 { (k, v) } else { m });
        let classical = (x - SPEC.center) / SPEC.momentum;
        assert!((d.times[k] - classical).abs() < 0.05, "mode {} vs {classical}", d.times[k]);
    }
}

#[test]
fn normalization_is_nearly_independent_of_detector() {
    // Broad packet: the momentum spread is small, so N(x) ~ M/p at every detector.
    let p = unit();
    let g = Grid1D::new(-60.0, 60.0, 2048).unwrap();
    let spec = CoherentStateSpec { gamma: 0.1, center: -25.0, momentum: 8.0 };
    let psi = prepare_coherent_state(&spec, &g, &p).unwrap();
    let rec = propagate(&psi, &Potential::free(&g), &PropagatorConfig::new(1e-3, 8.0, 5), &p).unwrap();
    let ns: Vec<f64> = [0.0, 5.0, 10.0].iter().map(|&x| density_in_time(&rec, x).unwrap().normalization).collect();
    for n in &ns {
        assert!((n / ns[0] - 1.0).abs() < 0.01, "{ns:?}");
    }
}

#[test]
fn free_flux_has_no_backflow_and_conserved_normalization() {
    let rec = free_record();
    let mut nf = Vec::new();
    for x in [6.0, 8.0, 10.0] {
        let f = flux_in_time(&rec, x).unwrap();
        assert!(!f.backflow);
        assert!(f.values.iter().all(|&v| v >= -1e-10));
        nf.push(f.normalization);
    }
    for n in &nf {
        assert!((n - nf[0]).abs() < 1e-6, "{nf:?}");
    }
}

#[test]
fn flux_normalization_is_conserved_past_a_barrier() {
    let rec = record(barrier, 1e-3, 5);
    let nf: Vec<f64> = [6.0, 8.0, 10.0].iter().map(|&x| flux_in_time(&rec, x).unwrap().normalization).collect();
    assert!(nf[0] > 0.1 && nf[0] < 0.9, "{nf:?}");
    for n in &nf {
        assert!((n - nf[0]).abs() < 1e-6, "{nf:?}");
    }
}

#[test]
fn finite_difference_matches_spreading_gaussian() {
    let rec = free_record();
    let x = 8.0;
    let dx = rec.grid().dx();
    let fd = infer_im_weak_momentum_fd(&rec, x, dx).unwrap();
    let series = detector_series(&rec, &[x]).unwrap();
    let peak = series[0].iter().fold(0.0_f64, |m, (psi, _)| m.max(psi.norm_sqr()));
    let mut checked = 0;
    for ((v, t), (psi, _)) in fd.values.iter().zip(&fd.times).zip(&series[0]) {
        if psi.norm_sqr() < 1e-6 * peak {
            continue;
        }
        assert!((v.unwrap() - analytic_im(x, *t)).abs() < 1e-4, "t {t}");
        checked += 1;
    }
    assert!(checked > 50);
}

#[test]
fn time_averaged_imaginary_part_is_the_normalization_slope() {
    for rec in [free_record(), record(barrier, 1e-3, 5)] {
        let rel = verify_mean_time_relation(&rec, 8.0, 1e-3).unwrap();
        let fd = infer_im_weak_momentum_fd(&rec, 8.0, 1e-3).unwrap();
        assert!((rel.mean_im - fd.baseline).abs() < 1e-6, "{} vs {}", rel.mean_im, fd.baseline);
    }
}

#[test]
fn mean_time_relation_free_and_barrier() {
    let rel = verify_mean_time_relation(&free_record(), 8.0, 1e-3).unwrap();
    assert!(rel.residual < 1e-6 * rel.lhs.abs(), "{rel:?}");
    let rel = verify_mean_time_relation(&record(barrier, 1e-3, 5), 8.0, 1e-3).unwrap();
    assert!(rel.residual < 1e-4 * rel.lhs.abs(), "{rel:?}");
}

#[test]
fn mean_time_shift_matches_classical_flight() {
    let rec = free_record();
    let t8 = mean_arrival_time(&density_in_time(&rec, 8.0).unwrap());
    let t9 = mean_arrival_time(&density_in_time(&rec, 9.0).unwrap());
    assert!(((t9 - t8) - 1.0 / SPEC.momentum).abs() < 2e-3, "{}", t9 - t8);
}

#[test]
fn million_clicks_pass_ks() {
    let rec = free_record();
    let d = density_in_time(&rec, 8.0).unwrap();
    let n = 1_000_000;
    let s = sample_clicks(&d, n, 2024).unwrap();
    let ks = ks_statistic(&s.event_times, |t| d.cdf(t));
    assert!(ks < ks_critical_1pct(n), "{ks}");
}

#[test]
fn continuity_on_the_grid() {
    let p = unit();
    let g = Grid1D::new(-30.0, 30.0, 1024).unwrap();
    let psi = prepare_coherent_state(&CoherentStateSpec { gamma: 0.5, center: -4.0, momentum: 4.0 }, &g, &p).unwrap();
    let free = propagate(&psi, &Potential::free(&g), &PropagatorConfig::new(1e-3, 1.0, 1), &p).unwrap();
    assert!(continuity_residual(&free).unwrap() < 1e-6);
    // With a potential the split step solves the continuity equation only up
    // to its O(dt^2) splitting error.
    let b = Potential::new(PotentialKind::GaussianBarrier { height: 8.0, width: 1.0, center: 0.0 }, &g, &p).unwrap();
    let scattered = propagate(&psi, &b, &PropagatorConfig::new(5e-5, 1.0, 1), &p).unwrap();
    assert!(continuity_residual(&scattered).unwrap() < 1e-6);
}

/// Short shutter around a fast narrow packet released at the source.
fn transmission_record(potential: impl Fn(&Grid1D) -> Potential, dt: f64) -> EvolutionRecord {
    let p = unit();
    let g = Grid1D::new(-96.0, 160.0, 8192).unwrap();
    let spec = CoherentStateSpec { gamma: 2.0, center: 0.0, momentum: 20.0 };
    let psi = prepare_coherent_state(&spec, &g, &p).unwrap();
    propagate(&psi, &potential(&g), &PropagatorConfig::new(dt, 5.5, 5), &p).unwrap()
}

fn transmission_cfg() -> FluxProtocolConfig {
    FluxProtocolConfig { shutter_time: 0.3, source_x: 0.0, detector_xs: vec![60.0, 70.0], fd_step: None }
}

#[test]
fn free_transmission_is_one() {
    let rec = transmission_record(Potential::free, 1e-3);
    let cfg = transmission_cfg();
    cfg.validate(&rec).unwrap();
    let t: Vec<f64> = cfg.detector_xs.iter().map(|&x| transmission(&rec, 0.0, x, &cfg).unwrap()).collect();
    for v in &t {
        assert!((v - 1.0).abs() < 1e-6, "{t:?}");
    }
}

#[test]
fn high_barrier_blocks_and_detectors_agree() {
    let e_k = 200.0;
    // A wide barrier of this height transmits below roundoff, so the detector
    // only sees noise and its tail never closes. A narrow one tunnels a
    // resolvable amount.
    let high = |g: &Grid1D| {
        Potential::new(PotentialKind::GaussianBarrier { height: 10.0 * e_k, width: 0.08, center: 30.0 }, g, &unit()).unwrap()
    };
    let rec = transmission_record(high, 1e-4);
    let cfg = transmission_cfg();
    let t = transmission(&rec, 0.0, 60.0, &cfg).unwrap();
    assert!((0.0..0.05).contains(&t), "{t}");

    let moderate = |g: &Grid1D| {
        Potential::new(PotentialKind::GaussianBarrier { height: e_k, width: 0.5, center: 30.0 }, g, &unit()).unwrap()
    };
    let rec = transmission_record(moderate, 2e-4);
    let t: Vec<f64> = cfg.detector_xs.iter().map(|&x| transmission(&rec, 0.0, x, &cfg).unwrap()).collect();
    assert!(t[0] > 0.05 && t[0] < 0.95, "{t:?}");
    assert!((t[0] - t[1]).abs() < 1e-6, "{t:?}");
}
