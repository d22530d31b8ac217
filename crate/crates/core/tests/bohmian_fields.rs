//! Polar-form fields and energy bookkeeping against Gaussian oracles.

use wvsim_core::bohmian::*;
use wvsim_core::evolution::{propagate, PropagatorConfig};
use wvsim_core::state::*;
use wvsim_core::weak::{MomentumWeakField, EPS_NODE};

fn unit() -> PhysicalParams {
    PhysicalParams::default()
}

fn coherent(g: &Grid1D, gamma: f64, center: f64, momentum: f64) -> Wavefunction {
    prepare_coherent_state(&CoherentStateSpec { gamma, center, momentum }, g, &unit()).unwrap()
}

#[test]
fn osmotic_field_is_odd_and_vanishes_at_the_peak() {
    // symmetric grid around the centre so mirrored points are grid points
    let g = Grid1D::new(-20.0, 20.0, 1024).unwrap();
    let y = g.x(512);
    let polar = polar_decompose(&coherent(&g, 0.8, y, 1.3), &unit());
    let po = osmotic_momentum_field(&polar, &unit());
    let rho = polar.density();
    let peak = (0..rho.len()).max_by(|&a, &b| rho[a].total_cmp(&rho[b])).unwrap();
    assert_eq!(peak, 512);
    assert!(po[peak].unwrap().abs() < 1e-12);
    // beyond |x - y| ~ 4 the relative density falls below 1e-6 and roundoff
    // in the log-derivative dominates
    for k in 1..100 {
        let (l, r) = (po[512 - k].unwrap(), po[512 + k].unwrap());
        assert!((l + r).abs() < 1e-10, "k {k}: {l} {r}");
    }
}

#[test]
fn flat_density_has_no_quantum_potential() {
    // a very broad packet is locally a plane wave
    let g = Grid1D::new(-500.0, 500.0, 4096).unwrap();
    let polar = polar_decompose(&coherent(&g, 1e-4, 0.0, 2.0), &unit());
    let q = quantum_potential(&polar, &Potential::free(&g), &unit()).unwrap();
    for i in 0..g.n_points() {
        if g.x(i).abs() < 20.0 {
            assert!(q.q[i].unwrap().abs() < 1e-4);
        }
    }
}

#[test]
fn bohmian_momentum_matches_weak_channel_after_scattering() {
    let g = Grid1D::new(-40.0, 40.0, 1024).unwrap();
    let v = Potential::new(PotentialKind::GaussianBarrier { height: 8.0, width: 1.0, center: 0.0 }, &g, &unit()).unwrap();
    let rec = propagate(&coherent(&g, 0.5, -8.0, 4.0), &v, &PropagatorConfig::new(1e-3, 3.0, 3000), &unit()).unwrap();
    let psi = rec.final_state();
    let polar = polar_decompose(psi, &unit());
    let pb = bohmian_momentum_field(&polar);
    let weak = MomentumWeakField::new(psi, &unit(), EPS_NODE);
    let mut compared = 0;
    for (i, &p) in pb.iter().enumerate() {
        if let (Some(a), Some(w)) = (p, weak.at(i)) {
            assert!((a - w.re_channel).abs() < 1e-8, "x {}", g.x(i));
            compared += 1;
        }
    }
    assert!(compared > 300, "{compared}");
}

#[test]
fn energy_partition_of_a_coherent_packet() {
    let g = Grid1D::new(-30.0, 30.0, 1024).unwrap();
    let (gamma, p0) = (0.7, 1.5);
    let rec = propagate(&coherent(&g, gamma, -3.0, p0), &Potential::free(&g), &PropagatorConfig::new(1e-3, 2.0, 100), &unit())
        .unwrap();
    let parts = energy_partition(&rec, &Potential::free(&g), &unit()).unwrap();
    let e0 = p0 * p0 / 2.0 + gamma / 4.0;
    assert!((parts[0].kinetic - p0 * p0 / 2.0).abs() < 1e-10);
    assert!((parts[0].osmotic - gamma / 4.0).abs() < 1e-10);
    for e in &parts {
        assert!((e.total - e0).abs() < 1e-7 * e0, "t {}", e.t);
    }
}

#[test]
fn resting_packet_energy_is_all_osmotic() {
    let g = Grid1D::new(-30.0, 30.0, 1024).unwrap();
    let rec = propagate(&coherent(&g, 1.0, 0.0, 0.0), &Potential::free(&g), &PropagatorConfig::new(1e-3, 0.1, 100), &unit())
        .unwrap();
    let parts = energy_partition(&rec, &Potential::free(&g), &unit()).unwrap();
    assert!(parts[0].kinetic.abs() < 1e-20);
    assert!((parts[0].osmotic - 0.25).abs() < 1e-10);
}

#[test]
fn free_momentum_expectation_is_constant() {
    let g = Grid1D::new(-30.0, 30.0, 1024).unwrap();
    let rec = propagate(&coherent(&g, 1.0, -4.0, 2.0), &Potential::free(&g), &PropagatorConfig::new(1e-3, 2.0, 10), &unit())
        .unwrap();
    let rep = ehrenfest_check(&rec, &Potential::free(&g), &unit()).unwrap();
    let p0 = rec.snapshots()[0].mean_momentum(&unit());
    for s in rec.snapshots() {
        assert!((s.mean_momentum(&unit()) - p0).abs() < 1e-10);
    }
    assert!(rep.max_residual() < 1e-10);
}
