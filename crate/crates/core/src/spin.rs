//! Path-spin interferometer model.
//!
//! The Hilbert space is `path (2) x spin (2)` with basis index
//! `2 * path + spin`, path 0/1 the two arms and spin 0/1 the `sigma_z`
//! eigenstates up/down. A spin initially along `+x` is coupled to the path
//! operator `sigma_z^P` with strength `alpha`:
//!
//! ```text
//! |Psi(alpha)> = cos(alpha/2) |P_i>|S_x+>  -  i sin(alpha/2) sigma_z^P |P_i>|S_x->
//! ```
//!
//! Post-selecting the path on `|P_f>` and the spin on one of the six states
//! `|S_j;+->` gives six intensities from which the weak value
//! `<P_f|sigma_z^P|P_i>/<P_f|P_i>` is recovered:
//!
//! ```text
//! Re w = cot(alpha/2) (I_y+ - I_y-) / (2 I_x+)
//! Im w = cot(alpha/2) (I_z+ - I_z-) / (2 I_x+)
//! ```

use num_complex::Complex64;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operator::{pauli, vdot, vnorm, OperatorMatrix};
use crate::sampling::seeded_rng;
use crate::weak::{build_triple, strong_ratios, weak_value_exact, PostSelection, WeakValue, EPS_OVERLAP};

const NORM_TOL: f64 = 1e-12;
const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpinAxis {
    X,
    Y,
    Z,
}

impl SpinAxis {
    pub const ALL: [SpinAxis; 3] = [SpinAxis::X, SpinAxis::Y, SpinAxis::Z];
}

/// Spin eigenstate `|S_axis; sign>` in the `sigma_z` basis, with
/// `|S_x;+-> = (|up> +- |down>)/sqrt 2` and `|S_y;+-> = (|up> +- i|down>)/sqrt 2`.
pub fn spin_state(axis: SpinAxis, plus: bool) -> [Complex64; 2] {
    let s = if plus { 1.0 } else { -1.0 };
    match axis {
        SpinAxis::X => [c(FRAC_1_SQRT_2, 0.0), c(s * FRAC_1_SQRT_2, 0.0)],
        SpinAxis::Y => [c(FRAC_1_SQRT_2, 0.0), c(0.0, s * FRAC_1_SQRT_2)],
        SpinAxis::Z => {
            if plus {
                [c(1.0, 0.0), c(0.0, 0.0)]
            } else {
                [c(0.0, 0.0), c(1.0, 0.0)]
            }
        }
    }
}

/// `path (x) spin` product vector.
pub fn product(path: &[Complex64; 2], spin: &[Complex64; 2]) -> [Complex64; 4] {
    [path[0] * spin[0], path[0] * spin[1], path[1] * spin[0], path[1] * spin[1]]
}

/// `sigma_z` on the path factor, identity on spin.
pub fn path_sigma_z() -> OperatorMatrix {
    pauli::z().kron(&OperatorMatrix::identity(2))
}

/// A normalized state on the 4-dimensional path-spin space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathSpinState {
    amplitudes: [Complex64; 4],
}

impl PathSpinState {
    pub fn new(amplitudes: [Complex64; 4]) -> Result<Self> {
        let n = vnorm(&amplitudes);
        if (n - 1.0).abs() > NORM_TOL {
            return Err(Error::InvalidParams(format!("path-spin state has norm {n}, expected 1")));
        }
        Ok(Self { amplitudes })
    }

    pub fn amplitudes(&self) -> &[Complex64; 4] {
        &self.amplitudes
    }
}

/// Coupling angle and the pre- and post-selected path states.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InterferometerConfig {
    pub alpha: f64,
    pub path_pre: [Complex64; 2],
    pub path_post: [Complex64; 2],
}

impl InterferometerConfig {
    /// Real path states `(cos theta, sin theta)`.
    pub fn from_angles(alpha: f64, pre_angle: f64, post_angle: f64) -> Self {
        Self {
            alpha,
            path_pre: [c(pre_angle.cos(), 0.0), c(pre_angle.sin(), 0.0)],
            path_post: [c(post_angle.cos(), 0.0), c(post_angle.sin(), 0.0)],
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_alpha(self.alpha)?;
        for (name, v) in [("pre", &self.path_pre), ("post", &self.path_post)] {
            let n = vnorm(v);
            if (n - 1.0).abs() > NORM_TOL {
                return Err(Error::InvalidParams(format!("{name}-selected path state has norm {n}, expected 1")));
            }
        }
        Ok(())
    }

    /// `<P_f|P_i>`
    pub fn path_overlap(&self) -> Complex64 {
        vdot(&self.path_post, &self.path_pre)
    }

    /// The 4-dimensional post-selection `|P_f>|S_axis;sign>`.
    pub fn post_selection(&self, axis: SpinAxis, plus: bool) -> Vec<Complex64> {
        product(&self.path_post, &spin_state(axis, plus)).to_vec()
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    let pi = std::f64::consts::PI;
    if !(alpha > 0.0 && alpha < pi) || alpha.sin() == 0.0 {
        return Err(Error::DegenerateAngle { alpha });
    }
    Ok(())
}

/// The pre-selected state after the spin-path coupling. Accepts any `alpha`,
/// including the uncoupled endpoints.
pub fn evolve_preselected(cfg: &InterferometerConfig) -> PathSpinState {
    let (s, co) = (0.5 * cfg.alpha).sin_cos();
    let up = product(&cfg.path_pre, &spin_state(SpinAxis::X, true));
    let flipped_path = [cfg.path_pre[0], -cfg.path_pre[1]];
    let down = product(&flipped_path, &spin_state(SpinAxis::X, false));
    let mut amplitudes = [c(0.0, 0.0); 4];
    for k in 0..4 {
        amplitudes[k] = co * up[k] - c(0.0, s) * down[k];
    }
    let n = vnorm(&amplitudes);
    for a in &mut amplitudes {
        *a /= n;
    }
    PathSpinState { amplitudes }
}

/// Post-selection probabilities `I_{j+-}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntensityTable {
    pub x_plus: f64,
    pub x_minus: f64,
    pub y_plus: f64,
    pub y_minus: f64,
    pub z_plus: f64,
    pub z_minus: f64,
}

impl IntensityTable {
    pub fn get(&self, axis: SpinAxis, plus: bool) -> f64 {
        match (axis, plus) {
            (SpinAxis::X, true) => self.x_plus,
            (SpinAxis::X, false) => self.x_minus,
            (SpinAxis::Y, true) => self.y_plus,
            (SpinAxis::Y, false) => self.y_minus,
            (SpinAxis::Z, true) => self.z_plus,
            (SpinAxis::Z, false) => self.z_minus,
        }
    }

    /// `I_{j+} + I_{j-}`, the path post-selection probability.
    pub fn axis_sum(&self, axis: SpinAxis) -> f64 {
        self.get(axis, true) + self.get(axis, false)
    }

    pub fn as_array(&self) -> [f64; 6] {
        [self.x_plus, self.x_minus, self.y_plus, self.y_minus, self.z_plus, self.z_minus]
    }
}

/// Each intensity is `<Psi(alpha)|D|Psi(alpha)>` with `D` the density
/// operator of the 4-dimensional post-selection.
pub fn intensity_table(cfg: &InterferometerConfig) -> Result<IntensityTable> {
    cfg.validate()?;
    let psi = evolve_preselected(cfg);
    let sigma = path_sigma_z();
    let intensity = |axis, plus| -> Result<f64> {
        let post = PostSelection::finite_normalized(&cfg.post_selection(axis, plus))?;
        let triple = build_triple(&sigma, &post)?;
        Ok(triple.density.expectation(psi.amplitudes())?.re)
    };
    Ok(IntensityTable {
        x_plus: intensity(SpinAxis::X, true)?,
        x_minus: intensity(SpinAxis::X, false)?,
        y_plus: intensity(SpinAxis::Y, true)?,
        y_minus: intensity(SpinAxis::Y, false)?,
        z_plus: intensity(SpinAxis::Z, true)?,
        z_minus: intensity(SpinAxis::Z, false)?,
    })
}

/// `<P_f|sigma_z|P_i>/<P_f|P_i>` on the path factor alone.
pub fn weak_spin_direct(cfg: &InterferometerConfig) -> Result<WeakValue> {
    let post = PostSelection::finite(cfg.path_post.to_vec())?;
    weak_value_exact(&pauli::z(), &cfg.path_pre, &post)
}

/// The flux and commutator ratios of `sigma_z^P` on the 4-dimensional space,
/// post-selected on `|P_f>|S_x+>`.
pub fn weak_spin_from_triple(cfg: &InterferometerConfig) -> Result<WeakValue> {
    cfg.validate()?;
    check_path_overlap(cfg)?;
    let psi = evolve_preselected(cfg);
    let post = PostSelection::finite_normalized(&cfg.post_selection(SpinAxis::X, true))?;
    let triple = build_triple(&path_sigma_z(), &post)?;
    strong_ratios(&triple, psi.amplitudes())
}

fn check_path_overlap(cfg: &InterferometerConfig) -> Result<()> {
    let overlap = cfg.path_overlap().norm();
    if overlap <= EPS_OVERLAP {
        return Err(Error::OrthogonalSelection { overlap });
    }
    Ok(())
}

/// Weak value from the six intensities alone. `I_{x+}` is
/// `cos^2(alpha/2) |<P_f|P_i>|^2`, so the overlap is recovered from it.
pub fn weak_spin_from_intensities(table: &IntensityTable, alpha: f64) -> Result<WeakValue> {
    check_alpha(alpha)?;
    let cos_half = (0.5 * alpha).cos();
    let overlap = table.x_plus.max(0.0).sqrt() / cos_half;
    if overlap <= EPS_OVERLAP {
        return Err(Error::OrthogonalSelection { overlap });
    }
    let k = 0.5 / (0.5 * alpha).tan();
    let re = k * (table.y_plus - table.y_minus) / table.x_plus;
    let im = k * (table.z_plus - table.z_minus) / table.x_plus;
    Ok(WeakValue {
        value: c(re, im),
        re_channel: re,
        im_channel: im,
        denominator: table.x_plus,
    })
}

/// Residuals between the independent evaluation routes of the flux and
/// commutator expectation values with post-selection `|P_f>|S_x+>`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TripleResiduals {
    /// `<F>` against `|<P_i|P_f>|^2 cos^2(alpha/2) Re w`.
    pub flux_vs_weak: f64,
    /// `<C>` against `|<P_i|P_f>|^2 cos^2(alpha/2) Im w`.
    pub commutator_vs_weak: f64,
    /// `<F>` against `cot(alpha/2)(I_y+ - I_y-)/2`.
    pub flux_vs_intensities: f64,
    /// `<C>` against `cot(alpha/2)(I_z+ - I_z-)/2`.
    pub commutator_vs_intensities: f64,
    /// `<D>` against `cos^2(alpha/2) |<P_i|P_f>|^2`.
    pub density_vs_closed_form: f64,
    pub flux: f64,
    pub commutator: f64,
}

impl TripleResiduals {
    pub fn max(&self) -> f64 {
        [
            self.flux_vs_weak,
            self.commutator_vs_weak,
            self.flux_vs_intensities,
            self.commutator_vs_intensities,
            self.density_vs_closed_form,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

pub fn verify_triple_correspondence(cfg: &InterferometerConfig) -> Result<TripleResiduals> {
    cfg.validate()?;
    let psi = evolve_preselected(cfg);
    let post = PostSelection::finite_normalized(&cfg.post_selection(SpinAxis::X, true))?;
    let triple = build_triple(&path_sigma_z(), &post)?;
    let amps = psi.amplitudes();
    let d = triple.density.expectation(amps)?.re;
    let f = triple.flux.expectation(amps)?.re;
    let cm = triple.commutator.expectation(amps)?.re;

    // Unnormalized weak value: <P_f|sigma|P_i> conj(<P_f|P_i>) = |<P_f|P_i>|^2 w.
    let overlap = cfg.path_overlap();
    let sigma_elem = pauli::z().matrix_element(&cfg.path_post, &cfg.path_pre)?;
    let weighted = sigma_elem * overlap.conj();
    let cos2 = (0.5 * cfg.alpha).cos().powi(2);

    let table = intensity_table(cfg)?;
    let k = 0.5 / (0.5 * cfg.alpha).tan();
    Ok(TripleResiduals {
        flux_vs_weak: (f - cos2 * weighted.re).abs(),
        commutator_vs_weak: (cm - cos2 * weighted.im).abs(),
        flux_vs_intensities: (f - k * (table.y_plus - table.y_minus)).abs(),
        commutator_vs_intensities: (cm - k * (table.z_plus - table.z_minus)).abs(),
        density_vs_closed_form: (d - cos2 * overlap.norm_sqr()).abs(),
        flux: f,
        commutator: cm,
    })
}

/// Weak value estimated from finite counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShotNoiseEstimate {
    /// Incident particles per spin-analyzer axis.
    pub n_per_axis: u64,
    pub seed: u64,
    /// Counts in the order `x+, x-, y+, y-, z+, z-`.
    pub counts: [u64; 6],
    pub intensities: IntensityTable,
    pub re: f64,
    pub im: f64,
    pub re_stderr: f64,
    pub im_stderr: f64,
}

/// Draws, for each analyzer axis, a multinomial split of `n_per_axis`
/// particles into `(+, -, lost)` and propagates Poisson errors
/// `var(count) = count` into the ratio estimates.
pub fn shot_noise_estimate(
    table: &IntensityTable,
    alpha: f64,
    n_per_axis: u64,
    seed: u64,
) -> Result<ShotNoiseEstimate> {
    check_alpha(alpha)?;
    if n_per_axis == 0 {
        return Err(Error::InvalidParams("shot-noise estimate needs at least one count".into()));
    }
    let mut rng = seeded_rng(seed);
    let mut counts = [0u64; 6];
    for (a, axis) in SpinAxis::ALL.into_iter().enumerate() {
        let p_plus = table.get(axis, true).clamp(0.0, 1.0);
        let p_minus = table.get(axis, false).clamp(0.0, 1.0);
        let n_plus = Binomial::new(n_per_axis, p_plus)
            .map_err(|e| Error::InvalidParams(e.to_string()))?
            .sample(&mut rng);
        let rest = 1.0 - p_plus;
        let p_cond = if rest > 0.0 { (p_minus / rest).clamp(0.0, 1.0) } else { 0.0 };
        let n_minus = Binomial::new(n_per_axis - n_plus, p_cond)
            .map_err(|e| Error::InvalidParams(e.to_string()))?
            .sample(&mut rng);
        counts[2 * a] = n_plus;
        counts[2 * a + 1] = n_minus;
    }
    let n = n_per_axis as f64;
    let est = |k: usize| counts[k] as f64 / n;
    let intensities = IntensityTable {
        x_plus: est(0),
        x_minus: est(1),
        y_plus: est(2),
        y_minus: est(3),
        z_plus: est(4),
        z_minus: est(5),
    };
    if counts[0] == 0 {
        return Err(Error::OrthogonalSelection { overlap: 0.0 });
    }
    let w = weak_spin_from_intensities(&intensities, alpha)?;
    let k = 0.5 / (0.5 * alpha).tan();
    let b = intensities.x_plus;
    let var_b = b / n;
    let ratio_stderr = |plus: f64, minus: f64| {
        let a = plus - minus;
        let var_a = (plus + minus) / n;
        k * (var_a / (b * b) + a * a * var_b / b.powi(4)).sqrt()
    };
    Ok(ShotNoiseEstimate {
        n_per_axis,
        seed,
        counts,
        intensities,
        re: w.re_channel,
        im: w.im_channel,
        re_stderr: ratio_stderr(intensities.y_plus, intensities.y_minus),
        im_stderr: ratio_stderr(intensities.z_plus, intensities.z_minus),
    })
}
