//! Weak values from strong expectation values.
//!
//! For an operator `A`, a post-selection `|phi>` and a pre-selected state
//! `|psi>`, the density `D = |phi><phi|`, the flux `F` and the hermitian
//! commutator `C` are hermitian operators whose expectation values in `|psi>`
//! give the weak value `<phi|A|psi>/<phi|psi>`:
//!
//! ```text
//! Re <A>_w = <psi|F|psi> / <psi|D|psi>
//! Im <A>_w = <psi|C|psi> / <psi|D|psi>
//! ```
//!
//! `F = (D A + A^dagger D)/2` and `C = i (A^dagger D - D A)/2`. For hermitian
//! `A` these are the anti-commutator `{A, D}/2` and commutator `[iA, D]/2`.
//! The operator ordering is the one for which the two ratios recover the weak
//! value of `A` itself when `A` is not hermitian; the mirrored ordering
//! `(A D + D A^dagger)/2` yields the weak value of `A^dagger` instead.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operator::{vdot, vnorm, OperatorMatrix};
use crate::spectral::Spectral;
use crate::state::{apply_momentum, Grid1D, PhysicalParams, Wavefunction};

/// Default bound on `|<phi|psi>|` below which a weak value is undefined.
pub const EPS_OVERLAP: f64 = 1e-10;
/// Default relative density below which a grid point is treated as a node.
pub const EPS_NODE: f64 = 1e-14;

/// A post-selection: either a normalized state vector or a grid position.
#[derive(Debug, Clone, PartialEq)]
pub enum PostSelection {
    FiniteState(Vec<Complex64>),
    PositionPoint(PositionPoint),
}

impl PostSelection {
    pub fn finite(vector: Vec<Complex64>) -> Result<Self> {
        let n = vnorm(&vector);
        if (n - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParams(format!("post-selected vector has norm {n}, expected 1")));
        }
        Ok(Self::FiniteState(vector))
    }

    /// Normalizes `vector` before wrapping it.
    pub fn finite_normalized(vector: &[Complex64]) -> Result<Self> {
        let n = vnorm(vector);
        if n == 0.0 {
            return Err(Error::InvalidParams("zero post-selection vector".into()));
        }
        Ok(Self::FiniteState(vector.iter().map(|z| z / n).collect()))
    }
}

/// A position post-selection resolved to the nearest grid node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PositionPoint {
    pub x: f64,
    pub index: usize,
}

impl PositionPoint {
    pub fn new(grid: &Grid1D, x: f64) -> Result<Self> {
        let index = grid
            .nearest_index(x)
            .ok_or_else(|| Error::InvalidParams(format!("post-selected point {x} outside grid")))?;
        Ok(Self { x: grid.x(index), index })
    }
}

/// Density, flux and hermitian-commutator operators for one post-selection.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorTriple {
    pub density: OperatorMatrix,
    pub flux: OperatorMatrix,
    pub commutator: OperatorMatrix,
}

/// A weak value with its two strong-measurement channels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeakValue {
    pub value: Complex64,
    /// Real part inferred from the flux ratio.
    pub re_channel: f64,
    /// Imaginary part inferred from the commutator ratio.
    pub im_channel: f64,
    /// `<psi|D|psi>`, the post-selection probability (density).
    pub denominator: f64,
}

impl WeakValue {
    fn from_value(value: Complex64, denominator: f64) -> Self {
        Self {
            value,
            re_channel: value.re,
            im_channel: value.im,
            denominator,
        }
    }
}

fn finite_vector(post: &PostSelection, dim: usize) -> Result<Vec<Complex64>> {
    match post {
        PostSelection::FiniteState(v) => {
            if v.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: v.len() });
            }
            Ok(v.clone())
        }
        PostSelection::PositionPoint(p) => {
            if p.index >= dim {
                return Err(Error::DimensionMismatch { expected: dim, got: p.index + 1 });
            }
            let mut e = vec![Complex64::new(0.0, 0.0); dim];
            e[p.index] = Complex64::new(1.0, 0.0);
            Ok(e)
        }
    }
}

pub fn build_triple(op: &OperatorMatrix, post: &PostSelection) -> Result<OperatorTriple> {
    let phi = finite_vector(post, op.dim())?;
    let density = OperatorMatrix::outer(&phi, &phi)?;
    let da = &density * op;
    let a_dag_d = &op.adjoint() * &density;
    let flux = (&da + &a_dag_d).scale(Complex64::new(0.5, 0.0));
    let commutator = (&a_dag_d - &da).scale(Complex64::new(0.0, 0.5));
    Ok(OperatorTriple {
        density,
        flux,
        commutator,
    })
}

fn check_overlap(phi: &[Complex64], psi: &[Complex64], eps: f64) -> Result<Complex64> {
    let overlap = vdot(phi, psi);
    if overlap.norm() <= eps {
        return Err(Error::OrthogonalSelection { overlap: overlap.norm() });
    }
    Ok(overlap)
}

/// `<phi|A|psi> / <phi|psi>` evaluated directly.
pub fn weak_value_exact(op: &OperatorMatrix, pre_state: &[Complex64], post: &PostSelection) -> Result<WeakValue> {
    weak_value_exact_with(op, pre_state, post, EPS_OVERLAP)
}

pub fn weak_value_exact_with(
    op: &OperatorMatrix,
    pre_state: &[Complex64],
    post: &PostSelection,
    eps_overlap: f64,
) -> Result<WeakValue> {
    if pre_state.len() != op.dim() {
        return Err(Error::DimensionMismatch { expected: op.dim(), got: pre_state.len() });
    }
    let phi = finite_vector(post, op.dim())?;
    let overlap = check_overlap(&phi, pre_state, eps_overlap)?;
    let numerator = op.matrix_element(&phi, pre_state)?;
    Ok(WeakValue::from_value(numerator / overlap, overlap.norm_sqr()))
}

/// Weak value from the three strong expectation values `<D>`, `<F>`, `<C>`.
pub fn weak_value_from_strong(
    op: &OperatorMatrix,
    pre_state: &[Complex64],
    post: &PostSelection,
) -> Result<WeakValue> {
    weak_value_from_strong_with(op, pre_state, post, EPS_OVERLAP)
}

pub fn weak_value_from_strong_with(
    op: &OperatorMatrix,
    pre_state: &[Complex64],
    post: &PostSelection,
    eps_overlap: f64,
) -> Result<WeakValue> {
    if pre_state.len() != op.dim() {
        return Err(Error::DimensionMismatch { expected: op.dim(), got: pre_state.len() });
    }
    let phi = finite_vector(post, op.dim())?;
    check_overlap(&phi, pre_state, eps_overlap)?;
    let triple = build_triple(op, post)?;
    strong_ratios(&triple, pre_state)
}

/// The two ratios for an already-built triple.
pub fn strong_ratios(triple: &OperatorTriple, pre_state: &[Complex64]) -> Result<WeakValue> {
    let d = triple.density.expectation(pre_state)?.re;
    let f = triple.flux.expectation(pre_state)?.re;
    let c = triple.commutator.expectation(pre_state)?.re;
    let re = f / d;
    let im = c / d;
    Ok(WeakValue {
        value: Complex64::new(re, im),
        re_channel: re,
        im_channel: im,
        denominator: d,
    })
}

/// Momentum weak value `<x|p|psi>/<x|psi>` at a grid point.
///
/// `re_channel` is `M j(x)/rho(x)` with the probability current
/// `j = (hbar/M) Im(conj(psi) psi')`; `im_channel` is
/// `-(hbar/2) d ln rho / dx` with `d rho/dx = 2 Re(conj(psi) psi')`.
pub fn momentum_weak_value_grid(state: &Wavefunction, x: &PositionPoint, params: &PhysicalParams) -> Result<WeakValue> {
    momentum_weak_value_grid_with(state, x, params, EPS_NODE)
}

pub fn momentum_weak_value_grid_with(
    state: &Wavefunction,
    x: &PositionPoint,
    params: &PhysicalParams,
    eps_node: f64,
) -> Result<WeakValue> {
    let field = MomentumWeakField::new(state, params, eps_node);
    field.at(x.index).ok_or_else(|| Error::Node {
        x: x.x,
        relative_density: field.relative_density(x.index),
    })
}

/// Momentum weak value at every grid point of one state; `None` at nodes.
#[derive(Debug, Clone)]
pub struct MomentumWeakField {
    values: Vec<Option<WeakValue>>,
    density: Vec<f64>,
    peak: f64,
}

impl MomentumWeakField {
    pub fn new(state: &Wavefunction, params: &PhysicalParams, eps_node: f64) -> Self {
        let p_psi = apply_momentum(state, params);
        let density = state.density();
        let peak = density.iter().cloned().fold(0.0, f64::max);
        let m = params.mass;
        let hbar = params.hbar;
        let dpsi_factor = Complex64::new(0.0, 1.0 / hbar);
        let values = state
            .amplitudes()
            .iter()
            .zip(p_psi.amplitudes())
            .zip(&density)
            .map(|((psi, ppsi), &rho)| {
                if !(rho > eps_node * peak) {
                    return None;
                }
                // psi' = (i/hbar) p psi
                let dpsi = ppsi * dpsi_factor;
                let current = hbar / m * (psi.conj() * dpsi).im;
                let drho = 2.0 * (psi.conj() * dpsi).re;
                let re = m * current / rho;
                let im = -0.5 * hbar * drho / rho;
                Some(WeakValue {
                    value: ppsi / psi,
                    re_channel: re,
                    im_channel: im,
                    denominator: rho,
                })
            })
            .collect();
        Self { values, density, peak }
    }

    pub fn at(&self, index: usize) -> Option<WeakValue> {
        self.values.get(index).copied().flatten()
    }

    pub fn values(&self) -> &[Option<WeakValue>] {
        &self.values
    }

    pub fn relative_density(&self, index: usize) -> f64 {
        if self.peak > 0.0 {
            self.density[index] / self.peak
        } else {
            0.0
        }
    }

    pub fn re_field(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.map_or(f64::NAN, |w| w.re_channel)).collect()
    }

    pub fn im_field(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.map_or(f64::NAN, |w| w.im_channel)).collect()
    }
}

/// Dense `n x n` momentum matrix of a grid in the Euclidean (dx-free)
/// basis: `P = F^-1 diag(hbar k) F`, the matrix form of the spectral
/// derivative used by [`apply_momentum`].
pub fn momentum_matrix(grid: &Grid1D, params: &PhysicalParams) -> OperatorMatrix {
    let n = grid.n_points();
    let sp = Spectral::new(grid);
    let mut m = OperatorMatrix::zeros(n);
    for j in 0..n {
        let mut e = vec![Complex64::new(0.0, 0.0); n];
        e[j] = Complex64::new(1.0, 0.0);
        let col = sp.derivative(&e, 1);
        for (i, z) in col.into_iter().enumerate() {
            m[(i, j)] = z * Complex64::new(0.0, -params.hbar);
        }
    }
    m
}

/// Rebuild a wavefunction from momentum weak-value fields on `span`.
///
/// The phase is the cumulative trapezoid integral of the real field and the
/// log-density is `-(2/hbar)` times that of the imaginary field, both
/// anchored at `anchor` (`S = 0`, global normalization fixed afterwards).
/// Amplitudes outside `span` are zero.
pub fn reconstruct_wavefunction(
    grid: &Grid1D,
    re_field: &[f64],
    im_field: &[f64],
    span: std::ops::Range<usize>,
    anchor: usize,
    params: &PhysicalParams,
) -> Result<Wavefunction> {
    let n = grid.n_points();
    if re_field.len() != n || im_field.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: re_field.len().min(im_field.len()),
        });
    }
    if span.start >= span.end || span.end > n || !span.contains(&anchor) {
        return Err(Error::InvalidParams(format!(
            "anchor {anchor} must lie in a non-empty span within the grid, got {span:?}"
        )));
    }
    if let Some(i) = span.clone().find(|&i| !(re_field[i].is_finite() && im_field[i].is_finite())) {
        return Err(Error::NodeInInterval { index: i });
    }
    let dx = grid.dx();
    let mut phase = vec![0.0; n];
    let mut log_rho = vec![0.0; n];
    for i in anchor + 1..span.end {
        phase[i] = phase[i - 1] + 0.5 * dx * (re_field[i] + re_field[i - 1]);
        log_rho[i] = log_rho[i - 1] - dx / params.hbar * (im_field[i] + im_field[i - 1]);
    }
    for i in (span.start..anchor).rev() {
        phase[i] = phase[i + 1] - 0.5 * dx * (re_field[i] + re_field[i + 1]);
        log_rho[i] = log_rho[i + 1] + dx / params.hbar * (im_field[i] + im_field[i + 1]);
    }
    // shift the log-density so the largest amplitude is O(1) before exponentiating
    let shift = span.clone().map(|i| log_rho[i]).fold(f64::NEG_INFINITY, f64::max);
    let amps: Vec<Complex64> = (0..n)
        .map(|i| {
            if span.contains(&i) {
                Complex64::from_polar((0.5 * (log_rho[i] - shift)).exp(), phase[i] / params.hbar)
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
        .collect();
    Ok(Wavefunction::from_parts(*grid, amps, 0.0).normalized())
}
