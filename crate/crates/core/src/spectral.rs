//! FFT plumbing on a periodic uniform grid.
//!
//! Everything spectral in the crate (momentum operator, kinetic propagator,
//! band-limited interpolation at off-grid points) goes through this module so
//! that the wavenumber ordering and the Nyquist convention live in one place.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::state::Grid1D;

type PlanPair = (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>);

fn plans(n: usize) -> PlanPair {
    static CACHE: OnceLock<Mutex<HashMap<usize, PlanPair>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().expect("fft plan cache poisoned");
    guard
        .entry(n)
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            (planner.plan_fft_forward(n), planner.plan_fft_inverse(n))
        })
        .clone()
}

/// Forward/inverse transforms plus the angular wavenumbers of a grid.
#[derive(Clone)]
pub struct Spectral {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    k: Vec<f64>,
}

impl std::fmt::Debug for Spectral {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Spectral").field("n", &self.n).finish()
    }
}

impl Spectral {
    pub fn new(grid: &Grid1D) -> Self {
        let n = grid.n_points();
        let (forward, inverse) = plans(n);
        Self {
            n,
            forward,
            inverse,
            k: wavenumbers(grid),
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Angular wavenumbers in FFT order. Index `n/2` holds the Nyquist mode
    /// as `-pi/dx`.
    pub fn wavenumbers(&self) -> &[f64] {
        &self.k
    }

    /// Unnormalized forward transform, in place.
    pub fn forward(&self, data: &mut [Complex64]) {
        self.forward.process(data);
    }

    /// Inverse transform including the `1/n` factor, in place.
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.inverse.process(data);
        let scale = 1.0 / self.n as f64;
        data.iter_mut().for_each(|z| *z *= scale);
    }

    pub fn spectrum(&self, samples: &[Complex64]) -> Vec<Complex64> {
        let mut buf = samples.to_vec();
        self.forward(&mut buf);
        buf
    }

    /// `order`-th spatial derivative of an already transformed field.
    /// The Nyquist mode is dropped for odd orders so real fields keep real
    /// derivatives.
    pub fn derivative_from_spectrum(&self, spectrum: &[Complex64], order: u32) -> Vec<Complex64> {
        let nyq = self.n / 2;
        let mut buf: Vec<Complex64> = spectrum
            .iter()
            .zip(&self.k)
            .enumerate()
            .map(|(j, (c, &k))| {
                if order % 2 == 1 && j == nyq {
                    Complex64::new(0.0, 0.0)
                } else {
                    c * Complex64::new(0.0, k).powu(order)
                }
            })
            .collect();
        self.inverse(&mut buf);
        buf
    }

    pub fn derivative(&self, samples: &[Complex64], order: u32) -> Vec<Complex64> {
        let spec = self.spectrum(samples);
        self.derivative_from_spectrum(&spec, order)
    }

    /// Spectral derivative of a real periodic field.
    pub fn derivative_real(&self, samples: &[f64], order: u32) -> Vec<f64> {
        let as_complex: Vec<Complex64> = samples.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.derivative(&as_complex, order)
            .into_iter()
            .map(|z| z.re)
            .collect()
    }
}

pub fn wavenumbers(grid: &Grid1D) -> Vec<f64> {
    let n = grid.n_points();
    let dk = 2.0 * PI / grid.length();
    (0..n)
        .map(|j| {
            let m = if j < n / 2 { j as isize } else { j as isize - n as isize };
            dk * m as f64
        })
        .collect()
}

/// Band-limited (trigonometric) interpolation of grid fields at fixed
/// off-grid positions. The phase table is built once and reused for every
/// spectrum, which is what the time-of-flight code needs: a handful of
/// detector points evaluated against hundreds of snapshots.
#[derive(Debug, Clone)]
pub struct PointProbe {
    points: Vec<f64>,
    // per point: (value weights, derivative weights), each of length n
    weights: Vec<(Vec<Complex64>, Vec<Complex64>)>,
}

impl PointProbe {
    pub fn new(grid: &Grid1D, points: &[f64]) -> Self {
        let n = grid.n_points();
        let k = wavenumbers(grid);
        let nyq = n / 2;
        let inv_n = 1.0 / n as f64;
        let weights = points
            .iter()
            .map(|&x| {
                let s = x - grid.x_min();
                let mut val = Vec::with_capacity(n);
                let mut der = Vec::with_capacity(n);
                for (j, &kj) in k.iter().enumerate() {
                    if j == nyq {
                        // symmetric split of the Nyquist mode: cos(k s)
                        let c = (kj * s).cos() * inv_n;
                        val.push(Complex64::new(c, 0.0));
                        der.push(Complex64::new(0.0, 0.0));
                    } else {
                        let (sn, cs) = (kj * s).sin_cos();
                        let w = Complex64::new(cs, sn) * inv_n;
                        val.push(w);
                        der.push(w * Complex64::new(0.0, kj));
                    }
                }
                (val, der)
            })
            .collect();
        Self {
            points: points.to_vec(),
            weights,
        }
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    /// `(psi(x), dpsi/dx(x))` at every probe point.
    pub fn eval(&self, spectrum: &[Complex64]) -> Vec<(Complex64, Complex64)> {
        self.weights
            .iter()
            .map(|(val, der)| {
                let mut v = Complex64::new(0.0, 0.0);
                let mut d = Complex64::new(0.0, 0.0);
                for ((c, wv), wd) in spectrum.iter().zip(val).zip(der) {
                    v += c * wv;
                    d += c * wd;
                }
                (v, d)
            })
            .collect()
    }
}
