//! Inverse-CDF sampling from tabulated densities, histograms and the
//! Kolmogorov-Smirnov statistic.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Critical KS value at the 1% level for large `n`.
pub fn ks_critical_1pct(n: usize) -> f64 {
    1.63 / (n as f64).sqrt()
}

pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A density tabulated on uniform cells `[c_k - w/2, c_k + w/2)` and
/// treated as constant inside each cell. Its CDF is piecewise linear.
#[derive(Debug, Clone)]
pub struct PiecewiseDensity {
    centers: Vec<f64>,
    width: f64,
    cumulative: Vec<f64>,
    total: f64,
}

impl PiecewiseDensity {
    /// Negative weights are clipped to zero.
    pub fn new(centers: &[f64], width: f64, density: &[f64]) -> Self {
        assert_eq!(centers.len(), density.len());
        assert!(!centers.is_empty() && width > 0.0);
        let mut cumulative = Vec::with_capacity(density.len());
        let mut acc = 0.0;
        for &d in density {
            acc += d.max(0.0) * width;
            cumulative.push(acc);
        }
        Self {
            centers: centers.to_vec(),
            width,
            cumulative,
            total: acc,
        }
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    pub fn support(&self) -> (f64, f64) {
        let h = 0.5 * self.width;
        (self.centers[0] - h, self.centers[self.centers.len() - 1] + h)
    }

    /// Normalized CDF.
    pub fn cdf(&self, t: f64) -> f64 {
        let (lo, hi) = self.support();
        if t <= lo {
            return 0.0;
        }
        if t >= hi {
            return 1.0;
        }
        let k = (((t - lo) / self.width).floor() as usize).min(self.centers.len() - 1);
        let below = if k == 0 { 0.0 } else { self.cumulative[k - 1] };
        let cell_mass = self.cumulative[k] - below;
        let frac = (t - (self.centers[k] - 0.5 * self.width)) / self.width;
        (below + cell_mass * frac.clamp(0.0, 1.0)) / self.total
    }

    /// Exact inverse of the piecewise-linear CDF: cell chosen by mass, position
    /// uniform within the cell.
    pub fn quantile(&self, u: f64) -> f64 {
        let target = u * self.total;
        let k = self
            .cumulative
            .partition_point(|&c| c <= target)
            .min(self.centers.len() - 1);
        let below = if k == 0 { 0.0 } else { self.cumulative[k - 1] };
        let mass = self.cumulative[k] - below;
        let frac = if mass > 0.0 { ((target - below) / mass).clamp(0.0, 1.0) } else { 0.5 };
        self.centers[k] - 0.5 * self.width + frac * self.width
    }

    pub fn sample<R: Rng>(&self, rng: &mut R, n: usize) -> Vec<f64> {
        (0..n).map(|_| self.quantile(rng.random::<f64>())).collect()
    }
}

/// `sup |F_n - F|` for the empirical distribution of `samples`.
pub fn ks_statistic(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

/// Uniform bins on `[lo, hi)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Binning {
    pub lo: f64,
    pub hi: f64,
    pub bins: usize,
}

impl Binning {
    pub fn new(lo: f64, hi: f64, bins: usize) -> Self {
        assert!(hi > lo && bins > 0);
        Self { lo, hi, bins }
    }

    pub fn width(&self) -> f64 {
        (self.hi - self.lo) / self.bins as f64
    }

    pub fn center(&self, b: usize) -> f64 {
        self.lo + (b as f64 + 0.5) * self.width()
    }

    pub fn index(&self, x: f64) -> Option<usize> {
        if x < self.lo || x >= self.hi {
            return None;
        }
        Some((((x - self.lo) / self.width()) as usize).min(self.bins - 1))
    }

    pub fn counts(&self, samples: &[f64]) -> Vec<u64> {
        let mut counts = vec![0u64; self.bins];
        for &s in samples {
            if let Some(b) = self.index(s) {
                counts[b] += 1;
            }
        }
        counts
    }
}
