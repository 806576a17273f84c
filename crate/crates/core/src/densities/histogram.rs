use serde::{Deserialize, Serialize};

use super::Density;
use crate::error::{Error, Result};

/// A regular k-bin histogram density on [0, 1].
///
/// Bin j covers `[j/k, (j+1)/k)` (zero-based), except that the last bin is
/// closed on the right so that `x = 1` belongs to it. The density on bin j is
/// `k * weights[j]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramDensity {
    weights: Vec<f64>,
}

impl HistogramDensity {
    /// Wraps a probability vector. The weights must be non-negative and sum
    /// to one within 1e-9; they are renormalized to machine precision.
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidHistogram("bin count must be positive".into()));
        }
        if let Some((j, w)) = weights.iter().enumerate().find(|(_, w)| !(**w >= 0.0) || !w.is_finite()) {
            return Err(Error::InvalidHistogram(format!(
                "weight {w} in bin {j} is not a non-negative number"
            )));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidHistogram(format!("weights sum to {total}, not 1")));
        }
        Ok(Self::normalized(weights, total))
    }

    /// Builds a histogram from non-negative bin masses of any positive total.
    pub fn from_masses(masses: Vec<f64>) -> Result<Self> {
        if masses.is_empty() {
            return Err(Error::InvalidHistogram("bin count must be positive".into()));
        }
        if masses.iter().any(|m| !(*m >= 0.0) || !m.is_finite()) {
            return Err(Error::InvalidHistogram("masses must be finite and non-negative".into()));
        }
        let total: f64 = masses.iter().sum();
        if !(total > 0.0) {
            return Err(Error::InvalidHistogram("total mass must be positive".into()));
        }
        Ok(Self::normalized(masses, total))
    }

    fn normalized(mut weights: Vec<f64>, total: f64) -> Self {
        for w in &mut weights {
            *w /= total;
        }
        Self { weights }
    }

    pub fn uniform(k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidHistogram("bin count must be positive".into()));
        }
        Ok(Self {
            weights: vec![1.0 / k as f64; k],
        })
    }

    pub fn k(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Bin index holding `x`, or `None` outside [0, 1].
    pub fn bin_of(&self, x: f64) -> Option<usize> {
        bin_index(x, self.k())
    }

    /// Bin edges `0, 1/k, ..., 1`.
    pub fn edges(&self) -> Vec<f64> {
        let k = self.k();
        (0..=k).map(|j| j as f64 / k as f64).collect()
    }

    /// Exact L1 distance between two histograms, computed on the common
    /// refinement of their grids.
    pub fn l1_distance(&self, other: &HistogramDensity) -> f64 {
        let mut edges = self.edges();
        edges.extend(other.edges());
        edges.sort_by(f64::total_cmp);
        edges.dedup_by(|a, b| (*a - *b).abs() < 1e-15);
        edges
            .windows(2)
            .map(|w| {
                let mid = 0.5 * (w[0] + w[1]);
                (self.pdf(mid) - other.pdf(mid)).abs() * (w[1] - w[0])
            })
            .sum()
    }

    /// Re-expresses the histogram on a finer grid of `k_fine` bins, which must
    /// be a multiple of `k`.
    pub fn refine(&self, k_fine: usize) -> Result<Self> {
        let k = self.k();
        if k_fine == 0 || !k_fine.is_multiple_of(k) {
            return Err(Error::InvalidHistogram(format!("{k_fine} is not a multiple of {k}")));
        }
        let r = k_fine / k;
        let weights = self.weights.iter().flat_map(|w| std::iter::repeat_n(w / r as f64, r)).collect();
        Ok(Self { weights })
    }
}

pub(crate) fn bin_index(x: f64, k: usize) -> Option<usize> {
    if !(0.0..=1.0).contains(&x) {
        return None;
    }
    Some(((x * k as f64).floor() as usize).min(k - 1))
}

impl Density for HistogramDensity {
    fn pdf(&self, x: f64) -> f64 {
        match self.bin_of(x) {
            Some(j) => self.k() as f64 * self.weights[j],
            None => 0.0,
        }
    }

    fn support(&self) -> (f64, f64) {
        (0.0, 1.0)
    }

    fn breakpoints(&self) -> Vec<f64> {
        self.edges()
    }
}

/// A finite mixture of histograms with different bin counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramMixture {
    components: Vec<(f64, HistogramDensity)>,
}

impl HistogramMixture {
    pub fn new(components: Vec<(f64, HistogramDensity)>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::InvalidHistogram("mixture needs at least one component".into()));
        }
        let total: f64 = components.iter().map(|(w, _)| *w).sum();
        if components.iter().any(|(w, _)| !(*w >= 0.0)) || (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidHistogram(format!(
                "mixture weights must be non-negative and sum to 1 (got {total})"
            )));
        }
        Ok(Self { components })
    }

    pub fn components(&self) -> &[(f64, HistogramDensity)] {
        &self.components
    }
}

impl Density for HistogramMixture {
    fn pdf(&self, x: f64) -> f64 {
        self.components.iter().map(|(w, h)| w * h.pdf(x)).sum()
    }

    fn support(&self) -> (f64, f64) {
        (0.0, 1.0)
    }

    fn breakpoints(&self) -> Vec<f64> {
        let mut e: Vec<f64> = self.components.iter().flat_map(|(_, h)| h.edges()).collect();
        e.sort_by(f64::total_cmp);
        e.dedup();
        e
    }
}
