//! Density representations and the Hellinger distance between them.

mod family;
mod histogram;
mod transform;

pub use family::{GaussianFamily, GaussianLocationFamily, ParametricDensity, ParametricFamily};
pub(crate) use histogram::bin_index;
pub use histogram::{HistogramDensity, HistogramMixture};
pub use transform::{transform_density, SupportTransform, TransformedDensity};

use crate::error::{Error, Result};
use crate::numerics::Integrator;

/// A univariate probability density.
pub trait Density: Send + Sync {
    fn pdf(&self, x: f64) -> f64;

    /// An interval outside which the density is zero (or negligible).
    fn support(&self) -> (f64, f64);

    /// Points where the density is not smooth. Quadrature panels are aligned to them.
    fn breakpoints(&self) -> Vec<f64> {
        Vec::new()
    }
}

impl<D: Density + ?Sized> Density for &D {
    fn pdf(&self, x: f64) -> f64 {
        (**self).pdf(x)
    }
    fn support(&self) -> (f64, f64) {
        (**self).support()
    }
    fn breakpoints(&self) -> Vec<f64> {
        (**self).breakpoints()
    }
}

impl<D: Density + ?Sized> Density for Box<D> {
    fn pdf(&self, x: f64) -> f64 {
        (**self).pdf(x)
    }
    fn support(&self) -> (f64, f64) {
        (**self).support()
    }
    fn breakpoints(&self) -> Vec<f64> {
        (**self).breakpoints()
    }
}

fn checked_pdf<D: Density>(d: &D, name: &'static str, x: f64) -> Result<f64> {
    let v = d.pdf(x);
    if v.is_nan() || v.is_infinite() {
        return Err(Error::NonFinite { x, value: v });
    }
    if v < 0.0 {
        return Err(Error::NegativeDensity {
            density: name,
            x,
            value: v,
        });
    }
    Ok(v)
}

/// Bhattacharyya coefficient `∫ sqrt(f g)` over `support`.
pub fn bhattacharyya<F: Density, G: Density>(f: &F, g: &G, support: (f64, f64), integrator: &Integrator) -> Result<f64> {
    let mut breaks = f.breakpoints();
    breaks.extend(g.breakpoints());
    let mut total = 0.0;
    for (x, w) in integrator.nodes(support.0, support.1, &breaks)? {
        let fv = checked_pdf(f, "f", x)?;
        let gv = checked_pdf(g, "g", x)?;
        total += w * (fv * gv).sqrt();
    }
    Ok(total)
}

/// Hellinger distance `sqrt(max(0, 2 - 2 ∫ sqrt(f g)))`, in `[0, √2]`.
///
/// Both densities are assumed to integrate to one; `support` must cover the
/// region where they overlap.
pub fn hellinger<F: Density, G: Density>(f: &F, g: &G, support: (f64, f64), integrator: &Integrator) -> Result<f64> {
    let bc = bhattacharyya(f, g, support, integrator)?;
    Ok((2.0 - 2.0 * bc).max(0.0).sqrt().min(std::f64::consts::SQRT_2))
}

/// L2 projection of a density on [0, 1] onto the k-bin histograms:
/// `weights[j] = ∫_{I_j} f`.
///
/// `f` must integrate to one on [0, 1] within 1e-6; the masses are then
/// renormalized.
pub fn project_to_histogram<D: Density>(f: &D, k: usize, integrator: &Integrator) -> Result<HistogramDensity> {
    if k == 0 {
        return Err(Error::InvalidHistogram("bin count must be positive".into()));
    }
    let mut breaks: Vec<f64> = (0..=k).map(|j| j as f64 / k as f64).collect();
    breaks.extend(f.breakpoints());
    let mut masses = vec![0.0; k];
    for (x, w) in integrator.nodes(0.0, 1.0, &breaks)? {
        let v = checked_pdf(f, "f", x)?;
        let j = bin_index(x, k).expect("quadrature node inside [0, 1]");
        masses[j] += w * v;
    }
    let total: f64 = masses.iter().sum();
    if (total - 1.0).abs() > 1e-6 {
        return Err(Error::InvalidInput(format!("density integrates to {total} on [0, 1], not 1")));
    }
    HistogramDensity::from_masses(masses)
}
