//! Parametric families with square-root density derivatives.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{Density, SupportTransform};
use crate::error::{Error, Result};
use crate::numerics::Bound;

/// A family `{f_theta}` exposing `s = f^(1/2)` and its first two parameter
/// derivatives. Hessians are written row-major into a `dim * dim` slice.
pub trait ParametricFamily: Clone + Send + Sync {
    fn name(&self) -> &'static str;

    fn param_names(&self) -> &'static [&'static str];

    fn dim(&self) -> usize {
        self.param_names().len()
    }

    /// The parameter box Θ.
    fn bounds(&self) -> &[Bound];

    fn pdf(&self, theta: &[f64], x: f64) -> f64;

    fn sqrt_pdf(&self, theta: &[f64], x: f64) -> f64 {
        self.pdf(theta, x).sqrt()
    }

    /// Returns `s(x)` and writes `ds/dtheta` into `grad`.
    fn sqrt_pdf_grad(&self, theta: &[f64], x: f64, grad: &mut [f64]) -> f64;

    /// Returns `s(x)`, writes the gradient into `grad` and the Hessian into `hess`.
    fn sqrt_pdf_hessian(&self, theta: &[f64], x: f64, grad: &mut [f64], hess: &mut [f64]) -> f64;

    /// An interval holding all but a negligible fraction of the mass.
    fn effective_support(&self, theta: &[f64]) -> (f64, f64);

    /// Candidate starting points for optimization, computed from data.
    fn initial_guesses(&self, data: &[f64]) -> Vec<Vec<f64>>;

    /// Maximum likelihood estimate, the non-robust baseline.
    fn mle(&self, data: &[f64]) -> Result<Vec<f64>>;

    fn sample<R: Rng + ?Sized>(&self, theta: &[f64], rng: &mut R) -> f64
    where
        Self: Sized;

    /// The family as seen through `t`: if `X ~ f_theta` then
    /// `t(X) ~ g_{theta_to_unit(theta)}` where `g` is the returned family.
    fn on_unit_scale(&self, t: &SupportTransform) -> Self
    where
        Self: Sized;

    fn theta_to_unit(&self, theta: &[f64], t: &SupportTransform) -> Vec<f64>;

    fn theta_from_unit(&self, theta: &[f64], t: &SupportTransform) -> Vec<f64>;

    fn check_theta(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.dim() {
            return Err(Error::InvalidInput(format!(
                "{} expects {} parameters, got {}",
                self.name(),
                self.dim(),
                theta.len()
            )));
        }
        if theta.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite parameter {theta:?}")));
        }
        Ok(())
    }

    /// `f_theta` as a [`Density`].
    fn at(&self, theta: &[f64]) -> ParametricDensity<Self>
    where
        Self: Sized,
    {
        ParametricDensity {
            family: self.clone(),
            theta: theta.to_vec(),
        }
    }

    fn sqrt_pdf_grad_vec(&self, theta: &[f64], x: f64) -> (f64, DVector<f64>) {
        let mut g = vec![0.0; self.dim()];
        let s = self.sqrt_pdf_grad(theta, x, &mut g);
        (s, DVector::from_vec(g))
    }

    fn sqrt_pdf_hessian_mat(&self, theta: &[f64], x: f64) -> (f64, DVector<f64>, DMatrix<f64>) {
        let p = self.dim();
        let mut g = vec![0.0; p];
        let mut h = vec![0.0; p * p];
        let s = self.sqrt_pdf_hessian(theta, x, &mut g, &mut h);
        (s, DVector::from_vec(g), DMatrix::from_row_slice(p, p, &h))
    }
}

/// A member `f_theta` of a family, usable wherever a [`Density`] is expected.
#[derive(Debug, Clone)]
pub struct ParametricDensity<F> {
    pub family: F,
    pub theta: Vec<f64>,
}

impl<F: ParametricFamily> Density for ParametricDensity<F> {
    fn pdf(&self, x: f64) -> f64 {
        self.family.pdf(&self.theta, x)
    }

    fn support(&self) -> (f64, f64) {
        self.family.effective_support(&self.theta)
    }
}

const SUPPORT_HALF_WIDTH: f64 = 12.0;

fn mean_sd(data: &[f64]) -> Result<(f64, f64)> {
    if data.is_empty() {
        return Err(Error::InvalidInput("empty data".into()));
    }
    let n = data.len() as f64;
    let mean = data.iter().sum::<f64>() / n;
    let var = data.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    Ok((mean, var.sqrt()))
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

fn median_mad(data: &[f64]) -> (f64, f64) {
    let mut v = data.to_vec();
    v.sort_by(f64::total_cmp);
    let med = median(&v);
    let mut dev: Vec<f64> = v.iter().map(|x| (x - med).abs()).collect();
    dev.sort_by(f64::total_cmp);
    (med, 1.482_602_218_505_602 * median(&dev))
}

/// Normal location-scale family, `theta = (mu, sigma)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianFamily {
    bounds: [Bound; 2],
}

impl Default for GaussianFamily {
    fn default() -> Self {
        Self {
            bounds: [
                Bound::UNBOUNDED,
                Bound {
                    lo: 0.0,
                    hi: f64::INFINITY,
                },
            ],
        }
    }
}

impl GaussianFamily {
    pub fn new() -> Self {
        Self::default()
    }

    /// Restricts Θ to `mu in mu_bounds`, `sigma in sigma_bounds`.
    pub fn with_bounds(mu_bounds: Bound, sigma_bounds: Bound) -> Result<Self> {
        Bound::new(mu_bounds.lo, mu_bounds.hi)?;
        Bound::new(sigma_bounds.lo, sigma_bounds.hi)?;
        if sigma_bounds.lo < 0.0 {
            return Err(Error::InvalidConfig("sigma bounds must be non-negative".into()));
        }
        Ok(Self {
            bounds: [mu_bounds, sigma_bounds],
        })
    }
}

impl ParametricFamily for GaussianFamily {
    fn name(&self) -> &'static str {
        "gaussian"
    }

    fn param_names(&self) -> &'static [&'static str] {
        &["mu", "sigma"]
    }

    fn bounds(&self) -> &[Bound] {
        &self.bounds
    }

    fn pdf(&self, theta: &[f64], x: f64) -> f64 {
        let (mu, sigma) = (theta[0], theta[1]);
        if !(sigma > 0.0) {
            return f64::NAN;
        }
        let z = (x - mu) / sigma;
        (-0.5 * z * z).exp() / (sigma * (2.0 * PI).sqrt())
    }

    fn sqrt_pdf(&self, theta: &[f64], x: f64) -> f64 {
        let (mu, sigma) = (theta[0], theta[1]);
        if !(sigma > 0.0) {
            return f64::NAN;
        }
        let z = (x - mu) / sigma;
        (-0.25 * z * z).exp() / (2.0 * PI * sigma * sigma).powf(0.25)
    }

    fn sqrt_pdf_grad(&self, theta: &[f64], x: f64, grad: &mut [f64]) -> f64 {
        let sigma = theta[1];
        let s = self.sqrt_pdf(theta, x);
        let z = (x - theta[0]) / sigma;
        grad[0] = s * z / (2.0 * sigma);
        grad[1] = s * (z * z - 1.0) / (2.0 * sigma);
        s
    }

    fn sqrt_pdf_hessian(&self, theta: &[f64], x: f64, grad: &mut [f64], hess: &mut [f64]) -> f64 {
        let sigma = theta[1];
        let s = self.sqrt_pdf(theta, x);
        let z = (x - theta[0]) / sigma;
        // Derivatives of log s, then s'' = s (l' l'^T + l'').
        let l = [z / (2.0 * sigma), (z * z - 1.0) / (2.0 * sigma)];
        let s2 = sigma * sigma;
        let ll = [-1.0 / (2.0 * s2), -z / s2, -z / s2, (1.0 - 3.0 * z * z) / (2.0 * s2)];
        grad[0] = s * l[0];
        grad[1] = s * l[1];
        for i in 0..2 {
            for j in 0..2 {
                hess[2 * i + j] = s * (l[i] * l[j] + ll[2 * i + j]);
            }
        }
        s
    }

    fn effective_support(&self, theta: &[f64]) -> (f64, f64) {
        (theta[0] - SUPPORT_HALF_WIDTH * theta[1], theta[0] + SUPPORT_HALF_WIDTH * theta[1])
    }

    fn initial_guesses(&self, data: &[f64]) -> Vec<Vec<f64>> {
        let mut out = Vec::new();
        if let Ok((m, s)) = mean_sd(data) {
            if s > 0.0 {
                out.push(vec![m, s]);
            }
            let (med, mad) = median_mad(data);
            if mad > 0.0 {
                out.push(vec![med, mad]);
            }
        }
        out
    }

    fn mle(&self, data: &[f64]) -> Result<Vec<f64>> {
        let (m, s) = mean_sd(data)?;
        Ok(vec![m, s])
    }

    fn sample<R: Rng + ?Sized>(&self, theta: &[f64], rng: &mut R) -> f64 {
        let z: f64 = StandardNormal.sample(rng);
        theta[0] + theta[1] * z
    }

    fn on_unit_scale(&self, t: &SupportTransform) -> Self {
        let w = t.width();
        let [mu, sigma] = self.bounds;
        Self {
            bounds: [
                Bound {
                    lo: (mu.lo - t.a) / w,
                    hi: (mu.hi - t.a) / w,
                },
                Bound {
                    lo: sigma.lo / w,
                    hi: sigma.hi / w,
                },
            ],
        }
    }

    fn theta_to_unit(&self, theta: &[f64], t: &SupportTransform) -> Vec<f64> {
        vec![t.to_unit(theta[0]), theta[1] / t.width()]
    }

    fn theta_from_unit(&self, theta: &[f64], t: &SupportTransform) -> Vec<f64> {
        vec![t.from_unit(theta[0]), theta[1] * t.width()]
    }
}

/// Normal location family with known scale, `theta = (mu)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianLocationFamily {
    pub sigma: f64,
    bounds: [Bound; 1],
}

impl GaussianLocationFamily {
    pub fn new(sigma: f64) -> Result<Self> {
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::InvalidConfig(format!("known sigma {sigma} must be positive")));
        }
        Ok(Self {
            sigma,
            bounds: [Bound::UNBOUNDED],
        })
    }

    fn scale_family(&self) -> (GaussianFamily, f64) {
        (GaussianFamily::default(), self.sigma)
    }
}

impl ParametricFamily for GaussianLocationFamily {
    fn name(&self) -> &'static str {
        "gaussian-location"
    }

    fn param_names(&self) -> &'static [&'static str] {
        &["mu"]
    }

    fn bounds(&self) -> &[Bound] {
        &self.bounds
    }

    fn pdf(&self, theta: &[f64], x: f64) -> f64 {
        let (g, s) = self.scale_family();
        g.pdf(&[theta[0], s], x)
    }

    fn sqrt_pdf(&self, theta: &[f64], x: f64) -> f64 {
        let (g, s) = self.scale_family();
        g.sqrt_pdf(&[theta[0], s], x)
    }

    fn sqrt_pdf_grad(&self, theta: &[f64], x: f64, grad: &mut [f64]) -> f64 {
        let (g, s) = self.scale_family();
        let mut full = [0.0; 2];
        let v = g.sqrt_pdf_grad(&[theta[0], s], x, &mut full);
        grad[0] = full[0];
        v
    }

    fn sqrt_pdf_hessian(&self, theta: &[f64], x: f64, grad: &mut [f64], hess: &mut [f64]) -> f64 {
        let (g, s) = self.scale_family();
        let mut fg = [0.0; 2];
        let mut fh = [0.0; 4];
        let v = g.sqrt_pdf_hessian(&[theta[0], s], x, &mut fg, &mut fh);
        grad[0] = fg[0];
        hess[0] = fh[0];
        v
    }

    fn effective_support(&self, theta: &[f64]) -> (f64, f64) {
        (
            theta[0] - SUPPORT_HALF_WIDTH * self.sigma,
            theta[0] + SUPPORT_HALF_WIDTH * self.sigma,
        )
    }

    fn initial_guesses(&self, data: &[f64]) -> Vec<Vec<f64>> {
        let mut out = Vec::new();
        if let Ok((m, _)) = mean_sd(data) {
            out.push(vec![m]);
            out.push(vec![median_mad(data).0]);
        }
        out
    }

    fn mle(&self, data: &[f64]) -> Result<Vec<f64>> {
        Ok(vec![mean_sd(data)?.0])
    }

    fn sample<R: Rng + ?Sized>(&self, theta: &[f64], rng: &mut R) -> f64 {
        let z: f64 = StandardNormal.sample(rng);
        theta[0] + self.sigma * z
    }

    fn on_unit_scale(&self, t: &SupportTransform) -> Self {
        let w = t.width();
        Self {
            sigma: self.sigma / w,
            bounds: [Bound {
                lo: (self.bounds[0].lo - t.a) / w,
                hi: (self.bounds[0].hi - t.a) / w,
            }],
        }
    }

    fn theta_to_unit(&self, theta: &[f64], t: &SupportTransform) -> Vec<f64> {
        vec![t.to_unit(theta[0])]
    }

    fn theta_from_unit(&self, theta: &[f64], t: &SupportTransform) -> Vec<f64> {
        vec![t.from_unit(theta[0])]
    }
}
