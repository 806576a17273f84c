//! The minimum Hellinger distance functional `T(g) = argmin_theta h(f_theta, g)`
//! and its first-order theory.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::densities::{Density, ParametricDensity, ParametricFamily};
use crate::error::{Error, Result};
use crate::numerics::{minimize, Integrator, OptimizerConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct MhdOptions {
    pub optimizer: OptimizerConfig,
    pub integrator: Integrator,
    /// Newton steps on the affinity after Nelder-Mead; 0 disables polishing.
    pub newton_iters: usize,
}

impl Default for MhdOptions {
    fn default() -> Self {
        Self {
            optimizer: OptimizerConfig::default(),
            integrator: Integrator::default(),
            newton_iters: 25,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MhdResult {
    pub theta_hat: Vec<f64>,
    /// `h(f_theta_hat, g)`, in `[0, √2]`.
    pub h_min: f64,
    pub converged: bool,
    pub n_evals: usize,
    /// `|∫ ds/dtheta g^(1/2)|` at `theta_hat`; zero at a smooth interior optimum.
    pub first_order_norm: f64,
}

/// Quadrature nodes for `g` with the weights premultiplied by `g^(1/2)`.
/// Nodes where `g` vanishes are dropped, so every affinity integral only
/// sees the region where `g` is positive.
#[derive(Debug, Clone)]
pub struct PreparedTarget {
    nodes: Vec<(f64, f64)>,
}

impl PreparedTarget {
    pub fn new<D: Density>(g: &D, integrator: &Integrator) -> Result<Self> {
        let (a, b) = g.support();
        let mut nodes = Vec::new();
        for (x, w) in integrator.nodes(a, b, &g.breakpoints())? {
            let v = g.pdf(x);
            if !v.is_finite() {
                return Err(Error::NonFinite { x, value: v });
            }
            if v < 0.0 {
                return Err(Error::NegativeDensity { density: "g", x, value: v });
            }
            if v > 0.0 {
                nodes.push((x, w * v.sqrt()));
            }
        }
        if nodes.is_empty() {
            return Err(Error::InvalidInput("target density vanishes on its support".into()));
        }
        Ok(Self { nodes })
    }

    /// `∫ f_theta^(1/2) g^(1/2)`.
    pub fn affinity<F: ParametricFamily>(&self, family: &F, theta: &[f64]) -> f64 {
        self.nodes.iter().map(|&(x, w)| w * family.sqrt_pdf(theta, x)).sum()
    }

    /// Affinity and its gradient in theta.
    pub fn affinity_grad<F: ParametricFamily>(&self, family: &F, theta: &[f64]) -> (f64, DVector<f64>) {
        let p = family.dim();
        let mut grad = vec![0.0; p];
        let mut total = DVector::zeros(p);
        let mut a = 0.0;
        for &(x, w) in &self.nodes {
            a += w * family.sqrt_pdf_grad(theta, x, &mut grad);
            for i in 0..p {
                total[i] += w * grad[i];
            }
        }
        (a, total)
    }

    /// Affinity, gradient and Hessian in theta.
    pub fn affinity_hessian<F: ParametricFamily>(&self, family: &F, theta: &[f64]) -> (f64, DVector<f64>, DMatrix<f64>) {
        let p = family.dim();
        let mut grad = vec![0.0; p];
        let mut hess = vec![0.0; p * p];
        let mut g_tot = DVector::zeros(p);
        let mut h_tot = DMatrix::zeros(p, p);
        let mut a = 0.0;
        for &(x, w) in &self.nodes {
            a += w * family.sqrt_pdf_hessian(theta, x, &mut grad, &mut hess);
            for i in 0..p {
                g_tot[i] += w * grad[i];
                for j in 0..p {
                    h_tot[(i, j)] += w * hess[p * i + j];
                }
            }
        }
        (a, g_tot, h_tot)
    }

    /// Squared Hellinger distance `2 - 2 * affinity`, or +inf for invalid theta.
    pub fn objective<F: ParametricFamily>(&self, family: &F, theta: &[f64]) -> f64 {
        let v = 2.0 - 2.0 * self.affinity(family, theta);
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    }
}

/// Computes `T(g)` starting from `x0`.
pub fn mhd<D: Density, F: ParametricFamily>(g: &D, family: &F, x0: &[f64], options: &MhdOptions) -> Result<MhdResult> {
    let target = PreparedTarget::new(g, &options.integrator)?;
    mhd_prepared(&target, family, x0, options)
}

/// [`mhd`] against an already prepared target.
pub fn mhd_prepared<F: ParametricFamily>(target: &PreparedTarget, family: &F, x0: &[f64], options: &MhdOptions) -> Result<MhdResult> {
    family.check_theta(x0)?;
    let bounds = family.bounds();
    let nm = minimize(|t| target.objective(family, t), x0, bounds, &options.optimizer)?;
    let mut theta = nm.argmin.clone();
    let mut n_evals = nm.n_evals;

    for _ in 0..options.newton_iters {
        let (a, grad, hess) = target.affinity_hessian(family, &theta);
        n_evals += 1;
        // Ascent on the affinity needs a negative definite Hessian.
        let Some(chol) = (-hess).cholesky() else { break };
        let step = chol.solve(&grad);
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let cand: Vec<f64> = theta.iter().zip(step.iter()).map(|(t, s)| t + lambda * s).collect();
            if bounds.iter().zip(&cand).all(|(b, c)| b.contains(*c)) {
                let ac = target.affinity(family, &cand);
                n_evals += 1;
                // Near the optimum the gain is below rounding; allow that much slack.
                if ac.is_finite() && ac >= a - 1e-14 {
                    theta = cand;
                    accepted = true;
                    break;
                }
            }
            lambda *= 0.5;
        }
        let scale = 1.0 + theta.iter().map(|t| t.abs()).fold(0.0, f64::max);
        if !accepted || lambda * step.norm() < 1e-14 * scale {
            break;
        }
    }

    let (a, grad) = target.affinity_grad(family, &theta);
    let first_order_norm = grad.norm();
    let interior = bounds.iter().zip(&theta).all(|(b, t)| {
        let tol = 1e-9 * (1.0 + t.abs());
        !(b.lo.is_finite() && *t - b.lo <= tol) && !(b.hi.is_finite() && b.hi - *t <= tol)
    });
    let h_min = (2.0 - 2.0 * a).max(0.0).sqrt().min(std::f64::consts::SQRT_2);
    if !h_min.is_finite() {
        return Err(Error::NonFinite { x: f64::NAN, value: a });
    }
    Ok(MhdResult {
        theta_hat: theta,
        h_min,
        converged: interior && (nm.converged || first_order_norm < 1e-8),
        n_evals,
        first_order_norm,
    })
}

/// The efficient influence function of `T` at `g0`,
/// `x -> A ds/dtheta(x) / (2 g0(x)^(1/2)) - c` with `A = -[∫ d2s/dtheta2 g0^(1/2)]^(-1)`
/// and `c` chosen so that it integrates to zero under `g0`.
#[derive(Debug, Clone)]
pub struct InfluenceFunction<F, D> {
    family: F,
    g0: D,
    theta: Vec<f64>,
    a: DMatrix<f64>,
    mean: DVector<f64>,
}

impl<F: ParametricFamily, D: Density> InfluenceFunction<F, D> {
    pub fn base_point(&self) -> &D {
        &self.g0
    }

    pub fn theta_at_base(&self) -> &[f64] {
        &self.theta
    }

    /// `-[∫ d2s/dtheta2 g0^(1/2)]^(-1)`.
    pub fn curvature_inverse(&self) -> &DMatrix<f64> {
        &self.a
    }

    /// `T~(x)`, or `None` where `g0(x) = 0`.
    pub fn value(&self, x: f64) -> Option<DVector<f64>> {
        let g = self.g0.pdf(x);
        if !(g > 0.0) {
            return None;
        }
        let (_, ds) = self.family.sqrt_pdf_grad_vec(&self.theta, x);
        Some(&self.a * ds / (2.0 * g.sqrt()) - &self.mean)
    }

    /// `‖T~‖²_L = ∫ T~ T~^T g0`, computed as `A (∫ ṡ ṡ^T / 4) A^T - c c^T`
    /// so that `g0^(1/2)` never appears in a denominator.
    pub fn variance(&self, integrator: &Integrator) -> Result<DMatrix<f64>> {
        let p = self.family.dim();
        let (lo, hi) = self.g0.support();
        let mut m = DMatrix::zeros(p, p);
        for (x, w) in integrator.nodes(lo, hi, &self.g0.breakpoints())? {
            if !(self.g0.pdf(x) > 0.0) {
                continue;
            }
            let (_, ds) = self.family.sqrt_pdf_grad_vec(&self.theta, x);
            m += w * 0.25 * &ds * ds.transpose();
        }
        check_matrix(&m)?;
        let v = &self.a * m * self.a.transpose() - &self.mean * self.mean.transpose();
        Ok(0.5 * (&v + v.transpose()))
    }
}

fn check_matrix(m: &DMatrix<f64>) -> Result<()> {
    match m.iter().find(|v| !v.is_finite()) {
        Some(v) => Err(Error::NonFinite { x: f64::NAN, value: *v }),
        None => Ok(()),
    }
}

fn invert_checked(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_matrix(m)?;
    let svd = m.clone().svd(false, false);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smin > 1e-12 * smax) {
        return Err(Error::SingularCurvature {
            smallest_singular_value: smin,
        });
    }
    m.clone().try_inverse().ok_or(Error::SingularCurvature {
        smallest_singular_value: smin,
    })
}

/// Influence function of `T` at an arbitrary density `g0`, with `theta0 = T(g0)`.
pub fn influence_function<F: ParametricFamily, D: Density>(
    g0: D,
    family: &F,
    theta0: &[f64],
    integrator: &Integrator,
) -> Result<InfluenceFunction<F, D>> {
    family.check_theta(theta0)?;
    let p = family.dim();
    let (lo, hi) = g0.support();
    let mut curv = DMatrix::zeros(p, p);
    let mut first = DVector::zeros(p);
    for (x, w) in integrator.nodes(lo, hi, &g0.breakpoints())? {
        let g = g0.pdf(x);
        if !(g > 0.0) {
            continue;
        }
        let (_, ds, d2s) = family.sqrt_pdf_hessian_mat(theta0, x);
        let r = w * g.sqrt();
        curv += r * d2s;
        first += r * ds;
    }
    if let Some(v) = first.iter().find(|v| !v.is_finite()) {
        return Err(Error::NonFinite { x: f64::NAN, value: *v });
    }
    let a = -invert_checked(&curv)?;
    let mean = &a * first / 2.0;
    Ok(InfluenceFunction {
        family: family.clone(),
        g0,
        theta: theta0.to_vec(),
        a,
        mean,
    })
}

/// Influence function at the model point `g0 = f_theta`, where it reduces to
/// `I(theta)^(-1)` times the score.
pub fn influence_function_at_model<F: ParametricFamily>(
    family: &F,
    theta: &[f64],
    integrator: &Integrator,
) -> Result<InfluenceFunction<F, ParametricDensity<F>>> {
    let info = fisher_information(family, theta, integrator)?;
    let a = 4.0 * invert_checked(&info)?;
    Ok(InfluenceFunction {
        family: family.clone(),
        g0: family.at(theta),
        theta: theta.to_vec(),
        a,
        mean: DVector::zeros(family.dim()),
    })
}

/// `I(theta) = 4 ∫ ṡ ṡ^T`.
pub fn fisher_information<F: ParametricFamily>(family: &F, theta: &[f64], integrator: &Integrator) -> Result<DMatrix<f64>> {
    family.check_theta(theta)?;
    let p = family.dim();
    let (lo, hi) = family.effective_support(theta);
    let mut info = DMatrix::zeros(p, p);
    for (x, w) in integrator.nodes(lo, hi, &[])? {
        let (_, ds) = family.sqrt_pdf_grad_vec(theta, x);
        info += 4.0 * w * &ds * ds.transpose();
    }
    check_matrix(&info)?;
    Ok(info)
}

/// `‖q‖²_L = ∫ (q - G0 q)(q - G0 q)^T g0` for vector-valued `q` of length `p`.
/// `q` is only evaluated where `g0 > 0`.
pub fn l_norm_sq_vec<D: Density, Q: Fn(f64) -> DVector<f64>>(q: Q, p: usize, g0: &D, integrator: &Integrator) -> Result<DMatrix<f64>> {
    let (lo, hi) = g0.support();
    let mut mean = DVector::zeros(p);
    let mut second = DMatrix::zeros(p, p);
    for (x, w) in integrator.nodes(lo, hi, &g0.breakpoints())? {
        let g = g0.pdf(x);
        if !(g > 0.0) {
            continue;
        }
        let v = q(x);
        if let Some(bad) = v.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite { x, value: *bad });
        }
        mean += w * g * &v;
        second += w * g * &v * v.transpose();
    }
    Ok(second - &mean * mean.transpose())
}

/// Scalar [`l_norm_sq_vec`].
pub fn l_norm_sq<D: Density, Q: Fn(f64) -> f64>(q: Q, g0: &D, integrator: &Integrator) -> Result<f64> {
    Ok(l_norm_sq_vec(|x| DVector::from_element(1, q(x)), 1, g0, integrator)?[(0, 0)])
}
