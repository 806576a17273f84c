//! Composite Gauss-Legendre quadrature.
//!
//! Rules are stored on the reference interval [0, 1]. Composite integration
//! splits [a, b] into panels, optionally forcing panel boundaries at a set of
//! breakpoints (histogram bin edges, mixture kinks) so that each panel sees a
//! smooth integrand.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A Gauss-Legendre rule on [0, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadratureRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    order: usize,
}

impl QuadratureRule {
    /// `order`-point Gauss-Legendre rule; exact for polynomials of degree
    /// up to `2 * order - 1`.
    pub fn gauss_legendre(order: usize) -> Result<Self> {
        if order == 0 {
            return Err(Error::InvalidConfig("quadrature order must be positive".into()));
        }
        let n = order;
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            // Tricomi initial guess, then Newton on P_n.
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            // x is the i-th largest root on [-1, 1]; map both symmetric roots.
            nodes[n - 1 - i] = 0.5 * (1.0 + x);
            nodes[i] = 0.5 * (1.0 - x);
            weights[n - 1 - i] = 0.5 * w;
            weights[i] = 0.5 * w;
        }
        Ok(Self { nodes, weights, order })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn order(&self) -> usize {
        self.order
    }
}

impl Default for QuadratureRule {
    fn default() -> Self {
        Self::gauss_legendre(8).expect("order 8 is valid")
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for j in 2..=n {
        let jf = j as f64;
        let p2 = ((2.0 * jf - 1.0) * x * p1 - (jf - 1.0) * p0) / jf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Composite Gauss-Legendre value of `f` over [a, b] with `panels` equal panels.
pub fn integrate<F>(f: F, a: f64, b: f64, rule: &QuadratureRule, panels: usize) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    Integrator::new(rule.clone(), panels).integrate(f, a, b)
}

/// A quadrature rule paired with a minimum panel count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Integrator {
    pub rule: QuadratureRule,
    pub panels: usize,
}

impl Default for Integrator {
    fn default() -> Self {
        Self {
            rule: QuadratureRule::default(),
            panels: 64,
        }
    }
}

impl Integrator {
    pub fn new(rule: QuadratureRule, panels: usize) -> Self {
        Self {
            rule,
            panels: panels.max(1),
        }
    }

    pub fn with_order(order: usize, panels: usize) -> Result<Self> {
        Ok(Self::new(QuadratureRule::gauss_legendre(order)?, panels))
    }

    /// Panel edges over [a, b]: a uniform grid merged with every breakpoint
    /// strictly inside the interval.
    pub fn panel_edges(&self, a: f64, b: f64, breakpoints: &[f64]) -> Result<Vec<f64>> {
        if !(a < b) || !a.is_finite() || !b.is_finite() {
            return Err(Error::InvalidInterval { a, b });
        }
        let width = b - a;
        let mut edges: Vec<f64> = (0..=self.panels).map(|i| a + width * i as f64 / self.panels as f64).collect();
        *edges.last_mut().unwrap() = b;
        edges.extend(breakpoints.iter().copied().filter(|&x| x > a && x < b));
        edges.sort_by(|x, y| x.partial_cmp(y).unwrap());
        let min_gap = 1e-14 * width.max(1.0);
        edges.dedup_by(|x, y| (*x - *y).abs() <= min_gap);
        Ok(edges)
    }

    /// Absolute nodes and weights of the composite rule.
    pub fn nodes(&self, a: f64, b: f64, breakpoints: &[f64]) -> Result<Vec<(f64, f64)>> {
        let edges = self.panel_edges(a, b, breakpoints)?;
        let mut out = Vec::with_capacity((edges.len() - 1) * self.rule.order);
        for w in edges.windows(2) {
            let (lo, hi) = (w[0], w[1]);
            let h = hi - lo;
            for (t, wt) in self.rule.nodes.iter().zip(&self.rule.weights) {
                out.push((lo + h * t, h * wt));
            }
        }
        Ok(out)
    }

    pub fn integrate<F>(&self, f: F, a: f64, b: f64) -> Result<f64>
    where
        F: FnMut(f64) -> f64,
    {
        self.integrate_with_breaks(f, a, b, &[])
    }

    pub fn integrate_with_breaks<F>(&self, mut f: F, a: f64, b: f64, breakpoints: &[f64]) -> Result<f64>
    where
        F: FnMut(f64) -> f64,
    {
        let mut total = 0.0;
        for (x, w) in self.nodes(a, b, breakpoints)? {
            let v = f(x);
            if !v.is_finite() {
                return Err(Error::NonFinite { x, value: v });
            }
            total += w * v;
        }
        Ok(total)
    }
}
