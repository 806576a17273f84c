//! Bounded Nelder-Mead with jittered restarts.
//!
//! Points outside the box evaluate to +inf, so the simplex never accepts an
//! infeasible vertex. Initial and restart points are clamped into the box.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::rng::{RngSeed, Stream};
use crate::error::{Error, Result};

/// Closed interval for one coordinate. Either end may be infinite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bound {
    pub lo: f64,
    pub hi: f64,
}

impl Bound {
    pub const UNBOUNDED: Bound = Bound {
        lo: f64::NEG_INFINITY,
        hi: f64::INFINITY,
    };

    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if lo.is_nan() || hi.is_nan() || !(lo < hi) {
            return Err(Error::InvalidConfig(format!("bound [{lo}, {hi}] is not well ordered")));
        }
        Ok(Self { lo, hi })
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }

    pub fn clamp(&self, x: f64) -> f64 {
        x.clamp(self.lo, self.hi)
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub max_iters: usize,
    pub tol_x: f64,
    pub tol_f: f64,
    pub restarts: usize,
    /// Seed for restart jitter.
    pub seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            max_iters: 2000,
            tol_x: 1e-9,
            tol_f: 1e-13,
            restarts: 3,
            seed: 0,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::InvalidConfig("max_iters must be positive".into()));
        }
        if !(self.tol_x > 0.0) || !(self.tol_f > 0.0) {
            return Err(Error::InvalidConfig("tol_x and tol_f must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Minimum {
    pub argmin: Vec<f64>,
    pub fmin: f64,
    pub converged: bool,
    pub n_evals: usize,
}

/// Minimize `objective` from `x0` inside `bounds`.
///
/// The first run starts at `x0`; each of `config.restarts` further runs starts
/// from a jittered copy of the incumbent. The best vertex over all runs is
/// returned, with `converged` taken from the run that produced it.
pub fn minimize<F>(mut objective: F, x0: &[f64], bounds: &[Bound], config: &OptimizerConfig) -> Result<Minimum>
where
    F: FnMut(&[f64]) -> f64,
{
    config.validate()?;
    if x0.is_empty() {
        return Err(Error::InvalidConfig("empty parameter vector".into()));
    }
    if bounds.len() != x0.len() {
        return Err(Error::InvalidConfig(format!(
            "{} bounds given for a {}-dimensional parameter",
            bounds.len(),
            x0.len()
        )));
    }
    for b in bounds {
        Bound::new(b.lo, b.hi)?;
    }

    let mut n_evals = 0usize;
    let mut eval = |x: &[f64]| -> f64 {
        n_evals += 1;
        if x.iter().zip(bounds).any(|(v, b)| !b.contains(*v)) {
            return f64::INFINITY;
        }
        let v = objective(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };

    let start: Vec<f64> = x0.iter().zip(bounds).map(|(v, b)| b.clamp(*v)).collect();
    let steps = initial_steps(&start, bounds);

    let mut best = nelder_mead(&mut eval, &start, &steps, bounds, config)?;
    let mut rng = RngSeed(config.seed).stream(Stream::Jitter, 0);
    for _ in 0..config.restarts {
        let jittered: Vec<f64> = best
            .0
            .iter()
            .zip(&steps)
            .zip(bounds)
            .map(|((x, s), b)| {
                let z: f64 = StandardNormal.sample(&mut rng);
                b.clamp(x + s * z)
            })
            .collect();
        // Restart steps shrink with the jitter so a converged incumbent is re-polished.
        let scale = 0.5 + rng.random::<f64>();
        let restart_steps: Vec<f64> = steps.iter().map(|s| s * scale).collect();
        match nelder_mead(&mut eval, &jittered, &restart_steps, bounds, config) {
            Ok(run) if run.1 < best.1 || (run.1 == best.1 && run.2 && !best.2) => best = run,
            _ => {}
        }
    }
    Ok(Minimum {
        argmin: best.0,
        fmin: best.1,
        converged: best.2,
        n_evals,
    })
}

fn initial_steps(x: &[f64], bounds: &[Bound]) -> Vec<f64> {
    x.iter()
        .zip(bounds)
        .map(|(v, b)| {
            let mut s = if *v != 0.0 { 0.05 * v.abs() } else { 2.5e-4 };
            if b.width().is_finite() {
                s = s.min(0.25 * b.width()).max(1e-6 * b.width());
            }
            s
        })
        .collect()
}

type Run = (Vec<f64>, f64, bool);

fn nelder_mead<F>(eval: &mut F, x0: &[f64], steps: &[f64], bounds: &[Bound], config: &OptimizerConfig) -> Result<Run>
where
    F: FnMut(&[f64]) -> f64,
{
    let n = x0.len();
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    simplex.push((x0.to_vec(), eval(x0)));
    for i in 0..n {
        let mut v = x0.to_vec();
        v[i] += steps[i];
        if !bounds[i].contains(v[i]) {
            v[i] = x0[i] - steps[i];
        }
        v[i] = bounds[i].clamp(v[i]);
        let fv = eval(&v);
        simplex.push((v, fv));
    }
    if simplex.iter().all(|(_, f)| !f.is_finite()) {
        return Err(Error::OptimizerInit);
    }

    let (alpha, gamma, rho, sigma) = (1.0, 2.0, 0.5, 0.5);
    let mut converged = false;
    for _ in 0..config.max_iters {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let diameter = simplex[1..]
            .iter()
            .flat_map(|(v, _)| v.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        let spread = simplex[n].1 - simplex[0].1;
        if diameter < config.tol_x && spread.is_finite() && spread.abs() < config.tol_f {
            converged = true;
            break;
        }

        let mut centroid = vec![0.0; n];
        for (v, _) in &simplex[..n] {
            for (c, x) in centroid.iter_mut().zip(v) {
                *c += x / n as f64;
            }
        }
        let worst = simplex[n].0.clone();
        let along = |t: f64| -> Vec<f64> { centroid.iter().zip(&worst).map(|(c, w)| c + t * (c - w)).collect() };

        let xr = along(alpha);
        let fr = eval(&xr);
        if fr < simplex[0].1 {
            let xe = along(gamma);
            let fe = eval(&xe);
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
            continue;
        }
        let (xc, fc) = if fr < simplex[n].1 {
            let xc = along(rho * alpha);
            let fc = eval(&xc);
            (xc, fc)
        } else {
            let xc = along(-rho);
            let fc = eval(&xc);
            (xc, fc)
        };
        if fc < simplex[n].1.min(fr) {
            simplex[n] = (xc, fc);
            continue;
        }
        let best = simplex[0].0.clone();
        for (v, fv) in simplex.iter_mut().skip(1) {
            for (x, b) in v.iter_mut().zip(&best) {
                *x = b + sigma * (*x - b);
            }
            *fv = eval(v);
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x, f) = simplex.swap_remove(0);
    Ok((x, f, converged))
}
