//! Simulation studies: gross-error robustness, efficiency at the model,
//! the Bernstein-von Mises diagnostic and posterior consistency.

use std::collections::BTreeMap;
use std::io::Write;
use std::time::Instant;

use nalgebra::DVector;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::densities::{hellinger, Density, ParametricDensity, ParametricFamily};
use crate::error::{Error, Result};
use crate::estimators::{bmh_fit, mhb_fit, BmhPosterior, FitConfig};
use crate::mhd::{influence_function_at_model, l_norm_sq_vec};
use crate::numerics::{Integrator, RngSeed, Stream};
use crate::posterior::{fit_posterior, HistogramPrior};

/// Gross-error model `(1 - alpha) f_theta + alpha Uniform(z - epsilon, z + epsilon)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContaminationSpec {
    pub theta: Vec<f64>,
    pub alpha: f64,
    pub z: f64,
    pub epsilon: f64,
}

impl ContaminationSpec {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.alpha) {
            return Err(Error::InvalidConfig(format!("contamination fraction {} not in [0, 1)", self.alpha)));
        }
        if !(self.epsilon > 0.0) || !self.epsilon.is_finite() || !self.z.is_finite() {
            return Err(Error::InvalidConfig("blip half-width must be positive and z finite".into()));
        }
        Ok(())
    }

    /// Number of outliers in a sample of size `n`: exactly `ceil(alpha n)`.
    pub fn n_outliers(&self, n: usize) -> usize {
        ((self.alpha * n as f64) - 1e-9).ceil().max(0.0) as usize
    }
}

#[derive(Debug, Clone)]
pub struct ContaminatedDensity<F> {
    clean: ParametricDensity<F>,
    alpha: f64,
    z: f64,
    epsilon: f64,
}

pub fn contaminated_density<F: ParametricFamily>(spec: &ContaminationSpec, family: &F) -> Result<ContaminatedDensity<F>> {
    spec.validate()?;
    family.check_theta(&spec.theta)?;
    Ok(ContaminatedDensity {
        clean: family.at(&spec.theta),
        alpha: spec.alpha,
        z: spec.z,
        epsilon: spec.epsilon,
    })
}

impl<F: ParametricFamily> Density for ContaminatedDensity<F> {
    fn pdf(&self, x: f64) -> f64 {
        let blip = if (x - self.z).abs() < self.epsilon {
            0.5 / self.epsilon
        } else {
            0.0
        };
        (1.0 - self.alpha) * self.clean.pdf(x) + self.alpha * blip
    }

    fn support(&self) -> (f64, f64) {
        let (lo, hi) = self.clean.support();
        if self.alpha == 0.0 {
            return (lo, hi);
        }
        (lo.min(self.z - self.epsilon), hi.max(self.z + self.epsilon))
    }

    fn breakpoints(&self) -> Vec<f64> {
        let (lo, hi) = self.clean.support();
        let mut b = vec![self.z - self.epsilon, self.z + self.epsilon];
        // Keep the clean part resolved when the blip stretches the support.
        if self.alpha > 0.0 {
            let w = (hi - lo) / 64.0;
            b.extend((0..=64).map(|i| lo + i as f64 * w));
        }
        b
    }
}

/// A sample with `n - m` clean draws followed by `m = ceil(alpha n)`
/// uniform outliers. The clean draws come first from the same stream, so
/// two specs differing only in `z` share their clean part.
pub fn contaminated_sample<F: ParametricFamily, R: Rng + ?Sized>(spec: &ContaminationSpec, family: &F, n: usize, rng: &mut R) -> Vec<f64> {
    let m = spec.n_outliers(n);
    let mut out: Vec<f64> = (0..n - m).map(|_| family.sample(&spec.theta, rng)).collect();
    out.extend((0..m).map(|_| spec.z + spec.epsilon * (2.0 * rng.random::<f64>() - 1.0)));
    out
}

/// A pass/fail comparison against a declared band.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub lo: f64,
    pub hi: f64,
    pub pass: bool,
}

impl Check {
    pub fn within(name: impl Into<String>, value: f64, lo: f64, hi: f64) -> Self {
        Self {
            name: name.into(),
            value,
            lo,
            hi,
            pass: value >= lo && value <= hi,
        }
    }

    pub fn below(name: impl Into<String>, value: f64, hi: f64) -> Self {
        Self {
            name: name.into(),
            value,
            lo: f64::NEG_INFINITY,
            hi,
            pass: value < hi,
        }
    }

    pub fn above(name: impl Into<String>, value: f64, lo: f64) -> Self {
        Self {
            name: name.into(),
            value,
            lo,
            hi: f64::INFINITY,
            pass: value > lo,
        }
    }
}

/// One estimate of one parameter in one replicate of one grid cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateRow {
    pub cell: String,
    pub rep: usize,
    pub estimator: String,
    pub param: String,
    pub estimate: Option<f64>,
    pub truth: f64,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub cell: String,
    pub grid: BTreeMap<String, f64>,
    pub metrics: BTreeMap<String, f64>,
    pub n_failed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub study: String,
    pub seed: u64,
    pub config: serde_json::Value,
    pub cells: Vec<CellSummary>,
    pub checks: Vec<Check>,
    pub rows: Vec<ReplicateRow>,
    /// Excluded from reproducibility comparisons.
    pub wall_time_secs: f64,
}

impl StudyReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn cell(&self, name: &str) -> Option<&CellSummary> {
        self.cells.iter().find(|c| c.cell == name)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::InvalidInput(e.to_string()))
    }

    /// One CSV row per grid cell x replicate x estimator x parameter.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        for row in &self.rows {
            out.serialize(row).map_err(|e| Error::Io(e.to_string()))?;
        }
        out.flush()?;
        Ok(())
    }
}

fn median(v: &mut [f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

fn mean_var(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    (m, v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0))
}

/// A replicate's estimate, or the failure message.
type Outcome = std::result::Result<Vec<f64>, String>;

fn push_rows(rows: &mut Vec<ReplicateRow>, cell: &str, rep: usize, estimator: &str, names: &[&str], truth: &[f64], est: &Outcome) {
    for (j, name) in names.iter().enumerate() {
        rows.push(ReplicateRow {
            cell: cell.to_string(),
            rep,
            estimator: estimator.to_string(),
            param: name.to_string(),
            estimate: est.as_ref().ok().map(|t| t[j]),
            truth: truth[j],
            failure: est.as_ref().err().cloned(),
        });
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessConfig {
    pub theta: Vec<f64>,
    pub alpha: f64,
    /// Outlier locations in units of the clean scale, measured from the clean location.
    pub z_grid: Vec<f64>,
    pub n_grid: Vec<usize>,
    pub reps: usize,
    /// Blip half-width as a fraction of the clean scale.
    pub epsilon_frac: f64,
    /// Posterior draws per BMH fit; 0 skips BMH.
    pub bmh_samples: usize,
    pub seed: u64,
}

impl Default for RobustnessConfig {
    fn default() -> Self {
        Self {
            theta: vec![0.0, 1.0],
            alpha: 0.1,
            z_grid: vec![5.0, 20.0, 50.0],
            n_grid: vec![500, 2000],
            reps: 50,
            epsilon_frac: 0.01,
            bmh_samples: 100,
            seed: 2026,
        }
    }
}

/// Location-scale sweep of MHB, BMH and the MLE over `n_grid x z_grid`.
/// Assumes `theta = (location, scale, ...)`.
pub fn robustness_sweep<F: ParametricFamily>(
    config: &RobustnessConfig,
    family: &F,
    prior: &HistogramPrior,
    fit: &FitConfig,
) -> Result<StudyReport> {
    let start = Instant::now();
    if config.reps == 0 || config.z_grid.is_empty() || config.n_grid.is_empty() {
        return Err(Error::InvalidConfig(
            "robustness sweep needs reps, z values and sample sizes".into(),
        ));
    }
    if config.z_grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidConfig("z grid must be strictly increasing".into()));
    }
    family.check_theta(&config.theta)?;
    let (loc, scale) = (config.theta[0], config.theta[1]);
    let names = family.param_names();
    let seed = RngSeed(config.seed);

    let mut cells = Vec::new();
    let mut rows = Vec::new();
    let mut checks = Vec::new();
    for (ni, &n) in config.n_grid.iter().enumerate() {
        let mut med_mhb = Vec::new();
        for &z in &config.z_grid {
            let spec = ContaminationSpec {
                theta: config.theta.clone(),
                alpha: config.alpha,
                z: loc + z * scale,
                epsilon: config.epsilon_frac * scale,
            };
            spec.validate()?;
            let label = format!("n={n},z={z}");
            // Stream depends on (n, rep) only: common random numbers across z.
            let sims: Vec<_> = (0..config.reps)
                .into_par_iter()
                .map(|rep| {
                    let mut rng = seed.child(Stream::Simulation, ni as u64).stream(Stream::Simulation, rep as u64);
                    let data = contaminated_sample(&spec, family, n, &mut rng);
                    let mle = family.mle(&data).map_err(|e| e.to_string());
                    let mhb = mhb_fit(&data, prior, family, fit).map(|e| e.theta_hat).map_err(|e| e.to_string());
                    let bmh = (config.bmh_samples > 0).then(|| {
                        let s = seed.child(Stream::Posterior, ni as u64).child(Stream::Posterior, rep as u64);
                        bmh_fit(&data, prior, family, config.bmh_samples, s, fit)
                            .map(|p| p.eap)
                            .map_err(|e| e.to_string())
                    });
                    (mle, mhb, bmh)
                })
                .collect();
            let mut err = BTreeMap::<&str, Vec<f64>>::new();
            let mut n_failed = 0;
            for (rep, (mle, mhb, bmh)) in sims.iter().enumerate() {
                for (name, est) in [("mle", Some(mle)), ("mhb", Some(mhb)), ("bmh", bmh.as_ref())] {
                    let Some(est) = est else { continue };
                    push_rows(&mut rows, &label, rep, name, names, &config.theta, est);
                    match est {
                        Ok(t) => err.entry(name).or_default().push((t[0] - loc).abs()),
                        Err(_) => n_failed += 1,
                    }
                }
            }
            let mut metrics = BTreeMap::new();
            for (name, v) in err.iter_mut() {
                metrics.insert(format!("{name}_median_abs_loc_error"), median(v));
                metrics.insert(format!("{name}_mean_abs_loc_error"), v.iter().sum::<f64>() / v.len() as f64);
            }
            let m_mhb = metrics.get("mhb_median_abs_loc_error").copied().unwrap_or(f64::NAN);
            let m_mle = metrics.get("mle_median_abs_loc_error").copied().unwrap_or(f64::NAN);
            med_mhb.push(m_mhb);
            if config.alpha > 0.0 && z >= 50.0 {
                checks.push(Check::below(format!("{label}: MHB median |loc error|"), m_mhb, 0.05));
                let bias = config.alpha * z * scale;
                checks.push(Check::above(format!("{label}: MLE median |loc error|"), m_mle, 0.9 * bias));
            }
            if config.alpha > 0.0 && z == 20.0 {
                checks.push(Check::below(format!("{label}: MHB/MLE location error ratio"), m_mhb / m_mle, 0.2));
            }
            let mut grid = BTreeMap::new();
            grid.insert("n".to_string(), n as f64);
            grid.insert("z".to_string(), z);
            cells.push(CellSummary {
                cell: label,
                grid,
                metrics,
                n_failed,
            });
        }
        if config.alpha > 0.0 {
            if let (Some(first), Some(last)) = (med_mhb.first(), med_mhb.last()) {
                if med_mhb.len() > 1 {
                    // Passes when the largest-z error is strictly below the smallest-z error.
                    checks.push(Check::below(
                        format!(
                            "n={n}: MHB error at z={} minus error at z={}",
                            config.z_grid.last().unwrap(),
                            config.z_grid[0]
                        ),
                        last - first,
                        0.0,
                    ));
                }
            }
        }
    }
    Ok(StudyReport {
        study: "robustness".into(),
        seed: config.seed,
        config: serde_json::to_value(config).map_err(|e| Error::InvalidInput(e.to_string()))?,
        cells,
        checks,
        rows,
        wall_time_secs: start.elapsed().as_secs_f64(),
    })
}

/// Fewer replicates make the variance ratio too noisy to compare with 1.
pub const MIN_EFFICIENCY_REPS: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyConfig {
    pub theta0: Vec<f64>,
    pub n: usize,
    pub reps: usize,
    pub seed: u64,
}

impl Default for EfficiencyConfig {
    fn default() -> Self {
        Self {
            theta0: vec![0.0, 1.0],
            n: 2000,
            reps: 200,
            seed: 2026,
        }
    }
}

/// Empirical covariance of `sqrt(n) (theta_hat - theta0)` for MHB and the
/// MLE, against `I(theta0)^(-1)`.
pub fn efficiency_study<F: ParametricFamily>(
    config: &EfficiencyConfig,
    family: &F,
    prior: &HistogramPrior,
    fit: &FitConfig,
) -> Result<StudyReport> {
    let start = Instant::now();
    if config.reps < MIN_EFFICIENCY_REPS {
        return Err(Error::InvalidConfig(format!(
            "efficiency study needs at least {MIN_EFFICIENCY_REPS} replicates, got {}",
            config.reps
        )));
    }
    let info = crate::mhd::fisher_information(family, &config.theta0, &fit.mhd.integrator)?;
    let target = info.try_inverse().ok_or(Error::SingularCurvature {
        smallest_singular_value: 0.0,
    })?;
    let seed = RngSeed(config.seed);
    let theta0 = &config.theta0;
    let sims: Vec<(Outcome, Outcome)> = (0..config.reps)
        .into_par_iter()
        .map(|rep| {
            let mut rng = seed.stream(Stream::Simulation, rep as u64);
            let data: Vec<f64> = (0..config.n).map(|_| family.sample(theta0, &mut rng)).collect();
            let mhb = mhb_fit(&data, prior, family, fit).map(|e| e.theta_hat).map_err(|e| e.to_string());
            let mle = family.mle(&data).map_err(|e| e.to_string());
            (mhb, mle)
        })
        .collect();
    let names = family.param_names();
    let mut rows = Vec::new();
    let label = format!("n={}", config.n);
    for (rep, (mhb, mle)) in sims.iter().enumerate() {
        push_rows(&mut rows, &label, rep, "mhb", names, theta0, mhb);
        push_rows(&mut rows, &label, rep, "mle", names, theta0, mle);
    }
    let root_n = (config.n as f64).sqrt();
    let mut metrics = BTreeMap::new();
    let mut checks = Vec::new();
    let mut n_failed = 0;
    for (ei, est) in ["mhb", "mle"].iter().enumerate() {
        let ok: Vec<&Vec<f64>> = sims
            .iter()
            .filter_map(|s| if ei == 0 { s.0.as_ref().ok() } else { s.1.as_ref().ok() })
            .collect();
        n_failed += config.reps - ok.len();
        for (j, name) in names.iter().enumerate() {
            let scaled: Vec<f64> = ok.iter().map(|t| root_n * (t[j] - theta0[j])).collect();
            let (_, var) = mean_var(&scaled);
            let tj = target[(j, j)];
            metrics.insert(format!("{est}_var_sqrt_n_{name}"), var);
            metrics.insert(format!("target_var_sqrt_n_{name}"), tj);
            if *est == "mhb" {
                // Bands: ±15% for the first coordinate, ±16% for the rest
                // (0.42..0.58 around 0.5 for a Gaussian scale).
                let rel = if j == 0 { 0.15 } else { 0.16 };
                checks.push(Check::within(
                    format!("MHB var of sqrt(n)({name}_hat - {name}_0)"),
                    var,
                    (1.0 - rel) * tj,
                    (1.0 + rel) * tj,
                ));
            }
        }
    }
    let mut grid = BTreeMap::new();
    grid.insert("n".to_string(), config.n as f64);
    Ok(StudyReport {
        study: "efficiency".into(),
        seed: config.seed,
        config: serde_json::to_value(config).map_err(|e| Error::InvalidInput(e.to_string()))?,
        cells: vec![CellSummary {
            cell: label,
            grid,
            metrics,
            n_failed,
        }],
        checks,
        rows,
        wall_time_secs: start.elapsed().as_secs_f64(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BvmSummary {
    pub n: usize,
    pub theta_hat: Vec<f64>,
    /// Diagonal of `V = ‖T~‖²_L` at `f_theta_hat`.
    pub v_diag: Vec<f64>,
    pub post_sd: Vec<f64>,
    /// `post_sd / sqrt(V / n)` per coordinate.
    pub sd_ratio: Vec<f64>,
    /// KS statistic of `sqrt(n)(theta - EAP) / sqrt(V)` against N(0, 1); `None` when degenerate.
    pub ks: Option<Vec<f64>>,
    pub degenerate: bool,
}

/// Kolmogorov-Smirnov distance between the sample and the standard normal.
pub fn ks_statistic_normal(sample: &[f64]) -> f64 {
    let std = Normal::new(0.0, 1.0).expect("standard normal");
    let mut v = sample.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    v.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = std.cdf(x);
            ((i + 1) as f64 / n - f).max(f - i as f64 / n)
        })
        .fold(0.0, f64::max)
}

/// Compares a BMH posterior with the normal limit `N(EAP, V / n)`, `V`
/// evaluated at `theta_hat = EAP`.
pub fn bvm_from_posterior<F: ParametricFamily>(post: &BmhPosterior, family: &F, n: usize, integrator: &Integrator) -> Result<BvmSummary> {
    let theta_hat = post.eap.clone();
    let inf = influence_function_at_model(family, &theta_hat, integrator)?;
    let v = l_norm_sq_vec(
        |x| inf.value(x).unwrap_or_else(|| DVector::zeros(family.dim())),
        family.dim(),
        inf.base_point(),
        integrator,
    )?;
    let p = family.dim();
    let v_diag: Vec<f64> = (0..p).map(|j| v[(j, j)]).collect();
    if v_diag.iter().any(|x| !(*x > 0.0)) {
        return Err(Error::SingularCurvature {
            smallest_singular_value: v_diag.iter().copied().fold(f64::INFINITY, f64::min),
        });
    }
    let nf = n as f64;
    let sd_ratio: Vec<f64> = (0..p).map(|j| post.post_sd[j] / (v_diag[j] / nf).sqrt()).collect();
    let degenerate = (0..p).any(|j| post.post_sd[j] <= 1e-9 * (v_diag[j] / nf).sqrt());
    let ks = (!degenerate).then(|| {
        (0..p)
            .map(|j| {
                let z: Vec<f64> = post
                    .theta_samples
                    .iter()
                    .map(|t| nf.sqrt() * (t[j] - post.eap[j]) / v_diag[j].sqrt())
                    .collect();
                ks_statistic_normal(&z)
            })
            .collect()
    });
    Ok(BvmSummary {
        n,
        theta_hat,
        v_diag,
        post_sd: post.post_sd.clone(),
        sd_ratio,
        ks,
        degenerate,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BvmConfig {
    pub n_samples: usize,
    pub seed: u64,
}

/// BMH fit followed by [`bvm_from_posterior`], as a study report.
pub fn bvm_diagnostic<F: ParametricFamily>(
    data: &[f64],
    prior: &HistogramPrior,
    family: &F,
    config: &BvmConfig,
    fit: &FitConfig,
) -> Result<(StudyReport, BvmSummary)> {
    let start = Instant::now();
    let post = bmh_fit(data, prior, family, config.n_samples, RngSeed(config.seed), fit)?;
    let s = bvm_from_posterior(&post, family, data.len(), &fit.mhd.integrator)?;
    let names = family.param_names();
    let mut metrics = BTreeMap::new();
    let mut checks = Vec::new();
    for (j, name) in names.iter().enumerate() {
        metrics.insert(format!("sd_ratio_{name}"), s.sd_ratio[j]);
        metrics.insert(format!("post_sd_{name}"), s.post_sd[j]);
        metrics.insert(format!("v_{name}"), s.v_diag[j]);
        checks.push(Check::within(
            format!("posterior sd / sqrt(V/n) for {name}"),
            s.sd_ratio[j],
            0.9,
            1.1,
        ));
        if let Some(ks) = &s.ks {
            metrics.insert(format!("ks_{name}"), ks[j]);
            checks.push(Check::below(format!("KS statistic for {name}"), ks[j], 0.05));
        }
    }
    let mut rows = Vec::new();
    for (rep, t) in post.theta_samples.iter().enumerate() {
        push_rows(&mut rows, "posterior", rep, "bmh", names, &s.theta_hat, &Ok(t.clone()));
    }
    let mut grid = BTreeMap::new();
    grid.insert("n".to_string(), data.len() as f64);
    let report = StudyReport {
        study: "bvm".into(),
        seed: config.seed,
        config: serde_json::to_value(config).map_err(|e| Error::InvalidInput(e.to_string()))?,
        cells: vec![CellSummary {
            cell: "posterior".into(),
            grid,
            metrics,
            n_failed: post.diagnostics.n_failed,
        }],
        checks,
        rows,
        wall_time_secs: start.elapsed().as_secs_f64(),
    };
    Ok((report, s))
}

/// Average posterior Hellinger distance to `truth` (a density on [0, 1]) for
/// each sample size, over `reps` simulated datasets and `draws` posterior
/// draws per dataset. `simulate` must draw one observation from `truth`.
#[allow(clippy::too_many_arguments)]
pub fn posterior_consistency<D, S>(
    truth: &D,
    simulate: S,
    ns: &[usize],
    reps: usize,
    draws: usize,
    prior: &HistogramPrior,
    seed: RngSeed,
    integrator: &Integrator,
) -> Result<Vec<f64>>
where
    D: Density + Sync,
    S: Fn(&mut rand_chacha::ChaCha8Rng) -> f64 + Sync,
{
    ns.iter()
        .enumerate()
        .map(|(ni, &n)| {
            let per_rep: Result<Vec<f64>> = (0..reps)
                .into_par_iter()
                .map(|rep| {
                    let cell = seed.child(Stream::Simulation, ni as u64);
                    let mut rng = cell.stream(Stream::Simulation, rep as u64);
                    let data: Vec<f64> = (0..n).map(|_| simulate(&mut rng)).collect();
                    let post = fit_posterior(&data, prior)?;
                    let mut prng = cell.stream(Stream::Posterior, rep as u64);
                    let mut total = 0.0;
                    for _ in 0..draws {
                        let g = post.sample_density(&mut prng).density;
                        total += hellinger(&g, truth, (0.0, 1.0), integrator)?;
                    }
                    Ok(total / draws as f64)
                })
                .collect();
            let v = per_rep?;
            Ok(v.iter().sum::<f64>() / v.len() as f64)
        })
        .collect()
}

/// Number of adjacent pairs where the sequence fails to decrease.
pub fn count_inversions(v: &[f64]) -> usize {
    v.windows(2).filter(|w| !(w[1] < w[0])).count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::densities::GaussianFamily;
    use approx::assert_abs_diff_eq;

    fn spec(alpha: f64, z: f64) -> ContaminationSpec {
        ContaminationSpec {
            theta: vec![0.0, 1.0],
            alpha,
            z,
            epsilon: 0.01,
        }
    }

    #[test]
    fn uncontaminated_is_the_model() {
        let fam = GaussianFamily::new();
        let d = contaminated_density(&spec(0.0, 50.0), &fam).unwrap();
        for x in [-2.0, 0.0, 1.3, 50.0] {
            assert_eq!(d.pdf(x), fam.pdf(&[0.0, 1.0], x));
        }
    }

    #[test]
    fn mass_splits_between_regions() {
        let fam = GaussianFamily::new();
        let s = ContaminationSpec {
            theta: vec![0.0, 0.01],
            alpha: 0.5,
            z: 10.0,
            epsilon: 0.05,
        };
        let d = contaminated_density(&s, &fam).unwrap();
        let integ = Integrator::default();
        let left = integ.integrate_with_breaks(|x| d.pdf(x), -1.0, 1.0, &[]).unwrap();
        let right = integ.integrate_with_breaks(|x| d.pdf(x), 9.0, 11.0, &[9.95, 10.05]).unwrap();
        assert_abs_diff_eq!(left, 0.5, epsilon = 1e-8);
        assert_abs_diff_eq!(right, 0.5, epsilon = 1e-8);
    }

    #[test]
    fn contaminated_density_integrates_to_one() {
        let fam = GaussianFamily::new();
        let integ = Integrator::default();
        let mut rng = RngSeed(0).rng();
        for _ in 0..20 {
            let s = ContaminationSpec {
                theta: vec![rng.random_range(-3.0..3.0), rng.random_range(0.2..3.0)],
                alpha: rng.random_range(0.0..0.9),
                z: rng.random_range(-60.0..60.0),
                epsilon: rng.random_range(0.001..0.5),
            };
            let d = contaminated_density(&s, &fam).unwrap();
            let (lo, hi) = d.support();
            let mass = integ.integrate_with_breaks(|x| d.pdf(x), lo, hi, &d.breakpoints()).unwrap();
            assert_abs_diff_eq!(mass, 1.0, epsilon = 1e-8);
        }
    }

    #[test]
    fn invalid_specs() {
        assert!(spec(1.0, 5.0).validate().is_err());
        assert!(ContaminationSpec {
            epsilon: 0.0,
            ..spec(0.1, 5.0)
        }
        .validate()
        .is_err());
    }

    #[test]
    fn exact_outlier_count() {
        let fam = GaussianFamily::new();
        let s = spec(0.1, 50.0);
        assert_eq!(s.n_outliers(500), 50);
        assert_eq!(s.n_outliers(55), 6);
        assert_eq!(spec(0.0, 50.0).n_outliers(500), 0);
        let data = contaminated_sample(&s, &fam, 500, &mut RngSeed(1).rng());
        assert_eq!(data.iter().filter(|x| (**x - 50.0).abs() < 0.01).count(), 50);
    }

    #[test]
    fn mhd_rejects_far_blip_analytically() {
        // T at the contaminated density itself, the n -> infinity limit of MHB.
        let fam = GaussianFamily::new();
        let d = contaminated_density(&spec(0.1, 50.0), &fam).unwrap();
        let r = crate::mhd::mhd(&d, &fam, &[0.5, 1.5], &Default::default()).unwrap();
        assert!(r.theta_hat[0].abs() < 0.05, "{:?}", r.theta_hat);
        // The MLE limit is the mixture mean alpha * z.
        let data = contaminated_sample(&spec(0.1, 50.0), &fam, 20_000, &mut RngSeed(2).rng());
        assert_abs_diff_eq!(fam.mle(&data).unwrap()[0], 5.0, epsilon = 0.05);
    }

    #[test]
    fn ks_reference_values() {
        assert_abs_diff_eq!(ks_statistic_normal(&[0.0]), 0.5, epsilon = 1e-12);
        let n = 2001;
        let std = Normal::new(0.0, 1.0).unwrap();
        let grid: Vec<f64> = (1..=n).map(|i| std.inverse_cdf(i as f64 / (n + 1) as f64)).collect();
        assert!(ks_statistic_normal(&grid) < 1.0 / n as f64 + 1e-9);
        let shifted: Vec<f64> = grid.iter().map(|x| x + 1.0).collect();
        assert!(ks_statistic_normal(&shifted) > 0.35);
    }

    #[test]
    fn inversions() {
        assert_eq!(count_inversions(&[3.0, 2.0, 1.0]), 0);
        assert_eq!(count_inversions(&[3.0, 3.5, 1.0]), 1);
    }

    #[test]
    fn degenerate_posterior_is_flagged() {
        let post = BmhPosterior {
            theta_samples: vec![vec![0.0, 1.0]; 100],
            eap: vec![0.0, 1.0],
            post_sd: vec![0.0, 0.0],
            intervals: vec![],
            diagnostics: crate::estimators::BmhDiagnostics {
                n_failed: 0,
                n_audited: 0,
                audit_switches: 0,
                mean_h_min: 0.0,
                max_first_order_norm: 0.0,
            },
            transform: crate::densities::SupportTransform::identity(),
            warnings: vec![],
        };
        let s = bvm_from_posterior(&post, &GaussianFamily::new(), 100, &Integrator::default()).unwrap();
        assert!(s.degenerate);
        assert!(s.ks.is_none());
        assert_abs_diff_eq!(s.v_diag[0], 1.0, epsilon = 1e-6);
        assert_abs_diff_eq!(s.v_diag[1], 0.5, epsilon = 1e-6);
    }

    #[test]
    fn zero_alpha_sweep_matches_clean_runs() {
        let fam = GaussianFamily::new();
        let cfg = RobustnessConfig {
            alpha: 0.0,
            z_grid: vec![5.0, 50.0],
            n_grid: vec![100],
            reps: 3,
            bmh_samples: 0,
            ..RobustnessConfig::default()
        };
        let rep = robustness_sweep(&cfg, &fam, &HistogramPrior::default(), &FitConfig::default()).unwrap();
        let at = |z: &str| -> Vec<Option<f64>> { rep.rows.iter().filter(|r| r.cell.ends_with(z)).map(|r| r.estimate).collect() };
        assert_eq!(at("z=5"), at("z=50"));
        assert!(rep.checks.is_empty());
        let mut buf = Vec::new();
        rep.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1 + 2 * 3 * 2 * 2);
        assert!(text.starts_with("cell,rep,estimator,param,estimate,truth,failure"));
        let again = robustness_sweep(&cfg, &fam, &HistogramPrior::default(), &FitConfig::default()).unwrap();
        assert_eq!(
            StudyReport {
                wall_time_secs: 0.0,
                ..rep
            },
            StudyReport {
                wall_time_secs: 0.0,
                ..again
            }
        );
    }
}
