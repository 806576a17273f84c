//! MHB (T applied to the posterior mean density) and BMH (T applied to
//! posterior density draws).

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::statistics::{Data, OrderStatistics};

use crate::densities::{Density, HistogramDensity, ParametricFamily, SupportTransform};
use crate::error::{Error, Result};
use crate::mhd::{mhd_prepared, MhdOptions, MhdResult, PreparedTarget};
use crate::numerics::{RngSeed, Stream};
use crate::posterior::{fit_posterior, HistogramPrior, RandomHistogramPosterior};

pub const MIN_BOOTSTRAP: usize = 50;
pub const MIN_POSTERIOR_SAMPLES: usize = 100;
/// Largest tolerated fraction of failed bootstrap refits.
pub const BOOTSTRAP_FAILURE_RATE: f64 = 0.10;
/// Largest tolerated fraction of failed per-draw optimizations in BMH.
pub const BMH_FAILURE_RATE: f64 = 0.05;

#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    /// Support padding as a fraction of the data range.
    pub padding: f64,
    pub mhd: MhdOptions,
    pub credible_levels: Vec<f64>,
    /// Posterior draws per warm-start chain in BMH.
    pub chunk_size: usize,
    /// Every `audit_every`-th BMH draw is also solved from a cold start.
    pub audit_every: usize,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            padding: SupportTransform::DEFAULT_PADDING,
            mhd: MhdOptions::default(),
            credible_levels: vec![0.9, 0.95],
            chunk_size: 50,
            audit_every: 20,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        self.mhd.optimizer.validate()?;
        if self.chunk_size == 0 || self.audit_every == 0 {
            return Err(Error::InvalidConfig("chunk_size and audit_every must be positive".into()));
        }
        if let Some(l) = self.credible_levels.iter().find(|l| !(**l > 0.0 && **l < 1.0)) {
            return Err(Error::InvalidConfig(format!("credible level {l} not in (0, 1)")));
        }
        Ok(())
    }
}

/// Everything downstream of the data: transform, unit-scale family and posterior.
#[derive(Debug, Clone)]
pub struct PreparedFit<F> {
    pub transform: SupportTransform,
    pub unit_family: F,
    pub posterior: RandomHistogramPosterior,
    /// Starting points on the unit scale.
    pub starts: Vec<Vec<f64>>,
    pub warnings: Vec<String>,
}

pub fn prepare<F: ParametricFamily>(data: &[f64], prior: &HistogramPrior, family: &F, config: &FitConfig) -> Result<PreparedFit<F>> {
    config.validate()?;
    let p = family.dim();
    if data.len() < p + 1 {
        return Err(Error::InvalidInput(format!(
            "need at least {} observations for {p} parameters",
            p + 1
        )));
    }
    // Sorting makes every downstream sum independent of the input order.
    let mut sorted = data.to_vec();
    sorted.sort_by(f64::total_cmp);
    let data = &sorted[..];
    let transform = SupportTransform::from_data(data, config.padding)?;
    let unit = transform.map_data(data);
    let warnings = prior.validate(data.len())?;
    let posterior = fit_posterior(&unit, prior)?.with_transform(transform);
    let unit_family = family.on_unit_scale(&transform);
    let starts: Vec<Vec<f64>> = family
        .initial_guesses(data)
        .iter()
        .map(|t| family.theta_to_unit(t, &transform))
        .collect();
    if starts.is_empty() {
        return Err(Error::DegenerateData);
    }
    Ok(PreparedFit {
        transform,
        unit_family,
        posterior,
        starts,
        warnings,
    })
}

/// Runs `mhd` from every start and keeps the best converged answer, or the
/// best unconverged one if none converged.
fn best_of_starts<F: ParametricFamily>(
    target: &PreparedTarget,
    family: &F,
    starts: &[Vec<f64>],
    options: &MhdOptions,
) -> Result<MhdResult> {
    let mut best: Option<MhdResult> = None;
    let mut last_err = None;
    for s in starts {
        match mhd_prepared(target, family, s, options) {
            Ok(r) => {
                let better = match &best {
                    None => true,
                    Some(b) => (r.converged, -r.h_min) > (b.converged, -b.h_min),
                };
                if better {
                    best = Some(r);
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    best.ok_or_else(|| last_err.unwrap_or(Error::OptimizerInit))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MhbEstimate {
    /// `T(g_n^*)` on the data scale.
    pub theta_hat: Vec<f64>,
    /// Bootstrap standard errors, when requested.
    pub se: Option<Vec<f64>>,
    pub n_boot: usize,
    pub n_boot_failed: usize,
    /// Optimizer output on the unit scale.
    pub mhd_meta: MhdResult,
    pub transform: SupportTransform,
    pub warnings: Vec<String>,
}

/// MHB point estimate: transform, exact posterior, EAP density, then `T`.
pub fn mhb_fit<F: ParametricFamily>(data: &[f64], prior: &HistogramPrior, family: &F, config: &FitConfig) -> Result<MhbEstimate> {
    let prep = prepare(data, prior, family, config)?;
    let eap = prep.posterior.eap_density();
    let target = PreparedTarget::new(&eap, &config.mhd.integrator)?;
    let r = best_of_starts(&target, &prep.unit_family, &prep.starts, &config.mhd)?;
    let theta_hat = family.theta_from_unit(&r.theta_hat, &prep.transform);
    if !r.converged {
        return Err(Error::NotConverged {
            theta: theta_hat,
            h_min: r.h_min,
        });
    }
    Ok(MhbEstimate {
        theta_hat,
        se: None,
        n_boot: 0,
        n_boot_failed: 0,
        mhd_meta: r,
        transform: prep.transform,
        warnings: prep.warnings,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapSummary {
    pub se: Vec<f64>,
    pub n_boot: usize,
    pub n_failed: usize,
    pub replicates: Vec<Vec<f64>>,
}

/// Nonparametric bootstrap of the whole MHB pipeline. Replicate `b` uses
/// its own stream, so results do not depend on the thread count.
pub fn mhb_bootstrap_se<F: ParametricFamily>(
    data: &[f64],
    prior: &HistogramPrior,
    family: &F,
    n_boot: usize,
    seed: RngSeed,
    config: &FitConfig,
) -> Result<BootstrapSummary> {
    if n_boot < MIN_BOOTSTRAP {
        return Err(Error::InvalidConfig(format!(
            "n_boot = {n_boot} is below the minimum {MIN_BOOTSTRAP}"
        )));
    }
    config.validate()?;
    let n = data.len();
    let fits: Vec<Option<Vec<f64>>> = (0..n_boot)
        .into_par_iter()
        .map(|b| {
            let mut rng = seed.stream(Stream::Bootstrap, b as u64);
            let resample: Vec<f64> = (0..n).map(|_| data[rng.random_range(0..n)]).collect();
            mhb_fit(&resample, prior, family, config).ok().map(|e| e.theta_hat)
        })
        .collect();
    let replicates: Vec<Vec<f64>> = fits.into_iter().flatten().collect();
    let n_failed = n_boot - replicates.len();
    let allowed = (BOOTSTRAP_FAILURE_RATE * n_boot as f64).floor() as usize;
    if n_failed > allowed || replicates.len() < 2 {
        return Err(Error::TooManyFailures {
            failed: n_failed,
            total: n_boot,
            allowed: BOOTSTRAP_FAILURE_RATE,
        });
    }
    let (_, sd) = mean_sd(&replicates, family.dim());
    Ok(BootstrapSummary {
        se: sd,
        n_boot,
        n_failed,
        replicates,
    })
}

/// [`mhb_fit`] followed by [`mhb_bootstrap_se`].
pub fn mhb_fit_with_se<F: ParametricFamily>(
    data: &[f64],
    prior: &HistogramPrior,
    family: &F,
    n_boot: usize,
    seed: RngSeed,
    config: &FitConfig,
) -> Result<MhbEstimate> {
    let mut est = mhb_fit(data, prior, family, config)?;
    let boot = mhb_bootstrap_se(data, prior, family, n_boot, seed, config)?;
    est.se = Some(boot.se);
    est.n_boot = n_boot;
    est.n_boot_failed = boot.n_failed;
    Ok(est)
}

fn mean_sd(rows: &[Vec<f64>], p: usize) -> (Vec<f64>, Vec<f64>) {
    let n = rows.len() as f64;
    let mean: Vec<f64> = (0..p).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n).collect();
    let sd = (0..p)
        .map(|j| (rows.iter().map(|r| (r[j] - mean[j]).powi(2)).sum::<f64>() / (n - 1.0)).sqrt())
        .collect();
    (mean, sd)
}

/// Source of posterior density draws on [0, 1].
pub trait PosteriorSampler: Sync {
    type Draw: Density;

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Self::Draw;
}

impl PosteriorSampler for RandomHistogramPosterior {
    type Draw = HistogramDensity;

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> HistogramDensity {
        self.sample_density(rng).density
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CredibleInterval {
    pub level: f64,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BmhDiagnostics {
    pub n_failed: usize,
    pub n_audited: usize,
    /// Audited draws where the cold start found a strictly better minimum.
    pub audit_switches: usize,
    pub mean_h_min: f64,
    pub max_first_order_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BmhPosterior {
    /// One data-scale parameter per successful posterior draw, in draw order.
    pub theta_samples: Vec<Vec<f64>>,
    pub eap: Vec<f64>,
    pub post_sd: Vec<f64>,
    pub intervals: Vec<CredibleInterval>,
    pub diagnostics: BmhDiagnostics,
    pub transform: SupportTransform,
    pub warnings: Vec<String>,
}

/// BMH posterior: draws densities from the exact posterior and maps each
/// through `T`.
pub fn bmh_fit<F: ParametricFamily>(
    data: &[f64],
    prior: &HistogramPrior,
    family: &F,
    n_samples: usize,
    seed: RngSeed,
    config: &FitConfig,
) -> Result<BmhPosterior> {
    let prep = prepare(data, prior, family, config)?;
    let eap = prep.posterior.eap_density();
    let target = PreparedTarget::new(&eap, &config.mhd.integrator)?;
    let start = best_of_starts(&target, &prep.unit_family, &prep.starts, &config.mhd)?;
    let mut post = bmh_from_sampler(
        &prep.posterior,
        family,
        &prep.unit_family,
        prep.transform,
        &start.theta_hat,
        n_samples,
        seed,
        config,
    )?;
    post.warnings = prep.warnings;
    Ok(post)
}

struct DrawResult {
    theta: Option<(Vec<f64>, MhdResult)>,
    audited: bool,
    switched: bool,
}

/// BMH against an arbitrary sampler. `start` is on the unit scale.
///
/// Draws are split into chunks of `config.chunk_size`; within a chunk each
/// optimization warm-starts at the previous draw's answer, and chunks run
/// in parallel. Draw `i` always uses stream `i`.
#[allow(clippy::too_many_arguments)]
pub fn bmh_from_sampler<S: PosteriorSampler, F: ParametricFamily>(
    sampler: &S,
    family: &F,
    unit_family: &F,
    transform: SupportTransform,
    start: &[f64],
    n_samples: usize,
    seed: RngSeed,
    config: &FitConfig,
) -> Result<BmhPosterior> {
    if n_samples < MIN_POSTERIOR_SAMPLES {
        return Err(Error::InvalidConfig(format!(
            "n_samples = {n_samples} is below the minimum {MIN_POSTERIOR_SAMPLES}"
        )));
    }
    config.validate()?;
    let mut warm = config.mhd.clone();
    warm.optimizer.restarts = 0;
    let chunks: Vec<(usize, usize)> = (0..n_samples)
        .step_by(config.chunk_size)
        .map(|lo| (lo, (lo + config.chunk_size).min(n_samples)))
        .collect();
    let results: Vec<Vec<DrawResult>> = chunks
        .par_iter()
        .map(|&(lo, hi)| {
            let mut prev = start.to_vec();
            let mut out = Vec::with_capacity(hi - lo);
            for i in lo..hi {
                let mut rng = seed.stream(Stream::Posterior, i as u64);
                let g = sampler.draw(&mut rng);
                let Ok(target) = PreparedTarget::new(&g, &config.mhd.integrator) else {
                    out.push(DrawResult {
                        theta: None,
                        audited: false,
                        switched: false,
                    });
                    continue;
                };
                let mut best = mhd_prepared(&target, unit_family, &prev, &warm).ok();
                let audited = i % config.audit_every == 0;
                let mut switched = false;
                if audited {
                    if let Ok(cold) = mhd_prepared(&target, unit_family, start, &config.mhd) {
                        let take = match &best {
                            None => true,
                            Some(b) => (!b.converged && cold.converged) || (cold.converged && cold.h_min < b.h_min - 1e-10),
                        };
                        if take {
                            switched = best.is_some();
                            best = Some(cold);
                        }
                    }
                }
                let theta = best.filter(|r| r.converged).map(|r| {
                    prev = r.theta_hat.clone();
                    (family.theta_from_unit(&r.theta_hat, &transform), r)
                });
                out.push(DrawResult { theta, audited, switched });
            }
            out
        })
        .collect();

    let draws: Vec<DrawResult> = results.into_iter().flatten().collect();
    let n_audited = draws.iter().filter(|d| d.audited).count();
    let audit_switches = draws.iter().filter(|d| d.switched).count();
    let ok: Vec<&(Vec<f64>, MhdResult)> = draws.iter().filter_map(|d| d.theta.as_ref()).collect();
    let n_failed = n_samples - ok.len();
    let allowed = (BMH_FAILURE_RATE * n_samples as f64).floor() as usize;
    if n_failed > allowed {
        return Err(Error::TooManyFailures {
            failed: n_failed,
            total: n_samples,
            allowed: BMH_FAILURE_RATE,
        });
    }
    let theta_samples: Vec<Vec<f64>> = ok.iter().map(|(t, _)| t.clone()).collect();
    let p = family.dim();
    let (eap, post_sd) = mean_sd(&theta_samples, p);
    let intervals = config
        .credible_levels
        .iter()
        .map(|&level| {
            let tail = 0.5 * (1.0 - level);
            let mut lower = Vec::with_capacity(p);
            let mut upper = Vec::with_capacity(p);
            for j in 0..p {
                let mut col = Data::new(theta_samples.iter().map(|t| t[j]).collect::<Vec<f64>>());
                lower.push(col.quantile(tail));
                upper.push(col.quantile(1.0 - tail));
            }
            CredibleInterval { level, lower, upper }
        })
        .collect();
    let diagnostics = BmhDiagnostics {
        n_failed,
        n_audited,
        audit_switches,
        mean_h_min: ok.iter().map(|(_, r)| r.h_min).sum::<f64>() / ok.len() as f64,
        max_first_order_norm: ok.iter().map(|(_, r)| r.first_order_norm).fold(0.0, f64::max),
    };
    Ok(BmhPosterior {
        theta_samples,
        eap,
        post_sd,
        intervals,
        diagnostics,
        transform,
        warnings: Vec::new(),
    })
}
