//! Exact random-histogram posterior.
//!
//! Conditionally on the bin count k, the histogram likelihood is multinomial
//! in the bin counts, so the Dirichlet prior on the weights is conjugate and
//! the marginal likelihood of each k is a ratio of multivariate Beta
//! functions. The posterior over k is therefore available in closed form and
//! no MCMC is needed.

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::densities::{bin_index, Density, HistogramDensity, HistogramMixture, SupportTransform};
use crate::error::{Error, Result};

/// Largest common grid used to represent a random-k EAP density as a single histogram.
pub const MAX_COMMON_GRID: usize = 10_000;

/// Prior on the bin count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum KPrior {
    Fixed {
        k: usize,
    },
    /// Poisson(lambda) truncated to `support`.
    Random {
        lambda: f64,
        support: KSupport,
    },
}

/// Candidate bin counts for the random-k prior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum KSupport {
    /// `{1, ..., floor(n / (log n)^2)}`.
    Auto,
    UpTo(usize),
    Set(Vec<usize>),
}

/// Dirichlet concentrations `alpha_{j,k}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scheme", rename_all = "snake_case")]
pub enum AlphaScheme {
    /// `alpha_{j,k} = c`.
    Constant { c: f64 },
    /// `alpha_{j,k} = c1 * k^(-a)`.
    Power { c1: f64, a: f64 },
    /// Explicit per-bin values; only valid with a fixed k of matching length.
    PerBin { alphas: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramPrior {
    pub k: KPrior,
    pub alpha: AlphaScheme,
}

impl HistogramPrior {
    pub const DEFAULT_K: usize = 100;
    pub const DEFAULT_ALPHA: f64 = 0.1;
    pub const DEFAULT_LAMBDA: f64 = 20.0;

    pub fn fixed(k: usize, c: f64) -> Self {
        Self {
            k: KPrior::Fixed { k },
            alpha: AlphaScheme::Constant { c },
        }
    }

    pub fn random(lambda: f64, c: f64) -> Self {
        Self {
            k: KPrior::Random {
                lambda,
                support: KSupport::Auto,
            },
            alpha: AlphaScheme::Constant { c },
        }
    }

    /// Dirac mass at `K_n = ceil(n^(1/2) (log n)^(-2))`.
    pub fn theory_fixed(n: usize, c: f64) -> Self {
        Self::fixed(theory_bin_count(n), c)
    }

    /// The bin counts carrying prior mass for sample size `n`.
    pub fn k_support(&self, n: usize) -> Result<Vec<usize>> {
        let ks = match &self.k {
            KPrior::Fixed { k } => vec![*k],
            KPrior::Random { support, .. } => match support {
                KSupport::Auto => (1..=auto_k_max(n)).collect(),
                KSupport::UpTo(m) => (1..=*m).collect(),
                KSupport::Set(v) => {
                    let mut v = v.clone();
                    v.sort_unstable();
                    v.dedup();
                    v
                }
            },
        };
        if ks.is_empty() {
            return Err(Error::InvalidConfig("empty bin-count support".into()));
        }
        if ks.contains(&0) {
            return Err(Error::InvalidConfig("bin count 0 in support".into()));
        }
        Ok(ks)
    }

    /// Unnormalized log prior mass of `k`.
    pub fn log_prior_k(&self, k: usize) -> f64 {
        match &self.k {
            KPrior::Fixed { .. } => 0.0,
            KPrior::Random { lambda, .. } => k as f64 * lambda.ln() - lambda - ln_gamma(k as f64 + 1.0),
        }
    }

    pub fn alphas(&self, k: usize) -> Result<Vec<f64>> {
        let v = match &self.alpha {
            AlphaScheme::Constant { c } => vec![*c; k],
            AlphaScheme::Power { c1, a } => vec![c1 * (k as f64).powf(-a); k],
            AlphaScheme::PerBin { alphas } => {
                if alphas.len() != k {
                    return Err(Error::InvalidConfig(format!("{} per-bin alphas given for k = {k}", alphas.len())));
                }
                alphas.clone()
            }
        };
        if v.iter().any(|a| !(*a > 0.0) || !a.is_finite()) {
            return Err(Error::InvalidConfig("Dirichlet concentrations must be positive and finite".into()));
        }
        Ok(v)
    }

    /// Constants `(c1, a, c2)` with `c1 k^(-a) <= alpha_{j,k} <= c2`.
    pub fn alpha_bounds(&self) -> (f64, f64, f64) {
        match &self.alpha {
            AlphaScheme::Constant { c } => (*c, 0.0, *c),
            AlphaScheme::Power { c1, a } => (*c1, *a, *c1),
            AlphaScheme::PerBin { alphas } => {
                let lo = alphas.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = alphas.iter().copied().fold(0.0, f64::max);
                (lo, 0.0, hi)
            }
        }
    }

    /// Checks the prior for sample size `n`. Hard violations are errors; the
    /// returned strings are warnings about asymptotic conditions that cannot
    /// be enforced at fixed `n`.
    pub fn validate(&self, n: usize) -> Result<Vec<String>> {
        let mut warnings = Vec::new();
        if let KPrior::Random { lambda, .. } = &self.k {
            if !(*lambda > 0.0) || !lambda.is_finite() {
                return Err(Error::InvalidConfig(format!("Poisson rate {lambda} must be positive")));
            }
            if matches!(self.alpha, AlphaScheme::PerBin { .. }) {
                return Err(Error::InvalidConfig("per-bin alphas require a fixed bin count".into()));
            }
        }
        if let AlphaScheme::Power { a, .. } = &self.alpha {
            if !(*a >= 0.0) {
                return Err(Error::InvalidConfig(format!("power exponent {a} must be non-negative")));
            }
        }
        let (c1, a, c2) = self.alpha_bounds();
        let mut max_total: f64 = 0.0;
        for k in self.k_support(n)? {
            let alphas = self.alphas(k)?;
            let lower = c1 * (k as f64).powf(-a);
            if alphas.iter().any(|&x| x < lower * (1.0 - 1e-12) || x > c2 * (1.0 + 1e-12)) {
                return Err(Error::InvalidConfig(format!("alphas for k = {k} violate c1 k^-a <= alpha <= c2")));
            }
            max_total = max_total.max(alphas.iter().sum());
        }
        let root_n = (n as f64).sqrt();
        if max_total > root_n {
            warnings.push(format!(
                "total prior concentration {max_total:.3} exceeds sqrt(n) = {root_n:.3}; the prior may dominate the data"
            ));
        }
        Ok(warnings)
    }
}

impl Default for HistogramPrior {
    fn default() -> Self {
        Self::fixed(Self::DEFAULT_K, Self::DEFAULT_ALPHA)
    }
}

/// `ceil(n^(1/2) (log n)^(-2))`, at least 1.
pub fn theory_bin_count(n: usize) -> usize {
    if n < 3 {
        return 1;
    }
    let nf = n as f64;
    ((nf.sqrt() / nf.ln().powi(2)).ceil() as usize).max(1)
}

fn auto_k_max(n: usize) -> usize {
    if n < 2 {
        return 1;
    }
    let nf = n as f64;
    ((nf / nf.ln().powi(2)).floor() as usize).max(1)
}

/// Counts of `data` (all in [0, 1]) in the k regular bins; 1.0 falls in the last bin.
pub fn bin_counts(data: &[f64], k: usize) -> Result<Vec<u64>> {
    if k == 0 {
        return Err(Error::InvalidHistogram("bin count must be positive".into()));
    }
    let mut counts = vec![0u64; k];
    for (index, &value) in data.iter().enumerate() {
        let j = bin_index(value, k).ok_or(Error::OutOfUnitInterval { index, value })?;
        counts[j] += 1;
    }
    Ok(counts)
}

fn ln_multi_beta(v: &[f64]) -> f64 {
    v.iter().map(|&x| ln_gamma(x)).sum::<f64>() - ln_gamma(v.iter().sum())
}

/// Posterior quantities for one bin count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KComponent {
    pub k: usize,
    pub log_prior: f64,
    pub log_marginal: f64,
    /// Normalized log posterior mass of this k.
    pub log_post: f64,
    pub counts: Vec<u64>,
    pub alpha_prior: Vec<f64>,
}

impl KComponent {
    /// Posterior Dirichlet parameters `alpha_{j,k} + n_{j,k}`.
    pub fn alpha_post(&self) -> Vec<f64> {
        self.alpha_prior.iter().zip(&self.counts).map(|(a, c)| a + *c as f64).collect()
    }

    /// Posterior mean of the weights.
    pub fn eap_weights(&self) -> Vec<f64> {
        let post = self.alpha_post();
        let total: f64 = post.iter().sum();
        post.into_iter().map(|a| a / total).collect()
    }

    fn compute_marginal(&mut self, n: usize) {
        let post = self.alpha_post();
        self.log_marginal = n as f64 * (self.k as f64).ln() + ln_multi_beta(&post) - ln_multi_beta(&self.alpha_prior);
    }
}

/// Exact posterior over `(k, weights)` given data on [0, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomHistogramPosterior {
    prior: HistogramPrior,
    n: usize,
    components: Vec<KComponent>,
    transform: SupportTransform,
}

/// Fits the posterior to `data`, which must already lie in [0, 1].
pub fn fit_posterior(data: &[f64], prior: &HistogramPrior) -> Result<RandomHistogramPosterior> {
    if data.is_empty() {
        return Err(Error::InvalidInput("posterior requires at least one observation".into()));
    }
    prior.validate(data.len())?;
    let mut components = Vec::new();
    for k in prior.k_support(data.len())? {
        components.push(KComponent {
            k,
            log_prior: prior.log_prior_k(k),
            log_marginal: 0.0,
            log_post: 0.0,
            counts: bin_counts(data, k)?,
            alpha_prior: prior.alphas(k)?,
        });
    }
    let mut post = RandomHistogramPosterior {
        prior: prior.clone(),
        n: data.len(),
        components,
        transform: SupportTransform::identity(),
    };
    post.renormalize();
    Ok(post)
}

impl RandomHistogramPosterior {
    fn renormalize(&mut self) {
        for c in &mut self.components {
            c.compute_marginal(self.n);
        }
        let logs: Vec<f64> = self.components.iter().map(|c| c.log_prior + c.log_marginal).collect();
        let m = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + logs.iter().map(|l| (l - m).exp()).sum::<f64>().ln();
        for (c, l) in self.components.iter_mut().zip(logs) {
            c.log_post = l - lse;
        }
    }

    /// Conjugate update with further observations in [0, 1].
    pub fn update(&self, more: &[f64]) -> Result<Self> {
        let mut next = self.clone();
        for c in &mut next.components {
            for (acc, add) in c.counts.iter_mut().zip(bin_counts(more, c.k)?) {
                *acc += add;
            }
        }
        next.n += more.len();
        next.renormalize();
        Ok(next)
    }

    /// Records the data-scale transform the posterior was fitted under.
    pub fn with_transform(mut self, t: SupportTransform) -> Self {
        self.transform = t;
        self
    }

    pub fn transform(&self) -> SupportTransform {
        self.transform
    }

    pub fn prior(&self) -> &HistogramPrior {
        &self.prior
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn components(&self) -> &[KComponent] {
        &self.components
    }

    pub fn k_support(&self) -> Vec<usize> {
        self.components.iter().map(|c| c.k).collect()
    }

    pub fn k_probabilities(&self) -> Vec<f64> {
        self.components.iter().map(|c| c.log_post.exp()).collect()
    }

    /// Draws `k` from its posterior, then weights from `Dirichlet(alpha + counts)`.
    pub fn sample_density<R: Rng + ?Sized>(&self, rng: &mut R) -> PosteriorDensitySample {
        let component = if self.components.len() == 1 {
            &self.components[0]
        } else {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut chosen = self.components.last().unwrap();
            for c in &self.components {
                acc += c.log_post.exp();
                if u < acc {
                    chosen = c;
                    break;
                }
            }
            chosen
        };
        let weights = sample_dirichlet(&component.alpha_post(), rng);
        PosteriorDensitySample {
            k: component.k,
            density: HistogramDensity::new(weights).expect("Dirichlet draw lies on the simplex"),
        }
    }

    /// Posterior mean density `g_n^*`.
    ///
    /// With a single k this is the histogram of posterior mean weights. With
    /// several k it is the k-mixture of those histograms, flattened onto the
    /// lcm grid when that grid has at most [`MAX_COMMON_GRID`] bins.
    pub fn eap_density(&self) -> EapDensity {
        let probs = self.k_probabilities();
        let active: Vec<(f64, &KComponent)> = probs.iter().copied().zip(&self.components).filter(|(p, _)| *p > 1e-15).collect();
        let total: f64 = active.iter().map(|(p, _)| p).sum();
        if active.len() == 1 {
            return EapDensity::Histogram(HistogramDensity::new(active[0].1.eap_weights()).expect("posterior mean weights"));
        }
        let mut grid = 1usize;
        for (_, c) in &active {
            grid = lcm(grid, c.k);
            if grid > MAX_COMMON_GRID {
                break;
            }
        }
        if grid <= MAX_COMMON_GRID {
            let mut w = vec![0.0; grid];
            for (p, c) in &active {
                let r = grid / c.k;
                for (j, wj) in c.eap_weights().iter().enumerate() {
                    for slot in &mut w[j * r..(j + 1) * r] {
                        *slot += p / total * wj / r as f64;
                    }
                }
            }
            EapDensity::Histogram(HistogramDensity::from_masses(w).expect("mixture of histograms"))
        } else {
            let comps = active
                .iter()
                .map(|(p, c)| (p / total, HistogramDensity::new(c.eap_weights()).expect("posterior mean weights")))
                .collect();
            EapDensity::Mixture(HistogramMixture::new(comps).expect("normalized mixture"))
        }
    }

    /// Serializable summary: support, log masses, Dirichlet parameters and transform.
    pub fn summary(&self) -> PosteriorSummary {
        PosteriorSummary {
            n: self.n,
            k_support: self.k_support(),
            log_post_k: self.components.iter().map(|c| c.log_post).collect(),
            dirichlet: self.components.iter().map(|c| c.alpha_post()).collect(),
            transform: self.transform,
            prior: self.prior.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSummary {
    pub n: usize,
    pub k_support: Vec<usize>,
    pub log_post_k: Vec<f64>,
    pub dirichlet: Vec<Vec<f64>>,
    pub transform: SupportTransform,
    pub prior: HistogramPrior,
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn lcm(a: usize, b: usize) -> usize {
    a / gcd(a, b) * b
}

/// Dirichlet draw through normalized Gamma variates. Shapes below one use
/// `Gamma(a) = Gamma(a + 1) * U^(1/a)` in log space so tiny shapes do not
/// underflow to an all-zero vector.
pub fn sample_dirichlet<R: Rng + ?Sized>(alpha: &[f64], rng: &mut R) -> Vec<f64> {
    let logs: Vec<f64> = alpha
        .iter()
        .map(|&a| {
            if a >= 1.0 {
                Gamma::new(a, 1.0).expect("positive shape").sample(rng).ln()
            } else {
                let g = Gamma::new(a + 1.0, 1.0).expect("positive shape").sample(rng);
                let u: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
                g.ln() + u.ln() / a
            }
        })
        .collect();
    let m = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut w: Vec<f64> = logs.iter().map(|l| (l - m).exp()).collect();
    let total: f64 = w.iter().sum();
    for x in &mut w {
        *x /= total;
    }
    w
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorDensitySample {
    pub k: usize,
    pub density: HistogramDensity,
}

/// The posterior mean density.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EapDensity {
    Histogram(HistogramDensity),
    Mixture(HistogramMixture),
}

impl Density for EapDensity {
    fn pdf(&self, x: f64) -> f64 {
        match self {
            EapDensity::Histogram(h) => h.pdf(x),
            EapDensity::Mixture(m) => m.pdf(x),
        }
    }

    fn support(&self) -> (f64, f64) {
        (0.0, 1.0)
    }

    fn breakpoints(&self) -> Vec<f64> {
        match self {
            EapDensity::Histogram(h) => h.breakpoints(),
            EapDensity::Mixture(m) => m.breakpoints(),
        }
    }
}

/// Radius `sqrt(k log n / n)` of the posterior concentration neighbourhoods.
pub fn concentration_radius(k: usize, n: f64) -> Result<f64> {
    if !(n >= 2.0) {
        return Err(Error::InvalidInput(format!("concentration radius needs n >= 2, got {n}")));
    }
    Ok((k as f64 * n.ln() / n).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::densities::{hellinger, project_to_histogram, GaussianFamily, ParametricFamily};
    use crate::numerics::{Integrator, RngSeed, Stream};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn counts_basic_and_boundary() {
        assert_eq!(bin_counts(&[0.1, 0.6], 2).unwrap(), vec![1, 1]);
        assert_eq!(bin_counts(&[1.0], 4).unwrap(), vec![0, 0, 0, 1]);
        assert_eq!(bin_counts(&[0.0], 4).unwrap(), vec![1, 0, 0, 0]);
        assert_eq!(
            bin_counts(&[0.2, 1.5], 4).unwrap_err(),
            Error::OutOfUnitInterval { index: 1, value: 1.5 }
        );
    }

    #[test]
    fn single_datum_single_bin() {
        let post = fit_posterior(&[0.3], &HistogramPrior::fixed(1, 1.0)).unwrap();
        assert_eq!(post.components()[0].alpha_post(), vec![2.0]);
        assert_abs_diff_eq!(post.k_probabilities()[0], 1.0);
        assert!(fit_posterior(&[], &HistogramPrior::fixed(1, 1.0)).is_err());
    }

    #[test]
    fn symmetric_pair() {
        let post = fit_posterior(&[0.25, 0.75], &HistogramPrior::fixed(2, 1.0)).unwrap();
        assert_eq!(post.components()[0].alpha_post(), vec![2.0, 2.0]);
        match post.eap_density() {
            EapDensity::Histogram(h) => assert_eq!(h.weights(), &[0.5, 0.5]),
            _ => panic!("fixed k gives a single histogram"),
        }
    }

    #[test]
    fn eap_weights_follow_counts() {
        let prior = HistogramPrior::fixed(2, 1.0);
        let post = fit_posterior(&[0.1; 8], &prior).unwrap();
        assert_eq!(post.components()[0].counts, vec![8, 0]);
        let w = post.components()[0].eap_weights();
        assert_abs_diff_eq!(w[0], 0.9, epsilon = 1e-15);
        assert_abs_diff_eq!(w[1], 0.1, epsilon = 1e-15);
        // Prior mean when the data carry no information about the split.
        let c = KComponent {
            k: 2,
            log_prior: 0.0,
            log_marginal: 0.0,
            log_post: 0.0,
            counts: vec![0, 0],
            alpha_prior: vec![1.0, 1.0],
        };
        assert_eq!(c.eap_weights(), vec![0.5, 0.5]);
    }

    #[test]
    fn random_k_odds_match_beta_ratio() {
        let lambda = 20.0;
        let prior = HistogramPrior {
            k: KPrior::Random {
                lambda,
                support: KSupport::Set(vec![1, 2]),
            },
            alpha: AlphaScheme::Constant { c: 1.0 },
        };
        let post = fit_posterior(&[0.1, 0.2, 0.3], &prior).unwrap();
        let odds = (post.components()[1].log_post - post.components()[0].log_post).exp();
        // p(2)/p(1) = lambda/2; B(4, 1) = Γ(4)Γ(1)/Γ(5) = 1/4; B(1, 1) = 1.
        let oracle = (lambda / 2.0) * 8.0 * (6.0 / 24.0) / 1.0;
        assert_abs_diff_eq!(odds, oracle, epsilon = 1e-10 * oracle);
        let total: f64 = post.k_probabilities().iter().sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn theory_preset_and_auto_support() {
        assert_eq!(theory_bin_count(10_000), 2);
        assert_eq!(theory_bin_count(1), 1);
        let prior = HistogramPrior::random(20.0, 1.0);
        assert_eq!(prior.k_support(400).unwrap().len(), 11);
        assert_eq!(prior.k_support(1).unwrap(), vec![1]);
    }

    #[test]
    fn validation() {
        assert!(HistogramPrior::fixed(3, 0.0).validate(10).is_err());
        assert!(HistogramPrior::random(-1.0, 1.0).validate(10).is_err());
        let per_bin = HistogramPrior {
            k: KPrior::Fixed { k: 3 },
            alpha: AlphaScheme::PerBin { alphas: vec![1.0, 2.0] },
        };
        assert!(per_bin.validate(10).is_err());
        let w = HistogramPrior::fixed(100, 1.0).validate(66).unwrap();
        assert_eq!(w.len(), 1, "sum alpha = 100 > sqrt(66)");
        assert!(HistogramPrior::fixed(100, 0.05).validate(66).unwrap().is_empty());
        let power = HistogramPrior {
            k: KPrior::Random {
                lambda: 5.0,
                support: KSupport::UpTo(30),
            },
            alpha: AlphaScheme::Power { c1: 2.0, a: 1.0 },
        };
        assert!(power.validate(50).unwrap().is_empty());
    }

    #[test]
    fn sampling_is_deterministic_and_concentrates() {
        let prior = HistogramPrior {
            k: KPrior::Fixed { k: 3 },
            alpha: AlphaScheme::PerBin {
                alphas: vec![1e6, 2e6, 1e6],
            },
        };
        let post = fit_posterior(&[0.5], &prior).unwrap();
        let mut rng = RngSeed(11).stream(Stream::Posterior, 0);
        let draws: Vec<_> = (0..200).map(|_| post.sample_density(&mut rng)).collect();
        let mean1 = draws.iter().map(|d| d.density.weights()[1]).sum::<f64>() / 200.0;
        let var1 = draws.iter().map(|d| (d.density.weights()[1] - mean1).powi(2)).sum::<f64>() / 199.0;
        assert!(var1 < 1e-3);
        assert_abs_diff_eq!(mean1, 0.5, epsilon = 1e-3);

        let mut r1 = RngSeed(5).stream(Stream::Posterior, 9);
        let mut r2 = RngSeed(5).stream(Stream::Posterior, 9);
        assert_eq!(post.sample_density(&mut r1), post.sample_density(&mut r2));
    }

    #[test]
    fn dirichlet_moments() {
        let mut rng = RngSeed(3).stream(Stream::Posterior, 0);
        let n = 100_000;
        let xs: Vec<f64> = (0..n).map(|_| sample_dirichlet(&[2.0, 2.0], &mut rng)[0]).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        // Beta(2, 2): mean 1/2, variance ab / ((a+b)^2 (a+b+1)) = 1/20.
        assert_abs_diff_eq!(mean, 0.5, epsilon = 0.005);
        assert_abs_diff_eq!(var, 0.05, epsilon = 0.002);
    }

    #[test]
    fn tiny_shapes_never_underflow() {
        let mut rng = RngSeed(1).stream(Stream::Posterior, 0);
        for _ in 0..1000 {
            let w = sample_dirichlet(&[1e-3; 50], &mut rng);
            let s: f64 = w.iter().sum();
            assert_abs_diff_eq!(s, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn eap_matches_monte_carlo_average() {
        let data: Vec<f64> = (0..40).map(|i| ((i * 37) % 100) as f64 / 100.0).collect();
        let prior = HistogramPrior {
            k: KPrior::Random {
                lambda: 4.0,
                support: KSupport::UpTo(6),
            },
            alpha: AlphaScheme::Constant { c: 0.5 },
        };
        let post = fit_posterior(&data, &prior).unwrap();
        let eap = post.eap_density();
        let grid = 60; // lcm(1..6)
        let mut rng = RngSeed(17).stream(Stream::Posterior, 0);
        let mut acc = vec![0.0; grid];
        let draws = 100_000;
        for _ in 0..draws {
            let d = post.sample_density(&mut rng).density;
            let fine = d.refine(grid).unwrap();
            for (a, w) in acc.iter_mut().zip(fine.weights()) {
                *a += w / draws as f64;
            }
        }
        let mc = HistogramDensity::from_masses(acc).unwrap();
        let EapDensity::Histogram(h) = eap else {
            panic!("lcm 60 fits the common grid")
        };
        assert!(h.l1_distance(&mc) < 0.01);
        let s: f64 = h.weights().iter().sum();
        assert_abs_diff_eq!(s, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn large_lcm_falls_back_to_mixture() {
        let prior = HistogramPrior {
            k: KPrior::Random {
                lambda: 100.0,
                support: KSupport::Set(vec![97, 101, 103]),
            },
            alpha: AlphaScheme::Constant { c: 1.0 },
        };
        let post = fit_posterior(&[0.2, 0.4, 0.9], &prior).unwrap();
        let eap = post.eap_density();
        assert!(matches!(eap, EapDensity::Mixture(_)));
        let integ = Integrator::default();
        let mass = integ.integrate_with_breaks(|x| eap.pdf(x), 0.0, 1.0, &eap.breakpoints()).unwrap();
        assert_abs_diff_eq!(mass, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn radius() {
        let e2 = 2f64.exp();
        assert_abs_diff_eq!(concentration_radius(1, e2).unwrap(), (2.0 / e2).sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(concentration_radius(100, 10_000.0).unwrap(), 0.30349, epsilon = 1e-5);
        assert!(concentration_radius(1, 1.0).is_err());
    }

    #[test]
    fn draws_concentrate_around_the_projection() {
        // Gaussian data mapped to [0, 1]; count draws outside A_{n,k}(M), M = 5.
        let fam = GaussianFamily::new();
        let mut rng = RngSeed(23).stream(Stream::Simulation, 0);
        let n = 2000;
        let raw: Vec<f64> = (0..n).map(|_| fam.sample(&[0.0, 1.0], &mut rng)).collect();
        let t = SupportTransform::from_data(&raw, 0.05).unwrap();
        let k = 20;
        let post = fit_posterior(&t.map_data(&raw), &HistogramPrior::fixed(k, 1.0)).unwrap();
        let integ = Integrator::default();
        let truth = TransformedUnit { t, fam: fam.clone() };
        let g0k = project_to_histogram(&truth, k, &integ).unwrap();
        let radius = concentration_radius(k, n as f64).unwrap();
        let draws = 500;
        let outside = (0..draws)
            .filter(|_| {
                let d = post.sample_density(&mut rng).density;
                hellinger(&d, &g0k, (0.0, 1.0), &integ).unwrap() > 5.0 * radius
            })
            .count();
        assert!((outside as f64) < 0.05 * draws as f64);
    }

    /// The N(0, 1) truth carried to [0, 1] and renormalized there.
    struct TransformedUnit {
        t: SupportTransform,
        fam: GaussianFamily,
    }

    impl Density for TransformedUnit {
        fn pdf(&self, u: f64) -> f64 {
            if !(0.0..=1.0).contains(&u) {
                return 0.0;
            }
            let th = self.fam.theta_to_unit(&[0.0, 1.0], &self.t);
            let cdf = |v: f64| 0.5 * statrs::function::erf::erfc(-(v - th[0]) / (th[1] * 2f64.sqrt()));
            self.fam.on_unit_scale(&self.t).pdf(&th, u) / (cdf(1.0) - cdf(0.0))
        }

        fn support(&self) -> (f64, f64) {
            (0.0, 1.0)
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn conjugacy_is_order_independent(
            data in proptest::collection::vec(0.0f64..=1.0, 1..40),
            extra in 0.0f64..=1.0,
            seed in 0u64..1000,
        ) {
            let prior = HistogramPrior {
                k: KPrior::Random { lambda: 3.0, support: KSupport::UpTo(8) },
                alpha: AlphaScheme::Constant { c: 0.7 },
            };
            let sequential = fit_posterior(&data, &prior).unwrap().update(&[extra]).unwrap();
            let mut all = data.clone();
            all.push(extra);
            let batch = fit_posterior(&all, &prior).unwrap();
            // Shuffle deterministically.
            let mut shuffled = all.clone();
            let len = shuffled.len();
            for i in 0..len {
                shuffled.swap(i, (seed as usize * 31 + i * 17) % len);
            }
            let permuted = fit_posterior(&shuffled, &prior).unwrap();
            prop_assert_eq!(&sequential, &batch);
            prop_assert_eq!(&batch, &permuted);
        }
    }
}
