//! Run configuration: file format, command-line flags, and validation.

use std::path::PathBuf;

use bayes_mhd::densities::GaussianFamily;
use bayes_mhd::estimators::{FitConfig, MIN_BOOTSTRAP, MIN_POSTERIOR_SAMPLES};
use bayes_mhd::experiments::MIN_EFFICIENCY_REPS;
use bayes_mhd::numerics::Bound;
use bayes_mhd::posterior::{AlphaScheme, HistogramPrior, KPrior, KSupport};
use clap::{Args, ValueEnum};
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Fit,
    Robustness,
    Efficiency,
    Bvm,
    PosteriorDump,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Fit => "fit",
            Command::Robustness => "robustness",
            Command::Efficiency => "efficiency",
            Command::Bvm => "bvm",
            Command::PosteriorDump => "posterior-dump",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Estimator {
    Mhb,
    Bmh,
    Both,
}

impl Estimator {
    pub fn mhb(self) -> bool {
        matches!(self, Estimator::Mhb | Estimator::Both)
    }

    pub fn bmh(self) -> bool {
        matches!(self, Estimator::Bmh | Estimator::Both)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum PriorMode {
    Fixed,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum FamilyName {
    Gaussian,
}

/// Dirichlet concentrations per bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(tag = "scheme", rename_all = "snake_case", deny_unknown_fields)]
pub enum AlphaConfig {
    /// Every bin gets `c`.
    Constant { c: f64 },
    /// Bin concentration `c1 * k^(-a)`.
    Power { c1: f64, a: f64 },
    /// Explicit values; requires mode = fixed with matching k.
    PerBin { alphas: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct PriorConfig {
    pub mode: PriorMode,
    /// Bin count for mode = fixed.
    pub k: usize,
    /// Poisson rate on k for mode = random.
    pub lambda: f64,
    /// Largest k for mode = random; `None` uses floor(n / (ln n)^2).
    pub k_max: Option<usize>,
    pub alpha: AlphaConfig,
}

impl Default for PriorConfig {
    fn default() -> Self {
        Self {
            mode: PriorMode::Fixed,
            k: HistogramPrior::DEFAULT_K,
            lambda: HistogramPrior::DEFAULT_LAMBDA,
            k_max: None,
            alpha: AlphaConfig::Constant {
                c: HistogramPrior::DEFAULT_ALPHA,
            },
        }
    }
}

impl PriorConfig {
    pub fn to_prior(&self) -> HistogramPrior {
        let alpha = match &self.alpha {
            AlphaConfig::Constant { c } => AlphaScheme::Constant { c: *c },
            AlphaConfig::Power { c1, a } => AlphaScheme::Power { c1: *c1, a: *a },
            AlphaConfig::PerBin { alphas } => AlphaScheme::PerBin { alphas: alphas.clone() },
        };
        let k = match self.mode {
            PriorMode::Fixed => KPrior::Fixed { k: self.k },
            PriorMode::Random => KPrior::Random {
                lambda: self.lambda,
                support: self.k_max.map_or(KSupport::Auto, KSupport::UpTo),
            },
        };
        HistogramPrior { k, alpha }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct FamilyConfig {
    pub name: FamilyName,
    /// `[lo, hi]` for the location parameter.
    pub mu_bounds: Option<[f64; 2]>,
    /// `[lo, hi]` for the scale parameter.
    pub sigma_bounds: Option<[f64; 2]>,
}

impl Default for FamilyConfig {
    fn default() -> Self {
        Self {
            name: FamilyName::Gaussian,
            mu_bounds: None,
            sigma_bounds: None,
        }
    }
}

impl FamilyConfig {
    pub fn build(&self) -> Result<GaussianFamily, CliError> {
        match self.name {
            FamilyName::Gaussian => {
                if self.mu_bounds.is_none() && self.sigma_bounds.is_none() {
                    return Ok(GaussianFamily::new());
                }
                let mu = self.mu_bounds.map_or(Ok(Bound::UNBOUNDED), |[lo, hi]| Bound::new(lo, hi));
                let sigma = self.sigma_bounds.map_or(
                    Ok(Bound {
                        lo: 0.0,
                        hi: f64::INFINITY,
                    }),
                    |[lo, hi]| Bound::new(lo, hi),
                );
                Ok(GaussianFamily::with_bounds(mu?, sigma?)?)
            }
        }
    }
}

/// Settings for the simulation commands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct StudyConfig {
    /// True parameter of the simulated model.
    pub theta: Vec<f64>,
    /// Sample size for efficiency, and for bvm without --data.
    pub n: usize,
    /// Replicates; `None` means 50 for robustness and 200 for efficiency.
    pub reps: Option<usize>,
    pub n_grid: Vec<usize>,
    /// Outlier positions in units of the true scale.
    pub z_grid: Vec<f64>,
    /// Contaminating fraction.
    pub contamination: f64,
    pub epsilon_frac: f64,
    /// Posterior draws per BMH fit in the robustness sweep; 0 skips BMH.
    pub bmh_samples: usize,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            theta: vec![0.0, 1.0],
            n: 2000,
            reps: None,
            n_grid: vec![500, 2000],
            z_grid: vec![5.0, 20.0, 50.0],
            contamination: 0.1,
            epsilon_frac: 0.01,
            bmh_samples: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    /// Destination; standard output when absent.
    pub out: Option<PathBuf>,
    pub format: Format,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            out: None,
            format: Format::Json,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub command: Command,
    /// CSV path or `bundled:newcomb`.
    pub data: Option<String>,
    pub family: FamilyConfig,
    pub estimator: Estimator,
    pub prior: PriorConfig,
    pub seed: u64,
    /// BMH posterior draws.
    pub n_samples: usize,
    /// Bootstrap replicates for MHB standard errors; 0 skips the bootstrap.
    pub n_boot: usize,
    /// Support padding as a fraction of the data range.
    pub padding: f64,
    pub credible_levels: Vec<f64>,
    pub study: StudyConfig,
    pub output: OutputConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            command: Command::Fit,
            data: None,
            family: FamilyConfig::default(),
            estimator: Estimator::Both,
            prior: PriorConfig::default(),
            seed: 2026,
            n_samples: 2000,
            n_boot: 200,
            padding: 0.05,
            credible_levels: vec![0.9, 0.95],
            study: StudyConfig::default(),
            output: OutputConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Validation(format!("config: {e}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn schema() -> String {
        serde_json::to_string_pretty(&schemars::schema_for!(RunConfig)).expect("schema serializes")
    }

    /// Fills command-dependent defaults so the stored config is self-contained.
    pub fn resolve(mut self) -> Self {
        if self.study.reps.is_none() {
            self.study.reps = match self.command {
                Command::Robustness => Some(50),
                Command::Efficiency => Some(200),
                _ => None,
            };
        }
        self
    }

    pub fn fit_config(&self) -> FitConfig {
        FitConfig {
            padding: self.padding,
            credible_levels: self.credible_levels.clone(),
            ..FitConfig::default()
        }
    }

    /// Rejects anything that would fail later, before doing any work.
    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Validation(m));
        let uses_bmh = match self.command {
            Command::Fit => self.estimator.bmh(),
            Command::Bvm | Command::PosteriorDump => true,
            _ => false,
        };
        if matches!(self.command, Command::Fit | Command::PosteriorDump) && self.data.is_none() {
            return bad(format!("{} needs --data", self.command.name()));
        }
        if uses_bmh && self.n_samples < MIN_POSTERIOR_SAMPLES {
            return bad(format!("n_samples must be at least {MIN_POSTERIOR_SAMPLES}"));
        }
        if self.command == Command::Fit && self.estimator.mhb() && self.n_boot != 0 && self.n_boot < MIN_BOOTSTRAP {
            return bad(format!("n_boot must be 0 or at least {MIN_BOOTSTRAP}"));
        }
        if !(self.padding.is_finite() && self.padding >= 0.0) {
            return bad(format!("padding {} must be finite and non-negative", self.padding));
        }
        let p = &self.prior;
        if p.mode == PriorMode::Fixed && p.k == 0 {
            return bad("prior k must be positive".into());
        }
        if p.mode == PriorMode::Random && !(p.lambda.is_finite() && p.lambda > 0.0) {
            return bad(format!("prior lambda {} must be positive", p.lambda));
        }
        if p.k_max == Some(0) {
            return bad("prior k_max must be positive".into());
        }
        if let AlphaConfig::PerBin { alphas } = &p.alpha {
            if p.mode != PriorMode::Fixed || alphas.len() != p.k {
                return bad("per_bin alphas need mode = fixed and exactly k values".into());
            }
        }
        // Data size is unknown here; the fit re-validates with the real n.
        self.prior.to_prior().validate(1000)?;
        self.family.build()?;
        self.fit_config().validate()?;
        let s = &self.study;
        if s.theta.len() != 2 || !(s.theta[1] > 0.0) || !s.theta.iter().all(|t| t.is_finite()) {
            return bad("study.theta must be [mu, sigma] with sigma > 0".into());
        }
        match self.command {
            Command::Robustness => {
                if s.n_grid.is_empty() || s.n_grid.contains(&0) || s.z_grid.is_empty() {
                    return bad("robustness needs non-empty n_grid and z_grid".into());
                }
                if s.z_grid.windows(2).any(|w| !(w[0] < w[1])) {
                    return bad("z_grid must be strictly increasing".into());
                }
                if !(0.0..1.0).contains(&s.contamination) || !(s.epsilon_frac > 0.0) {
                    return bad("contamination must be in [0, 1) and epsilon_frac positive".into());
                }
                if s.bmh_samples != 0 && s.bmh_samples < MIN_POSTERIOR_SAMPLES {
                    return bad(format!("study.bmh_samples must be 0 or at least {MIN_POSTERIOR_SAMPLES}"));
                }
            }
            Command::Efficiency | Command::Bvm if s.n < 2 => return bad("study.n must be at least 2".into()),
            _ => {}
        }
        if self.command == Command::Robustness && s.reps.is_some_and(|r| r < 2) {
            return bad("study.reps must be at least 2".into());
        }
        if self.command == Command::Efficiency && s.reps.is_some_and(|r| r < MIN_EFFICIENCY_REPS) {
            return bad(format!("study.reps must be at least {MIN_EFFICIENCY_REPS} for efficiency"));
        }
        Ok(())
    }
}

/// Flags shared by every run command. Each one overrides the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// JSON run configuration; flags given alongside override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// CSV file (one value per line) or `bundled:newcomb`.
    #[arg(long)]
    pub data: Option<String>,
    #[arg(long, value_enum)]
    pub family: Option<FamilyName>,
    #[arg(long, value_enum)]
    pub estimator: Option<Estimator>,
    #[arg(long, value_enum)]
    pub prior_mode: Option<PriorMode>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Constant Dirichlet concentration per bin.
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub n_samples: Option<usize>,
    #[arg(long)]
    pub n_boot: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    #[arg(long)]
    pub padding: Option<f64>,
    /// Location bounds, e.g. `--mu-bounds=-10,10`.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub mu_bounds: Option<Vec<f64>>,
    /// Scale bounds, e.g. `--sigma-bounds 0.5,2`.
    #[arg(long, value_delimiter = ',')]
    pub sigma_bounds: Option<Vec<f64>>,
    /// Simulation sample size (efficiency, bvm without --data).
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub reps: Option<usize>,
    /// Print the resolved configuration and exit.
    #[arg(long)]
    pub print_config: bool,
}

impl RunArgs {
    /// Config file (if any), then flags, then command defaults.
    pub fn to_config(&self, command: Command) -> Result<RunConfig, CliError> {
        let mut c = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
                RunConfig::from_json(&text)?
            }
            None => RunConfig::default(),
        };
        c.command = command;
        if let Some(v) = &self.data {
            c.data = Some(v.clone());
        }
        if let Some(v) = self.family {
            c.family.name = v;
        }
        if let Some(v) = self.estimator {
            c.estimator = v;
        }
        if let Some(v) = self.prior_mode {
            c.prior.mode = v;
        }
        if let Some(v) = self.k {
            c.prior.k = v;
        }
        if let Some(v) = self.lambda {
            c.prior.lambda = v;
        }
        if let Some(v) = self.alpha {
            c.prior.alpha = AlphaConfig::Constant { c: v };
        }
        if let Some(v) = self.seed {
            c.seed = v;
        }
        if let Some(v) = self.n_samples {
            c.n_samples = v;
        }
        if let Some(v) = self.n_boot {
            c.n_boot = v;
        }
        if let Some(v) = &self.out {
            c.output.out = Some(v.clone());
        }
        if let Some(v) = self.format {
            c.output.format = v;
        }
        if let Some(v) = self.padding {
            c.padding = v;
        }
        if let Some(v) = &self.mu_bounds {
            c.family.mu_bounds = Some(pair("--mu-bounds", v)?);
        }
        if let Some(v) = &self.sigma_bounds {
            c.family.sigma_bounds = Some(pair("--sigma-bounds", v)?);
        }
        if let Some(v) = self.n {
            c.study.n = v;
        }
        if let Some(v) = self.reps {
            c.study.reps = Some(v);
        }
        let c = c.resolve();
        c.validate()?;
        Ok(c)
    }
}

fn pair(flag: &str, v: &[f64]) -> Result<[f64; 2], CliError> {
    match v {
        [lo, hi] => Ok([*lo, *hi]),
        _ => Err(CliError::Validation(format!("{flag} takes two values, LO,HI"))),
    }
}
