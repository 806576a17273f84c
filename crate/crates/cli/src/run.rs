//! Command dispatch.

use std::path::PathBuf;

use bayes_mhd::densities::{GaussianFamily, ParametricFamily};
use bayes_mhd::estimators::{bmh_fit, mhb_bootstrap_se, mhb_fit, BmhPosterior};
use bayes_mhd::experiments::{
    bvm_diagnostic, efficiency_study, robustness_sweep, BvmConfig, EfficiencyConfig, RobustnessConfig, StudyReport,
};
use bayes_mhd::io::{load_dataset, Dataset};
use bayes_mhd::numerics::{RngSeed, Stream};
use bayes_mhd::Error;
use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::config::{Command, Format, OutputConfig, RunConfig};
use crate::report::{to_csv, DatasetInfo, Report};
use crate::CliError;

pub struct RunOutput {
    pub report: Report,
    pub csv: String,
    pub wall_time_secs: f64,
}

impl RunOutput {
    pub fn exit_code(&self) -> i32 {
        if self.report.errors.is_empty() {
            0
        } else {
            2
        }
    }
}

/// Runs a validated configuration. Numerical failures inside `fit` are
/// recorded in the report (exit code 2); all other failures are returned.
pub fn run(config: &RunConfig) -> Result<RunOutput, CliError> {
    config.validate()?;
    let start = std::time::Instant::now();
    let family = config.family.build()?;
    let (mut report, csv) = match config.command {
        Command::Fit => fit(config, &family)?,
        Command::PosteriorDump => posterior_dump(config, &family)?,
        Command::Robustness => robustness(config, &family)?,
        Command::Efficiency => efficiency(config, &family)?,
        Command::Bvm => bvm(config, &family)?,
    };
    report.warnings.sort();
    report.warnings.dedup();
    if !report.errors.is_empty() {
        report.status = "numerical_failure".into();
    }
    Ok(RunOutput {
        report,
        csv,
        wall_time_secs: start.elapsed().as_secs_f64(),
    })
}

/// Writes the report and/or CSV as `output` asks. With `--format csv` and
/// an output path, the JSON report goes next to it with a `.json` extension.
pub fn emit(out: &RunOutput, output: &OutputConfig) -> Result<Vec<PathBuf>, CliError> {
    let write = |p: &PathBuf, s: &str| std::fs::write(p, s).map_err(|e| CliError::Output(format!("{}: {e}", p.display())));
    match (output.format, &output.out) {
        (Format::Json, Some(p)) => {
            write(p, &out.report.to_json())?;
            Ok(vec![p.clone()])
        }
        (Format::Csv, Some(p)) => {
            let json_path = p.with_extension("json");
            if &json_path == p {
                return Err(CliError::Output(format!("{}: CSV output needs a non-.json path", p.display())));
            }
            write(p, &out.csv)?;
            write(&json_path, &out.report.to_json())?;
            Ok(vec![p.clone(), json_path])
        }
        (Format::Json, None) => {
            print!("{}", out.report.to_json());
            Ok(Vec::new())
        }
        (Format::Csv, None) => {
            print!("{}", out.csv);
            Ok(Vec::new())
        }
    }
}

fn dataset(config: &RunConfig) -> Result<Dataset, CliError> {
    let source = config
        .data
        .as_deref()
        .ok_or_else(|| CliError::Validation("--data is required".into()))?;
    Ok(load_dataset(source)?)
}

fn info(d: &Dataset) -> DatasetInfo {
    DatasetInfo {
        name: d.name.clone(),
        source: d.source.clone(),
        n: d.values.len(),
    }
}

fn named(names: &[&str], v: &[f64]) -> Value {
    Value::Object(names.iter().zip(v).map(|(n, x)| (n.to_string(), json!(x))).collect())
}

#[derive(Serialize)]
struct EstimateRow<'a> {
    estimator: &'a str,
    quantity: String,
    param: &'a str,
    value: f64,
}

fn push_rows<'a>(rows: &mut Vec<EstimateRow<'a>>, estimator: &'a str, quantity: &str, names: &[&'a str], v: &[f64]) {
    for (param, value) in names.iter().zip(v) {
        rows.push(EstimateRow {
            estimator,
            quantity: quantity.to_string(),
            param,
            value: *value,
        });
    }
}

fn bmh_json(post: &BmhPosterior, names: &[&str]) -> Value {
    let intervals: Vec<Value> = post
        .intervals
        .iter()
        .map(|ci| json!({"level": ci.level, "lower": named(names, &ci.lower), "upper": named(names, &ci.upper)}))
        .collect();
    json!({
        "eap": named(names, &post.eap),
        "post_sd": named(names, &post.post_sd),
        "intervals": intervals,
        "n_draws": post.theta_samples.len(),
        "diagnostics": post.diagnostics,
        "transform": post.transform,
    })
}

fn fit(config: &RunConfig, family: &GaussianFamily) -> Result<(Report, String), CliError> {
    let data = dataset(config)?;
    let prior = config.prior.to_prior();
    let fc = config.fit_config();
    let names = family.param_names();
    let seed = RngSeed(config.seed);
    let mut result = Map::new();
    let mut errors = Vec::new();
    let mut warnings = Vec::new();
    let mut rows = Vec::new();

    // Validation problems surface as errors; numerical ones are recorded.
    let record = |e: Error, what: &str, errors: &mut Vec<String>| -> Result<(), CliError> {
        match CliError::from(e) {
            CliError::Numerical(e) => {
                errors.push(format!("{what}: {e}"));
                Ok(())
            }
            other => Err(other),
        }
    };

    if config.estimator.mhb() {
        match mhb_fit(&data.values, &prior, family, &fc) {
            Ok(est) => {
                warnings.extend(est.warnings.iter().cloned());
                push_rows(&mut rows, "mhb", "estimate", names, &est.theta_hat);
                let mut m = json!({
                    "converged": true,
                    "theta_hat": named(names, &est.theta_hat),
                    "h_min": est.mhd_meta.h_min,
                    "first_order_norm": est.mhd_meta.first_order_norm,
                    "se": Value::Null,
                    "n_boot": 0,
                    "n_boot_failed": 0,
                    "transform": est.transform,
                });
                if config.n_boot > 0 {
                    match mhb_bootstrap_se(&data.values, &prior, family, config.n_boot, seed, &fc) {
                        Ok(b) => {
                            push_rows(&mut rows, "mhb", "se", names, &b.se);
                            m["se"] = named(names, &b.se);
                            m["n_boot"] = json!(b.n_boot);
                            m["n_boot_failed"] = json!(b.n_failed);
                        }
                        Err(e) => record(e, "mhb bootstrap", &mut errors)?,
                    }
                }
                result.insert("mhb".into(), m);
            }
            Err(Error::NotConverged { theta, h_min }) => {
                errors.push(format!("mhb: optimizer did not converge (h = {h_min})"));
                result.insert(
                    "mhb".into(),
                    json!({"converged": false, "theta_hat": named(names, &theta), "h_min": h_min}),
                );
            }
            Err(e) => record(e, "mhb", &mut errors)?,
        }
    }
    if config.estimator.bmh() {
        match bmh_fit(&data.values, &prior, family, config.n_samples, seed, &fc) {
            Ok(post) => {
                warnings.extend(post.warnings.iter().cloned());
                push_rows(&mut rows, "bmh", "eap", names, &post.eap);
                push_rows(&mut rows, "bmh", "post_sd", names, &post.post_sd);
                for ci in &post.intervals {
                    push_rows(&mut rows, "bmh", &format!("lower_{}", ci.level), names, &ci.lower);
                    push_rows(&mut rows, "bmh", &format!("upper_{}", ci.level), names, &ci.upper);
                }
                let mut m = bmh_json(&post, names);
                m["converged"] = json!(true);
                result.insert("bmh".into(), m);
            }
            Err(e) => {
                result.insert("bmh".into(), json!({"converged": false}));
                record(e, "bmh", &mut errors)?
            }
        }
    }
    let mut report = Report::new(config, Some(info(&data)), Value::Object(result));
    report.errors = errors;
    report.warnings = warnings;
    let csv = to_csv(&rows).map_err(|e| CliError::Output(e.to_string()))?;
    Ok((report, csv))
}

fn samples_csv(names: &[&str], samples: &[Vec<f64>]) -> Result<String, CliError> {
    let err = |e: csv::Error| CliError::Output(e.to_string());
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["draw".to_string()];
    header.extend(names.iter().map(|s| s.to_string()));
    w.write_record(&header).map_err(err)?;
    for (i, t) in samples.iter().enumerate() {
        let mut rec = vec![i.to_string()];
        rec.extend(t.iter().map(|x| x.to_string()));
        w.write_record(&rec).map_err(err)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Output(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn posterior_dump(config: &RunConfig, family: &GaussianFamily) -> Result<(Report, String), CliError> {
    let data = dataset(config)?;
    let names = family.param_names();
    let post = bmh_fit(
        &data.values,
        &config.prior.to_prior(),
        family,
        config.n_samples,
        RngSeed(config.seed),
        &config.fit_config(),
    )?;
    let mut m = bmh_json(&post, names);
    m["samples"] = json!(post.theta_samples);
    let mut report = Report::new(config, Some(info(&data)), m);
    report.warnings = post.warnings.clone();
    Ok((report, samples_csv(names, &post.theta_samples)?))
}

fn study_outputs(
    config: &RunConfig,
    dataset: Option<DatasetInfo>,
    study: &StudyReport,
    extra: Option<Value>,
) -> Result<(Report, String), CliError> {
    let mut v = serde_json::to_value(study).map_err(|e| CliError::Output(e.to_string()))?;
    // Wall time would make otherwise identical reports differ.
    if let Some(m) = v.as_object_mut() {
        m.remove("wall_time_secs");
        m.insert("all_pass".into(), json!(study.all_pass()));
        if let Some(x) = extra {
            m.insert("summary".into(), x);
        }
    }
    let mut buf = Vec::new();
    study.write_csv(&mut buf)?;
    let csv = String::from_utf8(buf).expect("csv output is utf-8");
    Ok((Report::new(config, dataset, v), csv))
}

fn robustness(config: &RunConfig, family: &GaussianFamily) -> Result<(Report, String), CliError> {
    let s = &config.study;
    let rc = RobustnessConfig {
        theta: s.theta.clone(),
        alpha: s.contamination,
        z_grid: s.z_grid.clone(),
        n_grid: s.n_grid.clone(),
        reps: s.reps.unwrap_or(50),
        epsilon_frac: s.epsilon_frac,
        bmh_samples: s.bmh_samples,
        seed: config.seed,
    };
    let study = robustness_sweep(&rc, family, &config.prior.to_prior(), &config.fit_config())?;
    study_outputs(config, None, &study, None)
}

fn efficiency(config: &RunConfig, family: &GaussianFamily) -> Result<(Report, String), CliError> {
    let s = &config.study;
    let ec = EfficiencyConfig {
        theta0: s.theta.clone(),
        n: s.n,
        reps: s.reps.unwrap_or(200),
        seed: config.seed,
    };
    let study = efficiency_study(&ec, family, &config.prior.to_prior(), &config.fit_config())?;
    study_outputs(config, None, &study, None)
}

fn bvm(config: &RunConfig, family: &GaussianFamily) -> Result<(Report, String), CliError> {
    let data = match &config.data {
        Some(_) => dataset(config)?,
        None => {
            let mut rng = RngSeed(config.seed).stream(Stream::Simulation, 0);
            let theta = &config.study.theta;
            Dataset {
                name: "simulated".into(),
                source: format!(
                    "simulated:{}(mu={}, sigma={}), n={}",
                    family.name(),
                    theta[0],
                    theta[1],
                    config.study.n
                ),
                values: (0..config.study.n).map(|_| family.sample(theta, &mut rng)).collect(),
            }
        }
    };
    let bc = BvmConfig {
        n_samples: config.n_samples,
        seed: config.seed,
    };
    let (study, summary) = bvm_diagnostic(&data.values, &config.prior.to_prior(), family, &bc, &config.fit_config())?;
    let extra = serde_json::to_value(&summary).map_err(|e| CliError::Output(e.to_string()))?;
    study_outputs(config, Some(info(&data)), &study, Some(extra))
}
