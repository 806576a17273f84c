//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Exits 0 after reporting. Set `ACCEPTANCE_STRICT=1` to exit non-zero
//! when any criterion fails.

use std::time::Instant;

use bayes_mhd::densities::{hellinger, transform_density, Density, GaussianFamily, HistogramDensity, ParametricFamily, SupportTransform};
use bayes_mhd::estimators::{bmh_fit, mhb_bootstrap_se, mhb_fit, FitConfig};
use bayes_mhd::experiments::{
    bvm_diagnostic, count_inversions, efficiency_study, posterior_consistency, robustness_sweep, BvmConfig, EfficiencyConfig,
    RobustnessConfig,
};
use bayes_mhd::io::NEWCOMB;
use bayes_mhd::mhd::{fisher_information, influence_function, influence_function_at_model, l_norm_sq_vec};
use bayes_mhd::numerics::{Integrator, RngSeed, Stream};
use bayes_mhd::posterior::{fit_posterior, AlphaScheme, HistogramPrior, KPrior, KSupport};
use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Beta, Distribution};

const SEED: u64 = 2026;

struct Outcome {
    pass: bool,
    details: Vec<String>,
}

impl Outcome {
    fn new() -> Self {
        Self {
            pass: true,
            details: Vec::new(),
        }
    }

    fn check(&mut self, name: &str, ok: bool, detail: String) {
        self.pass &= ok;
        self.details.push(format!("{} {name}: {detail}", if ok { "ok  " } else { "MISS" }));
    }

    fn near(&mut self, name: &str, value: f64, target: f64, tol: f64) {
        self.check(name, (value - target).abs() <= tol, format!("{value:.4} (target {target} ± {tol})"));
    }
}

fn newcomb() -> Outcome {
    let mut o = Outcome::new();
    let fam = GaussianFamily::new();
    let prior = HistogramPrior::fixed(100, HistogramPrior::DEFAULT_ALPHA);
    let cfg = FitConfig::default();
    match mhb_fit(&NEWCOMB, &prior, &fam, &cfg) {
        Ok(m) => {
            o.near("MHB mu", m.theta_hat[0], 27.72, 0.10);
            o.near("MHB sigma", m.theta_hat[1], 5.07, 0.15);
        }
        Err(e) => o.check("MHB fit", false, e.to_string()),
    }
    match mhb_bootstrap_se(&NEWCOMB, &prior, &fam, 200, RngSeed(SEED), &cfg) {
        Ok(b) => {
            o.near("bootstrap se mu", b.se[0], 0.64, 0.15);
            o.near("bootstrap se sigma", b.se[1], 0.46, 0.15);
        }
        Err(e) => o.check("bootstrap", false, e.to_string()),
    }
    match bmh_fit(&NEWCOMB, &prior, &fam, 2000, RngSeed(SEED), &cfg) {
        Ok(p) => {
            o.near("BMH EAP mu", p.eap[0], 27.73, 0.10);
            o.near("BMH EAP sigma", p.eap[1], 5.00, 0.15);
            o.near("BMH sd mu", p.post_sd[0], 0.63, 0.15);
            o.near("BMH sd sigma", p.post_sd[1], 0.47, 0.15);
        }
        Err(e) => o.check("BMH fit", false, e.to_string()),
    }
    o
}

fn hellinger_oracle() -> Outcome {
    let mut o = Outcome::new();
    let fam = GaussianFamily::new();
    let integ = Integrator::default();
    let h = hellinger(&fam.at(&[0.0, 1.0]), &fam.at(&[1.0, 1.0]), (-13.0, 14.0), &integ).unwrap();
    let closed = (2.0 - 2.0 * (-0.125f64).exp()).sqrt();
    o.check(
        "h(N(0,1), N(1,1))",
        (h - closed).abs() < 1e-6,
        format!("{h:.9} vs closed form {closed:.9}"),
    );

    let mut rng = RngSeed(SEED).stream(Stream::Simulation, 2);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let a: f64 = rng.random_range(-100.0..100.0);
        let b: f64 = rng.random_range(0.01..100.0);
        let t = SupportTransform::new(a, a + b).unwrap();
        let k1 = rng.random_range(1..30);
        let k2 = rng.random_range(1..30);
        let f = HistogramDensity::from_masses((0..k1).map(|_| rng.random::<f64>() + 0.01).collect()).unwrap();
        let g = HistogramDensity::from_masses((0..k2).map(|_| rng.random::<f64>() + 0.01).collect()).unwrap();
        let base = hellinger(&f, &g, (0.0, 1.0), &integ).unwrap();
        let tf = transform_density(f, t).unwrap();
        let tg = transform_density(g, t).unwrap();
        let moved = hellinger(&tf, &tg, (t.a, t.b), &integ).unwrap();
        worst = worst.max((moved - base).abs());
        // Gaussian pair under the same map.
        let (m1, s1, m2, s2): (f64, f64, f64, f64) = (
            rng.random_range(-2.0..2.0),
            rng.random_range(0.3..2.0),
            rng.random_range(-2.0..2.0),
            rng.random_range(0.3..2.0),
        );
        let lo = (m1 - 12.0 * s1).min(m2 - 12.0 * s2);
        let hi = (m1 + 12.0 * s1).max(m2 + 12.0 * s2);
        let hg = hellinger(&fam.at(&[m1, s1]), &fam.at(&[m2, s2]), (lo, hi), &integ).unwrap();
        let hm = hellinger(
            &fam.at(&[a + b * m1, b * s1]),
            &fam.at(&[a + b * m2, b * s2]),
            (a + b * lo, a + b * hi),
            &integ,
        )
        .unwrap();
        worst = worst.max((hg - hm).abs());
    }
    o.check(
        "affine invariance over 100 maps",
        worst < 1e-9,
        format!("max deviation {worst:.2e}"),
    );
    o
}

fn efficiency() -> Outcome {
    let mut o = Outcome::new();
    let cfg = EfficiencyConfig {
        seed: SEED,
        ..EfficiencyConfig::default()
    };
    match efficiency_study(&cfg, &GaussianFamily::new(), &HistogramPrior::default(), &FitConfig::default()) {
        Ok(r) => {
            let m = &r.cells[0].metrics;
            let vm = m["mhb_var_sqrt_n_mu"];
            let vs = m["mhb_var_sqrt_n_sigma"];
            o.check(
                "var sqrt(n) mu_hat",
                (0.85..=1.15).contains(&vm),
                format!("{vm:.4} in [0.85, 1.15]"),
            );
            o.check(
                "var sqrt(n) sigma_hat",
                (0.42..=0.58).contains(&vs),
                format!("{vs:.4} in [0.42, 0.58]"),
            );
            o.details.push(format!(
                "info MLE on same replicates: ({:.4}, {:.4}); failures {}",
                m["mle_var_sqrt_n_mu"], m["mle_var_sqrt_n_sigma"], r.cells[0].n_failed
            ));
        }
        Err(e) => o.check("efficiency study", false, e.to_string()),
    }
    o
}

fn efficiency_identity() -> Outcome {
    let mut o = Outcome::new();
    let fam = GaussianFamily::new();
    let integ = Integrator::default();
    let mut rng = RngSeed(SEED).stream(Stream::Simulation, 4);
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let theta = [rng.random_range(-50.0..50.0), rng.random_range(0.05..20.0)];
        let info = fisher_information(&fam, &theta, &integ).unwrap();
        let general = influence_function(fam.at(&theta), &fam, &theta, &integ).unwrap();
        let at_model = influence_function_at_model(&fam, &theta, &integ).unwrap();
        for inf_v in [
            l_norm_sq_vec(|x| general.value(x).unwrap(), 2, general.base_point(), &integ).unwrap(),
            l_norm_sq_vec(|x| at_model.value(x).unwrap(), 2, at_model.base_point(), &integ).unwrap(),
        ] {
            worst = worst.max((inf_v * &info - DMatrix::identity(2, 2)).abs().max());
        }
    }
    o.check("max |L-norm x I - Id| over 10 thetas", worst < 1e-3, format!("{worst:.2e}"));
    o
}

fn robustness() -> Outcome {
    let mut o = Outcome::new();
    let cfg = RobustnessConfig {
        z_grid: vec![5.0, 20.0, 50.0],
        n_grid: vec![500],
        reps: 50,
        bmh_samples: 0,
        seed: SEED,
        ..RobustnessConfig::default()
    };
    match robustness_sweep(&cfg, &GaussianFamily::new(), &HistogramPrior::default(), &FitConfig::default()) {
        Ok(r) => {
            let get = |cell: &str, key: &str| r.cell(cell).map(|c| c.metrics[key]).unwrap_or(f64::NAN);
            let mhb50 = get("n=500,z=50", "mhb_median_abs_loc_error");
            let mle50 = get("n=500,z=50", "mle_median_abs_loc_error");
            let mhb5 = get("n=500,z=5", "mhb_median_abs_loc_error");
            o.check("MHB median |mu error| at z=50", mhb50 < 0.05, format!("{mhb50:.4} < 0.05"));
            o.check("MLE median |mu error| at z=50", mle50 > 4.5, format!("{mle50:.4} > 4.5"));
            o.check("MHB error z=50 < z=5", mhb50 < mhb5, format!("{mhb50:.4} < {mhb5:.4}"));
        }
        Err(e) => o.check("robustness sweep", false, e.to_string()),
    }
    o
}

fn bvm() -> Outcome {
    let mut o = Outcome::new();
    let fam = GaussianFamily::new();
    let mut rng = RngSeed(SEED).stream(Stream::Simulation, 6);
    let data: Vec<f64> = (0..2000).map(|_| fam.sample(&[0.0, 1.0], &mut rng)).collect();
    let cfg = BvmConfig {
        n_samples: 2000,
        seed: SEED,
    };
    match bvm_diagnostic(&data, &HistogramPrior::default(), &fam, &cfg, &FitConfig::default()) {
        Ok((_, s)) => {
            for (j, name) in ["mu", "sigma"].iter().enumerate() {
                let r = s.sd_ratio[j];
                o.check(
                    &format!("sd ratio {name}"),
                    (0.9..=1.1).contains(&r),
                    format!("{r:.4} in [0.9, 1.1]"),
                );
                match &s.ks {
                    Some(ks) => o.check(&format!("KS {name}"), ks[j] < 0.05, format!("{:.4} < 0.05", ks[j])),
                    None => o.check(&format!("KS {name}"), false, "degenerate posterior".into()),
                }
            }
        }
        Err(e) => o.check("BvM diagnostic", false, e.to_string()),
    }
    o
}

fn exact_posterior() -> Outcome {
    let mut o = Outcome::new();
    let mut rng = RngSeed(SEED).stream(Stream::Simulation, 7);
    let prior = HistogramPrior {
        k: KPrior::Random {
            lambda: 5.0,
            support: KSupport::UpTo(12),
        },
        alpha: AlphaScheme::Constant { c: 0.5 },
    };
    let mut exact = true;
    for _ in 0..50 {
        let data: Vec<f64> = (0..rng.random_range(2..60)).map(|_| rng.random::<f64>()).collect();
        let (head, tail) = data.split_at(data.len() / 2);
        let seq = fit_posterior(head, &prior).unwrap().update(tail).unwrap();
        let mut rev = data.clone();
        rev.reverse();
        exact &= seq == fit_posterior(&data, &prior).unwrap() && seq == fit_posterior(&rev, &prior).unwrap();
    }
    o.check(
        "conjugacy order independence",
        exact,
        "bit-identical posteriors over 50 datasets".into(),
    );

    let data: Vec<f64> = (0..40).map(|_| rng.random::<f64>().powi(2)).collect();
    let prior6 = HistogramPrior {
        k: KPrior::Random {
            lambda: 4.0,
            support: KSupport::UpTo(6),
        },
        alpha: AlphaScheme::Constant { c: 0.5 },
    };
    let post = fit_posterior(&data, &prior6).unwrap();
    let integ = Integrator::default();
    let eap = post.eap_density();
    let grid = 60;
    let mut acc = vec![0.0; grid];
    let draws = 100_000;
    let mut prng = RngSeed(SEED).stream(Stream::Posterior, 7);
    for _ in 0..draws {
        let d = post.sample_density(&mut prng).density.refine(grid).unwrap();
        for (a, w) in acc.iter_mut().zip(d.weights()) {
            *a += w / draws as f64;
        }
    }
    let mc = HistogramDensity::from_masses(acc).unwrap();
    let l1 = integ
        .integrate_with_breaks(|x| (eap.pdf(x) - mc.pdf(x)).abs(), 0.0, 1.0, &mc.breakpoints())
        .unwrap();
    o.check("EAP vs 1e5-draw Monte Carlo, L1", l1 < 0.01, format!("{l1:.5} < 0.01"));

    let lambda = 20.0;
    let odds_prior = HistogramPrior {
        k: KPrior::Random {
            lambda,
            support: KSupport::Set(vec![1, 2]),
        },
        alpha: AlphaScheme::Constant { c: 1.0 },
    };
    let p = fit_posterior(&[0.1, 0.2, 0.3], &odds_prior).unwrap();
    let odds = (p.components()[1].log_post - p.components()[0].log_post).exp();
    // p(2)/p(1) * 2^3 * B(4, 1) / B(1, 1) = (lambda / 2) * 8 * (1/4) / 1.
    let oracle = lambda / 2.0 * 8.0 * 0.25;
    let rel = (odds - oracle).abs() / oracle;
    o.check(
        "k=2 vs k=1 odds vs Beta-ratio oracle",
        rel < 1e-10,
        format!("{odds} vs {oracle} (rel {rel:.1e})"),
    );
    o
}

struct Beta25;

impl Density for Beta25 {
    fn pdf(&self, x: f64) -> f64 {
        if (0.0..=1.0).contains(&x) {
            30.0 * x * (1.0 - x).powi(4)
        } else {
            0.0
        }
    }

    fn support(&self) -> (f64, f64) {
        (0.0, 1.0)
    }
}

fn consistency() -> Outcome {
    let mut o = Outcome::new();
    let beta = Beta::new(2.0, 5.0).unwrap();
    let prior = HistogramPrior::random(HistogramPrior::DEFAULT_LAMBDA, HistogramPrior::DEFAULT_ALPHA);
    let ns = [100, 400, 1600];
    match posterior_consistency(
        &Beta25,
        |r| beta.sample(r),
        &ns,
        50,
        20,
        &prior,
        RngSeed(SEED),
        &Integrator::default(),
    ) {
        Ok(h) => {
            let inv = count_inversions(&h);
            o.check(
                "posterior Hellinger decreasing in n",
                inv <= 1,
                format!("{h:.4?} ({inv} inversions, at most 1)"),
            );
        }
        Err(e) => o.check("consistency", false, e.to_string()),
    }
    o
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    // Ignore libtest arguments such as --nocapture or test filters.
    let criteria: [Criterion; 8] = [
        ("Newcomb reproduction", newcomb),
        ("Hellinger oracle", hellinger_oracle),
        ("efficiency at the model", efficiency),
        ("efficiency identity", efficiency_identity),
        ("robustness to gross errors", robustness),
        ("BvM diagnostic", bvm),
        ("exact posterior properties", exact_posterior),
        ("consistency trend", consistency),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let out = run();
        let secs = start.elapsed().as_secs_f64();
        println!(
            "criterion {} {}: {name} ({secs:.1}s)",
            i + 1,
            if out.pass { "PASS" } else { "FAIL" }
        );
        for d in &out.details {
            println!("    {d}");
        }
        if !out.pass {
            failed += 1;
        }
    }
    println!("acceptance: {}/{} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 && std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
        std::process::exit(1);
    }
}
