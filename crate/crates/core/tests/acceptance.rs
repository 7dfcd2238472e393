//! Acceptance criteria. Each test prints one PASS/FAIL line.
//!
//! The tests share a lock so they run one at a time; the scaling test
//! measures wall time and must not compete with the others for cores.

use std::sync::Mutex;
use std::time::Instant;

use dip_core::audit::{
    brute_force_output_distribution, composed_ratio_check, density_ratio_bound_check, linear_mechanism_counterexample,
    repeated_query_power, simulate_output_pmf, AdditiveNoise, PowerConfig,
};
use dip_core::harness::{
    check_continuous_ks, check_dependence, check_discrete_mean, check_regression, run_continuous_ks_experiment,
    run_dependence_experiment, run_discrete_mean_experiment, run_regression_experiment, CheckOutcome, ExperimentConfig,
    Scenario,
};
use dip_core::multivariate::split_sample;
use dip_core::{
    continualized_edf, privatize_table, Column, ColumnKind, DataTable, Domain, InvertibleCdf, JumpSpec,
    ParametricDistribution, PrivatizeConfig, StreamSeed,
};

static SERIAL: Mutex<()> = Mutex::new(());

fn serial() -> std::sync::MutexGuard<'static, ()> {
    SERIAL.lock().unwrap_or_else(|e| e.into_inner())
}

fn report(id: u32, name: &str, checks: &[CheckOutcome], started: Instant) {
    for c in checks {
        println!("    {c}");
    }
    let ok = checks.iter().all(|c| c.passed);
    println!(
        "[{}] criterion {id}: {name} ({:.1}s)",
        if ok { "PASS" } else { "FAIL" },
        started.elapsed().as_secs_f64()
    );
    assert!(ok, "criterion {id} failed");
}

fn check(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> CheckOutcome {
    CheckOutcome {
        name: name.into(),
        passed,
        detail: detail.into(),
    }
}

#[test]
fn criterion_01_exact_preservation_oracle() {
    let _g = serial();
    let t = Instant::now();
    let specs = [
        ("Bernoulli(0.3)", JumpSpec::new(vec![0.0, 1.0], vec![0.7, 0.3]).unwrap()),
        (
            "Binomial(5,0.5)",
            JumpSpec::from_distribution(&ParametricDistribution::binomial(5, 0.5).unwrap(), 0.0).unwrap(),
        ),
    ];
    let mut checks = Vec::new();
    for (name, spec) in &specs {
        for (k, eps) in [0.5, 1.0, 4.0].into_iter().enumerate() {
            let oracle = brute_force_output_distribution(spec, eps, 10_000).unwrap();
            let err = oracle.max_error();
            checks.push(check(
                format!("{name} eps={eps} oracle"),
                err <= 1e-4,
                format!("max atom error {err:.2e} <= 1e-4"),
            ));
            let n = 1_000_000;
            let sim = simulate_output_pmf(spec, eps, n, 100 + k as u64).unwrap();
            let worst = sim
                .iter()
                .zip(&oracle.output)
                .map(|(s, p)| (s - p).abs() / (p * (1.0 - p) / n as f64).sqrt())
                .fold(0.0, f64::max);
            checks.push(check(
                format!("{name} eps={eps} simulation"),
                worst <= 3.0,
                format!("largest atom deviation {worst:.2} binomial SEs <= 3"),
            ));
        }
    }
    report(1, "exact preservation oracle", &checks, t);
}

#[test]
fn criterion_02_continuous_ks() {
    let _g = serial();
    let t = Instant::now();
    let mut cfg = ExperimentConfig::new(Scenario::ContinuousKs);
    cfg.reps = 200;
    cfg.epsilons = vec![1.0];
    cfg.seed = 2;
    let r = run_continuous_ks_experiment(&cfg).unwrap();
    println!("{r}");
    report(2, "continuous KS", &check_continuous_ks(&r), t);
}

#[test]
fn criterion_03_discrete_mean() {
    let _g = serial();
    let t = Instant::now();
    let mut cfg = ExperimentConfig::new(Scenario::DiscreteMean);
    cfg.reps = 200;
    cfg.distributions = vec![ParametricDistribution::bernoulli(0.1).unwrap()];
    cfg.seed = 3;
    let r = run_discrete_mean_experiment(&cfg).unwrap();
    println!("{r}");
    report(3, "discrete mean estimation", &check_discrete_mean(&r), t);
}

#[test]
fn criterion_04_regression() {
    let _g = serial();
    let t = Instant::now();
    let mut cfg = ExperimentConfig::new(Scenario::Regression);
    cfg.reps = 200;
    cfg.epsilons = vec![1.0];
    cfg.seed = 4;
    let r = run_regression_experiment(&cfg).unwrap();
    println!("{r}");
    report(4, "regression coefficients", &check_regression(&r), t);
}

#[test]
fn criterion_05_ratio_bound() {
    let _g = serial();
    let t = Instant::now();
    let normal = ParametricDistribution::normal(0.0, 1.0).unwrap();
    let holdout = normal.sample(&mut StreamSeed(5).rng(Domain::Sample, 0), 500);
    let edf = continualized_edf(&holdout).unwrap();
    let mut checks = Vec::new();
    for eps in [0.1, 1.0, 3.0] {
        for (label, cdf) in [("parametric", &normal as &dyn InvertibleCdf), ("500-point edf", &edf)] {
            let c = density_ratio_bound_check(cdf, eps, 100).unwrap();
            checks.push(check(
                format!("{label} eps={eps}"),
                c.passed(),
                format!("max ratio {:.12} <= e^eps {:.12}", c.max_ratio, c.bound),
            ));
        }
    }
    let cdfs: Vec<&dyn InvertibleCdf> = vec![&normal, &edf, &normal, &edf, &normal];
    let composed = composed_ratio_check(&cdfs, 1.0, 60).unwrap();
    checks.push(check(
        "p=5 composition at eps/p",
        composed.passed(),
        format!("product {:.12} <= {:.12}", composed.product, composed.bound),
    ));
    report(5, "epsilon-DP ratio bound", &checks, t);
}

#[test]
fn criterion_06_repeated_query_power() {
    let _g = serial();
    let t = Instant::now();
    let checks: Vec<CheckOutcome> = [1, 5, 20]
        .into_iter()
        .map(|m| {
            let p = repeated_query_power(m, 0.1, 0.05, 10_000, 6, PowerConfig::default()).unwrap();
            check(
                format!("M={m}"),
                p.passed(),
                format!(
                    "power {:.4} (se {:.4}) <= bound {:.4} + 3 se",
                    p.power, p.standard_error, p.bound
                ),
            )
        })
        .collect();
    report(6, "repeated-query power bound", &checks, t);
}

#[test]
fn criterion_07_linear_mechanism_counterexample() {
    let _g = serial();
    let t = Instant::now();
    let eps = 1.0;
    let checks: Vec<CheckOutcome> = [
        ("Laplace", AdditiveNoise::Laplace { scale: 1.0 / eps }, 10.0),
        ("Gaussian", AdditiveNoise::Gaussian { sd: 1.0 }, 5.0),
    ]
    .into_iter()
    .map(|(name, noise, probe)| {
        let c = linear_mechanism_counterexample(eps, noise, probe).unwrap();
        check(
            name,
            c.violates(),
            format!("ratio {:.4e} > e^eps at gap {}", c.max_ratio(), c.gap),
        )
    })
    .collect();
    report(7, "linear mechanism is not DP on unbounded data", &checks, t);
}

#[test]
fn criterion_08_dependence() {
    let _g = serial();
    let t = Instant::now();
    let mut checks = Vec::new();
    for seed in 1..=5 {
        let mut cfg = ExperimentConfig::new(Scenario::Dependence);
        cfg.reps = 1;
        cfg.seed = seed;
        let r = run_dependence_experiment(&cfg).unwrap();
        checks.extend(check_dependence(&r, 0.8).into_iter().map(|mut c| {
            c.name = format!("seed {seed}: {}", c.name);
            c
        }));
    }
    report(8, "dependence preservation", &checks, t);
}

fn gaussian_table(n: usize, p: usize, seed: u64) -> DataTable {
    let data = dip_core::harness::equicorrelated_gaussian(n, p, 0.5, StreamSeed(seed));
    let columns = (0..p)
        .map(|j| Column::new(format!("x{j}"), ColumnKind::Continuous))
        .collect();
    DataTable::new(columns, data).unwrap()
}

fn seconds(table: &DataTable, seed: u64) -> f64 {
    let cfg = PrivatizeConfig::new(1.0, seed);
    let t = Instant::now();
    privatize_table(table, &cfg).unwrap();
    t.elapsed().as_secs_f64()
}

fn median(mut times: Vec<f64>) -> f64 {
    times.sort_by(f64::total_cmp);
    times[times.len() / 2]
}

#[test]
fn criterion_09_scaling() {
    let _g = serial();
    let t = Instant::now();
    let small = gaussian_table(100_000, 5, 9);
    let large = gaussian_table(200_000, 5, 9);
    // warm up the thread pool and allocator
    privatize_table(&small, &PrivatizeConfig::new(1.0, 1)).unwrap();
    // interleave the sizes so drift in machine load hits both alike
    let (mut ta, mut tb) = (Vec::new(), Vec::new());
    for k in 0..3 {
        ta.push(seconds(&small, 90 + k));
        tb.push(seconds(&large, 90 + k));
    }
    let (a, b) = (median(ta), median(tb));
    let ratio = b / a;
    let checks = [check(
        "N 1e5 -> 2e5, p=5",
        ratio <= 2.4,
        format!("median {a:.3}s -> {b:.3}s, factor {ratio:.2} <= 2.4"),
    )];
    report(9, "near-linear scaling", &checks, t);
}

#[test]
fn criterion_10_determinism_and_holdout_confidentiality() {
    let _g = serial();
    let t = Instant::now();
    let table = gaussian_table(400, 3, 10);
    let cfg = PrivatizeConfig::new(1.0, 77);
    let bits = |tab: &DataTable| -> Vec<u64> {
        (0..tab.n_columns())
            .flat_map(|c| tab.column(c).iter().map(|x| x.to_bits()).collect::<Vec<_>>())
            .collect()
    };
    let (a, ma) = privatize_table(&table, &cfg).unwrap();
    let (b, mb) = privatize_table(&table, &cfg).unwrap();
    let mut checks = vec![check(
        "same config and seed",
        bits(&a) == bits(&b) && ma == mb,
        "outputs and metadata bit-identical",
    )];

    let mut leaked = 0usize;
    let mut scanned = 0usize;
    for seed in 0..100u64 {
        let table = gaussian_table(200, 2, 1000 + seed);
        let cfg = PrivatizeConfig::new(1.0, seed);
        let split = split_sample(&table, cfg.holdout_ratio, &StreamSeed(seed)).unwrap();
        let mut held: Vec<u64> = bits(&split.holdout);
        held.sort_unstable();
        let (out, _) = privatize_table(&table, &cfg).unwrap();
        for x in bits(&out) {
            scanned += 1;
            if held.binary_search(&x).is_ok() {
                leaked += 1;
            }
        }
    }
    checks.push(check(
        "hold-out values in 100 releases",
        leaked == 0,
        format!("{leaked} of {scanned} released values equal a raw hold-out value"),
    ));
    report(10, "determinism and hold-out confidentiality", &checks, t);
}
