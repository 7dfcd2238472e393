use dip_core::harness::{check_report, ols_fit, regression_data, run_experiment, ExperimentConfig, Method, Scenario};
use dip_core::{Domain, StreamSeed};
use nalgebra::DMatrix;

// E||b - beta||^2 = sigma^2 E tr((X'X)^-1) for OLS with unit noise.
#[test]
fn regression_error_matches_ols_theory() {
    let (n, p, reps) = (2000, 6, 300);
    let mut sq_err = 0.0;
    let mut trace = 0.0;
    for r in 0..reps {
        let seed = StreamSeed(70).child(Domain::Replicate, r);
        let (_, x, y) = regression_data(n, p, seed);
        let b = ols_fit(&x, &y).unwrap();
        sq_err += b.iter().map(|v| (v - 1.0).powi(2)).sum::<f64>();
        let xm = DMatrix::from_fn(n, p, |i, j| x[j][i]);
        let inv = (xm.transpose() * &xm).try_inverse().unwrap();
        trace += inv.trace();
    }
    let (mse, want) = (sq_err / reps as f64, trace / reps as f64);
    // the squared error of a 6-dim estimate has relative sd about 0.6 per rep
    assert!(
        (mse / want - 1.0).abs() < 4.0 * 0.6 / (reps as f64).sqrt(),
        "{mse} vs {want}"
    );
}

#[test]
fn simulate_shapes() {
    let mut cfg = ExperimentConfig::new(Scenario::DiscreteMean);
    cfg.reps = 3;
    let r = run_experiment(&cfg).unwrap();
    for d in ["Bernoulli(0.1)", "Binomial(5,0.5)", "Poisson(3)", "Geometric(0.2)"] {
        for m in [Method::Dip, Method::Lrm, Method::Exm] {
            assert_eq!(r.cells.iter().filter(|c| c.scenario == d && c.method == m).count(), 4);
        }
    }
    let csv = r.to_csv();
    assert_eq!(csv.lines().count(), 1 + r.cells.len());
    assert_eq!(check_report(&cfg, &r).len(), 3);
}

#[test]
fn lrm_degrades_as_epsilon_shrinks() {
    let mut cfg = ExperimentConfig::new(Scenario::DiscreteMean);
    cfg.reps = 200;
    cfg.distributions = vec!["binomial:5,0.5".parse().unwrap()];
    let r = run_experiment(&cfg).unwrap();
    let means = |m| -> Vec<f64> {
        r.cells
            .iter()
            .filter(|c| c.method == m)
            .map(|c| c.summary.mean)
            .collect()
    };
    let lrm = means(Method::Lrm);
    assert!(lrm.windows(2).all(|w| w[0] > w[1]), "{lrm:?}");
}

#[test]
fn regression_report_has_every_hold_out_ratio() {
    let mut cfg = ExperimentConfig::new(Scenario::Regression);
    cfg.n = 200;
    cfg.reps = 4;
    cfg.epsilons = vec![1.0];
    cfg.holdout_ratios = vec![0.15, 0.25, 0.35];
    let r = run_experiment(&cfg).unwrap();
    let holds: Vec<f64> = r
        .cells
        .iter()
        .filter(|c| c.method == Method::Dip)
        .map(|c| c.holdout.unwrap())
        .collect();
    assert_eq!(holds, vec![0.15, 0.25, 0.35]);
}
