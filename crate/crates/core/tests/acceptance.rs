//! Acceptance suite: one PASS/FAIL line per criterion. Runs with a plain
//! `main` so the lines are always printed.

mod common;

use std::process::ExitCode;
use std::time::Instant;

use common::*;
use jumpsem::config::ExperimentConfig;
use jumpsem::criteria::{self, Criterion};
use jumpsem::estimation::{self, FitConfig};
use jumpsem::experiment;
use jumpsem::presets;
use jumpsem::quasi_lik::{self, TruncationRule, TruncationStats};
use jumpsem::sem;
use jumpsem::simulator::{self, SimConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

type Outcome = (bool, String);

fn preset_stats(n: usize, seed: u64) -> TruncationStats {
    let path = simulator::simulate_observations(&simulator::paper_true_model(), &SimConfig { n, t_end: 1.0, seed })
        .expect("simulate");
    TruncationStats::compute(&path, &TruncationRule::default())
}

fn covariance_identity() -> Outcome {
    let sigma0 = simulator::paper_true_model().volatility().expect("valid model");
    let e1 = (sem::assemble_sigma(&presets::model1(), &presets::theta_model1()).unwrap().sigma() - &sigma0).abs().max();
    let e2 = (sem::assemble_sigma(&presets::model2(), &presets::theta_model2()).unwrap().sigma() - &sigma0).abs().max();
    (e1 <= 1e-12 && e2 <= 1e-12, format!("max |Sigma - Sigma0|: model1 {e1:.1e}, model2 {e2:.1e}"))
}

fn identifiability_ranks() -> Outcome {
    let r1 = sem::identifiability_rank(&presets::model1(), &presets::theta_model1()).unwrap();
    let r2 = sem::identifiability_rank(&presets::model2(), &presets::theta_model2()).unwrap();
    (r1 == 32 && r2 == 33, format!("rank model1 = {r1}, model2 = {r2}"))
}

fn likelihood_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1001);
    let mut worst = 0.0f64;
    for case in 0..50 {
        // every fifth case uses the 15-dimensional preset models
        let spec = if case % 5 == 0 {
            [presets::model1(), presets::model2(), presets::model3()][case / 5 % 3].clone()
        } else {
            random_spec(&mut rng)
        };
        let theta = random_theta(&spec, &mut rng);
        let truth = sem::assemble_sigma(&spec, &random_theta(&spec, &mut rng)).unwrap();
        let n = rng.random_range(2..=1000);
        let path = gaussian_path(truth.sigma(), n, 1.0 / n as f64, rng.random_range(0..5), &mut rng);
        let rule = TruncationRule::new(rng.random_range(0.5..20.0), rng.random_range(1.0 / 3.0..0.5)).unwrap();
        let stats = TruncationStats::compute(&path, &rule);
        let reduced = quasi_lik::quasi_loglik_at(&spec, &theta, &stats).unwrap();
        let direct = quasi_lik::quasi_loglik_direct(&spec, &theta, &path, &rule).unwrap();
        worst = worst.max((reduced - direct).abs() / direct.abs().max(1.0));
    }
    (worst <= 1e-9, format!("50 cases, worst relative error {worst:.1e}"))
}

fn gradient_correctness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1002);
    let preset_data = preset_stats(1_000, 1002);
    let mut worst = 0.0f64;
    let mut specs = vec![presets::model1(), presets::model2(), presets::model3()];
    specs.push(random_spec(&mut rng));
    for spec in &specs {
        let stats = if spec.p() == 15 {
            preset_data.clone()
        } else {
            let s = sem::assemble_sigma(spec, &random_theta(spec, &mut rng)).unwrap();
            TruncationStats::compute(&gaussian_path(s.sigma(), 1_000, 1e-3, 2, &mut rng), &TruncationRule::default())
        };
        for _ in 0..10 {
            let theta = random_theta(spec, &mut rng);
            let g = quasi_lik::grad_h(spec, &theta, &stats, stats.n()).unwrap();
            let fd = fd_gradient(spec, &theta, &stats);
            worst = worst.max(rel_err(&g, &fd));
        }
    }
    (worst <= 1e-5, format!("4 specs x 10 points, worst relative error {worst:.1e}"))
}

fn nesting_transport() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1003);
    let stats = preset_stats(5_000, 1003);
    let (m1, m2) = (presets::model1(), presets::model2());
    let emb = presets::model1_in_model2();
    let nested = sem::check_nesting(&m1, &m2, &emb, 5, 1003).unwrap();
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let theta = random_theta(&m1, &mut rng);
        let h1 = quasi_lik::quasi_loglik_at(&m1, &theta, &stats).unwrap();
        let h2 = quasi_lik::quasi_loglik_at(&m2, &emb.apply(&theta), &stats).unwrap();
        worst = worst.max((h1 - h2).abs() / h1.abs().max(1.0));
    }
    (nested && worst <= 1e-9, format!("nested = {nested}, 20 points, worst relative error {worst:.1e}"))
}

fn selection_study() -> (Outcome, Outcome) {
    let mut cfg = ExperimentConfig::paper_default();
    cfg.replications = 200;
    cfg.n_grid = vec![50_000];
    let table = experiment::run_experiment(&cfg).expect("experiment runs");
    let r = table.replications as f64;
    let qbic1 = table.count(Criterion::Qbic, 0, 0);
    let qbic3 = table.count(Criterion::Qbic, 0, 2);
    let qaic2 = table.frequency(Criterion::Qaic, 0, 1);
    let counts = |c| format!("{:?}", (0..3).map(|m| table.count(c, 0, m)).collect::<Vec<_>>());
    let detail = format!(
        "R = 200, n = 5e4, failed = {}, {:.1} s",
        table.failed[0], table.runtime_secs
    );
    (
        (
            qbic1 as f64 >= 0.95 * r && qbic3 == 0,
            format!("QBIC counts {} ({detail})", counts(Criterion::Qbic)),
        ),
        (
            (0.10..=0.25).contains(&qaic2),
            format!("QAIC counts {}, model2 fraction {qaic2:.3}", counts(Criterion::Qaic)),
        ),
    )
}

fn chi_square_limit() -> Outcome {
    let p1 = criteria::qaic_overfit_probability(1);
    let oracle = chi2_survival_oracle(1, 2.0);
    let p2 = criteria::qaic_overfit_probability(2);
    let ok = (p1 - oracle).abs() <= 1e-3 && (p1 - 0.1573).abs() <= 1e-3 && (p2 - (-2f64).exp()).abs() <= 1e-12;
    (ok, format!("dq=1: {p1:.6} (integration {oracle:.6}), dq=2: {p2:.15}"))
}

fn consistency_trend() -> Outcome {
    let truth = presets::theta_model1();
    let spec = presets::model1();
    let median_err = |n: usize| {
        let errs: Vec<f64> = (0..20u64)
            .into_par_iter()
            .map(|seed| {
                let stats = preset_stats(n, 5_000 + seed);
                let fit = estimation::fit(&spec, &stats, &FitConfig::given(truth.clone())).expect("fit");
                fit.theta_hat.iter().zip(&truth).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
            })
            .collect();
        median(errs)
    };
    let (e4, e5) = (median_err(10_000), median_err(100_000));
    let ratio = e4 / e5;
    (
        (1.5..=6.0).contains(&ratio),
        format!("median sup error {e4:.4} (n = 1e4) -> {e5:.4} (n = 1e5), ratio {ratio:.2}"),
    )
}

fn main() -> ExitCode {
    let mut results: Vec<(&str, Outcome)> = Vec::new();
    let timed = |f: &dyn Fn() -> Outcome| {
        let t = Instant::now();
        let (ok, msg) = f();
        (ok, format!("{msg} [{:.2} s]", t.elapsed().as_secs_f64()))
    };
    results.push(("1 covariance identity", timed(&covariance_identity)));
    results.push(("2 identifiability ranks", timed(&identifiability_ranks)));
    results.push(("3 likelihood equivalence", timed(&likelihood_equivalence)));
    results.push(("4 gradient correctness", timed(&gradient_correctness)));
    results.push(("5 nesting transport", timed(&nesting_transport)));
    let (qbic, qaic) = selection_study();
    results.push(("6 QBIC consistency", qbic));
    results.push(("7 QAIC overfitting rate", qaic));
    results.push(("8 chi-square limit", timed(&chi_square_limit)));
    results.push(("9 consistency trend", timed(&consistency_trend)));

    let mut all = true;
    for (name, (ok, msg)) in &results {
        println!("{} criterion {name}: {msg}", if *ok { "PASS" } else { "FAIL" });
        all &= ok;
    }
    if all {
        println!("acceptance: all {} criteria passed", results.len());
        ExitCode::SUCCESS
    } else {
        println!("acceptance: FAILED");
        ExitCode::FAILURE
    }
}
