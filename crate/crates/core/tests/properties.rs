mod common;

use common::*;
use jumpsem::criteria::{self, CriterionValue};
use jumpsem::data;
use jumpsem::presets;
use jumpsem::quasi_lik::{self, PathData, TruncationRule, TruncationStats};
use jumpsem::sem;
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn specs_under_test(rng: &mut ChaCha8Rng) -> Vec<sem::CheckedSpec> {
    vec![presets::model1(), presets::model2(), presets::model3(), random_spec(rng)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn sigma_is_exactly_symmetric(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for spec in specs_under_test(&mut rng) {
            let theta = random_theta(&spec, &mut rng);
            let s = sem::assemble_sigma(&spec, &theta).unwrap();
            let m = s.sigma();
            prop_assert_eq!(m, &m.transpose());
            prop_assert!(s.is_pd());
        }
    }

    #[test]
    fn jacobian_matches_finite_differences(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for spec in specs_under_test(&mut rng) {
            let theta = random_theta(&spec, &mut rng);
            let jac = sem::sigma_jacobian(&spec, &theta).unwrap();
            let fd = fd_jacobian(&spec, &theta, 1e-6);
            let err = rel_err(jac.as_slice(), fd.as_slice());
            prop_assert!(err <= 1e-6, "relative error {err}");
        }
    }

    #[test]
    fn reduced_form_equals_direct_sum(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spec = random_spec(&mut rng);
        let theta = random_theta(&spec, &mut rng);
        let truth = sem::assemble_sigma(&spec, &random_theta(&spec, &mut rng)).unwrap();
        let n = rng.random_range(2..=1000);
        let path = gaussian_path(truth.sigma(), n, 1.0 / n as f64, rng.random_range(0..4), &mut rng);
        let rule = TruncationRule::new(rng.random_range(0.5..20.0), rng.random_range(1.0 / 3.0..0.5)).unwrap();
        let stats = TruncationStats::compute(&path, &rule);
        let reduced = quasi_lik::quasi_loglik_at(&spec, &theta, &stats).unwrap();
        let direct = quasi_lik::quasi_loglik_direct(&spec, &theta, &path, &rule).unwrap();
        prop_assert!((reduced - direct).abs() <= 1e-9 * direct.abs().max(1.0), "{reduced} vs {direct}");
    }

    #[test]
    fn truncation_is_monotone_in_d(seed in any::<u64>(), d1 in 0.1f64..50.0, d2 in 0.1f64..50.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sigma = DMatrix::from_diagonal_element(3, 3, 1.0);
        let path = gaussian_path(&sigma, 500, 1.0 / 500.0, 5, &mut rng);
        let (lo, hi) = if d1 <= d2 { (d1, d2) } else { (d2, d1) };
        let a = TruncationStats::compute(&path, &TruncationRule::new(lo, 0.4).unwrap());
        let b = TruncationStats::compute(&path, &TruncationRule::new(hi, 0.4).unwrap());
        prop_assert!(a.n_kept() <= b.n_kept());
        prop_assert_eq!(a.n_kept(), a.keep().iter().filter(|&&k| k).count());
        let s = a.sigma_check();
        prop_assert_eq!(s, &s.transpose());
    }

    #[test]
    fn nesting_transports_likelihood(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (m1, m2) = (presets::model1(), presets::model2());
        let emb = presets::model1_in_model2();
        let sigma0 = sem::assemble_sigma(&m1, &presets::theta_model1()).unwrap();
        let path = gaussian_path(sigma0.sigma(), 300, 1.0 / 300.0, 1, &mut rng);
        let stats = TruncationStats::compute(&path, &TruncationRule::default());
        let theta = random_theta(&m1, &mut rng);
        let h1 = quasi_lik::quasi_loglik_at(&m1, &theta, &stats).unwrap();
        let h2 = quasi_lik::quasi_loglik_at(&m2, &emb.apply(&theta), &stats).unwrap();
        prop_assert!((h1 - h2).abs() <= 1e-9 * h1.abs().max(1.0));
    }

    #[test]
    fn csv_round_trip(seed in any::<u64>(), n in 2usize..200, p in 1usize..6, h in 1e-6f64..1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = DMatrix::from_fn(n + 1, p, |_, _| rng.random_range(-1e3..1e3) * 10f64.powi(rng.random_range(-8..8)));
        let path = PathData::new(h, x).unwrap();
        let mut buf = Vec::new();
        data::write_csv(&path, &mut buf).unwrap();
        let back = data::read_csv(buf.as_slice()).unwrap();
        prop_assert_eq!(back.observations(), path.observations());
        prop_assert!((back.h() - h).abs() <= 2.0 * f64::EPSILON * h);
    }

    #[test]
    fn criteria_difference_identity(h in -1e6f64..1e6, q in 0usize..100, n in 2usize..10_000_000) {
        let c = CriterionValue::new(0, h, q, n, true);
        let lhs = c.qbic - c.qaic;
        let rhs = q as f64 * ((n as f64).ln() - 2.0);
        prop_assert!((lhs - rhs).abs() <= 1e-9 * c.qbic.abs().max(1.0));
    }
}

#[test]
fn nesting_checks() {
    let (m1, m2, m3) = (presets::model1(), presets::model2(), presets::model3());
    assert!(sem::check_nesting(&m1, &m2, &presets::model1_in_model2(), 10, 1).unwrap());
    // Any 31 -> 32 embedding fails: Model 3's volatility has one endogenous factor.
    let positions: Vec<usize> = (0..31).collect();
    let emb = sem::NestingEmbedding::coordinate(32, &positions, vec![0.0; 32]).unwrap();
    assert!(!sem::check_nesting(&m3, &m1, &emb, 5, 2).unwrap());
    // Wrong direction is never nested.
    let pos33: Vec<usize> = (0..32).collect();
    let e33 = sem::NestingEmbedding::coordinate(33, &pos33, vec![0.0; 33]).unwrap();
    assert!(!sem::check_nesting(&m2, &m1, &e33, 5, 3).unwrap_or(false));
}

#[test]
fn overfit_probability_decreases_and_matches_oracle() {
    let mut prev = 1.0;
    for dq in 1..=10 {
        let p = criteria::qaic_overfit_probability(dq);
        let oracle = chi2_survival_oracle(dq, 2.0 * dq as f64);
        assert!((p - oracle).abs() < 1e-6, "dq = {dq}: {p} vs {oracle}");
        assert!(p < prev);
        prev = p;
    }
}

#[test]
fn hessian_is_symmetric_and_pd_at_optimum() {
    let spec = presets::model1();
    let sigma0 = sem::assemble_sigma(&spec, &presets::theta_model1()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let path = gaussian_path(sigma0.sigma(), 5_000, 1.0 / 5_000.0, 0, &mut rng);
    let stats = TruncationStats::compute(&path, &TruncationRule::default());
    let fit = jumpsem::estimation::fit(
        &spec,
        &stats,
        &jumpsem::estimation::FitConfig::given(presets::theta_model1()),
    )
    .unwrap();
    assert!(fit.converged);
    let hess = quasi_lik::normalized_hessian(&spec, fit.theta_hat.values(), &stats, stats.n()).unwrap();
    assert!(hess.asymmetry <= 1e-6, "asymmetry {}", hess.asymmetry);
    let eig = hess.gamma.clone().symmetric_eigen();
    assert!(eig.eigenvalues.min() > 0.0);
}
