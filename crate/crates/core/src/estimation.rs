//! Quasi-likelihood estimation by BFGS ascent.
//!
//! The optimizer works on `-H / n` in a working parameterization where
//! positivity-flagged coordinates are optimized on the log scale (unless
//! disabled). Trial points that leave the feasible region or give a
//! non-positive-definite volatility are rejected inside the line search.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use thiserror::Error;

use crate::quasi_lik::{self, QuasiLikError, TruncationStats};
use crate::sem::{Block, Cell, CheckedSpec, SemError, ThetaVector};

/// Sufficient-increase constant of the backtracking line search.
pub const ARMIJO_C1: f64 = 1e-4;
/// Step shrink factor per backtrack.
pub const BACKTRACK_SHRINK: f64 = 0.5;
/// Maximum number of backtracks per line search.
pub const MAX_BACKTRACKS: usize = 40;
/// Largest first trial step (sup norm, working coordinates).
const MAX_TRIAL_STEP: f64 = 1.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FitError {
    #[error("initial point does not give a positive-definite volatility")]
    InitNotPD,
    #[error("initial point is infeasible: {0}")]
    InitInfeasible(SemError),
    #[error("all {0} starts failed")]
    AllStartsFailed(usize),
    #[error("invalid fit configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    QuasiLik(#[from] QuasiLikError),
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitStrategy {
    /// Start from the given point (the reference protocol starts at the truth).
    GivenPoint(Vec<f64>),
    /// `count` starts: a data-driven default and `count - 1` random perturbations.
    MultiStart { count: usize, seed: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    pub init: InitStrategy,
    pub max_iters: usize,
    /// Relative gradient tolerance: stop when `|grad H| <= grad_tol * max(1, |H|)`.
    pub grad_tol: f64,
    /// Stop when an accepted step is shorter than this (sup norm, working coordinates).
    pub step_tol: f64,
    pub reparameterize_positives: bool,
}

impl FitConfig {
    pub fn given(theta: Vec<f64>) -> Self {
        FitConfig {
            init: InitStrategy::GivenPoint(theta),
            ..FitConfig::default()
        }
    }

    pub fn multi_start(count: usize, seed: u64) -> Self {
        FitConfig {
            init: InitStrategy::MultiStart { count, seed },
            ..FitConfig::default()
        }
    }

    pub fn validate(&self) -> Result<(), FitError> {
        if self.max_iters < 1 {
            return Err(FitError::InvalidConfig("max_iters must be at least 1".into()));
        }
        if !(self.grad_tol > 0.0) || !(self.step_tol > 0.0) {
            return Err(FitError::InvalidConfig("tolerances must be positive".into()));
        }
        if let InitStrategy::MultiStart { count: 0, .. } = self.init {
            return Err(FitError::InvalidConfig("multi-start count must be at least 1".into()));
        }
        Ok(())
    }
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            init: InitStrategy::MultiStart { count: 1, seed: 0 },
            max_iters: 1000,
            grad_tol: 1e-6,
            step_tol: 1e-10,
            reparameterize_positives: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    /// `q = 0`, nothing to optimize.
    NoParameters,
    GradientTolerance,
    StepTolerance,
    MaxIterations,
    /// The line search could not increase `H` even from a steepest-ascent direction.
    NoAscentDirection,
}

impl StopReason {
    pub fn is_converged(self) -> bool {
        matches!(
            self,
            StopReason::NoParameters | StopReason::GradientTolerance | StopReason::StepTolerance
        )
    }
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub theta_hat: ThetaVector,
    /// `H` at `theta_hat`.
    pub h_value: f64,
    pub converged: bool,
    pub stop_reason: StopReason,
    pub iterations: usize,
    /// Euclidean norm of `dH` with respect to the working parameters at `theta_hat`.
    pub grad_norm: f64,
    pub n_kept: usize,
    /// `H` after each accepted iteration, starting with the initial point.
    pub h_trace: Vec<f64>,
    /// Index of the winning start for multi-start fits, 0 otherwise.
    pub start_index: usize,
}

struct Objective<'a> {
    spec: &'a CheckedSpec,
    stats: &'a TruncationStats,
    n: usize,
    log_scale: Vec<bool>,
}

struct Eval {
    /// `-H / n`
    f: f64,
    /// gradient of `f` in working coordinates
    g: DVector<f64>,
    h: f64,
}

impl<'a> Objective<'a> {
    fn new(spec: &'a CheckedSpec, stats: &'a TruncationStats, reparam: bool) -> Self {
        let log_scale = spec
            .positivity_flags()
            .iter()
            .map(|&p| p && reparam)
            .collect();
        Objective {
            spec,
            stats,
            n: stats.n(),
            log_scale,
        }
    }

    fn to_work(&self, theta: &[f64]) -> DVector<f64> {
        DVector::from_iterator(
            theta.len(),
            theta
                .iter()
                .zip(&self.log_scale)
                .map(|(&t, &ls)| if ls { t.ln() } else { t }),
        )
    }

    fn to_theta(&self, x: &DVector<f64>) -> Vec<f64> {
        x.iter()
            .zip(&self.log_scale)
            .map(|(&v, &ls)| if ls { v.exp() } else { v })
            .collect()
    }

    fn eval(&self, x: &DVector<f64>) -> Result<Option<Eval>, QuasiLikError> {
        let theta = self.to_theta(x);
        if !self.spec.is_feasible(&theta) {
            return Ok(None);
        }
        match quasi_lik::value_and_grad(self.spec, &theta, self.stats, self.n) {
            Ok((h, grad)) => {
                if !h.is_finite() || grad.iter().any(|v| !v.is_finite()) {
                    return Ok(None);
                }
                let scale = -1.0 / self.n as f64;
                let g = DVector::from_iterator(
                    grad.len(),
                    grad.iter()
                        .zip(&theta)
                        .zip(&self.log_scale)
                        .map(|((&gk, &tk), &ls)| scale * if ls { gk * tk } else { gk }),
                );
                Ok(Some(Eval {
                    f: scale * h,
                    g,
                    h,
                }))
            }
            Err(QuasiLikError::NotPositiveDefinite)
            | Err(QuasiLikError::Sem(SemError::SingularPsi)) => Ok(None),
            Err(e) => Err(e),
        }
    }
}

/// Maximizes `H` over `theta` for one starting point.
fn fit_from(
    spec: &CheckedSpec,
    stats: &TruncationStats,
    start: &[f64],
    config: &FitConfig,
) -> Result<FitResult, FitError> {
    let obj = Objective::new(spec, stats, config.reparameterize_positives);
    let n = obj.n as f64;
    ThetaVector::new(spec, start.to_vec()).map_err(FitError::InitInfeasible)?;

    let mut x = obj.to_work(start);
    let mut cur = obj.eval(&x)?.ok_or(FitError::InitNotPD)?;
    let q = spec.q();
    let mut h_trace = vec![cur.h];

    let finish = |x: &DVector<f64>, cur: &Eval, iterations, stop: StopReason, h_trace| {
        let theta = obj.to_theta(x);
        Ok(FitResult {
            theta_hat: ThetaVector::new(spec, theta).expect("iterates stay feasible"),
            h_value: cur.h,
            converged: stop.is_converged(),
            stop_reason: stop,
            iterations,
            grad_norm: cur.g.norm() * n,
            n_kept: stats.n_kept(),
            h_trace,
            start_index: 0,
        })
    };

    if q == 0 {
        return finish(&x, &cur, 0, StopReason::NoParameters, h_trace);
    }

    let identity = DMatrix::<f64>::identity(q, q);
    let mut hinv = identity.clone();
    let mut hinv_is_identity = true;
    let mut iterations = 0;
    loop {
        if cur.g.norm() * n <= config.grad_tol * cur.h.abs().max(1.0) {
            return finish(&x, &cur, iterations, StopReason::GradientTolerance, h_trace);
        }
        if iterations >= config.max_iters {
            return finish(&x, &cur, iterations, StopReason::MaxIterations, h_trace);
        }

        let mut d = -(&hinv * &cur.g);
        let mut slope = cur.g.dot(&d);
        if !(slope < 0.0) {
            hinv = identity.clone();
            hinv_is_identity = true;
            d = -cur.g.clone();
            slope = cur.g.dot(&d);
        }
        let dmax = d.amax();
        let mut alpha = if hinv_is_identity && dmax > MAX_TRIAL_STEP {
            MAX_TRIAL_STEP / dmax
        } else {
            1.0
        };

        let mut accepted = None;
        for _ in 0..=MAX_BACKTRACKS {
            let trial = &x + &d * alpha;
            if let Some(ev) = obj.eval(&trial)? {
                if ev.f <= cur.f + ARMIJO_C1 * alpha * slope {
                    accepted = Some((trial, ev));
                    break;
                }
            }
            alpha *= BACKTRACK_SHRINK;
        }

        let Some((x_new, next)) = accepted else {
            if hinv_is_identity {
                return finish(&x, &cur, iterations, StopReason::NoAscentDirection, h_trace);
            }
            hinv = identity.clone();
            hinv_is_identity = true;
            continue;
        };

        let s = &x_new - &x;
        let y = &next.g - &cur.g;
        x = x_new;
        cur = next;
        iterations += 1;
        h_trace.push(cur.h);

        if s.amax() < config.step_tol {
            return finish(&x, &cur, iterations, StopReason::StepTolerance, h_trace);
        }

        let sy = s.dot(&y);
        if sy > 1e-12 * s.norm() * y.norm() {
            if hinv_is_identity {
                hinv = &identity * (sy / y.norm_squared());
            }
            let rho = 1.0 / sy;
            let hy = &hinv * &y;
            let yhy = y.dot(&hy);
            // Inverse-Hessian BFGS update, expanded form.
            hinv += (&s * s.transpose()) * (rho * rho * yhy + rho)
                - (&hy * s.transpose() + &s * hy.transpose()) * rho;
            hinv_is_identity = false;
        }
    }
}

/// Fits `spec` to the truncation statistics.
///
/// With [`InitStrategy::MultiStart`] this is [`multi_start_fit`].
pub fn fit(spec: &CheckedSpec, stats: &TruncationStats, config: &FitConfig) -> Result<FitResult, FitError> {
    config.validate()?;
    check_dims(spec, stats)?;
    match &config.init {
        InitStrategy::GivenPoint(theta) => {
            if theta.len() != spec.q() {
                return Err(FitError::InitInfeasible(SemError::ThetaLength {
                    expected: spec.q(),
                    found: theta.len(),
                }));
            }
            fit_from(spec, stats, theta, config)
        }
        InitStrategy::MultiStart { .. } => multi_start_fit(spec, stats, config),
    }
}

fn check_dims(spec: &CheckedSpec, stats: &TruncationStats) -> Result<(), FitError> {
    if spec.p() != stats.p() {
        return Err(QuasiLikError::DimensionMismatch {
            stats: stats.p(),
            model: spec.p(),
        }
        .into());
    }
    Ok(())
}

/// A data-driven starting point.
///
/// Free loadings start at 1, structural coefficients and off-diagonal
/// volatilities at 0, measurement-error variances at half the matching
/// diagonal of the realized volatility, and latent-factor variances at half
/// its mean diagonal.
pub fn default_start(spec: &CheckedSpec, stats: &TruncationStats) -> Vec<f64> {
    let s = spec.spec();
    let diag = stats.sigma_check().diagonal();
    let p = diag.len().max(1) as f64;
    let mean_diag = (diag.iter().sum::<f64>() / p).max(1e-8);
    let mut theta: Vec<Option<f64>> = vec![None; spec.q()];
    for block in Block::ALL {
        for (i, j, cell) in s.block(block).cells() {
            let Cell::Free(k) = cell else { continue };
            if theta[k].is_some() {
                continue;
            }
            let v = match block {
                Block::Lambda1 | Block::Lambda2 => 1.0,
                Block::B | Block::Gamma => 0.0,
                _ if i != j => 0.0,
                Block::SigmaDelta => 0.5 * diag[i].max(1e-8),
                Block::SigmaEps => 0.5 * diag[s.p1 + i].max(1e-8),
                _ => 0.5 * mean_diag,
            };
            theta[k] = Some(v);
        }
    }
    theta.into_iter().map(|v| v.unwrap_or(0.0)).collect()
}

/// Start `index` of a multi-start run: the default start for index 0,
/// otherwise a seeded perturbation of it that keeps positive coordinates
/// positive.
pub fn start_point(spec: &CheckedSpec, stats: &TruncationStats, seed: u64, index: usize) -> Vec<f64> {
    let base = default_start(spec, stats);
    if index == 0 {
        return base;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    let noise = Normal::new(0.0, 0.5).expect("valid normal");
    base.iter()
        .zip(spec.positivity_flags())
        .map(|(&b, &pos)| {
            let z: f64 = noise.sample(&mut rng);
            if pos {
                b * z.exp()
            } else {
                b + z
            }
        })
        .collect()
}

/// Runs `count` fits from [`start_point`]s and keeps the largest `H`
/// (ties go to the lowest start index).
pub fn multi_start_fit(
    spec: &CheckedSpec,
    stats: &TruncationStats,
    config: &FitConfig,
) -> Result<FitResult, FitError> {
    config.validate()?;
    check_dims(spec, stats)?;
    let (count, seed) = match config.init {
        InitStrategy::MultiStart { count, seed } => (count, seed),
        InitStrategy::GivenPoint(_) => return fit(spec, stats, config),
    };
    let results: Vec<Result<FitResult, FitError>> = (0..count)
        .into_par_iter()
        .map(|i| {
            let start = start_point(spec, stats, seed, i);
            fit_from(spec, stats, &start, config).map(|mut r| {
                r.start_index = i;
                r
            })
        })
        .collect();
    let mut best: Option<FitResult> = None;
    for r in results.into_iter().flatten() {
        if best.as_ref().is_none_or(|b| r.h_value > b.h_value) {
            best = Some(r);
        }
    }
    best.ok_or(FitError::AllStartsFailed(count))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sem::StructuralSpec;

    fn scalar_spec() -> CheckedSpec {
        let mut s = StructuralSpec::zeros(1, 0, 1, 0);
        s.lambda1.set(0, 0, Cell::Fixed(1.0));
        s.sigma_xi.set(0, 0, Cell::Free(0));
        s.validate().unwrap()
    }

    fn scalar_stats(s: f64, n: usize) -> TruncationStats {
        TruncationStats::from_parts(DMatrix::from_element(1, 1, s), vec![true; n])
    }

    #[test]
    fn no_parameters_is_immediate() {
        let mut s = StructuralSpec::zeros(1, 0, 1, 0);
        s.sigma_delta.set(0, 0, Cell::Fixed(2.0));
        let spec = s.validate().unwrap();
        let st = scalar_stats(1.0, 10);
        let r = fit(&spec, &st, &FitConfig::given(vec![])).unwrap();
        assert!(r.converged);
        assert_eq!(r.iterations, 0);
        assert!(r.theta_hat.is_empty());
        let expect = -5.0 * 0.5 - 5.0 * 2f64.ln();
        assert!((r.h_value - expect).abs() < 1e-12);
    }

    #[test]
    fn scalar_model_recovers_realized_variance() {
        let spec = scalar_spec();
        let st = scalar_stats(0.37, 5000);
        for init in [0.1, 1.0, 10.0] {
            let r = fit(&spec, &st, &FitConfig::given(vec![init])).unwrap();
            assert!(r.converged, "{init}: {:?}", r.stop_reason);
            assert!((r.theta_hat[0] - 0.37).abs() <= 1e-6, "{init}: {}", r.theta_hat[0]);
            assert!(r.h_trace.windows(2).all(|w| w[1] >= w[0]));
        }
    }

    #[test]
    fn reparameterization_does_not_move_optimum() {
        let spec = scalar_spec();
        let st = scalar_stats(0.37, 5000);
        let mut cfg = FitConfig::given(vec![1.5]);
        let a = fit(&spec, &st, &cfg).unwrap();
        cfg.reparameterize_positives = false;
        let b = fit(&spec, &st, &cfg).unwrap();
        assert!(b.converged);
        assert!((a.h_value - b.h_value).abs() <= 1e-6);
        assert!(b.theta_hat[0] > 0.0);
    }

    #[test]
    fn bad_init_rejected() {
        let spec = scalar_spec();
        let st = scalar_stats(0.37, 10);
        assert!(matches!(
            fit(&spec, &st, &FitConfig::given(vec![-1.0])),
            Err(FitError::InitInfeasible(_))
        ));
        assert!(matches!(
            fit(&spec, &st, &FitConfig::given(vec![1.0, 2.0])),
            Err(FitError::InitInfeasible(_))
        ));
        let mut cfg = FitConfig::given(vec![1.0]);
        cfg.max_iters = 0;
        assert!(matches!(fit(&spec, &st, &cfg), Err(FitError::InvalidConfig(_))));
    }

    #[test]
    fn singular_start_is_not_pd() {
        // Fixed-zero measurement error and a free factor variance: PD only if > 0,
        // but a zero loading makes the second observable degenerate.
        let mut s = StructuralSpec::zeros(2, 0, 1, 0);
        s.lambda1.set(0, 0, Cell::Fixed(1.0));
        s.lambda1.set(1, 0, Cell::Free(0));
        s.sigma_xi.set(0, 0, Cell::Free(1));
        let spec = s.validate().unwrap();
        let st = TruncationStats::from_parts(DMatrix::identity(2, 2), vec![true; 10]);
        assert_eq!(
            fit(&spec, &st, &FitConfig::given(vec![0.5, 1.0])).unwrap_err(),
            FitError::InitNotPD
        );
    }

    #[test]
    fn multi_start_single_equals_given_default() {
        let spec = scalar_spec();
        let st = scalar_stats(0.37, 1000);
        let a = multi_start_fit(&spec, &st, &FitConfig::multi_start(1, 9)).unwrap();
        let b = fit(&spec, &st, &FitConfig::given(default_start(&spec, &st))).unwrap();
        assert_eq!(a.theta_hat, b.theta_hat);
        assert_eq!(a.h_value, b.h_value);
        assert_eq!(a.iterations, b.iterations);
    }

    #[test]
    fn start_points_respect_positivity_and_are_deterministic() {
        let spec = crate::presets::model1();
        let st = TruncationStats::from_parts(DMatrix::identity(15, 15), vec![true; 100]);
        for i in 0..5 {
            let a = start_point(&spec, &st, 7, i);
            assert!(spec.is_feasible(&a));
            assert_eq!(a, start_point(&spec, &st, 7, i));
        }
        assert_ne!(start_point(&spec, &st, 7, 1), start_point(&spec, &st, 7, 2));
    }
}
