//! Jump-truncated Gaussian quasi-log-likelihood of the observed increments.
//!
//! An increment `dX_i` is treated as jump-contaminated and dropped when
//! `|dX_i| > D h^rho` (Euclidean norm). With `N` kept increments and the
//! truncated realized volatility `S = (1 / (n h)) sum_kept dX dX'`, the
//! quasi-log-likelihood at a model volatility `Sigma` reduces to
//!
//! ```text
//! H = -(n / 2) tr(Sigma^{-1} S) - (N / 2) log det Sigma
//! ```
//!
//! so `(N, S)` are computed once per path and reused for every model and
//! every optimizer iteration.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::linalg;
use crate::sem::{self, CheckedSpec, ImpliedCovariance, SemError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuasiLikError {
    #[error("implied volatility is not positive definite")]
    NotPositiveDefinite,
    #[error("rho = {0} is outside [1/3, 1/2)")]
    RhoOutOfRange(f64),
    #[error("threshold scale D = {0} must be positive and finite")]
    InvalidScale(f64),
    #[error("path data: {0}")]
    InvalidPath(String),
    #[error("truncation statistics have dimension {stats}, model has {model} observables")]
    DimensionMismatch { stats: usize, model: usize },
    #[error(transparent)]
    Sem(#[from] SemError),
}

/// Equally spaced observations `X_{t_0}, ..., X_{t_n}` with `t_i = i h`.
#[derive(Debug, Clone, PartialEq)]
pub struct PathData {
    h: f64,
    x: DMatrix<f64>,
}

impl PathData {
    /// `x` has `n + 1` rows and `p` columns.
    pub fn new(h: f64, x: DMatrix<f64>) -> Result<Self, QuasiLikError> {
        if !(h > 0.0) || !h.is_finite() {
            return Err(QuasiLikError::InvalidPath(format!("step h = {h} must be positive")));
        }
        if x.nrows() < 2 {
            return Err(QuasiLikError::InvalidPath(format!(
                "need at least 2 observations, got {}",
                x.nrows()
            )));
        }
        if x.ncols() == 0 {
            return Err(QuasiLikError::InvalidPath("no observable columns".into()));
        }
        let n = (x.nrows() - 1) as f64;
        if !(n * h).is_finite() {
            return Err(QuasiLikError::InvalidPath("horizon n h is not finite".into()));
        }
        Ok(PathData { h, x })
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    /// Number of increments.
    pub fn n(&self) -> usize {
        self.x.nrows() - 1
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    /// Horizon `T = n h`.
    pub fn t_end(&self) -> f64 {
        self.n() as f64 * self.h
    }

    pub fn observations(&self) -> &DMatrix<f64> {
        &self.x
    }

    /// `X_{t_i} - X_{t_{i-1}}` for `i` in `1..=n`, written into `out`.
    pub fn increment_into(&self, i: usize, out: &mut [f64]) {
        for (j, o) in out.iter_mut().enumerate() {
            *o = self.x[(i, j)] - self.x[(i - 1, j)];
        }
    }
}

/// Threshold parameters `(D, rho)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncationRule {
    d: f64,
    rho: f64,
}

impl TruncationRule {
    pub fn new(d: f64, rho: f64) -> Result<Self, QuasiLikError> {
        if !(d > 0.0) || !d.is_finite() {
            return Err(QuasiLikError::InvalidScale(d));
        }
        if !(1.0 / 3.0..0.5).contains(&rho) {
            return Err(QuasiLikError::RhoOutOfRange(rho));
        }
        Ok(TruncationRule { d, rho })
    }

    pub fn d(&self) -> f64 {
        self.d
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }
}

impl Default for TruncationRule {
    /// `D = 10`, `rho = 0.4`.
    fn default() -> Self {
        TruncationRule { d: 10.0, rho: 0.4 }
    }
}

/// `D h^rho`.
pub fn truncation_threshold(h: f64, rule: &TruncationRule) -> f64 {
    rule.d * h.powf(rule.rho)
}

/// Sufficient statistics of the truncated quasi-likelihood.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncationStats {
    n_kept: usize,
    sigma_check: DMatrix<f64>,
    keep: Vec<bool>,
}

impl TruncationStats {
    /// Applies the truncation rule to every increment of `path`.
    pub fn compute(path: &PathData, rule: &TruncationRule) -> Self {
        let p = path.p();
        let n = path.n();
        let thr = truncation_threshold(path.h(), rule);
        let thr2 = thr * thr;
        let mut acc = vec![0.0; p * p];
        let mut keep = Vec::with_capacity(n);
        let mut dx = vec![0.0; p];
        for i in 1..=n {
            path.increment_into(i, &mut dx);
            let norm2: f64 = dx.iter().map(|v| v * v).sum();
            // Norms are compared squared; the boundary case is kept.
            let kept = norm2 <= thr2;
            keep.push(kept);
            if kept {
                for a in 0..p {
                    let da = dx[a];
                    for b in 0..=a {
                        acc[a * p + b] += da * dx[b];
                    }
                }
            }
        }
        let scale = 1.0 / path.t_end();
        let mut sigma_check = DMatrix::zeros(p, p);
        for a in 0..p {
            for b in 0..=a {
                let v = acc[a * p + b] * scale;
                sigma_check[(a, b)] = v;
                sigma_check[(b, a)] = v;
            }
        }
        let n_kept = keep.iter().filter(|&&k| k).count();
        TruncationStats {
            n_kept,
            sigma_check,
            keep,
        }
    }

    /// Statistics supplied directly; `N` is the number of `true` flags.
    pub fn from_parts(sigma_check: DMatrix<f64>, keep: Vec<bool>) -> Self {
        let n_kept = keep.iter().filter(|&&k| k).count();
        TruncationStats {
            n_kept,
            sigma_check,
            keep,
        }
    }

    /// `N_n`.
    pub fn n_kept(&self) -> usize {
        self.n_kept
    }

    /// Total number of increments `n`.
    pub fn n(&self) -> usize {
        self.keep.len()
    }

    /// Truncated realized volatility.
    pub fn sigma_check(&self) -> &DMatrix<f64> {
        &self.sigma_check
    }

    pub fn keep(&self) -> &[bool] {
        &self.keep
    }

    pub fn p(&self) -> usize {
        self.sigma_check.nrows()
    }
}

fn check_dims(spec: &CheckedSpec, stats: &TruncationStats) -> Result<(), QuasiLikError> {
    if spec.p() != stats.p() {
        return Err(QuasiLikError::DimensionMismatch {
            stats: stats.p(),
            model: spec.p(),
        });
    }
    Ok(())
}

/// Reduced-form quasi-log-likelihood from the sufficient statistics.
pub fn quasi_loglik(
    sigma: &ImpliedCovariance,
    stats: &TruncationStats,
    n: usize,
) -> Result<f64, QuasiLikError> {
    let l = sigma.cholesky().ok_or(QuasiLikError::NotPositiveDefinite)?;
    let solved = linalg::chol_solve(l, stats.sigma_check());
    let trace = solved.trace();
    let log_det = linalg::chol_log_det(l);
    Ok(-0.5 * n as f64 * trace - 0.5 * stats.n_kept() as f64 * log_det)
}

/// Quasi-log-likelihood of `spec` at `theta`; the usual entry point.
pub fn quasi_loglik_at(
    spec: &CheckedSpec,
    theta: &[f64],
    stats: &TruncationStats,
) -> Result<f64, QuasiLikError> {
    check_dims(spec, stats)?;
    let sigma = sem::assemble_sigma(spec, theta)?;
    quasi_loglik(&sigma, stats, stats.n())
}

/// The quasi-log-likelihood summed increment by increment.
///
/// Independent of [`TruncationStats`]; used to check the reduced form.
pub fn quasi_loglik_direct(
    spec: &CheckedSpec,
    theta: &[f64],
    path: &PathData,
    rule: &TruncationRule,
) -> Result<f64, QuasiLikError> {
    if spec.p() != path.p() {
        return Err(QuasiLikError::DimensionMismatch {
            stats: path.p(),
            model: spec.p(),
        });
    }
    let sigma = sem::assemble_sigma(spec, theta)?;
    let l = sigma.cholesky().ok_or(QuasiLikError::NotPositiveDefinite)?;
    let log_det = linalg::chol_log_det(l);
    let thr = truncation_threshold(path.h(), rule);
    let mut dx = vec![0.0; path.p()];
    let mut quad = 0.0;
    let mut det_part = 0.0;
    for i in 1..=path.n() {
        path.increment_into(i, &mut dx);
        let norm = dx.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm <= thr {
            let v = DVector::from_column_slice(&dx);
            let z = l.solve_lower_triangular(&v).expect("positive pivots");
            quad += z.norm_squared();
            det_part += log_det;
        }
    }
    Ok(-quad / (2.0 * path.h()) - 0.5 * det_part)
}

/// `dH / dtheta`, analytic.
///
/// `dH/dtheta_k = (1/2) tr[(n Sigma^{-1} S Sigma^{-1} - N Sigma^{-1}) dSigma/dtheta_k]`.
pub fn grad_h(
    spec: &CheckedSpec,
    theta: &[f64],
    stats: &TruncationStats,
    n: usize,
) -> Result<Vec<f64>, QuasiLikError> {
    Ok(value_and_grad(spec, theta, stats, n)?.1)
}

/// `H` and `dH/dtheta` sharing one factorization.
pub fn value_and_grad(
    spec: &CheckedSpec,
    theta: &[f64],
    stats: &TruncationStats,
    n: usize,
) -> Result<(f64, Vec<f64>), QuasiLikError> {
    check_dims(spec, stats)?;
    let sigma = sem::assemble_sigma(spec, theta)?;
    let l = sigma.cholesky().ok_or(QuasiLikError::NotPositiveDefinite)?;
    let inv = linalg::chol_inverse(l);
    let inv_s = &inv * stats.sigma_check();
    let value = -0.5 * n as f64 * inv_s.trace()
        - 0.5 * stats.n_kept() as f64 * linalg::chol_log_det(l);

    let w = linalg::symmetrize(&(&inv_s * &inv * n as f64 - &inv * stats.n_kept() as f64));
    // tr(W dSigma) over vech coordinates: off-diagonal entries count twice.
    let p = spec.p();
    let mut weights = Vec::with_capacity(linalg::vech_len(p));
    for j in 0..p {
        for i in j..p {
            weights.push(if i == j { w[(i, j)] } else { 2.0 * w[(i, j)] });
        }
    }
    let weights = DVector::from_vec(weights);
    let jac = sem::sigma_jacobian(spec, theta)?;
    let grad = (jac.transpose() * weights) * 0.5;
    Ok((value, grad.iter().cloned().collect()))
}

/// Normalized Hessian `-(1/n) d^2 H / dtheta dtheta'` by central differences
/// of the analytic gradient.
#[derive(Debug, Clone)]
pub struct NormalizedHessian {
    /// Symmetrized estimate.
    pub gamma: DMatrix<f64>,
    /// `|A - A'| / |A|` (Frobenius) of the raw difference matrix.
    pub asymmetry: f64,
}

/// Step used for coordinate `k` of the finite-difference Hessian.
pub fn hessian_step(theta_k: f64) -> f64 {
    (1e-5 * theta_k.abs()).max(1e-5)
}

pub fn normalized_hessian(
    spec: &CheckedSpec,
    theta: &[f64],
    stats: &TruncationStats,
    n: usize,
) -> Result<NormalizedHessian, QuasiLikError> {
    let q = spec.q();
    let mut raw = DMatrix::zeros(q, q);
    for k in 0..q {
        let step = hessian_step(theta[k]);
        let mut tp = theta.to_vec();
        let mut tm = theta.to_vec();
        tp[k] += step;
        tm[k] -= step;
        let gp = grad_h(spec, &tp, stats, n)?;
        let gm = grad_h(spec, &tm, stats, n)?;
        for r in 0..q {
            raw[(r, k)] = -(gp[r] - gm[r]) / (2.0 * step * n as f64);
        }
    }
    let norm = linalg::frobenius(&raw);
    let asymmetry = if norm > 0.0 {
        linalg::frobenius(&(&raw - raw.transpose())) / norm
    } else {
        0.0
    };
    Ok(NormalizedHessian {
        gamma: linalg::symmetrize(&raw),
        asymmetry,
    })
}

/// Limit of `H / n` when the realized volatility equals `sigma0`:
/// `-(1/2) tr(Sigma^{-1} Sigma0) - (1/2) log det Sigma`.
pub fn limit_contrast(sigma: &ImpliedCovariance, sigma0: &DMatrix<f64>) -> Result<f64, QuasiLikError> {
    let l = sigma.cholesky().ok_or(QuasiLikError::NotPositiveDefinite)?;
    Ok(-0.5 * linalg::chol_solve(l, sigma0).trace() - 0.5 * linalg::chol_log_det(l))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sem::{Cell, StructuralSpec};

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
    fn rho_range_enforced() {
        assert!(TruncationRule::new(10.0, 0.4).is_ok());
        assert!(TruncationRule::new(10.0, 1.0 / 3.0).is_ok());
        assert!(matches!(TruncationRule::new(10.0, 0.5), Err(QuasiLikError::RhoOutOfRange(_))));
        assert!(matches!(TruncationRule::new(10.0, 0.3), Err(QuasiLikError::RhoOutOfRange(_))));
        assert!(matches!(TruncationRule::new(0.0, 0.4), Err(QuasiLikError::InvalidScale(_))));
    }

    #[test]
    fn threshold_values() {
        let rule = TruncationRule::new(10.0, 0.4).unwrap();
        assert!((truncation_threshold(1e-4, &rule) - 0.251_188_643_150_958).abs() < 1e-12);
        assert_eq!(truncation_threshold(1.0, &rule), 10.0);
        assert_eq!(TruncationRule::default(), rule);
    }

    #[test]
    fn zero_increments_all_kept() {
        let path = PathData::new(0.01, DMatrix::from_element(11, 3, 2.5)).unwrap();
        let st = TruncationStats::compute(&path, &TruncationRule::default());
        assert_eq!(st.n_kept(), 10);
        assert_eq!(st.sigma_check(), &DMatrix::zeros(3, 3));
    }

    #[test]
    fn boundary_increment_is_kept() {
        // h = 1 gives threshold exactly D.
        let rule = TruncationRule::new(5.0, 0.4).unwrap();
        let x = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 3.0, 4.0]);
        let path = PathData::new(1.0, x).unwrap();
        let st = TruncationStats::compute(&path, &rule);
        assert_eq!(st.n_kept(), 1);
        assert_eq!(st.keep(), &[true]);
    }

    #[test]
    fn planted_spike_is_removed() {
        let rule = TruncationRule::default();
        let h = 1e-3;
        let thr = truncation_threshold(h, &rule);
        let n = 50;
        let mut x = DMatrix::zeros(n + 1, 2);
        for i in 1..=n {
            let step = if i == 17 {
                [2.0 * thr * 0.6, 2.0 * thr * 0.8]
            } else {
                [0.01 * ((i as f64).sin()), 0.01 * ((i as f64).cos())]
            };
            x[(i, 0)] = x[(i - 1, 0)] + step[0];
            x[(i, 1)] = x[(i - 1, 1)] + step[1];
        }
        let path = PathData::new(h, x.clone()).unwrap();
        let st = TruncationStats::compute(&path, &rule);
        assert_eq!(st.n_kept(), n - 1);
        assert!(!st.keep()[16]);
        let mut direct = DMatrix::zeros(2, 2);
        for i in 1..=n {
            if i == 17 {
                continue;
            }
            let d = (x.row(i) - x.row(i - 1)).transpose();
            direct += &d * d.transpose();
        }
        direct /= n as f64 * h;
        assert!((st.sigma_check() - direct).abs().max() < 1e-15);
    }

    #[test]
    fn identity_loglik() {
        let sigma = ImpliedCovariance::from_matrix(DMatrix::identity(4, 4));
        let st = TruncationStats::from_parts(DMatrix::identity(4, 4), vec![true; 7]);
        assert!((quasi_loglik(&sigma, &st, 7).unwrap() + 7.0 * 4.0 / 2.0).abs() < 1e-12);
    }

    #[test]
    fn scaled_identity_loglik() {
        let sigma = ImpliedCovariance::from_matrix(DMatrix::identity(2, 2) * 2.0);
        let st = TruncationStats::from_parts(DMatrix::identity(2, 2), vec![true; 10]);
        let h = quasi_loglik(&sigma, &st, 10).unwrap();
        assert!((h - (-5.0 - 5.0 * 4f64.ln())).abs() < 1e-12);
        assert!((h + 11.931_471_805_599_453).abs() < 1e-9);
    }

    #[test]
    fn not_pd_rejected() {
        let sigma = ImpliedCovariance::from_matrix(DMatrix::zeros(2, 2));
        let st = TruncationStats::from_parts(DMatrix::identity(2, 2), vec![true; 3]);
        assert_eq!(quasi_loglik(&sigma, &st, 3), Err(QuasiLikError::NotPositiveDefinite));
    }

    #[test]
    fn scalar_gradient_and_hessian() {
        let spec = scalar_spec();
        let (s, n) = (0.8, 1000);
        let st = scalar_stats(s, n);
        let g = grad_h(&spec, &[s], &st, n).unwrap();
        assert!(g[0].abs() < 1e-9);
        let theta = 1.3;
        let g = grad_h(&spec, &[theta], &st, n).unwrap();
        let expect = 0.5 * n as f64 * (s / (theta * theta) - 1.0 / theta);
        assert!((g[0] - expect).abs() < 1e-9 * expect.abs());

        let hess = normalized_hessian(&spec, &[s], &st, n).unwrap();
        let expect = 1.0 / (2.0 * s * s);
        assert!((hess.gamma[(0, 0)] - expect).abs() < 1e-6 * expect);
    }

    #[test]
    fn zero_data_direct_is_log_det_only() {
        let spec = scalar_spec();
        let path = PathData::new(0.1, DMatrix::zeros(6, 1)).unwrap();
        let h = quasi_loglik_direct(&spec, &[2.0], &path, &TruncationRule::default()).unwrap();
        assert!((h + 0.5 * 5.0 * 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn identity_direct_is_scaled_sum_of_squares() {
        let mut s = StructuralSpec::zeros(2, 0, 1, 0);
        s.sigma_delta.set(0, 0, Cell::Fixed(1.0));
        s.sigma_delta.set(1, 1, Cell::Fixed(1.0));
        let spec = s.validate().unwrap();
        let x = DMatrix::from_row_slice(3, 2, &[0.0, 0.0, 0.1, -0.2, 0.3, 0.0]);
        let h = 0.5;
        let path = PathData::new(h, x).unwrap();
        let rule = TruncationRule::new(100.0, 0.4).unwrap();
        let got = quasi_loglik_direct(&spec, &[], &path, &rule).unwrap();
        let ss = 0.01 + 0.04 + 0.04 + 0.04;
        assert!((got + ss / (2.0 * h)).abs() < 1e-14);
    }

    #[test]
    fn path_validation() {
        assert!(PathData::new(0.0, DMatrix::zeros(3, 1)).is_err());
        assert!(PathData::new(0.1, DMatrix::zeros(1, 1)).is_err());
        assert!(PathData::new(0.1, DMatrix::zeros(3, 0)).is_err());
    }
}
