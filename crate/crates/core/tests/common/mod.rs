#![allow(dead_code)]

use jumpsem::linalg;
use jumpsem::quasi_lik::{self, PathData, TruncationStats};
use jumpsem::sem::{self, Cell, CheckedSpec, EntryMap, StructuralSpec};
use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

/// A random structural model: one exogenous factor, up to two endogenous
/// factors with a free `B[1,0]`, and a free covariance between the first two
/// `delta` coordinates. Small enough for direct-form oracles.
pub fn random_spec<R: Rng>(rng: &mut R) -> CheckedSpec {
    let p1 = rng.random_range(2..=5);
    let k2 = rng.random_range(0..=2);
    let p2 = if k2 == 0 { 0 } else { rng.random_range(k2..=6) };
    let mut next = 0;
    let mut free = || {
        next += 1;
        Cell::Free(next - 1)
    };
    let mut s = StructuralSpec::zeros(p1, p2, 1, k2);
    s.lambda1.set(0, 0, Cell::Fixed(1.0));
    for i in 1..p1 {
        s.lambda1.set(i, 0, free());
    }
    for i in 0..p2 {
        let f = i % k2.max(1);
        if i < k2 {
            s.lambda2.set(i, i, Cell::Fixed(1.0));
        } else {
            s.lambda2.set(i, f, free());
        }
    }
    for r in 0..k2 {
        s.gamma.set(r, 0, free());
    }
    if k2 == 2 {
        s.b.set(1, 0, free());
    }
    s.sigma_xi = EntryMap::diagonal(&[free()]);
    for i in 0..p1 {
        s.sigma_delta.set(i, i, free());
    }
    s.sigma_delta.set(1, 0, free());
    for i in 0..p2 {
        s.sigma_eps.set(i, i, free());
    }
    for r in 0..k2 {
        s.sigma_zeta.set(r, r, free());
    }
    s.validate().expect("generated spec is valid")
}

/// Random parameter value with the `delta` covariance kept small so the
/// implied volatility stays positive definite.
pub fn random_theta<R: Rng>(spec: &CheckedSpec, rng: &mut R) -> Vec<f64> {
    let mut t = sem::random_theta(spec, rng);
    if let Cell::Free(k) = spec.spec().sigma_delta.get(1, 0) {
        t[k] *= 0.1;
    }
    t
}

/// Brownian path with covariance `sigma` and, optionally, a few large
/// planted jumps.
pub fn gaussian_path<R: Rng>(sigma: &DMatrix<f64>, n: usize, h: f64, spikes: usize, rng: &mut R) -> PathData {
    let p = sigma.nrows();
    let l = linalg::cholesky(sigma, 0.0).expect("PD");
    let mut x = DMatrix::zeros(n + 1, p);
    for i in 1..=n {
        let z = nalgebra::DVector::from_fn(p, |_, _| rng.sample::<f64, _>(StandardNormal));
        let dx = &l * z * h.sqrt();
        for j in 0..p {
            x[(i, j)] = x[(i - 1, j)] + dx[j];
        }
    }
    for _ in 0..spikes {
        let at = rng.random_range(1..=n);
        let j = rng.random_range(0..p);
        for i in at..=n {
            x[(i, j)] += 3.0;
        }
    }
    PathData::new(h, x).expect("valid path")
}

/// `max |a - b| / max(1, max |b|)`.
pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let scale = b.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max) / scale
}

/// Central finite differences of `vech(Sigma(theta))`.
pub fn fd_jacobian(spec: &CheckedSpec, theta: &[f64], step: f64) -> DMatrix<f64> {
    let p = spec.p();
    let mut jac = DMatrix::zeros(linalg::vech_len(p), theta.len());
    for k in 0..theta.len() {
        let mut up = theta.to_vec();
        let mut dn = theta.to_vec();
        up[k] += step;
        dn[k] -= step;
        let su = linalg::vech(sem::assemble_sigma(spec, &up).unwrap().sigma());
        let sd = linalg::vech(sem::assemble_sigma(spec, &dn).unwrap().sigma());
        jac.set_column(k, &((su - sd) / (2.0 * step)));
    }
    jac
}

/// Central finite differences of `H`.
pub fn fd_gradient(spec: &CheckedSpec, theta: &[f64], stats: &TruncationStats) -> Vec<f64> {
    (0..theta.len())
        .map(|k| {
            let step = 1e-5 * theta[k].abs().max(1.0);
            let mut up = theta.to_vec();
            let mut dn = theta.to_vec();
            up[k] += step;
            dn[k] -= step;
            let hu = quasi_lik::quasi_loglik_at(spec, &up, stats).unwrap();
            let hd = quasi_lik::quasi_loglik_at(spec, &dn, stats).unwrap();
            (hu - hd) / (2.0 * step)
        })
        .collect()
}

/// `Gamma(k / 2)` by the half-integer recursion from `Gamma(1/2) = sqrt(pi)`
/// and `Gamma(1) = 1`.
fn gamma_half(k: usize) -> f64 {
    let (mut g, mut a) = if k.is_multiple_of(2) { (1.0, 1.0) } else { (std::f64::consts::PI.sqrt(), 0.5) };
    while a < k as f64 / 2.0 {
        g *= a;
        a += 1.0;
    }
    g
}

/// `P(chi2_k > x)` by composite Simpson integration of the density on
/// `[x, x + 400]` (the tail beyond is below `1e-80`).
pub fn chi2_survival_oracle(k: usize, x: f64) -> f64 {
    let c = 1.0 / (2f64.powf(k as f64 / 2.0) * gamma_half(k));
    let f = |t: f64| c * t.powf(k as f64 / 2.0 - 1.0) * (-t / 2.0).exp();
    let m = 400_000;
    let b = x + 400.0;
    let h = (b - x) / m as f64;
    let mut s = f(x) + f(b);
    for i in 1..m {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(x + i as f64 * h);
    }
    s * h / 3.0
}

pub fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}
