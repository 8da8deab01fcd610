//! Euler simulation of latent jump-diffusions and of the observables they
//! drive through the structural equations.
//!
//! Each latent block follows `dx = -K (x - mu) dt + S dW + dJ`, where `J` is a
//! per-coordinate compound Poisson process with centered normal jump sizes.
//! One Euler step is taken per observation interval.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson, StandardNormal};
use thiserror::Error;

use crate::quasi_lik::PathData;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid latent process: {0}")]
    InvalidSde(String),
    #[error("invalid true model: {0}")]
    InvalidModel(String),
    #[error("I - B is singular")]
    SingularPsi,
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
}

/// Compound Poisson jumps of one latent coordinate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpSpec {
    /// Jumps per unit time.
    pub intensity: f64,
    /// Variance of the centered normal jump size.
    pub variance: f64,
}

impl JumpSpec {
    pub const NONE: JumpSpec = JumpSpec {
        intensity: 0.0,
        variance: 0.0,
    };
}

/// A multivariate mean-reverting jump-diffusion.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentSdeSpec {
    /// Mean-reversion matrix `K` (`dim x dim`).
    pub drift: DMatrix<f64>,
    /// Long-run mean `mu`.
    pub mean: DVector<f64>,
    /// Diffusion coefficient `S` (`dim x r`).
    pub diffusion: DMatrix<f64>,
    pub jumps: Vec<JumpSpec>,
    pub x0: DVector<f64>,
}

impl LatentSdeSpec {
    /// Independent coordinates: diagonal `K` and `S`.
    pub fn diagonal(rates: &[f64], mean: &[f64], vols: &[f64], jumps: &[JumpSpec], x0: &[f64]) -> Self {
        LatentSdeSpec {
            drift: DMatrix::from_diagonal(&DVector::from_column_slice(rates)),
            mean: DVector::from_column_slice(mean),
            diffusion: DMatrix::from_diagonal(&DVector::from_column_slice(vols)),
            jumps: jumps.to_vec(),
            x0: DVector::from_column_slice(x0),
        }
    }

    pub fn dim(&self) -> usize {
        self.x0.len()
    }

    /// `S S'`.
    pub fn volatility(&self) -> DMatrix<f64> {
        &self.diffusion * self.diffusion.transpose()
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let d = self.dim();
        let bad = |m: String| Err(SimError::InvalidSde(m));
        if self.drift.shape() != (d, d) {
            return bad(format!("drift is {:?}, expected {d}x{d}", self.drift.shape()));
        }
        if self.mean.len() != d || self.jumps.len() != d || self.diffusion.nrows() != d {
            return bad(format!("mean, jumps and diffusion rows must have length {d}"));
        }
        let finite = self.drift.iter().chain(self.mean.iter()).chain(self.diffusion.iter()).chain(self.x0.iter());
        if finite.into_iter().any(|v| !v.is_finite()) {
            return bad("non-finite coefficient".into());
        }
        for (i, j) in self.jumps.iter().enumerate() {
            if !(j.intensity >= 0.0) || !j.intensity.is_finite() {
                return bad(format!("jump intensity of coordinate {i} must be >= 0"));
            }
            if j.intensity > 0.0 && !(j.variance > 0.0 && j.variance.is_finite()) {
                return bad(format!("jump variance of coordinate {i} must be > 0"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub n: usize,
    pub t_end: f64,
    pub seed: u64,
}

impl SimConfig {
    pub fn h(&self) -> f64 {
        self.t_end / self.n as f64
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.n < 1 {
            return Err(SimError::InvalidConfig("n must be at least 1".into()));
        }
        if !(self.t_end > 0.0) || !self.t_end.is_finite() {
            return Err(SimError::InvalidConfig("t_end must be positive".into()));
        }
        Ok(())
    }
}

/// Simulated latent path plus the number of jumps drawn per coordinate.
#[derive(Debug, Clone)]
pub struct LatentPath {
    /// `(n + 1) x dim`
    pub x: DMatrix<f64>,
    pub jump_counts: Vec<u64>,
}

/// Euler scheme driven by the given generator.
pub fn simulate_latent_with<R: Rng + ?Sized>(
    sde: &LatentSdeSpec,
    n: usize,
    h: f64,
    rng: &mut R,
) -> Result<LatentPath, SimError> {
    sde.validate()?;
    let d = sde.dim();
    let r = sde.diffusion.ncols();
    let sqrt_h = h.sqrt();
    let poissons: Vec<Option<(Poisson<f64>, Normal<f64>)>> = sde
        .jumps
        .iter()
        .map(|j| {
            (j.intensity > 0.0).then(|| {
                (
                    Poisson::new(j.intensity * h).expect("positive rate"),
                    Normal::new(0.0, j.variance.sqrt()).expect("positive variance"),
                )
            })
        })
        .collect();

    let mut x = DMatrix::zeros(n + 1, d);
    let mut state: Vec<f64> = sde.x0.iter().cloned().collect();
    let mut z = vec![0.0; r];
    let mut next = vec![0.0; d];
    let mut jump_counts = vec![0u64; d];
    for j in 0..d {
        x[(0, j)] = state[j];
    }
    for i in 1..=n {
        for zk in z.iter_mut() {
            *zk = rng.sample(StandardNormal);
        }
        for a in 0..d {
            let drift: f64 = -(0..d).map(|b| sde.drift[(a, b)] * (state[b] - sde.mean[b])).sum::<f64>();
            let noise: f64 = z.iter().enumerate().map(|(k, zk)| sde.diffusion[(a, k)] * zk).sum();
            next[a] = state[a] + drift * h + noise * sqrt_h;
        }
        for (a, pj) in poissons.iter().enumerate() {
            if let Some((pois, size)) = pj {
                let count = pois.sample(rng) as u64;
                for _ in 0..count {
                    next[a] += size.sample(rng);
                }
                jump_counts[a] += count;
            }
        }
        std::mem::swap(&mut state, &mut next);
        for j in 0..d {
            x[(i, j)] = state[j];
        }
    }
    Ok(LatentPath { x, jump_counts })
}

/// Simulates one latent process on `n` equal steps over `[0, t_end]`.
pub fn simulate_latent(sde: &LatentSdeSpec, cfg: &SimConfig) -> Result<DMatrix<f64>, SimError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    Ok(simulate_latent_with(sde, cfg.n, cfg.h(), &mut rng)?.x)
}

/// Loadings, structural coefficients and latent dynamics of a data-generating model.
#[derive(Debug, Clone, PartialEq)]
pub struct TrueModelSpec {
    pub lambda1: DMatrix<f64>,
    pub lambda2: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub gamma: DMatrix<f64>,
    pub sde_xi: LatentSdeSpec,
    pub sde_delta: LatentSdeSpec,
    pub sde_eps: LatentSdeSpec,
    pub sde_zeta: LatentSdeSpec,
}

/// Random-stream identifiers of the four latent blocks.
const STREAM_XI: u64 = 1;
const STREAM_DELTA: u64 = 2;
const STREAM_EPS: u64 = 3;
const STREAM_ZETA: u64 = 4;

impl TrueModelSpec {
    pub fn p1(&self) -> usize {
        self.lambda1.nrows()
    }

    pub fn p2(&self) -> usize {
        self.lambda2.nrows()
    }

    pub fn p(&self) -> usize {
        self.p1() + self.p2()
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let (p1, k1) = self.lambda1.shape();
        let (p2, k2) = self.lambda2.shape();
        let bad = |m: String| Err(SimError::InvalidModel(m));
        if self.b.shape() != (k2, k2) {
            return bad(format!("b must be {k2}x{k2}"));
        }
        if self.gamma.shape() != (k2, k1) {
            return bad(format!("gamma must be {k2}x{k1}"));
        }
        for (name, sde, dim) in [
            ("xi", &self.sde_xi, k1),
            ("delta", &self.sde_delta, p1),
            ("eps", &self.sde_eps, p2),
            ("zeta", &self.sde_zeta, k2),
        ] {
            sde.validate()?;
            if sde.dim() != dim {
                return bad(format!("{name} has dimension {}, expected {dim}", sde.dim()));
            }
        }
        if (0..k2).any(|i| self.b[(i, i)] != 0.0) {
            return bad("b must have a zero diagonal".into());
        }
        for (name, l) in [("lambda1", &self.lambda1), ("lambda2", &self.lambda2)] {
            if crate::linalg::numerical_rank(l, 1e-12) < l.ncols() {
                return bad(format!("{name} is not of full column rank"));
            }
        }
        self.psi_inverse()?;
        Ok(())
    }

    fn psi_inverse(&self) -> Result<DMatrix<f64>, SimError> {
        let k2 = self.b.nrows();
        if k2 == 0 {
            return Ok(DMatrix::zeros(0, 0));
        }
        let psi = DMatrix::<f64>::identity(k2, k2) - &self.b;
        if crate::linalg::numerical_rank(&psi, 1e-12) < k2 {
            return Err(SimError::SingularPsi);
        }
        psi.try_inverse().ok_or(SimError::SingularPsi)
    }

    /// Volatility of the observables, written as `G Omega G' + E` with
    /// `X = G (xi, zeta) + (delta, eps)`.
    pub fn volatility(&self) -> Result<DMatrix<f64>, SimError> {
        let a = self.psi_inverse()?;
        let (p1, k1) = self.lambda1.shape();
        let (p2, k2) = self.lambda2.shape();
        let mut g = DMatrix::zeros(p1 + p2, k1 + k2);
        g.view_mut((0, 0), (p1, k1)).copy_from(&self.lambda1);
        let l2a = &self.lambda2 * &a;
        g.view_mut((p1, 0), (p2, k1)).copy_from(&(&l2a * &self.gamma));
        g.view_mut((p1, k1), (p2, k2)).copy_from(&l2a);
        let mut omega = DMatrix::zeros(k1 + k2, k1 + k2);
        omega.view_mut((0, 0), (k1, k1)).copy_from(&self.sde_xi.volatility());
        omega.view_mut((k1, k1), (k2, k2)).copy_from(&self.sde_zeta.volatility());
        let mut e = DMatrix::zeros(p1 + p2, p1 + p2);
        e.view_mut((0, 0), (p1, p1)).copy_from(&self.sde_delta.volatility());
        e.view_mut((p1, p1), (p2, p2)).copy_from(&self.sde_eps.volatility());
        Ok(&g * omega * g.transpose() + e)
    }

    /// Same model with every jump switched off.
    pub fn without_jumps(&self) -> Self {
        let mut m = self.clone();
        for sde in [&mut m.sde_xi, &mut m.sde_delta, &mut m.sde_eps, &mut m.sde_zeta] {
            sde.jumps.iter_mut().for_each(|j| *j = JumpSpec::NONE);
        }
        m
    }
}

/// Latent paths and observables of one simulation.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub xi: LatentPath,
    pub delta: LatentPath,
    pub eps: LatentPath,
    pub zeta: LatentPath,
    /// `eta = (I - B)^{-1} (Gamma xi + zeta)`, `(n + 1) x k2`
    pub eta: DMatrix<f64>,
    pub path: PathData,
}

fn block_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Simulates all latent blocks and the observables; keeps the latent paths.
pub fn simulate_full(model: &TrueModelSpec, cfg: &SimConfig) -> Result<Simulation, SimError> {
    cfg.validate()?;
    model.validate()?;
    let (n, h) = (cfg.n, cfg.h());
    let xi = simulate_latent_with(&model.sde_xi, n, h, &mut block_rng(cfg.seed, STREAM_XI))?;
    let delta = simulate_latent_with(&model.sde_delta, n, h, &mut block_rng(cfg.seed, STREAM_DELTA))?;
    let eps = simulate_latent_with(&model.sde_eps, n, h, &mut block_rng(cfg.seed, STREAM_EPS))?;
    let zeta = simulate_latent_with(&model.sde_zeta, n, h, &mut block_rng(cfg.seed, STREAM_ZETA))?;

    let a = model.psi_inverse()?;
    // Rows are time points, so transpose the structural maps.
    let eta = (&xi.x * model.gamma.transpose() + &zeta.x) * a.transpose();
    let x1 = &xi.x * model.lambda1.transpose() + &delta.x;
    let x2 = &eta * model.lambda2.transpose() + &eps.x;
    let (p1, p2) = (model.p1(), model.p2());
    let mut x = DMatrix::zeros(n + 1, p1 + p2);
    x.view_mut((0, 0), (n + 1, p1)).copy_from(&x1);
    x.view_mut((0, p1), (n + 1, p2)).copy_from(&x2);
    let path = PathData::new(h, x).map_err(|e| SimError::InvalidConfig(e.to_string()))?;
    Ok(Simulation {
        xi,
        delta,
        eps,
        zeta,
        eta,
        path,
    })
}

/// Simulates the observables `X = (Lambda1 xi + delta, Lambda2 eta + eps)`.
pub fn simulate_observations(model: &TrueModelSpec, cfg: &SimConfig) -> Result<PathData, SimError> {
    simulate_full(model, cfg).map(|s| s.path)
}

/// The data-generating model of the reference simulation study.
pub fn paper_true_model() -> TrueModelSpec {
    let jumps = |vars: &[f64]| -> Vec<JumpSpec> {
        vars.iter()
            .map(|&variance| JumpSpec {
                intensity: 1.0,
                variance,
            })
            .collect()
    };
    let lambda1 = DMatrix::from_column_slice(5, 1, &[1.0, 0.2, 0.4, 0.1, 0.7]);
    #[rustfmt::skip]
    let lambda2 = DMatrix::from_column_slice(10, 2, &[
        1.0, 0.2, 0.9, 1.2, 0.3, 0.0, 0.0, 0.0, 0.0, 0.0,
        0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.5, 0.6, 0.4, 0.7,
    ]);
    TrueModelSpec {
        lambda1,
        lambda2,
        b: DMatrix::zeros(2, 2),
        gamma: DMatrix::from_column_slice(2, 1, &[0.7, -0.5]),
        sde_xi: LatentSdeSpec::diagonal(
            &[2.0],
            &[1.0],
            &[0.7],
            &[JumpSpec { intensity: 2.0, variance: 5.0 }],
            &[1.0],
        ),
        sde_delta: LatentSdeSpec::diagonal(
            &[3.0, 2.0, 4.0, 5.0, 2.0],
            &[0.0; 5],
            &[0.9, 0.7, 0.5, 0.4, 0.8],
            &jumps(&[5.0, 4.0, 6.0, 5.0, 4.0]),
            &[0.0; 5],
        ),
        sde_eps: LatentSdeSpec::diagonal(
            &[2.0, 3.0, 2.0, 5.0, 4.0, 2.0, 3.0, 2.0, 5.0, 4.0],
            &[0.0; 10],
            &[0.4, 0.9, 0.3, 0.6, 0.4, 0.5, 0.8, 0.6, 0.7, 0.3],
            &jumps(&[5.0, 4.0, 4.0, 5.0, 6.0, 4.0, 6.0, 5.0, 6.0, 5.0]),
            &[0.0; 10],
        ),
        sde_zeta: LatentSdeSpec::diagonal(
            &[5.0, 2.0],
            &[0.0; 2],
            &[0.5, 0.8],
            &jumps(&[6.0, 5.0]),
            &[0.0; 2],
        ),
    }
}
