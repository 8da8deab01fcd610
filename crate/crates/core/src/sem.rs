//! Structural equation model specifications and the implied volatility
//! matrix of the observables.
//!
//! A candidate model is described by eight entry maps. Each cell of an entry
//! map is either a fixed constant or a reference into the free-parameter
//! vector `theta`. Given `theta`, the observable volatility is
//!
//! ```text
//! S11 = L1 Pxi L1' + Pdelta
//! S12 = L1 Pxi G' A' L2'
//! S22 = L2 A (G Pxi G' + Pzeta) A' L2' + Peps,        A = (I - B)^{-1}
//! ```
//!
//! where `L1, L2` are the loadings, `B, G` the structural coefficients and the
//! `P*` matrices the volatilities of the latent processes.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::Deref;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::linalg::{self, PD_PIVOT_TOL};

/// Relative singular-value cutoff for [`identifiability_rank`].
pub const RANK_TOL: f64 = 1e-8;
/// Entrywise tolerance for the covariance comparison in [`check_nesting`].
pub const NESTING_TOL: f64 = 1e-10;
/// Tolerance on `F'F = I` for [`NestingEmbedding`].
pub const ORTHONORMAL_TOL: f64 = 1e-12;
/// Singular-value cutoff, relative to `max(1, sigma_max)`, for `I - B`.
pub const PSI_SINGULAR_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SemError {
    #[error("{block}: expected a {expected_rows}x{expected_cols} entry map, found {rows}x{cols}")]
    DimensionMismatch {
        block: Block,
        expected_rows: usize,
        expected_cols: usize,
        rows: usize,
        cols: usize,
    },
    #[error("theta has length {found}, model has {expected} free parameters")]
    ThetaLength { expected: usize, found: usize },
    #[error("model has no observables (p1 + p2 = 0)")]
    NoObservables,
    #[error("free parameter indices are not contiguous: index {missing} is never used (q = {q})")]
    GapInParamIndices { missing: usize, q: usize },
    #[error("{block}: cells ({row},{col}) and ({col},{row}) differ in a symmetric matrix")]
    AsymmetricEntryMap { block: Block, row: usize, col: usize },
    #[error("B has a non-zero diagonal cell at ({index},{index})")]
    NonzeroBDiagonal { index: usize },
    #[error("{block}: fixed cell ({row},{col}) is not finite")]
    NonFiniteFixed { block: Block, row: usize, col: usize },
    #[error("theta[{index}] = {value} must be strictly positive")]
    NonPositive { index: usize, value: f64 },
    #[error("I - B is singular")]
    SingularPsi,
    #[error("embedding matrix F does not have orthonormal columns (max |F'F - I| = {deviation:e})")]
    NonOrthonormalF { deviation: f64 },
    #[error("embedding has shape {rows}x{cols} (offset length {offset}); expected {expected_rows}x{expected_cols}")]
    EmbeddingShape {
        rows: usize,
        cols: usize,
        offset: usize,
        expected_rows: usize,
        expected_cols: usize,
    },
}

/// The eight parameter matrices of a model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Block {
    Lambda1,
    Lambda2,
    B,
    Gamma,
    SigmaXi,
    SigmaDelta,
    SigmaEps,
    SigmaZeta,
}

impl Block {
    pub const ALL: [Block; 8] = [
        Block::Lambda1,
        Block::Lambda2,
        Block::B,
        Block::Gamma,
        Block::SigmaXi,
        Block::SigmaDelta,
        Block::SigmaEps,
        Block::SigmaZeta,
    ];

    pub fn is_symmetric(self) -> bool {
        matches!(
            self,
            Block::SigmaXi | Block::SigmaDelta | Block::SigmaEps | Block::SigmaZeta
        )
    }

    /// Config-file section name.
    pub fn name(self) -> &'static str {
        match self {
            Block::Lambda1 => "lambda1",
            Block::Lambda2 => "lambda2",
            Block::B => "b",
            Block::Gamma => "gamma",
            Block::SigmaXi => "sigma_xi",
            Block::SigmaDelta => "sigma_delta",
            Block::SigmaEps => "sigma_eps",
            Block::SigmaZeta => "sigma_zeta",
        }
    }

    pub fn from_name(name: &str) -> Option<Block> {
        Block::ALL.into_iter().find(|b| b.name() == name)
    }
}

impl fmt::Display for Block {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One cell of an entry map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cell {
    Fixed(f64),
    /// Zero-based index into `theta`.
    Free(usize),
}

impl Cell {
    const ZERO: Cell = Cell::Fixed(0.0);

    #[inline]
    fn value(self, theta: &[f64]) -> f64 {
        match self {
            Cell::Fixed(v) => v,
            Cell::Free(k) => theta[k],
        }
    }
}

/// A dense row-major grid of [`Cell`]s.
#[derive(Debug, Clone, PartialEq)]
pub struct EntryMap {
    rows: usize,
    cols: usize,
    cells: Vec<Cell>,
}

impl EntryMap {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        EntryMap {
            rows,
            cols,
            cells: vec![Cell::ZERO; rows * cols],
        }
    }

    /// Builds a map from row vectors; all rows must have the same length.
    pub fn from_rows(rows: Vec<Vec<Cell>>) -> Option<Self> {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != ncols) {
            return None;
        }
        Some(EntryMap {
            rows: nrows,
            cols: ncols,
            cells: rows.into_iter().flatten().collect(),
        })
    }

    /// Square map with the given cells on the diagonal and zeros elsewhere.
    pub fn diagonal(diag: &[Cell]) -> Self {
        let n = diag.len();
        let mut m = EntryMap::zeros(n, n);
        for (i, c) in diag.iter().enumerate() {
            m.set(i, i, *c);
        }
        m
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn get(&self, row: usize, col: usize) -> Cell {
        self.cells[row * self.cols + col]
    }

    pub fn set(&mut self, row: usize, col: usize, cell: Cell) {
        self.cells[row * self.cols + col] = cell;
    }

    pub fn cells(&self) -> impl Iterator<Item = (usize, usize, Cell)> + '_ {
        self.cells
            .iter()
            .enumerate()
            .map(move |(idx, c)| (idx / self.cols, idx % self.cols, *c))
    }

    pub fn eval(&self, theta: &[f64]) -> DMatrix<f64> {
        DMatrix::from_fn(self.rows, self.cols, |i, j| self.get(i, j).value(theta))
    }

    /// Elementwise derivative with respect to `theta[k]`, or `None` when the
    /// map does not reference `k`.
    fn derivative(&self, k: usize) -> Option<DMatrix<f64>> {
        let mut out: Option<DMatrix<f64>> = None;
        for (i, j, c) in self.cells() {
            if c == Cell::Free(k) {
                out.get_or_insert_with(|| DMatrix::zeros(self.rows, self.cols))[(i, j)] = 1.0;
            }
        }
        out
    }
}

/// A candidate model as authored; see [`StructuralSpec::validate`].
#[derive(Debug, Clone, PartialEq)]
pub struct StructuralSpec {
    pub p1: usize,
    pub p2: usize,
    pub k1: usize,
    pub k2: usize,
    pub lambda1: EntryMap,
    pub lambda2: EntryMap,
    pub b: EntryMap,
    pub gamma: EntryMap,
    pub sigma_xi: EntryMap,
    pub sigma_delta: EntryMap,
    pub sigma_eps: EntryMap,
    pub sigma_zeta: EntryMap,
}

impl StructuralSpec {
    /// A spec of the given dimensions with every cell fixed at zero.
    pub fn zeros(p1: usize, p2: usize, k1: usize, k2: usize) -> Self {
        StructuralSpec {
            p1,
            p2,
            k1,
            k2,
            lambda1: EntryMap::zeros(p1, k1),
            lambda2: EntryMap::zeros(p2, k2),
            b: EntryMap::zeros(k2, k2),
            gamma: EntryMap::zeros(k2, k1),
            sigma_xi: EntryMap::zeros(k1, k1),
            sigma_delta: EntryMap::zeros(p1, p1),
            sigma_eps: EntryMap::zeros(p2, p2),
            sigma_zeta: EntryMap::zeros(k2, k2),
        }
    }

    pub fn p(&self) -> usize {
        self.p1 + self.p2
    }

    pub fn block(&self, block: Block) -> &EntryMap {
        match block {
            Block::Lambda1 => &self.lambda1,
            Block::Lambda2 => &self.lambda2,
            Block::B => &self.b,
            Block::Gamma => &self.gamma,
            Block::SigmaXi => &self.sigma_xi,
            Block::SigmaDelta => &self.sigma_delta,
            Block::SigmaEps => &self.sigma_eps,
            Block::SigmaZeta => &self.sigma_zeta,
        }
    }

    pub fn block_mut(&mut self, block: Block) -> &mut EntryMap {
        match block {
            Block::Lambda1 => &mut self.lambda1,
            Block::Lambda2 => &mut self.lambda2,
            Block::B => &mut self.b,
            Block::Gamma => &mut self.gamma,
            Block::SigmaXi => &mut self.sigma_xi,
            Block::SigmaDelta => &mut self.sigma_delta,
            Block::SigmaEps => &mut self.sigma_eps,
            Block::SigmaZeta => &mut self.sigma_zeta,
        }
    }

    pub fn expected_shape(&self, block: Block) -> (usize, usize) {
        let (p1, p2, k1, k2) = (self.p1, self.p2, self.k1, self.k2);
        match block {
            Block::Lambda1 => (p1, k1),
            Block::Lambda2 => (p2, k2),
            Block::B => (k2, k2),
            Block::Gamma => (k2, k1),
            Block::SigmaXi => (k1, k1),
            Block::SigmaDelta => (p1, p1),
            Block::SigmaEps => (p2, p2),
            Block::SigmaZeta => (k2, k2),
        }
    }

    /// Checks the spec and derives `q`, positivity flags and reuse info.
    ///
    /// Symmetric volatility maps may be authored through their lower triangle
    /// only: an upper cell left at `Fixed(0)` is filled from its mirror.
    pub fn validate(mut self) -> Result<CheckedSpec, SemError> {
        if self.p() == 0 {
            return Err(SemError::NoObservables);
        }
        for block in Block::ALL {
            let (er, ec) = self.expected_shape(block);
            let (rows, cols) = self.block(block).shape();
            if (rows, cols) != (er, ec) {
                return Err(SemError::DimensionMismatch {
                    block,
                    expected_rows: er,
                    expected_cols: ec,
                    rows,
                    cols,
                });
            }
            for (row, col, cell) in self.block(block).cells() {
                if let Cell::Fixed(v) = cell {
                    if !v.is_finite() {
                        return Err(SemError::NonFiniteFixed { block, row, col });
                    }
                }
            }
        }
        for i in 0..self.k2 {
            if self.b.get(i, i) != Cell::ZERO {
                return Err(SemError::NonzeroBDiagonal { index: i });
            }
        }
        for block in Block::ALL.into_iter().filter(|b| b.is_symmetric()) {
            let map = self.block_mut(block);
            let n = map.rows;
            for j in 0..n {
                for i in (j + 1)..n {
                    let lower = map.get(i, j);
                    let upper = map.get(j, i);
                    if lower == upper {
                        continue;
                    }
                    if upper == Cell::ZERO {
                        map.set(j, i, lower);
                    } else if lower == Cell::ZERO {
                        map.set(i, j, upper);
                    } else {
                        return Err(SemError::AsymmetricEntryMap { block, row: i, col: j });
                    }
                }
            }
        }

        // Occurrences per index; mirrored symmetric cells count once.
        let mut uses: BTreeMap<usize, usize> = BTreeMap::new();
        let mut positive_idx = Vec::new();
        for block in Block::ALL {
            let sym = block.is_symmetric();
            for (i, j, cell) in self.block(block).cells() {
                if let Cell::Free(k) = cell {
                    if sym && j > i {
                        continue;
                    }
                    *uses.entry(k).or_default() += 1;
                    if sym && i == j {
                        positive_idx.push(k);
                    }
                }
            }
        }
        let q = uses.keys().next_back().map_or(0, |m| m + 1);
        if let Some(missing) = (0..q).find(|k| !uses.contains_key(k)) {
            return Err(SemError::GapInParamIndices { missing, q });
        }
        let mut positive = vec![false; q];
        for k in positive_idx {
            positive[k] = true;
        }
        let reused = uses
            .into_iter()
            .filter(|&(_, n)| n > 1)
            .map(|(k, _)| k)
            .collect();
        Ok(CheckedSpec {
            spec: self,
            q,
            positive,
            reused,
        })
    }
}

/// A validated [`StructuralSpec`] with derived parameter metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckedSpec {
    spec: StructuralSpec,
    q: usize,
    positive: Vec<bool>,
    reused: Vec<usize>,
}

impl CheckedSpec {
    /// Number of free parameters.
    pub fn q(&self) -> usize {
        self.q
    }

    pub fn p(&self) -> usize {
        self.spec.p()
    }

    /// `true` for parameters that sit on a volatility diagonal.
    pub fn positivity_flags(&self) -> &[bool] {
        &self.positive
    }

    /// Indices referenced by more than one cell (equality constraints).
    pub fn reused_indices(&self) -> &[usize] {
        &self.reused
    }

    pub fn spec(&self) -> &StructuralSpec {
        &self.spec
    }

    fn check_theta_len(&self, theta: &[f64]) -> Result<(), SemError> {
        if theta.len() != self.q {
            return Err(SemError::ThetaLength {
                expected: self.q,
                found: theta.len(),
            });
        }
        Ok(())
    }

    /// `true` when `theta` has the right length and respects positivity.
    pub fn is_feasible(&self, theta: &[f64]) -> bool {
        theta.len() == self.q
            && theta.iter().all(|v| v.is_finite())
            && theta
                .iter()
                .zip(&self.positive)
                .all(|(&v, &pos)| !pos || v > 0.0)
    }
}

/// A parameter vector checked against a [`CheckedSpec`].
#[derive(Debug, Clone, PartialEq)]
pub struct ThetaVector {
    values: Vec<f64>,
    positive: Vec<bool>,
}

impl ThetaVector {
    pub fn new(spec: &CheckedSpec, values: Vec<f64>) -> Result<Self, SemError> {
        spec.check_theta_len(&values)?;
        for (index, (&value, &pos)) in values.iter().zip(spec.positivity_flags()).enumerate() {
            if (pos && !(value > 0.0)) || !value.is_finite() {
                return Err(SemError::NonPositive { index, value });
            }
        }
        Ok(ThetaVector {
            values,
            positive: spec.positivity_flags().to_vec(),
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn positivity_flags(&self) -> &[bool] {
        &self.positive
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.values
    }
}

impl Deref for ThetaVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.values
    }
}

/// Implied volatility of the observables together with its Cholesky factor.
#[derive(Debug, Clone)]
pub struct ImpliedCovariance {
    sigma: DMatrix<f64>,
    chol: Option<DMatrix<f64>>,
}

impl ImpliedCovariance {
    /// Wraps a symmetric matrix, attempting a Cholesky factorization.
    pub fn from_matrix(sigma: DMatrix<f64>) -> Self {
        let chol = linalg::cholesky(&sigma, PD_PIVOT_TOL);
        ImpliedCovariance { sigma, chol }
    }

    pub fn sigma(&self) -> &DMatrix<f64> {
        &self.sigma
    }

    pub fn cholesky(&self) -> Option<&DMatrix<f64>> {
        self.chol.as_ref()
    }

    pub fn is_pd(&self) -> bool {
        self.chol.is_some()
    }

    pub fn log_det(&self) -> Option<f64> {
        self.chol.as_ref().map(linalg::chol_log_det)
    }

    pub fn inverse(&self) -> Option<DMatrix<f64>> {
        self.chol.as_ref().map(linalg::chol_inverse)
    }
}

/// Parameter matrices evaluated at one `theta`.
struct Evaluated {
    l1: DMatrix<f64>,
    l2: DMatrix<f64>,
    g: DMatrix<f64>,
    phi: DMatrix<f64>,
    pdelta: DMatrix<f64>,
    peps: DMatrix<f64>,
    pzeta: DMatrix<f64>,
    /// `(I - B)^{-1}`
    a: DMatrix<f64>,
}

fn evaluate(spec: &CheckedSpec, theta: &[f64]) -> Result<Evaluated, SemError> {
    spec.check_theta_len(theta)?;
    let s = &spec.spec;
    let k2 = s.k2;
    let psi = DMatrix::<f64>::identity(k2, k2) - s.b.eval(theta);
    let a = if k2 == 0 {
        DMatrix::zeros(0, 0)
    } else {
        let sv = psi.clone().svd(false, false).singular_values;
        let smax = sv.iter().cloned().fold(0.0, f64::max);
        let smin = sv.iter().cloned().fold(f64::INFINITY, f64::min);
        if !(smin > PSI_SINGULAR_TOL * smax.max(1.0)) {
            return Err(SemError::SingularPsi);
        }
        psi.try_inverse().ok_or(SemError::SingularPsi)?
    };
    Ok(Evaluated {
        l1: s.lambda1.eval(theta),
        l2: s.lambda2.eval(theta),
        g: s.gamma.eval(theta),
        phi: s.sigma_xi.eval(theta),
        pdelta: s.sigma_delta.eval(theta),
        peps: s.sigma_eps.eval(theta),
        pzeta: s.sigma_zeta.eval(theta),
        a,
    })
}

fn stack_blocks(s11: &DMatrix<f64>, s12: &DMatrix<f64>, s22: &DMatrix<f64>) -> DMatrix<f64> {
    let p1 = s11.nrows();
    let p2 = s22.nrows();
    let mut out = DMatrix::zeros(p1 + p2, p1 + p2);
    out.view_mut((0, 0), (p1, p1)).copy_from(s11);
    out.view_mut((p1, p1), (p2, p2)).copy_from(s22);
    out.view_mut((0, p1), (p1, p2)).copy_from(s12);
    out.view_mut((p1, 0), (p2, p1)).copy_from(&s12.transpose());
    out
}

/// The implied `p x p` volatility matrix at `theta`.
pub fn assemble_sigma(spec: &CheckedSpec, theta: &[f64]) -> Result<ImpliedCovariance, SemError> {
    let m = evaluate(spec, theta)?;
    let s11 = &m.l1 * &m.phi * m.l1.transpose() + &m.pdelta;
    let at = m.a.transpose();
    let s12 = &m.l1 * &m.phi * m.g.transpose() * &at * m.l2.transpose();
    let inner = &m.g * &m.phi * m.g.transpose() + &m.pzeta;
    let s22 = &m.l2 * &m.a * inner * &at * m.l2.transpose() + &m.peps;
    let mut sigma = stack_blocks(&s11, &s12, &s22);
    linalg::mirror_lower(&mut sigma);
    Ok(ImpliedCovariance::from_matrix(sigma))
}

/// `d vech Sigma / d theta'`, a `p(p+1)/2 x q` matrix.
///
/// Each column applies the product rule to the three block formulas: every
/// term replaces one factor by its elementwise derivative. For the inverse
/// `A = (I - B)^{-1}` the derivative is `A dB A`.
pub fn sigma_jacobian(spec: &CheckedSpec, theta: &[f64]) -> Result<DMatrix<f64>, SemError> {
    let m = evaluate(spec, theta)?;
    let s = &spec.spec;
    let (p1, p2) = (s.p1, s.p2);
    let q = spec.q;
    let mut jac = DMatrix::zeros(linalg::vech_len(p1 + p2), q);

    let at = m.a.transpose();
    let inner = &m.g * &m.phi * m.g.transpose() + &m.pzeta;
    let pm = &m.l2 * &m.a; // L2 A
    for k in 0..q {
        let dl1 = s.lambda1.derivative(k);
        let dl2 = s.lambda2.derivative(k);
        let db = s.b.derivative(k);
        let dg = s.gamma.derivative(k);
        let dphi = s.sigma_xi.derivative(k);
        let dpdelta = s.sigma_delta.derivative(k);
        let dpeps = s.sigma_eps.derivative(k);
        let dpzeta = s.sigma_zeta.derivative(k);

        let mut d11 = DMatrix::zeros(p1, p1);
        if let Some(dl1) = &dl1 {
            let t = dl1 * &m.phi * m.l1.transpose();
            d11 += &t + t.transpose();
        }
        if let Some(dphi) = &dphi {
            d11 += &m.l1 * dphi * m.l1.transpose();
        }
        if let Some(d) = &dpdelta {
            d11 += d;
        }

        let da = db.as_ref().map(|db| &m.a * db * &m.a);
        let mut d12 = DMatrix::zeros(p1, p2);
        // S12 = L1 Phi G' A' L2'
        let tail = m.g.transpose() * &at * m.l2.transpose();
        if let Some(dl1) = &dl1 {
            d12 += dl1 * &m.phi * &tail;
        }
        if let Some(dphi) = &dphi {
            d12 += &m.l1 * dphi * &tail;
        }
        if let Some(dg) = &dg {
            d12 += &m.l1 * &m.phi * dg.transpose() * &at * m.l2.transpose();
        }
        if let Some(da) = &da {
            d12 += &m.l1 * &m.phi * m.g.transpose() * da.transpose() * m.l2.transpose();
        }
        if let Some(dl2) = &dl2 {
            d12 += &m.l1 * &m.phi * m.g.transpose() * &at * dl2.transpose();
        }

        // S22 = P M P' + Peps with P = L2 A, M = G Phi G' + Pzeta
        let mut d22 = DMatrix::zeros(p2, p2);
        let mut dp: Option<DMatrix<f64>> = None;
        if let Some(dl2) = &dl2 {
            dp = Some(dl2 * &m.a);
        }
        if let Some(da) = &da {
            let t = &m.l2 * da;
            dp = Some(match dp {
                Some(x) => x + t,
                None => t,
            });
        }
        if let Some(dp) = &dp {
            let t = dp * &inner * pm.transpose();
            d22 += &t + t.transpose();
        }
        let mut dm: Option<DMatrix<f64>> = None;
        if let Some(dg) = &dg {
            let t = dg * &m.phi * m.g.transpose();
            dm = Some(&t + t.transpose());
        }
        if let Some(dphi) = &dphi {
            let t = &m.g * dphi * m.g.transpose();
            dm = Some(match dm {
                Some(x) => x + t,
                None => t,
            });
        }
        if let Some(dz) = &dpzeta {
            dm = Some(match dm {
                Some(x) => x + dz,
                None => dz.clone(),
            });
        }
        if let Some(dm) = &dm {
            d22 += &pm * dm * pm.transpose();
        }
        if let Some(d) = &dpeps {
            d22 += d;
        }

        let dsigma = stack_blocks(&d11, &d12, &d22);
        jac.set_column(k, &linalg::vech(&dsigma));
    }
    Ok(jac)
}

/// Numerical rank of [`sigma_jacobian`] (singular values above
/// `RANK_TOL * sigma_max`).
pub fn identifiability_rank(spec: &CheckedSpec, theta: &[f64]) -> Result<usize, SemError> {
    let jac = sigma_jacobian(spec, theta)?;
    Ok(linalg::numerical_rank(&jac, RANK_TOL))
}

/// Affine map `theta_i -> F theta_i + c` from a smaller model into a larger one.
#[derive(Debug, Clone, PartialEq)]
pub struct NestingEmbedding {
    f: DMatrix<f64>,
    c: DVector<f64>,
}

impl NestingEmbedding {
    /// `f` is `q_j x q_i` and must have orthonormal columns with `q_i < q_j`.
    pub fn new(f: DMatrix<f64>, c: DVector<f64>) -> Result<Self, SemError> {
        let (rows, cols) = f.shape();
        if cols >= rows || c.len() != rows {
            return Err(SemError::EmbeddingShape {
                rows,
                cols,
                offset: c.len(),
                expected_rows: rows.max(cols + 1),
                expected_cols: cols,
            });
        }
        let gram = f.transpose() * &f;
        let deviation = (gram - DMatrix::<f64>::identity(cols, cols)).abs().max();
        if !(deviation <= ORTHONORMAL_TOL) {
            return Err(SemError::NonOrthonormalF { deviation });
        }
        Ok(NestingEmbedding { f, c })
    }

    /// Embedding that places `theta_i[k]` at position `positions[k]` of
    /// `theta_j` and fills the remaining positions from `offset`.
    pub fn coordinate(q_j: usize, positions: &[usize], offset: Vec<f64>) -> Result<Self, SemError> {
        let mut f = DMatrix::zeros(q_j, positions.len());
        for (k, &pos) in positions.iter().enumerate() {
            if pos >= q_j {
                return Err(SemError::EmbeddingShape {
                    rows: q_j,
                    cols: positions.len(),
                    offset: offset.len(),
                    expected_rows: pos + 1,
                    expected_cols: positions.len(),
                });
            }
            f[(pos, k)] = 1.0;
        }
        NestingEmbedding::new(f, DVector::from_vec(offset))
    }

    pub fn f(&self) -> &DMatrix<f64> {
        &self.f
    }

    pub fn c(&self) -> &DVector<f64> {
        &self.c
    }

    pub fn apply(&self, theta_i: &[f64]) -> Vec<f64> {
        let t = DVector::from_column_slice(theta_i);
        (&self.f * t + &self.c).iter().cloned().collect()
    }
}

/// Draws a parameter vector with loadings in `[-1, 1]` and positive
/// coordinates in `[0.2, 1.5]`.
pub fn random_theta<R: Rng + ?Sized>(spec: &CheckedSpec, rng: &mut R) -> Vec<f64> {
    spec.positivity_flags()
        .iter()
        .map(|&pos| {
            if pos {
                rng.random_range(0.2..1.5)
            } else {
                rng.random_range(-1.0..1.0)
            }
        })
        .collect()
}

/// Checks numerically whether `small` is nested in `large` through `emb`.
///
/// Returns `true` iff for `trials` random admissible `theta_i`,
/// `Sigma_i(theta_i)` equals `Sigma_j(F theta_i + c)` entrywise within
/// [`NESTING_TOL`]. Models with different numbers of observables, or with
/// `q_i >= q_j`, are never nested.
pub fn check_nesting(
    small: &CheckedSpec,
    large: &CheckedSpec,
    emb: &NestingEmbedding,
    trials: usize,
    seed: u64,
) -> Result<bool, SemError> {
    if small.q() >= large.q() || small.p() != large.p() {
        return Ok(false);
    }
    if emb.f.shape() != (large.q(), small.q()) {
        return Err(SemError::EmbeddingShape {
            rows: emb.f.nrows(),
            cols: emb.f.ncols(),
            offset: emb.c.len(),
            expected_rows: large.q(),
            expected_cols: small.q(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut done = 0;
    let mut attempts = 0;
    while done < trials {
        attempts += 1;
        if attempts > 100 * trials.max(1) {
            // Could not find admissible points for the smaller model.
            return Ok(false);
        }
        let ti = random_theta(small, &mut rng);
        let si = match assemble_sigma(small, &ti) {
            Ok(s) => s,
            Err(SemError::SingularPsi) => continue,
            Err(e) => return Err(e),
        };
        let tj = emb.apply(&ti);
        let sj = match assemble_sigma(large, &tj) {
            Ok(s) => s,
            Err(SemError::SingularPsi) => return Ok(false),
            Err(e) => return Err(e),
        };
        if (si.sigma() - sj.sigma()).abs().max() > NESTING_TOL {
            return Ok(false);
        }
        done += 1;
    }
    Ok(true)
}
