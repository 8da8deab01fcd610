//! The three candidate models of the reference simulation study and their
//! true parameter values.
//!
//! All three share `p1 = 5`, `p2 = 10`, `k1 = 1`. Model 1 is the smallest
//! correctly specified model, Model 2 adds a cross loading of the fifth `X2`
//! coordinate on the second endogenous factor (true value zero), and Model 3
//! collapses the two endogenous factors into one and is misspecified.

use crate::sem::{Cell, CheckedSpec, EntryMap, NestingEmbedding, StructuralSpec};

const P1: usize = 5;
const P2: usize = 10;

fn free_diag(first: usize, n: usize) -> EntryMap {
    EntryMap::diagonal(&(first..first + n).map(Cell::Free).collect::<Vec<_>>())
}

/// Column of a loading matrix: `1` first, then consecutive free indices.
fn anchored_column(first_free: usize, len: usize) -> Vec<Cell> {
    std::iter::once(Cell::Fixed(1.0))
        .chain((first_free..first_free + len - 1).map(Cell::Free))
        .collect()
}

fn lambda1() -> EntryMap {
    EntryMap::from_rows(anchored_column(0, P1).into_iter().map(|c| vec![c]).collect())
        .expect("rectangular")
}

fn two_factor_lambda2(cross_loading: bool) -> EntryMap {
    let mut m = EntryMap::zeros(P2, 2);
    let mut next = 4;
    m.set(0, 0, Cell::Fixed(1.0));
    for row in 1..5 {
        m.set(row, 0, Cell::Free(next));
        next += 1;
    }
    if cross_loading {
        m.set(4, 1, Cell::Free(next));
        next += 1;
    }
    m.set(5, 1, Cell::Fixed(1.0));
    for row in 6..10 {
        m.set(row, 1, Cell::Free(next));
        next += 1;
    }
    m
}

fn two_factor_model(cross_loading: bool) -> CheckedSpec {
    let shift = usize::from(cross_loading);
    let mut s = StructuralSpec::zeros(P1, P2, 1, 2);
    s.lambda1 = lambda1();
    s.lambda2 = two_factor_lambda2(cross_loading);
    s.gamma = EntryMap::from_rows(vec![vec![Cell::Free(12 + shift)], vec![Cell::Free(13 + shift)]])
        .expect("rectangular");
    s.sigma_xi = free_diag(14 + shift, 1);
    s.sigma_delta = free_diag(15 + shift, P1);
    s.sigma_eps = free_diag(20 + shift, P2);
    s.sigma_zeta = free_diag(30 + shift, 2);
    s.validate().expect("preset model is well formed")
}

/// Model 1: the optimal model, `q = 32`.
pub fn model1() -> CheckedSpec {
    two_factor_model(false)
}

/// Model 2: Model 1 plus one cross loading, `q = 33`.
pub fn model2() -> CheckedSpec {
    two_factor_model(true)
}

/// Model 3: a single endogenous factor, `q = 31`. Misspecified.
pub fn model3() -> CheckedSpec {
    let mut s = StructuralSpec::zeros(P1, P2, 1, 1);
    s.lambda1 = lambda1();
    s.lambda2 = EntryMap::from_rows(anchored_column(4, P2).into_iter().map(|c| vec![c]).collect())
        .expect("rectangular");
    s.gamma = EntryMap::from_rows(vec![vec![Cell::Free(13)]]).expect("rectangular");
    s.sigma_xi = free_diag(14, 1);
    s.sigma_delta = free_diag(15, P1);
    s.sigma_eps = free_diag(20, P2);
    s.sigma_zeta = free_diag(30, 1);
    s.validate().expect("preset model is well formed")
}

/// True value of Model 1's parameters.
pub fn theta_model1() -> Vec<f64> {
    vec![
        0.2, 0.4, 0.1, 0.7, // lambda1
        0.2, 0.9, 1.2, 0.3, // lambda2, first factor
        0.5, 0.6, 0.4, 0.7, // lambda2, second factor
        0.7, -0.5, // gamma
        0.49, // sigma_xi
        0.81, 0.49, 0.25, 0.16, 0.64, // sigma_delta
        0.16, 0.81, 0.09, 0.36, 0.16, 0.25, 0.64, 0.36, 0.49, 0.09, // sigma_eps
        0.25, 0.64, // sigma_zeta
    ]
}

/// True value of Model 2's parameters: Model 1's with the cross loading at 0.
pub fn theta_model2() -> Vec<f64> {
    let mut t = theta_model1();
    t.insert(MODEL2_CROSS_LOADING, 0.0);
    t
}

/// Zero-based position of the extra cross loading in Model 2's `theta`.
pub const MODEL2_CROSS_LOADING: usize = 8;

/// A starting point for Model 3: Model 1's values where they have a
/// counterpart, with the second factor's loadings folded into one column.
pub fn theta_model3_start() -> Vec<f64> {
    let t1 = theta_model1();
    let mut t = Vec::with_capacity(31);
    t.extend_from_slice(&t1[0..4]); // lambda1
    t.extend_from_slice(&t1[4..8]); // lambda2 rows 2..5
    t.push(1.0); // lambda2 row 6 (anchor of the former second factor)
    t.extend_from_slice(&t1[8..12]); // lambda2 rows 7..10
    t.push(t1[12]); // gamma
    t.push(t1[14]); // sigma_xi
    t.extend_from_slice(&t1[15..30]); // sigma_delta, sigma_eps
    t.push(t1[30]); // sigma_zeta
    t
}

/// The embedding of Model 1 into Model 2 (skip the cross-loading slot).
pub fn model1_in_model2() -> NestingEmbedding {
    let positions: Vec<usize> = (0..33).filter(|&k| k != MODEL2_CROSS_LOADING).collect();
    NestingEmbedding::coordinate(33, &positions, vec![0.0; 33]).expect("coordinate embedding")
}

/// Looks up a preset candidate by name: `model1`, `model2` or `model3`.
pub fn by_name(name: &str) -> Option<(CheckedSpec, Vec<f64>)> {
    match name {
        "model1" => Some((model1(), theta_model1())),
        "model2" => Some((model2(), theta_model2())),
        "model3" => Some((model3(), theta_model3_start())),
        _ => None,
    }
}
