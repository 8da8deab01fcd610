//! QBIC / QAIC and model selection.

use std::cmp::Ordering;
use std::fmt;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CriteriaError {
    #[error("no candidate models to select from")]
    EmptyCandidateList,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Criterion {
    Qbic,
    Qaic,
}

impl Criterion {
    pub const ALL: [Criterion; 2] = [Criterion::Qbic, Criterion::Qaic];
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Criterion::Qbic => "QBIC",
            Criterion::Qaic => "QAIC",
        })
    }
}

/// `-2 H + q log n` (natural log).
pub fn qbic(h_value: f64, q: usize, n: usize) -> f64 {
    -2.0 * h_value + q as f64 * (n as f64).ln()
}

/// `-2 H + 2 q`.
pub fn qaic(h_value: f64, q: usize) -> f64 {
    -2.0 * h_value + 2.0 * q as f64
}

/// Both criteria for one fitted candidate.
#[derive(Debug, Clone, PartialEq)]
pub struct CriterionValue {
    pub model_id: usize,
    pub qbic: f64,
    pub qaic: f64,
    pub q: usize,
    pub h_value: f64,
    pub converged: bool,
}

impl CriterionValue {
    pub fn new(model_id: usize, h_value: f64, q: usize, n: usize, converged: bool) -> Self {
        CriterionValue {
            model_id,
            qbic: qbic(h_value, q, n),
            qaic: qaic(h_value, q),
            q,
            h_value,
            converged,
        }
    }

    pub fn value(&self, criterion: Criterion) -> f64 {
        match criterion {
            Criterion::Qbic => self.qbic,
            Criterion::Qaic => self.qaic,
        }
    }
}

/// Outcome of [`select`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Selection {
    pub model_id: usize,
    /// Another candidate had exactly the same criterion value.
    pub tie: bool,
}

/// Minimizer of `criterion`; exact ties go to the smaller `q`, then the
/// lower `model_id`. Non-converged fits are eligible.
pub fn select(values: &[CriterionValue], criterion: Criterion) -> Result<Selection, CriteriaError> {
    let best = values
        .iter()
        .min_by(|a, b| {
            a.value(criterion)
                .total_cmp(&b.value(criterion))
                .then(a.q.cmp(&b.q))
                .then(a.model_id.cmp(&b.model_id))
        })
        .ok_or(CriteriaError::EmptyCandidateList)?;
    let v = best.value(criterion);
    let tie = values
        .iter()
        .filter(|c| c.value(criterion).total_cmp(&v) == Ordering::Equal)
        .count()
        > 1;
    Ok(Selection {
        model_id: best.model_id,
        tie,
    })
}

/// Limiting probability that QAIC prefers an overfitted nested model with
/// `dq` extra parameters: `P(chi2_dq > 2 dq) = Q(dq / 2, dq)`.
pub fn qaic_overfit_probability(dq: usize) -> f64 {
    assert!(dq >= 1, "dq must be at least 1");
    let a = dq as f64 / 2.0;
    statrs::function::gamma::gamma_ur(a, dq as f64)
}
