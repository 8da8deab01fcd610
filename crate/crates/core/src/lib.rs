//! Model selection for structural equation models of high-frequency data
//! with jumps.
//!
//! The pipeline is: a [`sem::StructuralSpec`] gives the implied volatility
//! `Sigma(theta)`; [`quasi_lik`] truncates jumps out of the observed
//! increments and evaluates the Gaussian quasi-likelihood; [`estimation`]
//! maximizes it; [`criteria`] scores fitted candidates with QBIC / QAIC.
//! [`simulator`] and [`experiment`] reproduce selection studies.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod criteria;
pub mod data;
pub mod estimation;
pub mod experiment;
pub mod linalg;
pub mod presets;
pub mod quasi_lik;
pub mod sem;
pub mod simulator;

use thiserror::Error;

/// Any error of the library, with a coarse classification for exit codes.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Sem(#[from] sem::SemError),
    #[error(transparent)]
    QuasiLik(#[from] quasi_lik::QuasiLikError),
    #[error(transparent)]
    Fit(#[from] estimation::FitError),
    #[error(transparent)]
    Criteria(#[from] criteria::CriteriaError),
    #[error(transparent)]
    Sim(#[from] simulator::SimError),
    #[error(transparent)]
    Config(#[from] config::ConfigError),
    #[error(transparent)]
    Data(#[from] data::DataError),
    #[error("{0}")]
    Usage(String),
}

impl Error {
    /// True for failures of numerical work on valid input (non-PD volatility,
    /// failed starts); false for bad input or configuration.
    pub fn is_numerical(&self) -> bool {
        use estimation::FitError as F;
        use quasi_lik::QuasiLikError as Q;
        matches!(
            self,
            Error::QuasiLik(Q::NotPositiveDefinite)
                | Error::Fit(F::InitNotPD | F::AllStartsFailed(_) | F::QuasiLik(Q::NotPositiveDefinite))
                | Error::Sem(sem::SemError::SingularPsi)
                | Error::Sim(simulator::SimError::SingularPsi)
        )
    }

    /// 3 for numerical failures, 2 otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.is_numerical() { 3 } else { 2 }
    }
}
