use thiserror::Error;

use crate::modulator::dataset::IngestIssue;

/// Errors produced by the numerical and data-handling layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("{quantity} out of domain: {value} ({expected})")]
    Domain {
        quantity: &'static str,
        value: f64,
        expected: &'static str,
    },

    #[error(
        "intensity ordering violated: need mu_s > nu_1 > nu_2 >= 0, got ({mu_s}, {nu_1}, {nu_2})"
    )]
    IntensityOrder { mu_s: f64, nu_1: f64, nu_2: f64 },

    #[error("invalid decoy configuration: denominator {denominator} <= 0")]
    InvalidDecoy { denominator: f64 },

    #[error("single-photon yield lower bound is zero; error-rate bound undefined")]
    ZeroSinglePhotonYield,

    #[error("invalid optimizer configuration: {0}")]
    OptimizerConfig(String),

    #[error("{} ingestion issue(s):\n{}", .0.len(), format_issues(.0))]
    Ingest(Vec<IngestIssue>),

    #[error("fit failed for {sample}: {reason}")]
    Fit { sample: String, reason: String },

    #[error("{0} is not an intensity modulator")]
    NotIntensityModulator(String),

    #[error("invalid modulator record {id}: {reason}")]
    Record { id: String, reason: String },

    #[error("no dark-relaxation datum for {0}")]
    MissingDarkRelaxation(String),

    #[error("invalid defense stack: {0}")]
    DefenseStack(String),

    #[error("internal consistency check failed: {0}")]
    Consistency(String),
}

fn format_issues(issues: &[IngestIssue]) -> String {
    issues
        .iter()
        .map(|i| format!("  {i}"))
        .collect::<Vec<_>>()
        .join("\n")
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(quantity: &'static str, value: f64, expected: &'static str) -> Error {
    Error::Domain {
        quantity,
        value,
        expected,
    }
}
