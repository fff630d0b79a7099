//! Multi-agent static verification for Python code samples.
//!
//! Four specialized analyzers (correctness, security, performance, style)
//! consume a shared bundle of structural facts extracted from one parse of
//! the input, and their findings are merged into a single deployment
//! verdict. The companion [`eval`] and [`theory`] modules hold the
//! evaluation laboratory: classification metrics with bootstrap
//! uncertainty, McNemar significance tests, the 15-configuration agent
//! ablation, and the information-theoretic calculators.

pub mod aggregate;
pub mod agents;
pub mod config;
pub mod eval;
pub mod facts;
pub mod num;
pub mod report;
pub mod stats;
pub mod theory;

/// Scalar type used by the pipeline and every serialized report.
///
/// The kernels in [`stats`] and [`theory`] are generic over
/// [`num::Real`]; everything above them is pinned to this alias.
pub type Score = f64;

pub use aggregate::{
    decide, heuristic_weights, merge_issues, Verdict, VerificationResult, Verifier, WeightVector,
};
pub use agents::{Agent, AgentReport, Issue, Severity};
pub use config::RunConfig;
pub use facts::{extract_facts, Mode, ParseFailure, SourceUnit, StructuralFacts};
pub use report::SampleReport;

/// Errors raised outside the verification pipeline itself.
///
/// Parse problems inside the pipeline are not errors: they surface as
/// [`facts::ParseFailure`] and ultimately as an `ERROR` verdict.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("dataset line {line}: {message}")]
    Dataset { line: usize, message: String },
    #[error("config error: {0}")]
    Config(String),
    #[error("{0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }
}
