use thiserror::Error;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error in {op}: {reason}")]
    Domain {
        op: &'static str,
        reason: &'static str,
        value: f64,
    },

    /// An iterative or adaptive procedure did not reach its tolerance.
    #[error("{op} did not converge: estimate {estimate:.3e} exceeds tolerance {tolerance:.3e}")]
    NonConvergence {
        op: &'static str,
        estimate: f64,
        tolerance: f64,
    },

    /// A solved trajectory grew beyond the dissipative bound `|u| ≤ 1`.
    #[error("unstable trajectory at step {step}: |u| = {modulus:.6}")]
    Unstable { step: usize, modulus: f64 },

    /// A matrix that has to be inverted is singular.
    #[error("singular matrix in {op}")]
    Singular { op: &'static str },

    /// An intermediate quantity violated an identity it must satisfy.
    #[error("consistency check failed in {op}: {what} = {value:.3e}")]
    Consistency {
        op: &'static str,
        what: &'static str,
        value: f64,
    },
}

impl Error {
    pub(crate) fn domain(op: &'static str, reason: &'static str, value: f64) -> Self {
        Error::Domain { op, reason, value }
    }
}
