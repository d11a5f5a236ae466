use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// `λ + xᵀP(n−1)x` was not positive; `P` has lost positive definiteness.
    #[error("numerical breakdown at iteration {iteration}: gain denominator {denominator:e} is not positive")]
    Breakdown { iteration: u64, denominator: f64 },

    /// A simulation run failed; wraps the underlying breakdown with the run index.
    #[error("run {run_index}: {source}")]
    Run {
        run_index: usize,
        #[source]
        source: Box<Error>,
    },

    /// `βα² ≥ σx²`, equivalently `λ′ ≥ 1`.
    #[error("unstable parameters: beta*alpha^2 = {beta_alpha2:e} >= sigma_x2 = {sigma_x2:e} (lambda' = {lambda_prime})")]
    Instability {
        beta_alpha2: f64,
        sigma_x2: f64,
        lambda_prime: f64,
    },
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

pub(crate) fn ensure_finite(name: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("{name} must be finite, got {v}")))
    }
}
