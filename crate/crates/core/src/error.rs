use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("matrix is not positive semi-definite: min eigenvalue {min_eigenvalue:e} below -{tolerance:e}")]
    NotPositiveSemiDefinite { min_eigenvalue: f64, tolerance: f64 },

    #[error("singular system while computing {0}")]
    Singular(&'static str),

    #[error("quadrature did not converge with {nodes} nodes (last change {last_change:e})")]
    QuadratureNotConverged { nodes: usize, last_change: f64 },

    #[error("inconsistent cluster plan: {0}")]
    Cluster(String),

    #[error("unknown {kind} `{name}`")]
    Unknown { kind: &'static str, name: String },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
