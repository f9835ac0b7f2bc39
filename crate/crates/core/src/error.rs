use thiserror::Error;

use crate::grid::ValidationReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Document does not follow the expected schema.
    #[error("schema error at {location}: {message}")]
    Schema { location: String, message: String },

    #[error("empty network")]
    EmptyNetwork,

    #[error("network violates {} invariant(s): {report}", .report.violations.len())]
    InvalidNetwork { report: ValidationReport },

    #[error("segmentation error: {0}")]
    Segmentation(String),

    #[error("contingency error: {0}")]
    Contingency(String),

    #[error("node at bus {bus} has no shunt capacitance; its voltage cannot be a state")]
    SingularCapacitanceNode { bus: u32 },

    #[error("no equilibrium found: {0}")]
    NoEquilibrium(String),

    #[error("scenario {index} ({name}): {source}")]
    Scenario {
        index: usize,
        name: String,
        #[source]
        source: Box<Error>,
    },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("eigenvalue solver did not converge for a {n}x{n} matrix")]
    EigenNonConvergence { n: usize },

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("scenario {index} is not Hurwitz (max Re = {max_re:e})")]
    NotHurwitz { index: usize, max_re: f64 },

    #[error("scenarios {0} and {1} are output-indistinguishable under this probe (delta_min = 0)")]
    Indistinguishable(usize, usize),

    #[error("degenerate probe design: {0}")]
    DegenerateProbe(String),

    #[error("unobservable model: observability map is identically zero")]
    Unobservable,

    #[error("simulation diverged in interval {interval}")]
    Diverged { interval: usize },

    #[error("missing label {0}")]
    MissingLabel(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn schema(location: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Schema { location: location.into(), message: message.into() }
    }

    /// Coarse category used by the command-line front end for exit codes.
    pub fn is_validation(&self) -> bool {
        if let Error::Scenario { source, .. } = self {
            return source.is_validation();
        }
        matches!(
            self,
            Error::Schema { .. }
                | Error::EmptyNetwork
                | Error::InvalidNetwork { .. }
                | Error::Segmentation(_)
                | Error::Contingency(_)
                | Error::InvalidArgument(_)
                | Error::MissingLabel(_)
                | Error::Dimension(_)
                | Error::SingularCapacitanceNode { .. }
                | Error::Io(_)
                | Error::Json(_)
                | Error::Csv(_)
        )
    }
}
