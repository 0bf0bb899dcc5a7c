use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Input violates a documented precondition.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Configuration is well-formed but the requested workflow cannot run on it.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("eigensolver did not converge after {sweeps} sweeps (off-diagonal norm {residual:e})")]
    EigenNoConvergence { sweeps: usize, residual: f64 },

    /// Adaptive quadrature ran out of subdivisions. `log_estimate` is the
    /// natural log of the best integral estimate; `achieved_rel_tol` is the
    /// relative error bound reached.
    #[error(
        "quadrature budget exhausted after {subdivisions} subdivisions \
         (log estimate {log_estimate}, achieved rel tol {achieved_rel_tol:e})"
    )]
    QuadratureBudget {
        subdivisions: usize,
        log_estimate: f64,
        achieved_rel_tol: f64,
    },

    #[error("step k={k}: {source}")]
    Step {
        k: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("replication {index}: {source}")]
    Replication {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("could not draw a full-rank loading frame after {attempts} attempts")]
    DegenerateFrame { attempts: usize },
}

impl Error {
    /// True for failures of a numerical routine, as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::EigenNoConvergence { .. }
            | Error::QuadratureBudget { .. }
            | Error::DegenerateFrame { .. } => true,
            Error::Step { source, .. } | Error::Replication { source, .. } => {
                source.is_numerical()
            }
            Error::InvalidInput(_) | Error::InvalidConfig(_) => false,
        }
    }

    pub(crate) fn at_step(self, k: usize) -> Self {
        Error::Step {
            k,
            source: Box::new(self),
        }
    }

    pub(crate) fn at_replication(self, index: usize) -> Self {
        Error::Replication {
            index,
            source: Box::new(self),
        }
    }
}
