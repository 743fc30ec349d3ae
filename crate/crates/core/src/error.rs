use thiserror::Error;

/// Why a point or plan has no market equilibrium.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Infeasibility {
    #[error("operating fleet {operating:.6} is below the matching threshold {threshold:.6} at demand {demand:.6}/h")]
    PaxTimes {
        demand: f64,
        operating: f64,
        threshold: f64,
    },
    #[error("{stations:.6} stations do not exceed the supply bound {bound:.6}")]
    StationSupply { stations: f64, bound: f64 },
    #[error("passenger demand vanishes at the largest operating fleet")]
    NoDemand,
    #[error("no feasible cell in the search box")]
    NoFeasibleCell,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("infeasible: {0}")]
    Infeasible(#[from] Infeasibility),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("config error at `{field}`: {message}")]
    Config { field: String, message: String },
    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }

    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. } | Error::InvalidInput(_) | Error::Io(_) => 2,
            Error::Infeasible(_) => 3,
            Error::Numeric(_) => 4,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
