use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("bad input: {0}")]
    BadInput(String),

    #[error("budget exceeded: {what} needs {needed}, cap is {cap}")]
    Budget { what: &'static str, needed: u128, cap: u128 },

    #[error("assumption violated: {0}")]
    Assumption(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("mechanism misuse: {0}")]
    Mechanism(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code for the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Budget { .. } => 3,
            Error::BadInput(_) | Error::Json(_) | Error::Assumption(_) => 4,
            Error::InvalidState(_) | Error::Mechanism(_) | Error::Io(_) => 1,
        }
    }
}
