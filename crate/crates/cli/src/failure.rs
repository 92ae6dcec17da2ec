use std::fmt;

use causal_sphere::Error;

pub const EXIT_USAGE: u8 = 2;
pub const EXIT_NOT_CONVERGED: u8 = 3;
pub const EXIT_CERTIFICATE: u8 = 4;
pub const EXIT_IO: u8 = 5;

/// An error together with the process exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

impl Failure {
    pub fn usage(msg: impl fmt::Display) -> Self {
        Failure { code: EXIT_USAGE, error: anyhow::anyhow!("{msg}") }
    }

    pub fn io(msg: impl fmt::Display) -> Self {
        Failure { code: EXIT_IO, error: anyhow::anyhow!("{msg}") }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::InvalidTau(_) | Error::Domain { .. } | Error::InvalidConfig(_) => EXIT_USAGE,
            Error::Io { .. } | Error::Parse { .. } => EXIT_IO,
            _ => 1,
        };
        Failure { code, error: anyhow::anyhow!("{e}") }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure { code: EXIT_IO, error: e.into() }
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Failure { code: EXIT_IO, error: e.into() }
    }
}
