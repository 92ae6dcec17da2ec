use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("tau must be finite and at least 1, got {0}")]
    InvalidTau(f64),

    #[error("{what} = {value} is outside its domain")]
    Domain { what: &'static str, value: f64 },

    #[error("singular configuration: {0}")]
    Singular(String),

    #[error("cap contains {found} grid points, at least {needed} are required")]
    DegenerateCap { found: usize, needed: usize },

    #[error("no support points inside the cap")]
    EmptyCap,

    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("cannot parse {path}: {message}")]
    Parse { path: String, message: String },
}
