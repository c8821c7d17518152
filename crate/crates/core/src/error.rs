use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("negative entry at {0}")]
    NegativeEntry(String),
    #[error("invalid diagram at level {level}, index {index}: {message}")]
    InvalidDiagram {
        level: usize,
        index: usize,
        message: String,
    },
    #[error("invalid subdiagram at level {level}: {message}")]
    InvalidSubdiagram { level: usize, message: String },
    #[error("out of range: {0}")]
    Range(String),
    #[error("invalid input: {0}")]
    Input(String),
    #[error("resource limit: {0}")]
    Resource(String),
    #[error("not converged: {0}")]
    Convergence(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub fn range(msg: impl Into<String>) -> Self {
        Error::Range(msg.into())
    }
}
