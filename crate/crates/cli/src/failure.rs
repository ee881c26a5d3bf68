use std::fmt::Display;

use mdcr::MdcrError;

/// A command failure and the exit code that reports it.
#[derive(Debug)]
pub enum Failure {
    /// A check ran and did not pass (exit 1).
    Check(String),
    /// Bad input or arguments; nothing was written (exit 2).
    Validation(String),
    /// Training diverged or produced non-finite values (exit 3).
    Divergence(String),
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::Check(_) => 1,
            Failure::Validation(_) => 2,
            Failure::Divergence(_) => 3,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            Failure::Check(m) | Failure::Validation(m) | Failure::Divergence(m) => m,
        }
    }

    pub fn validation(context: impl Display, err: impl Display) -> Self {
        Failure::Validation(format!("{context}: {err}"))
    }
}

impl From<MdcrError> for Failure {
    fn from(err: MdcrError) -> Self {
        match err {
            MdcrError::Numerical(m) => Failure::Divergence(m),
            other => Failure::Validation(other.to_string()),
        }
    }
}
