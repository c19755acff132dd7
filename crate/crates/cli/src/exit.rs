//! Exit codes: 0 success, 1 verification failure, 2 admissibility or
//! precondition failure, 3 I/O failure.

use std::fmt;

use gibbs_tree::Error;

pub const OK: i32 = 0;
pub const VERIFICATION_FAILURE: i32 = 1;
pub const PRECONDITION_FAILURE: i32 = 2;
pub const IO_FAILURE: i32 = 3;

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn precondition(message: impl Into<String>) -> Self {
        Self { code: PRECONDITION_FAILURE, message: message.into() }
    }

    pub fn io(context: impl fmt::Display, err: impl fmt::Display) -> Self {
        Self { code: IO_FAILURE, message: format!("{context}: {err}") }
    }

    pub fn verification(message: impl Into<String>) -> Self {
        Self { code: VERIFICATION_FAILURE, message: message.into() }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Io(_) | Error::Csv(_) | Error::Json(_) => IO_FAILURE,
            Error::NotAFixedPoint { .. }
            | Error::NegativeValue { .. }
            | Error::NormalizationFailure(_)
            | Error::StationarityFailure { .. }
            | Error::NonFiniteIntegrand { .. }
            | Error::DegenerateNormalizer { .. }
            | Error::ZeroAtOrigin { .. } => VERIFICATION_FAILURE,
            _ => PRECONDITION_FAILURE,
        };
        Self { code, message: e.to_string() }
    }
}
