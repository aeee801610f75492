//! CLI error type carrying the process exit code.
//!
//! Exit codes: 0 success, 2 malformed input (flags, files, profiles — clap's
//! own usage errors also exit 2), 3 model-validity failures (resonances,
//! unidentifiable designs, unphysical states), 4 numerical failures
//! (integration, optimization, LAPACK).

use trikit_core::Error as CoreError;

pub const EXIT_INPUT: u8 = 2;
pub const EXIT_MODEL: u8 = 3;
pub const EXIT_NUMERIC: u8 = 4;

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn input(message: impl Into<String>) -> Self {
        Self { code: EXIT_INPUT, message: message.into() }
    }

    pub fn model(message: impl Into<String>) -> Self {
        Self { code: EXIT_MODEL, message: message.into() }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        let code = match &e {
            CoreError::Dimension(_)
            | CoreError::InvalidInput(_)
            | CoreError::NotHermitian { .. }
            | CoreError::NotUnitary { .. }
            | CoreError::Io(_) => EXIT_INPUT,
            CoreError::Unphysical(_)
            | CoreError::GeneratorDiagonal { .. }
            | CoreError::EmptyCandidates
            | CoreError::Resonant { .. }
            | CoreError::BlocksTooSmall { .. }
            | CoreError::TrackingAmbiguity { .. }
            | CoreError::RankDeficientDesign { .. }
            | CoreError::SingularSystem(_) => EXIT_MODEL,
            CoreError::IntegrationFailure { .. }
            | CoreError::MleNonConvergence { .. }
            | CoreError::Linalg(_) => EXIT_NUMERIC,
        };
        Self { code, message: e.to_string() }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::input(format!("i/o error: {e}"))
    }
}

pub type CliResult<T> = Result<T, CliError>;
