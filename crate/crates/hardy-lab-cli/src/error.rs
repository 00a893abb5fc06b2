use hardy_lab::atomic::AtomicError;
use hardy_lab::io::IoError;
use hardy_lab::maximal::MaximalError;
use hardy_lab::whitney::WhitneyError;
use hardy_lab::{ProfileError, SpaceError, SpectralError};
use serde::Serialize;
use thiserror::Error;

/// Exit status 1: the inputs were fine but a checked property failed.
pub const EXIT_VALIDATION: u8 = 1;
/// Exit status 2: unreadable, malformed or out-of-range input.
pub const EXIT_INPUT: u8 = 2;

#[derive(Debug, Error, Serialize)]
#[error("{code}: {message}")]
pub struct CliError {
    pub code: &'static str,
    pub message: String,
    #[serde(skip)]
    pub exit: u8,
}

impl CliError {
    pub fn input(code: &'static str, message: impl Into<String>) -> Self {
        Self { code, message: message.into(), exit: EXIT_INPUT }
    }

    pub fn validation(code: &'static str, message: impl Into<String>) -> Self {
        Self { code, message: message.into(), exit: EXIT_VALIDATION }
    }
}

impl From<IoError> for CliError {
    fn from(e: IoError) -> Self {
        let code = match &e {
            IoError::Read { .. } => "FILE_READ",
            IoError::Write { .. } => "FILE_WRITE",
            IoError::Parse { .. } => "JSON_PARSE",
            IoError::Format(_) => "BAD_INPUT",
            IoError::Space(_) => "INVALID_SPACE",
            IoError::Spectral(_) => "INVALID_OPERATOR",
        };
        Self::input(code, e.to_string())
    }
}

impl From<SpaceError> for CliError {
    fn from(e: SpaceError) -> Self {
        Self::input("INVALID_SPACE", e.to_string())
    }
}

impl From<SpectralError> for CliError {
    fn from(e: SpectralError) -> Self {
        match e {
            SpectralError::Quadrature(_) | SpectralError::FitDegenerate(_) => Self::validation("NUMERICAL_FAILURE", e.to_string()),
            SpectralError::NonpositiveScale(_) => Self::input("BAD_INPUT", e.to_string()),
            _ => Self::input("INVALID_OPERATOR", e.to_string()),
        }
    }
}

impl From<ProfileError> for CliError {
    fn from(e: ProfileError) -> Self {
        match e {
            ProfileError::InvalidOrder(_) | ProfileError::InvalidResolution(_) | ProfileError::InvalidSamples => {
                Self::input("BAD_PROFILE", e.to_string())
            }
            ProfileError::InvalidExponent(_) => Self::input("P_OUT_OF_RANGE", e.to_string()),
            _ => Self::validation("NUMERICAL_FAILURE", e.to_string()),
        }
    }
}

impl From<MaximalError> for CliError {
    fn from(e: MaximalError) -> Self {
        match e {
            MaximalError::Spectral(s) => s.into(),
            MaximalError::Profile(p) => p.into(),
            MaximalError::InvalidParameter { name: "p", .. } => Self::input("P_OUT_OF_RANGE", e.to_string()),
            MaximalError::DimensionMismatch { .. } => Self::input("DIMENSION_MISMATCH", e.to_string()),
            _ => Self::input("BAD_INPUT", e.to_string()),
        }
    }
}

impl From<WhitneyError> for CliError {
    fn from(e: WhitneyError) -> Self {
        Self::input("BAD_OMEGA", e.to_string())
    }
}

impl From<AtomicError> for CliError {
    fn from(e: AtomicError) -> Self {
        match e {
            AtomicError::InvalidExponent(_) => Self::input("P_OUT_OF_RANGE", e.to_string()),
            AtomicError::DimensionMismatch { .. } => Self::input("DIMENSION_MISMATCH", e.to_string()),
            AtomicError::ZeroField => Self::input("ZERO_SIGNAL", e.to_string()),
            AtomicError::Profile(p) => p.into(),
            AtomicError::Spectral(s) => s.into(),
            AtomicError::Maximal(m) => m.into(),
            AtomicError::Whitney(w) => w.into(),
            AtomicError::VanishingOrderTooLow { .. } => Self::validation("NUMERICAL_FAILURE", e.to_string()),
        }
    }
}
