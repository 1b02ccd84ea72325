//! Process exit codes.

use std::fmt;

use dgvse::Error;

pub const FAILURE: u8 = 1;
/// Bad flags, configuration or query.
pub const CONFIG: u8 = 2;
/// Unreadable or malformed dataset/model files.
pub const DATA: u8 = 3;
/// Unknown tag or item id.
pub const LOOKUP: u8 = 4;
pub const BIND: u8 = 5;

/// An error with the exit code it should end the process with.
#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn new(code: u8, message: impl Into<String>) -> Self {
        CliError {
            code,
            message: message.into(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

pub fn code_for(error: &Error) -> u8 {
    match error {
        Error::Config(_)
        | Error::InvalidQuery { .. }
        | Error::BatchTooSmall(_)
        | Error::EmptySubset
        | Error::TooFewTags { .. } => CONFIG,
        Error::ParseError { .. }
        | Error::InconsistentFeatureLength { .. }
        | Error::DuplicateId(_)
        | Error::EmptyTagsList(_)
        | Error::EmptyDataset
        | Error::ItemWithoutTags(_)
        | Error::TooFewItems { .. }
        | Error::DimensionMismatch { .. }
        | Error::VersionMismatch(_)
        | Error::TruncatedFile
        | Error::HeaderCorrupt(_)
        | Error::Io(_) => DATA,
        Error::UnknownTag(_) | Error::UnknownTagName(_) | Error::UnknownId(_) => LOOKUP,
        _ => FAILURE,
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::new(code_for(&e), e.to_string())
    }
}
