//! Error classes and their process exit codes.

use std::fmt;

use nkscreen::Error;

pub const RUNTIME_FAILURE: u8 = 1;
pub const INPUT_INVALID: u8 = 2;
pub const CERTIFICATION_FAILED: u8 = 3;

#[derive(Debug)]
pub struct Invalid(pub String);

impl fmt::Display for Invalid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid input: {}", self.0)
    }
}

impl std::error::Error for Invalid {}

#[derive(Debug)]
pub struct Uncertified(pub String);

impl fmt::Display for Uncertified {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "certification failed: {}", self.0)
    }
}

impl std::error::Error for Uncertified {}

pub fn code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<Invalid>() {
            return INPUT_INVALID;
        }
        if cause.is::<Uncertified>() {
            return CERTIFICATION_FAILED;
        }
        if let Some(e) = cause.downcast_ref::<Error>() {
            return match e {
                Error::InvalidNetwork(_)
                | Error::InvalidConfig(_)
                | Error::DimensionMismatch { .. }
                | Error::UnknownStrategy { .. }
                | Error::Json(_) => INPUT_INVALID,
                Error::NoReliableEpoch => CERTIFICATION_FAILED,
                _ => RUNTIME_FAILURE,
            };
        }
    }
    RUNTIME_FAILURE
}
