//! Command-line driver: configuration, subcommands and the verification suite.

// `!(x > 0.0)` style guards deliberately reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod run;
pub mod suite;

use std::fmt;

/// Invalid configuration; the message starts with the offending key.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

/// One or more gating checks failed.
#[derive(Debug, Clone, PartialEq)]
pub struct VerificationFailed(pub Vec<String>);

impl fmt::Display for VerificationFailed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "verification failed: {}", self.0.join(", "))
    }
}

impl std::error::Error for VerificationFailed {}

/// A prerequisite output is absent; the message says which command makes it.
#[derive(Debug, Clone, PartialEq)]
pub struct MissingInput(pub String);

impl fmt::Display for MissingInput {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for MissingInput {}

pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_VERIFICATION: i32 = 2;
pub const EXIT_INPUT: i32 = 3;

/// Process exit status for an error: 2 for failed verification, 3 for
/// missing inputs or I/O, 1 otherwise (including invalid configuration).
pub fn exit_code(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if cause.is::<VerificationFailed>() {
            return EXIT_VERIFICATION;
        }
        if cause.is::<MissingInput>() || cause.is::<std::io::Error>() {
            return EXIT_INPUT;
        }
        if cause.is::<ConfigError>() {
            return EXIT_FAILURE;
        }
    }
    EXIT_FAILURE
}
