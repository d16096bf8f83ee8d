//! Process-level error carrying its exit code. The code table is frozen:
//! 0 success, 2 usage or config, 3 parameter/data domain, 4 degenerate
//! sample, 5 unsupported operation, 1 everything else.

use std::fmt;

#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

pub type CmdResult<T> = Result<T, Failure>;

impl Failure {
    /// Usage, config file, or data file syntax problem.
    pub fn config(message: impl Into<String>) -> Self {
        Failure { code: 2, message: message.into() }
    }

    pub fn unsupported(message: impl Into<String>) -> Self {
        Failure { code: 5, message: message.into() }
    }

    pub fn io(context: &str, err: std::io::Error) -> Self {
        Failure { code: 1, message: format!("{context}: {err}") }
    }

    /// Reading an input the user named is a usage problem, not an
    /// internal one.
    pub fn read_input(path: &std::path::Path, err: std::io::Error) -> Self {
        Failure {
            code: 2,
            message: format!("cannot read {}: {err}", path.display()),
        }
    }
}

impl From<mumle::Error> for Failure {
    fn from(err: mumle::Error) -> Self {
        let code = match err {
            mumle::Error::ParameterDomain(_) | mumle::Error::DataShape(_) => 3,
            mumle::Error::DegenerateSample(_) => 4,
            mumle::Error::Unsupported(_) => 5,
            _ => 1,
        };
        Failure { code, message: err.to_string() }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.message)
    }
}
