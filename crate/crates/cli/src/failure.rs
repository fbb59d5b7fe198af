use std::fmt;
use std::path::Path;

/// Process exit status, by failure class.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitCode {
    Validation = 1,
    Solver = 2,
    Io = 3,
}

#[derive(Debug)]
pub struct Failure {
    pub code: ExitCode,
    pub message: String,
}

impl Failure {
    pub fn validation(message: impl Into<String>) -> Self {
        Self {
            code: ExitCode::Validation,
            message: message.into(),
        }
    }

    pub fn io(path: &Path, err: impl fmt::Display) -> Self {
        Self {
            code: ExitCode::Io,
            message: format!("{}: {err}", path.display()),
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<spadscan::Error> for Failure {
    fn from(e: spadscan::Error) -> Self {
        let code = if e.is_io() {
            ExitCode::Io
        } else if e.is_solver_failure() {
            ExitCode::Solver
        } else {
            ExitCode::Validation
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

pub type Outcome<T = ()> = Result<T, Failure>;
