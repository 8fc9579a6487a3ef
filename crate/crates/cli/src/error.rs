use std::fmt;

/// Failure of a command, split by exit code.
#[derive(Debug)]
pub enum CliError {
    /// Exit code 1: the config or the command line is unusable.
    Config(String),
    /// Exit code 2: the run itself failed.
    Runtime(String),
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        Self::Config(msg.into())
    }

    pub fn runtime(msg: impl Into<String>) -> Self {
        Self::Runtime(msg.into())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 1,
            Self::Runtime(_) => 2,
        }
    }

    /// One-line JSON record for stderr.
    pub fn to_line(&self) -> String {
        let (kind, message) = match self {
            Self::Config(m) => ("config", m),
            Self::Runtime(m) => ("runtime", m),
        };
        serde_json::json!({ "error": kind, "message": message }).to_string()
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Config(m) | Self::Runtime(m) => f.write_str(m),
        }
    }
}

impl From<pathnas::Error> for CliError {
    fn from(e: pathnas::Error) -> Self {
        use pathnas::Error as E;
        let msg = e.to_string();
        match e {
            E::InvalidSpace(_)
            | E::InvalidConfig(_)
            | E::InvalidBudget(_)
            | E::UnknownLandscapeKind(_)
            | E::ParseArchitecture(_)
            | E::InvalidLandscape(_)
            | E::TooLargeToEnumerate { .. } => Self::Config(msg),
            _ => Self::Runtime(msg),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::Runtime(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;
