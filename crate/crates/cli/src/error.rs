use std::fmt;

/// Exit-code classes of the CLI contract: 0 success, 2 domain-invariant
/// failure, 3 parse failure, 4 infeasible request.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitClass {
    Domain = 2,
    Parse = 3,
    Infeasible = 4,
}

#[derive(Debug)]
pub struct CliError {
    pub class: ExitClass,
    pub message: String,
}

impl CliError {
    pub fn parse(message: impl Into<String>) -> Self {
        CliError {
            class: ExitClass::Parse,
            message: message.into(),
        }
    }

    pub fn domain(message: impl Into<String>) -> Self {
        CliError {
            class: ExitClass::Domain,
            message: message.into(),
        }
    }

    pub fn infeasible(message: impl Into<String>) -> Self {
        CliError {
            class: ExitClass::Infeasible,
            message: message.into(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        self.class as i32
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.message)
    }
}

impl std::error::Error for CliError {}

impl From<qobs::Error> for CliError {
    fn from(err: qobs::Error) -> Self {
        use qobs::Error as E;
        let class = match err {
            E::UnsupportedSchemaVersion(_) => ExitClass::Parse,
            E::InfeasibleRanks(_) | E::SubsetBlowup { .. } => ExitClass::Infeasible,
            _ => ExitClass::Domain,
        };
        CliError {
            class,
            message: err.to_string(),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(err: std::io::Error) -> Self {
        CliError::parse(format!("io error: {err}"))
    }
}

impl From<serde_json::Error> for CliError {
    fn from(err: serde_json::Error) -> Self {
        CliError::parse(format!("json error: {err}"))
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
