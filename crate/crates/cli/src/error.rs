use serde::Serialize;

/// Failure of a run, split by exit code: 1 for bad input, 2 for anything
/// that goes wrong while running.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Runtime(String),
}

#[derive(Debug, Serialize)]
struct ErrorRecord<'a> {
    status: &'static str,
    kind: &'static str,
    exit_code: i32,
    message: &'a str,
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Validation(_) => "validation",
            CliError::Runtime(_) => "runtime",
        }
    }

    /// One-line JSON record for stderr.
    pub fn to_record(&self) -> String {
        let message = self.to_string();
        serde_json::to_string(&ErrorRecord {
            status: "error",
            kind: self.kind(),
            exit_code: self.exit_code(),
            message: &message,
        })
        .expect("record serializes")
    }
}

/// Library errors raised while checking a configuration.
impl From<pfgmpp::Error> for CliError {
    fn from(e: pfgmpp::Error) -> Self {
        CliError::Validation(e.to_string())
    }
}

pub(crate) fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}
