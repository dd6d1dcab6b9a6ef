use hrmsim::HrmError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad configuration; `key` is the dotted path of the offending entry.
    #[error("config error at `{key}`: {msg}")]
    Schema { key: String, msg: String },

    #[error("numerical error in {module}::{op}: {msg}")]
    Numerical {
        module: &'static str,
        op: &'static str,
        msg: String,
    },

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn schema(key: &str, msg: String) -> Self {
        CliError::Schema {
            key: key.to_string(),
            msg,
        }
    }

    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        CliError::Io {
            context: context.into(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Schema { .. } => 2,
            CliError::Numerical { .. } => 3,
            CliError::Io { .. } => 1,
        }
    }
}

impl From<HrmError> for CliError {
    fn from(e: HrmError) -> Self {
        match e {
            // Configuration problems found by the core have no single key.
            HrmError::Config(msg) => CliError::schema("<config>", msg),
            other => CliError::Numerical {
                module: other.module(),
                op: other.op().unwrap_or("?"),
                msg: match &other {
                    HrmError::Domain { msg, .. } | HrmError::Numerical { msg, .. } => msg.clone(),
                    HrmError::Config(msg) => msg.clone(),
                },
            },
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::io("writing CSV", std::io::Error::other(e))
    }
}
