use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HrmError {
    /// An argument is outside the domain of the operation.
    #[error("{op}: {msg}")]
    Domain { op: &'static str, msg: String },

    /// Inconsistent or unsupported configuration.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// A numerical procedure failed (e.g. an indefinite correlation matrix).
    #[error("numerical failure in {module}::{op}: {msg}")]
    Numerical {
        module: &'static str,
        op: &'static str,
        msg: String,
    },
}

pub type Result<T, E = HrmError> = std::result::Result<T, E>;

pub(crate) fn domain(op: &'static str, msg: impl Into<String>) -> HrmError {
    HrmError::Domain {
        op,
        msg: msg.into(),
    }
}

pub(crate) fn config(msg: impl Into<String>) -> HrmError {
    HrmError::Config(msg.into())
}

impl HrmError {
    /// Module the failing operation lives in, for diagnostics.
    pub fn module(&self) -> &'static str {
        match self {
            HrmError::Numerical { module, .. } => module,
            HrmError::Config(_) => "config",
            HrmError::Domain { op, .. } => match *op {
                "path_loss" | "gen_rician" | "ChannelRealization::new" => "channel",
                "max_gain" | "ris_state" | "hrm_symbol_set" | "simulate_rx" => "modem",
                "instantaneous_snr" | "energy_efficiency" | "ris_power" => "power",
                _ => "analysis",
            },
        }
    }

    /// Name of the failing operation, if known.
    pub fn op(&self) -> Option<&'static str> {
        match self {
            HrmError::Domain { op, .. } | HrmError::Numerical { op, .. } => Some(op),
            HrmError::Config(_) => None,
        }
    }
}
