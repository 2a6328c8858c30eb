use std::fmt;
use std::path::PathBuf;

/// Stage of an active cycle at which energy is withdrawn from the ESC.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stage {
    Wakeup,
    /// SHR + PHR, always sent at the preamble rate.
    Phy,
    Mhr,
    Msdu,
    Fcs,
    InterPacket,
    Sleep,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Wakeup => "wakeup",
            Stage::Phy => "phy",
            Stage::Mhr => "mhr",
            Stage::Msdu => "msdu",
            Stage::Fcs => "fcs",
            Stage::InterPacket => "interpacket",
            Stage::Sleep => "sleep",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("fit failed: {0}")]
    FitFailure(String),

    #[error("target voltage {target} V is not reachable below open-circuit voltage {v_oc} V")]
    UnreachableVoltage { target: f64, v_oc: f64 },

    #[error("transmit power {p_t} dBm outside the open sigmoid range ({low}, {high}) dBm")]
    OutOfRange { p_t: f64, low: f64, high: f64 },

    #[error("ESC depleted{}", depletion_location(*.packet, *.stage))]
    EscDepleted {
        packet: Option<usize>,
        stage: Option<Stage>,
    },

    #[error("{}:{line}: {message}", .path.display())]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("{}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn depletion_location(packet: Option<usize>, stage: Option<Stage>) -> String {
    match (packet, stage) {
        (Some(p), Some(s)) => format!(" in packet {p}, {s} segment"),
        (Some(p), None) => format!(" in packet {p}"),
        (None, Some(s)) => format!(" during {s}"),
        (None, None) => String::new(),
    }
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn fit(msg: impl Into<String>) -> Self {
        Error::FitFailure(msg.into())
    }

    /// Fill in missing depletion context; other variants pass through untouched.
    pub(crate) fn at(self, packet: Option<usize>, stage: Stage) -> Self {
        match self {
            Error::EscDepleted {
                packet: p,
                stage: s,
            } => Error::EscDepleted {
                packet: p.or(packet),
                stage: s.or(Some(stage)),
            },
            other => other,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
