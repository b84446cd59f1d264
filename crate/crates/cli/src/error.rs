use std::path::PathBuf;

/// Process exit statuses; stable across releases.
pub mod exit {
    pub const SUCCESS: i32 = 0;
    pub const CONFIG: i32 = 2;
    pub const NON_CONVERGENCE: i32 = 3;
    pub const INTEGRITY: i32 = 4;
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),

    #[error("calibration file {0} not found; run `simulate` first or pass --cal")]
    MissingCalibration(PathBuf),

    #[error("waveform did not reach {target_db} dB PAPR (best {papr_db:.3} dB)")]
    NonConvergence { papr_db: f64, target_db: f64 },

    #[error("{path}: {source}")]
    Input {
        path: PathBuf,
        source: sounder::Error,
    },

    #[error(transparent)]
    Core(#[from] sounder::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use sounder::Error as E;
        let core = |e: &E| match e {
            E::InvalidParameter(_)
            | E::UnknownStrategy { .. }
            | E::DelayOutOfWindow { .. }
            | E::GuardTooShort { .. }
            | E::Metadata(_) => exit::CONFIG,
            _ => exit::INTEGRITY,
        };
        match self {
            CliError::Config(_) | CliError::MissingCalibration(_) => exit::CONFIG,
            CliError::NonConvergence { .. } => exit::NON_CONVERGENCE,
            CliError::Input { source, .. } => match source {
                E::Io(e) if e.kind() == std::io::ErrorKind::NotFound => exit::CONFIG,
                other => core(other),
            },
            CliError::Core(e) => core(e),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
