use crate::io::FormatError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unknown {kind} `{name}` (available: {available})")]
    UnknownStrategy {
        kind: &'static str,
        name: String,
        available: String,
    },

    #[error("path delay {delay_s:e} s is outside the unambiguous window [0, {window_s:e}) s")]
    DelayOutOfWindow { delay_s: f64, window_s: f64 },

    /// Beam switching needs at least 2 µs of settling; shorter guards are
    /// rejected rather than silently producing corrupted slots.
    #[error("guard time {guard_s:e} s is below the {floor_s:e} s beam-switching floor")]
    GuardTooShort { guard_s: f64, floor_s: f64 },

    #[error("inconsistent capture data: {0}")]
    Inconsistent(String),

    #[error("calibration response vanishes at tone {tone} ({freq_hz} Hz)")]
    ZeroCalibration { tone: usize, freq_hz: f64 },

    #[error("beam pair ({tx}, {rx}) has {found} repetitions, expected {expected}")]
    RepetitionMismatch {
        tx: usize,
        rx: usize,
        found: usize,
        expected: usize,
    },

    #[error("drift estimation needs at least 2 anchor slots, found {0}")]
    TooFewAnchors(usize),

    #[error("total received power is zero")]
    ZeroPower,

    #[error("metadata: {0}")]
    Metadata(String),

    #[error(transparent)]
    Format(#[from] FormatError),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
