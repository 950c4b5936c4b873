use alloc::string::String;
use core::fmt;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A granularity name or conversion the vocabulary does not support.
    UnsupportedGranularity(String),
    UnknownPlace(String),
    UnknownCity(String),
    InvalidVocabulary(String),
    InvalidParams(String),
    EmptyActionSpace,
    UnknownAction(u32),
    UnknownUser(u32),
    InvalidRating(f64),
    InvalidNeighbourhood(&'static str),
    InvalidWindow {
        n_trials: usize,
        window: usize,
    },
    InvalidConfig(String),
    /// A record or checkpoint part that does not satisfy its invariants.
    Malformed(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::UnsupportedGranularity(g) => write!(f, "unsupported granularity: {g}"),
            Error::UnknownPlace(p) => write!(f, "unknown place: {p}"),
            Error::UnknownCity(c) => write!(f, "unknown city: {c}"),
            Error::InvalidVocabulary(m) => write!(f, "invalid vocabulary: {m}"),
            Error::InvalidParams(m) => write!(f, "invalid learning parameters: {m}"),
            Error::EmptyActionSpace => f.write_str("action space is empty"),
            Error::UnknownAction(a) => write!(f, "unknown action id {a}"),
            Error::UnknownUser(u) => write!(f, "unknown user id {u}"),
            Error::InvalidRating(r) => write!(f, "rating {r} outside [0, 1]"),
            Error::InvalidNeighbourhood(m) => write!(f, "invalid neighbourhood size: {m}"),
            Error::InvalidWindow { n_trials, window } => {
                write!(f, "window {window} does not divide {n_trials} trials")
            }
            Error::InvalidConfig(m) => write!(f, "invalid configuration: {m}"),
            Error::Malformed(m) => write!(f, "malformed data: {m}"),
        }
    }
}

impl core::error::Error for Error {}
