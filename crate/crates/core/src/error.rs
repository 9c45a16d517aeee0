use thiserror::Error;

/// Errors produced by the simulation and numerical routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("letter {letter} out of range for an alphabet of {size} letters")]
    LetterOutOfRange { letter: usize, size: usize },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("prefixes agree on all {depth} shared letters; first disagreement not witnessed")]
    InsufficientDepth { depth: usize },

    #[error("count overflows the supported range at {0}")]
    Overflow(usize),

    #[error("failed to converge: {0}")]
    NonConvergence(String),

    #[error("fixed-point iteration diverged at z = {z}: beyond the singularity")]
    BeyondSingularity { z: f64 },

    #[error("no bracket found: {0}")]
    NoBracket(String),

    #[error("matrix is reducible: {0}")]
    Reducible(String),

    #[error("tree is extinct before the requested window")]
    ExtinctTree,

    #[error("malformed word {0:?}")]
    ParseWord(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn param<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Parameter(msg.into()))
}
