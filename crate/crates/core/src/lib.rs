//! Contact process on the homogeneous tree `T_{2d}` with symmetric,
//! letter-dependent infection rates.

pub mod brw;
pub mod cayley;
pub mod engine;
pub mod error;
pub mod estimators;
pub mod gwtree;
pub mod parallel;
pub mod rng;
pub mod spectral;
pub mod stats;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/words.md")]
    mod words {}
    #[doc = include_str!("../../../book/src/simulation.md")]
    mod simulation {}
    #[doc = include_str!("../../../book/src/estimators.md")]
    mod estimators {}
    #[doc = include_str!("../../../book/src/spectral.md")]
    mod spectral {}
    #[doc = include_str!("../../../book/src/phase.md")]
    mod phase {}
    #[doc = include_str!("../../../book/src/gw.md")]
    mod gw {}
    #[doc = include_str!("../../../book/src/reproducibility.md")]
    mod reproducibility {}
}
