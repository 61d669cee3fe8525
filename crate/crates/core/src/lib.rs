pub mod chaos;
pub mod decorrelate;
pub mod error;
pub mod experiment;
pub mod grid;
pub mod kernels;
pub mod quad;
pub mod rng;
pub mod samplers;
pub mod stats;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/intro.md")]
    mod intro {}
    #[doc = include_str!("../../../book/src/kernels.md")]
    mod kernels {}
    #[doc = include_str!("../../../book/src/samplers.md")]
    mod samplers {}
    #[doc = include_str!("../../../book/src/chaos.md")]
    mod chaos {}
    #[doc = include_str!("../../../book/src/decorrelation.md")]
    mod decorrelation {}
    #[doc = include_str!("../../../book/src/verification.md")]
    mod verification {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
}
