//! Robust Bayesian causal-effect estimation with cautious variable selection.

pub mod dss;
pub mod error;
pub mod model;
pub mod normal;
pub mod oracle;
pub mod refit;
pub mod robust;
pub mod sampler;
pub mod seed;
pub mod simbench;

pub use error::{Error, Result};

#[cfg(doctest)]
#[doc = include_str!("../../../README.md")]
mod readme {}

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/model.md")]
    mod model {}
    #[doc = include_str!("../../../book/src/sampler.md")]
    mod sampler {}
    #[doc = include_str!("../../../book/src/robust.md")]
    mod robust {}
    #[doc = include_str!("../../../book/src/dss.md")]
    mod dss {}
    #[doc = include_str!("../../../book/src/refit.md")]
    mod refit {}
    #[doc = include_str!("../../../book/src/simulation.md")]
    mod simulation {}
    #[doc = include_str!("../../../book/src/oracle.md")]
    mod oracle {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
