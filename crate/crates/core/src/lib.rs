pub mod config;
pub mod dataset;
pub mod dsp;
pub mod error;
pub mod estimator;
pub mod experiment;
pub mod nn;
pub mod pdc;
pub mod search;
pub mod synth;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/synth.md")]
    struct Synth;
    #[doc = include_str!("../../../book/src/features.md")]
    struct Features;
    #[doc = include_str!("../../../book/src/pdc.md")]
    struct Pdc;
    #[doc = include_str!("../../../book/src/estimator.md")]
    struct Estimator;
    #[doc = include_str!("../../../book/src/dataset.md")]
    struct Dataset;
    #[doc = include_str!("../../../book/src/search.md")]
    struct Search;
    #[doc = include_str!("../../../book/src/cli.md")]
    struct Cli;
}
