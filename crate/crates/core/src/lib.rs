//! Structured phase and gain robustness analysis for MIMO LTI feedback
//! loops.
//!
//! The crate computes matrix phases, structured phase and gain indices of
//! frequency responses, and certifies a loop `(G, Δ)` stable when every
//! frequency of a grid passes a phase, gain or passivity criterion. See the
//! guide in `book/` for a walkthrough.

pub mod benchmark;
pub mod certify;
pub mod cli;
pub mod error;
pub mod indices;
pub mod lmi;
pub mod lti;
pub mod matrix;
pub mod phase;
pub mod sampling;
pub mod serial;
pub mod structure;

pub use error::{Error, Result};

// compiles the guide's snippets as doctests
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/phases.md")]
    mod phases {}
    #[doc = include_str!("../../../book/src/structure.md")]
    mod structure {}
    #[doc = include_str!("../../../book/src/indices.md")]
    mod indices {}
    #[doc = include_str!("../../../book/src/lmi.md")]
    mod lmi {}
    #[doc = include_str!("../../../book/src/certification.md")]
    mod certification {}
    #[doc = include_str!("../../../book/src/benchmark.md")]
    mod benchmark {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
