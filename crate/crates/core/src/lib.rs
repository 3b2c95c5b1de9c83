// Negated comparisons are how non-finite inputs are rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod geometry;
pub mod graph;
pub mod imm;
pub mod io;
pub mod metrics;
pub mod motion;
pub mod pipeline;
pub mod sim;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/motion.md")]
    struct Motion;
    #[doc = include_str!("../../../book/src/imm.md")]
    struct Imm;
    #[doc = include_str!("../../../book/src/graph.md")]
    struct Graph;
    #[doc = include_str!("../../../book/src/levels.md")]
    struct Levels;
    #[doc = include_str!("../../../book/src/metrics.md")]
    struct Metrics;
    #[doc = include_str!("../../../book/src/cli.md")]
    struct Cli;
}
