//! Supervised line attention for extracting tumor attributes from pathology
//! reports: a line-relevance model picks the lines that matter, and a sparse
//! linear classifier labels the document from those lines alone.

pub mod corpus;
pub mod error;
pub mod eval;
pub mod learners;
pub mod pipeline;
pub mod rng;
pub mod sla;
pub mod stage;
pub mod synth;
pub mod textproc;
pub mod tuning;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/corpus.md")]
    mod corpus {}
    #[doc = include_str!("../../../book/src/line-attention.md")]
    mod line_attention {}
    #[doc = include_str!("../../../book/src/learners.md")]
    mod learners {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    mod evaluation {}
    #[doc = include_str!("../../../book/src/tuning.md")]
    mod tuning {}
    #[doc = include_str!("../../../book/src/staging.md")]
    mod staging {}
    #[doc = include_str!("../../../book/src/synthetic.md")]
    mod synthetic {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
