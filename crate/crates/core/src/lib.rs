//! Judge-to-venture matching: text similarity learners, a simplex-weighted
//! ensemble, max-min fair panel assignment and cohort statistics.
//!
//! ```
//! use judgematch::lexical::{fit_idf, tfidf_vector, cosine_sparse, IdfScheme, TfVariant};
//! use judgematch::corpus::{sanitize, whitespace_tokens};
//!
//! let docs: Vec<Vec<String>> = ["Solar <b>micro-grids</b> for villages", "Grid-scale solar storage"]
//!     .iter()
//!     .map(|t| whitespace_tokens(&sanitize(t)))
//!     .collect();
//! let idf = fit_idf(&docs, "whitespace", IdfScheme::Smoothed, None).unwrap();
//! let (a, _) = tfidf_vector(&docs[0], &idf, TfVariant::Standard);
//! let (b, _) = tfidf_vector(&docs[1], &idf, TfVariant::Standard);
//! let s = cosine_sparse(&a, &b).value;
//! assert!(s > 0.0 && s < 1.0);
//! ```

pub mod assignment;
pub mod corpus;
pub mod embedding;
pub mod ensemble;
pub mod error;
pub mod evaluation;
pub mod lexical;
pub mod llm;

pub use error::{Error, Result};

pub const ENGINE_VERSION: &str = env!("CARGO_PKG_VERSION");

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/corpus.md")]
    mod corpus {}
    #[doc = include_str!("../../../book/src/similarity.md")]
    mod similarity {}
    #[doc = include_str!("../../../book/src/ensemble.md")]
    mod ensemble {}
    #[doc = include_str!("../../../book/src/assignment.md")]
    mod assignment {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    mod evaluation {}
    #[doc = include_str!("../../../book/src/pipeline.md")]
    mod pipeline {}
    #[doc = include_str!("../../../book/src/review-api.md")]
    mod review_api {}
}
