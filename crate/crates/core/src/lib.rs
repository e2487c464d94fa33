//! Lexical semantic change detection with skip-gram embeddings.
//!
//! Two corpora are embedded separately, aligned with an orthogonal map,
//! and each word's cosine distance across the aligned spaces is turned into
//! a binary changed/unchanged label by thresholding.

pub mod alignment;
pub mod baselines;
pub mod change;
pub mod corpus;
pub mod error;
pub mod evaluation;
pub mod pipeline;
pub mod sgns;
pub mod synth;
pub mod tsv;

pub use error::{ErrorKind, LscdError, Result};
