//! Image specificity and specificity-aware text-based image retrieval.
//!
//! An image is *specific* when the people describing it tend to say the same
//! thing, and *ambiguous* when their descriptions vary. This crate measures
//! that property from sets of descriptions (human-rated or automatic), and
//! uses it to rank an image database against free-text queries: each image
//! gets its own logistic model mapping query/reference similarity to a match
//! probability, and those per-image parameters can be predicted from image
//! features with ν-SVR.
//!
//! Module map:
//!
//! | Module | Contents |
//! |--------|----------|
//! | [`corpus`] | dataset, ratings and score files; pool splitting |
//! | [`lexsim`] | tokenizer, lexicon, TF-IDF, sentence similarity |
//! | [`specificity`] | human and automated specificity scores |
//! | [`retrieval`] | baseline and logistic rankings, per-image LR |
//! | [`predict`] | ν-SVR regressors and leave-one-out parameter prediction |
//! | [`analysis`] | Spearman, consistency, retrieval metrics, curves |
//! | [`synthetic`] | seeded generators for test corpora |

pub mod analysis;
pub mod corpus;
mod error;
pub mod lexsim;
pub mod predict;
pub mod retrieval;
pub mod seed;
pub mod specificity;
pub mod synthetic;

pub use error::{Error, Result};
