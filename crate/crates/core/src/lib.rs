//! Discourse-augmented sentiment analysis.
//!
//! The pipeline induces sentiment-supervised binary discourse trees over
//! EDU-segmented reviews, trains a transition discourse parser on them,
//! converts parsed constituency trees to dependency trees, and feeds those
//! trees to a hybrid sequential/tree sentiment classifier. A length-threshold
//! ensemble and a length-binned evaluation harness round out the toolkit.

pub mod autodiff;
pub mod corpus;
pub mod error;

pub use error::{Error, Result};
