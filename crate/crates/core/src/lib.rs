//! Speaker-dependent visual-unit discovery for lipreading.

pub mod cluster;
pub mod corpus;
pub mod decoder;
pub mod error;
pub mod eval;
pub mod hierarchy;
pub mod hmm;
pub mod lexicon;
pub mod pipeline;
pub mod seed;
pub mod units;

pub use error::{Error, Result};
