//! Entity linking over a knowledge base.
//!
//! Mentions are first blocked against the knowledge base with an averaged
//! cosine/Levenshtein/Jaro fuzzy score. Surviving candidates are scored by a
//! learned model that fuses a hierarchical character → word → name surface
//! encoding with semantic vectors: a context vector for the mention and a
//! triplet-trained description embedding for the entity.

pub mod blocking;
pub mod checkpoint;
pub mod config;
pub mod error;
pub mod fixtures;
pub mod linker;
pub mod metrics;
pub mod model;
pub mod nn;
pub mod pipeline;
pub mod scorer;
pub mod semantic;
pub mod similarity;
pub mod surface;
pub mod trainer;
pub mod vectors;

pub use error::{Error, Result};
