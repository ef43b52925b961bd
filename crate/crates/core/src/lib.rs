//! Source-credibility assessment for link-sharing communities.
//!
//! The pipeline ingests submissions and comment trees, mines near-duplicate
//! submission pairs, trains a residual adapter so that cosine similarity
//! reflects source credibility, classifies submissions with a single-branch
//! or anchor-based Siamese head, builds a signed post-to-post graph from
//! commenter reactions, classifies it with a GCN or node2vec, and scores
//! topic susceptibility per community.

pub mod adapter;
pub mod checkpoint;
pub mod classifier;
pub mod corpus;
pub mod embedding;
pub mod error;
pub mod gcn;
pub mod nn;
pub mod node2vec;
pub mod p2pnet;
pub mod pairing;
pub mod pipeline;
#[cfg(test)]
mod properties;
pub mod rng;
pub mod stats;
pub mod susceptibility;

pub use error::{Error, Result};
