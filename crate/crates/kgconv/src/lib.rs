//! Generation and evaluation of conversational question-answer datasets
//! grounded in a Wikidata-like knowledge graph.
//!
//! The pipeline samples root-anchored triple sequences from the graph,
//! verbalizes each triple with slotted question templates, rewrites the
//! questions into in-context form with deterministic rules, adds
//! model-assisted synthetic rewrites guarded by expert filters, and emits
//! line-delimited JSON conversations together with split and statistics
//! tooling plus a multi-reference GLEU evaluator.

pub mod context;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod kg;
pub mod lexicon;
pub mod pipeline;
pub mod rewrite;
pub mod sampler;
pub mod template;
#[cfg(test)]
pub(crate) mod testutil;
mod util;

pub use error::{Error, Result};
pub use kg::{
    Entity, EntityId, ExclusionRules, Gender, KnowledgeGraph, Literal, LiteralKind, Node,
    PropertyId, Triple,
};
pub use sampler::{TripleSequence, WalkConfig};
pub use template::{ApplicabilityCondition, Template, TemplateLibrary, TemplateSource};
