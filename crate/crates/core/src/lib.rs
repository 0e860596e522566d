//! Tooling for migrating compositional KBQA datasets from Freebase-schema
//! SPARQL to Wikidata-schema SPARQL, grounding the migrated patterns with
//! real entities, translating questions, and scoring parser predictions.

pub mod dataset;
pub mod eval;
pub mod grounding;
pub mod mapping;
pub mod par;
pub mod sparql;
pub mod text;
pub mod translation;
