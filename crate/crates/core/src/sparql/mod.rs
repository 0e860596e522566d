//! Restricted SPARQL: terms, query AST, parser, canonical serializer and
//! the pattern/entity utilities built on top of them.

mod analysis;
mod ast;
mod parse;
mod term;

use thiserror::Error;

pub use analysis::{
    align_bindings, bind_placeholders, extract_entities, extract_properties, mod_entities, mod_entities_with_labels,
    normalized, placeholders, Bindings, Multiset,
};
pub use ast::{serialize_query, Dialect, FilterClause, PathStep, PropertyPath, Query, QueryForm, TriplePattern};
pub use parse::parse_query;
pub use term::{EntityId, FreebaseName, Mid, Placeholder, PropertyId, Term, Variable};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SparqlError {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("{dialect} dialect violation at byte {offset}: {message}")]
    Dialect { offset: usize, dialect: Dialect, message: String },
    #[error("expected a {expected} query, found {found}")]
    WrongDialect { expected: Dialect, found: Dialect },
    #[error("invalid term `{0}`")]
    InvalidTerm(String),
    #[error("invariant violated: {0}")]
    Invariant(String),
}
