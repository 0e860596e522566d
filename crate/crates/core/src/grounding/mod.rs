//! Entity grounding: turning migrated query patterns into executable queries
//! by asking a SPARQL service for satisfying entity assignments.

mod ground;
mod http;
mod negative;
mod probe;
mod snapshot;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sparql::{EntityId, Query};

pub use ground::{
    fetch_labels, ground_entry, ground_pattern, realize_question, Binding, GroundError, GroundOptions, GroundOutcome,
    GroundedEntry, RealizeError,
};
pub use http::{parse_sparql_json, EndpointConfig, HttpEndpoint, InflightLimiter, TokenBucket};
pub use negative::{entry_rng, negative_sample, NegativeOutcome, PredicatePools};
pub use probe::{build_grounding_query, GroundingQuery};
pub use snapshot::{evaluate_local, TripleStoreSnapshot, DEFAULT_ENUMERATION_BOUND};

/// A value bound to a result variable.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Entity(EntityId),
    Literal(String),
}

impl Value {
    pub fn as_entity(&self) -> Option<EntityId> {
        match self {
            Value::Entity(e) => Some(*e),
            Value::Literal(_) => None,
        }
    }

    /// Lexical form used for `ORDER BY`; entity IRIs sort by their text.
    pub fn sort_key(&self) -> String {
        match self {
            Value::Entity(e) => format!("http://www.wikidata.org/entity/{e}"),
            Value::Literal(s) => s.clone(),
        }
    }
}

/// Variable name (without `?`) → value.
pub type Row = BTreeMap<String, Value>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum QueryResult {
    Boolean(bool),
    Rows(Vec<Row>),
}

impl QueryResult {
    /// ASK answer, or row non-emptiness for SELECT results.
    pub fn is_satisfied(&self) -> bool {
        match self {
            QueryResult::Boolean(b) => *b,
            QueryResult::Rows(rows) => !rows.is_empty(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EndpointError {
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("endpoint returned status {code}: {body}")]
    Status { code: u16, body: String },
    #[error("malformed response: {0}")]
    Malformed(String),
    #[error("request timed out")]
    Timeout,
    #[error("enumeration explored more than {bound} partial assignments")]
    Capacity { bound: u64 },
    #[error("query not supported here: {0}")]
    Unsupported(String),
}

impl EndpointError {
    pub fn is_retryable(&self) -> bool {
        match self {
            EndpointError::Transport(_) | EndpointError::Timeout => true,
            EndpointError::Status { code, .. } => *code == 429 || *code >= 500,
            _ => false,
        }
    }
}

/// Anything that can answer restricted SPARQL queries and look up labels: a
/// remote endpoint or an in-memory snapshot.
pub trait QueryService: Send + Sync {
    fn execute(&self, query: &Query) -> Result<QueryResult, EndpointError>;

    /// Labels in `language` for the given entities. Entities without a label
    /// are absent from the map.
    fn labels(&self, entities: &[EntityId], language: &str) -> Result<BTreeMap<EntityId, String>, EndpointError>;
}

impl<T: QueryService + ?Sized> QueryService for &T {
    fn execute(&self, query: &Query) -> Result<QueryResult, EndpointError> {
        (**self).execute(query)
    }

    fn labels(&self, entities: &[EntityId], language: &str) -> Result<BTreeMap<EntityId, String>, EndpointError> {
        (**self).labels(entities, language)
    }
}
