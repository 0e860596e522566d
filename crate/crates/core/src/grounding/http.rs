//! SPARQL-protocol client with a token-bucket rate limit and a ceiling on
//! concurrent requests.

use std::collections::BTreeMap;
use std::sync::{Condvar, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use serde_json::Value as Json;

use crate::sparql::{EntityId, Query};

use super::{EndpointError, QueryResult, QueryService, Row, Value};

const ENTITY_IRI: &str = "http://www.wikidata.org/entity/";
const RESULTS_MIME: &str = "application/sparql-results+json";

#[derive(Debug, Clone)]
pub struct EndpointConfig {
    pub url: String,
    pub timeout: Duration,
    pub max_inflight: usize,
    pub requests_per_second: f64,
    /// Extra attempts after a retryable failure.
    pub retries: u32,
    pub backoff: Duration,
    pub user_agent: String,
}

impl EndpointConfig {
    pub fn new(url: impl Into<String>) -> Self {
        EndpointConfig {
            url: url.into(),
            timeout: Duration::from_secs(60),
            max_inflight: 4,
            requests_per_second: 5.0,
            retries: 2,
            backoff: Duration::from_millis(500),
            user_agent: concat!("kbqa-migrate/", env!("CARGO_PKG_VERSION")).to_string(),
        }
    }
}

/// Classic token bucket: holds at most `burst` tokens, refilled at `rate`
/// tokens per second. A non-positive rate disables limiting.
#[derive(Debug)]
pub struct TokenBucket {
    rate: f64,
    burst: f64,
    state: Mutex<(f64, Instant)>,
}

impl TokenBucket {
    pub fn new(rate: f64, burst: f64) -> Self {
        let burst = burst.max(1.0);
        TokenBucket { rate, burst, state: Mutex::new((burst, Instant::now())) }
    }

    /// Takes one token if available, else returns how long until one is.
    pub fn try_acquire(&self) -> Result<(), Duration> {
        if self.rate <= 0.0 {
            return Ok(());
        }
        let mut state = self.state.lock().expect("token bucket poisoned");
        let now = Instant::now();
        let elapsed = now.duration_since(state.1).as_secs_f64();
        state.0 = (state.0 + elapsed * self.rate).min(self.burst);
        state.1 = now;
        if state.0 >= 1.0 {
            state.0 -= 1.0;
            Ok(())
        } else {
            Err(Duration::from_secs_f64((1.0 - state.0) / self.rate))
        }
    }

    pub fn acquire(&self) {
        while let Err(wait) = self.try_acquire() {
            thread::sleep(wait);
        }
    }
}

/// Counting semaphore bounding in-flight requests.
#[derive(Debug)]
pub struct InflightLimiter {
    max: usize,
    current: Mutex<usize>,
    freed: Condvar,
}

pub struct InflightPermit<'a>(&'a InflightLimiter);

impl Drop for InflightPermit<'_> {
    fn drop(&mut self) {
        *self.0.current.lock().expect("limiter poisoned") -= 1;
        self.0.freed.notify_one();
    }
}

impl InflightLimiter {
    pub fn new(max: usize) -> Self {
        InflightLimiter { max: max.max(1), current: Mutex::new(0), freed: Condvar::new() }
    }

    pub fn acquire(&self) -> InflightPermit<'_> {
        let mut current = self.current.lock().expect("limiter poisoned");
        while *current >= self.max {
            current = self.freed.wait(current).expect("limiter poisoned");
        }
        *current += 1;
        InflightPermit(self)
    }

    pub fn in_flight(&self) -> usize {
        *self.current.lock().expect("limiter poisoned")
    }
}

pub struct HttpEndpoint {
    client: reqwest::blocking::Client,
    config: EndpointConfig,
    bucket: TokenBucket,
    inflight: InflightLimiter,
}

impl HttpEndpoint {
    pub fn new(config: EndpointConfig) -> Result<Self, EndpointError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(config.timeout)
            .user_agent(config.user_agent.clone())
            .build()
            .map_err(|e| EndpointError::Transport(e.to_string()))?;
        let bucket = TokenBucket::new(config.requests_per_second, config.requests_per_second.ceil());
        let inflight = InflightLimiter::new(config.max_inflight);
        Ok(HttpEndpoint { client, config, bucket, inflight })
    }

    pub fn config(&self) -> &EndpointConfig {
        &self.config
    }

    /// Sends raw query text and returns the decoded JSON body.
    pub fn query_text(&self, text: &str) -> Result<Json, EndpointError> {
        let mut attempt = 0;
        loop {
            match self.send_once(text) {
                Err(e) if e.is_retryable() && attempt < self.config.retries => {
                    log::warn!("endpoint attempt {} failed: {e}", attempt + 1);
                    thread::sleep(self.config.backoff * 2u32.pow(attempt));
                    attempt += 1;
                }
                other => return other,
            }
        }
    }

    fn send_once(&self, text: &str) -> Result<Json, EndpointError> {
        let _permit = self.inflight.acquire();
        self.bucket.acquire();
        log::debug!("sparql: {text}");
        let response = self
            .client
            .post(&self.config.url)
            .header(reqwest::header::ACCEPT, RESULTS_MIME)
            .form(&[("query", text)])
            .send()
            .map_err(classify)?;
        let status = response.status();
        let body = response.text().map_err(classify)?;
        if !status.is_success() {
            let mut body = body;
            body.truncate(512);
            return Err(EndpointError::Status { code: status.as_u16(), body });
        }
        serde_json::from_str(&body).map_err(|e| EndpointError::Malformed(e.to_string()))
    }
}

fn classify(e: reqwest::Error) -> EndpointError {
    if e.is_timeout() {
        EndpointError::Timeout
    } else if e.is_decode() {
        EndpointError::Malformed(e.to_string())
    } else {
        EndpointError::Transport(e.to_string())
    }
}

fn parse_value(cell: &Json) -> Result<Value, EndpointError> {
    let kind = cell.get("type").and_then(Json::as_str);
    let value = cell
        .get("value")
        .and_then(Json::as_str)
        .ok_or_else(|| EndpointError::Malformed("binding without value".into()))?;
    if kind == Some("uri") {
        if let Some(e) = value.strip_prefix(ENTITY_IRI).and_then(|q| q.parse::<EntityId>().ok()) {
            return Ok(Value::Entity(e));
        }
    }
    Ok(Value::Literal(value.to_string()))
}

/// Decodes a SPARQL 1.1 JSON results document.
pub fn parse_sparql_json(doc: &Json) -> Result<QueryResult, EndpointError> {
    if let Some(b) = doc.get("boolean") {
        return b
            .as_bool()
            .map(QueryResult::Boolean)
            .ok_or_else(|| EndpointError::Malformed("non-boolean `boolean`".into()));
    }
    let bindings = doc
        .pointer("/results/bindings")
        .and_then(Json::as_array)
        .ok_or_else(|| EndpointError::Malformed("missing results.bindings".into()))?;
    let mut rows = Vec::with_capacity(bindings.len());
    for binding in bindings {
        let obj = binding.as_object().ok_or_else(|| EndpointError::Malformed("binding is not an object".into()))?;
        let row: Row =
            obj.iter().map(|(k, v)| Ok((k.clone(), parse_value(v)?))).collect::<Result<_, EndpointError>>()?;
        rows.push(row);
    }
    Ok(QueryResult::Rows(rows))
}

impl QueryService for HttpEndpoint {
    fn execute(&self, query: &Query) -> Result<QueryResult, EndpointError> {
        parse_sparql_json(&self.query_text(&query.to_string())?)
    }

    fn labels(&self, entities: &[EntityId], language: &str) -> Result<BTreeMap<EntityId, String>, EndpointError> {
        if entities.is_empty() {
            return Ok(BTreeMap::new());
        }
        if !language.chars().all(|c| c.is_ascii_alphanumeric() || c == '-') {
            return Err(EndpointError::Unsupported(format!("language tag `{language}`")));
        }
        let values: Vec<String> = entities.iter().map(|e| format!("wd:{e}")).collect();
        let text = format!(
            "SELECT ?item ?label WHERE {{ VALUES ?item {{ {} }} ?item rdfs:label ?label . FILTER ( LANG(?label) = \"{language}\" ) }}",
            values.join(" ")
        );
        let QueryResult::Rows(rows) = parse_sparql_json(&self.query_text(&text)?)? else {
            return Err(EndpointError::Malformed("label lookup returned a boolean".into()));
        };
        let mut out = BTreeMap::new();
        for row in rows {
            if let (Some(Value::Entity(e)), Some(Value::Literal(l))) = (row.get("item"), row.get("label")) {
                out.insert(*e, l.clone());
            }
        }
        Ok(out)
    }
}
