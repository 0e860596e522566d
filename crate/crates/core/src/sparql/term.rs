use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::SparqlError;

/// A query variable, stored without the leading `?`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Variable(String);

impl Variable {
    pub fn new(name: impl Into<String>) -> Result<Self, SparqlError> {
        let name = name.into();
        if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
            return Err(SparqlError::InvalidTerm(format!("?{name}")));
        }
        Ok(Variable(name))
    }

    pub fn name(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Variable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "?{}", self.0)
    }
}

/// Entity slot `M0`, `M1`, ... in a query or question pattern.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Placeholder(pub u32);

impl fmt::Display for Placeholder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "M{}", self.0)
    }
}

impl FromStr for Placeholder {
    type Err = SparqlError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.strip_prefix('M')
            .and_then(parse_code_digits)
            .and_then(|n| u32::try_from(n).ok())
            .map(Placeholder)
            .ok_or_else(|| SparqlError::InvalidTerm(s.to_string()))
    }
}

/// Digits of a Q/P/M code. Leading zeros are refused so that every code has
/// exactly one spelling.
fn parse_code_digits(s: &str) -> Option<u64> {
    if s.is_empty() || !s.bytes().all(|b| b.is_ascii_digit()) || (s.len() > 1 && s.starts_with('0')) {
        return None;
    }
    s.parse().ok()
}

macro_rules! wikidata_code {
    ($name:ident, $prefix:literal) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub struct $name(pub u64);

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, concat!($prefix, "{}"), self.0)
            }
        }

        impl FromStr for $name {
            type Err = SparqlError;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                s.strip_prefix($prefix)
                    .and_then(parse_code_digits)
                    .map($name)
                    .ok_or_else(|| SparqlError::InvalidTerm(s.to_string()))
            }
        }

        impl Serialize for $name {
            fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
                serializer.collect_str(self)
            }
        }

        impl<'de> Deserialize<'de> for $name {
            fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
                let s = String::deserialize(deserializer)?;
                s.parse().map_err(serde::de::Error::custom)
            }
        }
    };
}

wikidata_code!(EntityId, "Q");
wikidata_code!(PropertyId, "P");

impl Serialize for Placeholder {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Placeholder {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Freebase machine identifier such as `m.0h4y854` (without the `ns:` prefix).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Mid(String);

impl Mid {
    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub(crate) fn is_mid(s: &str) -> bool {
        s.strip_prefix("m.").is_some_and(|rest| {
            !rest.is_empty() && rest.bytes().all(|b| b.is_ascii_digit() || b.is_ascii_lowercase() || b == b'_')
        })
    }
}

impl FromStr for Mid {
    type Err = SparqlError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.strip_prefix("ns:").unwrap_or(s);
        if Mid::is_mid(s) {
            Ok(Mid(s.to_string()))
        } else {
            Err(SparqlError::InvalidTerm(s.to_string()))
        }
    }
}

impl fmt::Display for Mid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Dotted Freebase schema name (`people.person.gender`, `film.director`).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FreebaseName(String);

impl FreebaseName {
    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub(crate) fn is_name(s: &str) -> bool {
        !s.is_empty()
            && !s.starts_with('.')
            && !s.ends_with('.')
            && !s.contains("..")
            && s.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'_' || b == b'.')
    }
}

impl FromStr for FreebaseName {
    type Err = SparqlError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.strip_prefix("ns:").unwrap_or(s);
        if FreebaseName::is_name(s) {
            Ok(FreebaseName(s.to_string()))
        } else {
            Err(SparqlError::InvalidTerm(s.to_string()))
        }
    }
}

impl fmt::Display for FreebaseName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// A single token in subject, object, predicate-step or filter position.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    Variable(Variable),
    Placeholder(Placeholder),
    Mid(Mid),
    Entity(EntityId),
    Property(PropertyId),
    FreebaseProperty(FreebaseName),
}

impl Term {
    pub fn var(name: &str) -> Term {
        Term::Variable(Variable::new(name).expect("valid variable name"))
    }

    pub fn is_variable(&self) -> bool {
        matches!(self, Term::Variable(_))
    }

    pub fn as_entity(&self) -> Option<EntityId> {
        match self {
            Term::Entity(e) => Some(*e),
            _ => None,
        }
    }

    pub fn as_placeholder(&self) -> Option<Placeholder> {
        match self {
            Term::Placeholder(p) => Some(*p),
            _ => None,
        }
    }

    /// True for the terms that only exist in the Freebase dialect.
    pub fn is_freebase_only(&self) -> bool {
        matches!(self, Term::Mid(_) | Term::FreebaseProperty(_))
    }

    pub fn is_wikidata_only(&self) -> bool {
        matches!(self, Term::Entity(_) | Term::Property(_))
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Variable(v) => v.fmt(f),
            Term::Placeholder(p) => p.fmt(f),
            Term::Mid(m) => write!(f, "ns:{m}"),
            Term::Entity(q) => write!(f, "wd:{q}"),
            Term::Property(p) => write!(f, "wdt:{p}"),
            Term::FreebaseProperty(n) => write!(f, "ns:{n}"),
        }
    }
}

impl From<Variable> for Term {
    fn from(v: Variable) -> Self {
        Term::Variable(v)
    }
}

impl From<Placeholder> for Term {
    fn from(p: Placeholder) -> Self {
        Term::Placeholder(p)
    }
}

impl From<EntityId> for Term {
    fn from(e: EntityId) -> Self {
        Term::Entity(e)
    }
}

impl From<PropertyId> for Term {
    fn from(p: PropertyId) -> Self {
        Term::Property(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn codes_parse_and_print() {
        let q: EntityId = "Q6581097".parse().unwrap();
        assert_eq!(q, EntityId(6581097));
        assert_eq!(q.to_string(), "Q6581097");
        assert_eq!("P57".parse::<PropertyId>().unwrap(), PropertyId(57));
        assert_eq!("M2".parse::<Placeholder>().unwrap(), Placeholder(2));
    }

    #[test]
    fn malformed_codes_rejected() {
        for bad in ["Q", "Qx1", "q5", "Q05", "P-1", "Q1.5"] {
            assert!(bad.parse::<EntityId>().is_err(), "{bad}");
        }
        assert!("M".parse::<Placeholder>().is_err());
        assert!("M01".parse::<Placeholder>().is_err());
    }

    #[test]
    fn mid_versus_schema_name() {
        assert!(Mid::is_mid("m.0h4y854"));
        assert!(Mid::is_mid("m.05zppz"));
        assert!(!Mid::is_mid("film.director"));
        assert!(!Mid::is_mid("m.Abc"));
        assert!(FreebaseName::is_name("people.person.gender"));
        assert!(!FreebaseName::is_name("people..gender"));
        assert!(!FreebaseName::is_name("people.person."));
    }

    #[test]
    fn term_surface_forms() {
        assert_eq!(Term::var("x0").to_string(), "?x0");
        assert_eq!(Term::Entity(EntityId(42)).to_string(), "wd:Q42");
        assert_eq!(Term::Property(PropertyId(21)).to_string(), "wdt:P21");
        assert_eq!(Term::Mid("m.05zppz".parse().unwrap()).to_string(), "ns:m.05zppz");
    }
}
