//! Parser for the restricted SPARQL subset: `SELECT count(*)`, `SELECT
//! [DISTINCT] ?v...`, and `ASK` queries whose bodies are triple patterns and
//! `!=` filters, with optional `ORDER BY` and `LIMIT` modifiers.
//!
//! The lexer is lenient about whitespace (`FILTER (?x0 != M2)}` is fine);
//! canonical spacing is only required for byte-identical round trips.

use super::ast::{Dialect, FilterClause, PathStep, PropertyPath, Query, QueryForm, TriplePattern};
use super::term::{EntityId, FreebaseName, Mid, Placeholder, PropertyId, Term, Variable};
use super::SparqlError;

#[derive(Debug, Clone, PartialEq)]
enum Tok<'a> {
    LBrace,
    RBrace,
    LParen,
    RParen,
    Dot,
    Slash,
    Caret,
    Star,
    NotEq,
    Var(&'a str),
    Word(&'a str),
    Prefixed(&'a str, &'a str),
    Number(&'a str),
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn tokens(src: &'a str) -> Result<Vec<(usize, Tok<'a>)>, SparqlError> {
        let mut lexer = Lexer { src, pos: 0 };
        let mut out = Vec::new();
        while let Some(tok) = lexer.next_token()? {
            out.push(tok);
        }
        Ok(out)
    }

    fn take_while(&mut self, pred: impl Fn(u8) -> bool) -> &'a str {
        let start = self.pos;
        let bytes = self.src.as_bytes();
        while self.pos < bytes.len() && pred(bytes[self.pos]) {
            self.pos += 1;
        }
        &self.src[start..self.pos]
    }

    fn next_token(&mut self) -> Result<Option<(usize, Tok<'a>)>, SparqlError> {
        self.take_while(|b| b.is_ascii_whitespace());
        let bytes = self.src.as_bytes();
        let Some(&b) = bytes.get(self.pos) else {
            return Ok(None);
        };
        let start = self.pos;
        let single = match b {
            b'{' => Some(Tok::LBrace),
            b'}' => Some(Tok::RBrace),
            b'(' => Some(Tok::LParen),
            b')' => Some(Tok::RParen),
            b'.' => Some(Tok::Dot),
            b'/' => Some(Tok::Slash),
            b'^' => Some(Tok::Caret),
            b'*' => Some(Tok::Star),
            _ => None,
        };
        if let Some(tok) = single {
            self.pos += 1;
            return Ok(Some((start, tok)));
        }
        if b == b'!' {
            if bytes.get(self.pos + 1) == Some(&b'=') {
                self.pos += 2;
                return Ok(Some((start, Tok::NotEq)));
            }
            return Err(syntax(start, "expected `!=`"));
        }
        if b == b'?' {
            self.pos += 1;
            let name = self.take_while(|b| b.is_ascii_alphanumeric() || b == b'_');
            if name.is_empty() {
                return Err(syntax(start, "empty variable name"));
            }
            return Ok(Some((start, Tok::Var(name))));
        }
        if b.is_ascii_digit() {
            let digits = self.take_while(|b| b.is_ascii_digit());
            return Ok(Some((start, Tok::Number(digits))));
        }
        if b.is_ascii_alphabetic() || b == b'_' {
            let word = self.take_while(|b| b.is_ascii_alphanumeric() || b == b'_');
            if bytes.get(self.pos) == Some(&b':') {
                self.pos += 1;
                let mut local = self.take_while(|b| b.is_ascii_alphanumeric() || b == b'_' || b == b'.');
                // A trailing dot terminates the triple rather than the name.
                while let Some(stripped) = local.strip_suffix('.') {
                    local = stripped;
                    self.pos -= 1;
                }
                if local.is_empty() {
                    return Err(syntax(start, format!("empty local name after `{word}:`")));
                }
                return Ok(Some((start, Tok::Prefixed(word, local))));
            }
            return Ok(Some((start, Tok::Word(word))));
        }
        let ch = self.src[start..].chars().next().unwrap_or('?');
        Err(syntax(start, format!("unexpected character `{ch}`")))
    }
}

fn syntax(offset: usize, message: impl Into<String>) -> SparqlError {
    SparqlError::Syntax { offset, message: message.into() }
}

fn dialect_err(offset: usize, dialect: Dialect, message: impl Into<String>) -> SparqlError {
    SparqlError::Dialect { offset, dialect, message: message.into() }
}

struct Parser<'a> {
    toks: Vec<(usize, Tok<'a>)>,
    idx: usize,
    end: usize,
    dialect: Dialect,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&Tok<'a>> {
        self.toks.get(self.idx).map(|(_, t)| t)
    }

    fn offset(&self) -> usize {
        self.toks.get(self.idx).map_or(self.end, |(o, _)| *o)
    }

    fn bump(&mut self) -> Option<Tok<'a>> {
        let tok = self.toks.get(self.idx).map(|(_, t)| t.clone());
        self.idx += 1;
        tok
    }

    fn expect(&mut self, want: Tok<'static>, what: &str) -> Result<(), SparqlError> {
        let offset = self.offset();
        match self.bump() {
            Some(ref t) if *t == want => Ok(()),
            _ => Err(syntax(offset, format!("expected {what}"))),
        }
    }

    fn peek_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Some(Tok::Word(w)) if w.eq_ignore_ascii_case(kw))
    }

    fn expect_keyword(&mut self, kw: &str) -> Result<(), SparqlError> {
        if self.peek_keyword(kw) {
            self.idx += 1;
            Ok(())
        } else {
            Err(syntax(self.offset(), format!("expected `{kw}`")))
        }
    }

    fn query(&mut self) -> Result<Query, SparqlError> {
        let offset = self.offset();
        let form = if self.peek_keyword("SELECT") {
            self.idx += 1;
            self.select_form()?
        } else if self.peek_keyword("ASK") {
            if self.dialect == Dialect::Freebase {
                return Err(dialect_err(offset, self.dialect, "ASK is not used in the freebase dialect"));
            }
            self.idx += 1;
            QueryForm::Ask
        } else {
            return Err(syntax(offset, "expected `SELECT` or `ASK`"));
        };
        self.expect_keyword("WHERE")?;
        let (triples, filters) = self.body()?;

        let mut order_by = Vec::new();
        if self.peek_keyword("ORDER") {
            self.idx += 1;
            self.expect_keyword("BY")?;
            while let Some(Tok::Var(name)) = self.peek() {
                order_by.push(Variable::new(*name)?);
                self.idx += 1;
            }
            if order_by.is_empty() {
                return Err(syntax(self.offset(), "expected variable after `ORDER BY`"));
            }
        }
        let mut limit = None;
        if self.peek_keyword("LIMIT") {
            self.idx += 1;
            let offset = self.offset();
            match self.bump() {
                Some(Tok::Number(digits)) => {
                    let n: u64 = digits.parse().map_err(|_| syntax(offset, "LIMIT out of range"))?;
                    if n == 0 || digits.starts_with('0') {
                        return Err(syntax(offset, "LIMIT must be a positive integer without leading zeros"));
                    }
                    limit = Some(n);
                }
                _ => return Err(syntax(offset, "expected integer after `LIMIT`")),
            }
        }
        if self.idx < self.toks.len() {
            return Err(syntax(self.offset(), "trailing input after query"));
        }
        Ok(Query { dialect: self.dialect, form, triples, filters, order_by, limit })
    }

    fn select_form(&mut self) -> Result<QueryForm, SparqlError> {
        if self.peek_keyword("count") {
            let offset = self.offset();
            if self.dialect == Dialect::Wikidata {
                return Err(dialect_err(offset, self.dialect, "count(*) is not used in the wikidata dialect"));
            }
            self.idx += 1;
            self.expect(Tok::LParen, "`(`")?;
            self.expect(Tok::Star, "`*`")?;
            self.expect(Tok::RParen, "`)`")?;
            return Ok(QueryForm::SelectCount);
        }
        let distinct = if self.peek_keyword("DISTINCT") {
            self.idx += 1;
            true
        } else {
            false
        };
        let mut projection = Vec::new();
        while let Some(Tok::Var(name)) = self.peek() {
            projection.push(Variable::new(*name)?);
            self.idx += 1;
        }
        if projection.is_empty() {
            return Err(syntax(self.offset(), "expected projected variable"));
        }
        Ok(QueryForm::Select { distinct, projection })
    }

    fn body(&mut self) -> Result<(Vec<TriplePattern>, Vec<FilterClause>), SparqlError> {
        self.expect(Tok::LBrace, "`{`")?;
        let mut triples = Vec::new();
        let mut filters = Vec::new();
        loop {
            match self.peek() {
                Some(Tok::RBrace) => {
                    self.idx += 1;
                    break;
                }
                None => return Err(syntax(self.end, "unterminated `{`")),
                Some(Tok::Dot) => return Err(syntax(self.offset(), "unexpected `.`")),
                _ => {}
            }
            if self.peek_keyword("FILTER") {
                self.idx += 1;
                filters.push(self.filter()?);
            } else {
                triples.push(self.triple()?);
            }
            if self.peek() == Some(&Tok::Dot) {
                self.idx += 1;
            }
        }
        Ok((triples, filters))
    }

    fn filter(&mut self) -> Result<FilterClause, SparqlError> {
        self.expect(Tok::LParen, "`(` after FILTER")?;
        let offset = self.offset();
        let left = self.entity_term()?;
        self.expect(Tok::NotEq, "`!=`")?;
        let right = self.entity_term()?;
        self.expect(Tok::RParen, "`)`")?;
        if left == right {
            return Err(syntax(offset, format!("filter compares {left} with itself")));
        }
        Ok(FilterClause { left, right })
    }

    fn triple(&mut self) -> Result<TriplePattern, SparqlError> {
        let subject = self.entity_term()?;
        if self.peek() == Some(&Tok::Word("a")) {
            let offset = self.offset();
            if self.dialect == Dialect::Wikidata {
                return Err(dialect_err(offset, self.dialect, "type assertion `a` has no wikidata counterpart"));
            }
            self.idx += 1;
            let class = self.class_term()?;
            return Ok(TriplePattern::TypeAssertion { subject, class });
        }
        let path_offset = self.offset();
        let mut steps = vec![self.path_step()?];
        while self.peek() == Some(&Tok::Slash) {
            self.idx += 1;
            steps.push(self.path_step()?);
        }
        if steps.len() > 1 && self.dialect == Dialect::Wikidata {
            return Err(dialect_err(path_offset, self.dialect, "property paths are not used in the wikidata dialect"));
        }
        let object = self.entity_term()?;
        Ok(TriplePattern::Edge { subject, path: PropertyPath { steps }, object })
    }

    fn path_step(&mut self) -> Result<PathStep, SparqlError> {
        let reversed = if self.peek() == Some(&Tok::Caret) {
            self.idx += 1;
            true
        } else {
            false
        };
        let offset = self.offset();
        let property = match self.bump() {
            Some(Tok::Prefixed(prefix, local)) => self.property(offset, prefix, local)?,
            _ => return Err(syntax(offset, "expected property")),
        };
        Ok(PathStep { property, reversed })
    }

    fn property(&self, offset: usize, prefix: &str, local: &str) -> Result<Term, SparqlError> {
        match (prefix, self.dialect) {
            ("wdt", Dialect::Wikidata) => local
                .parse::<PropertyId>()
                .map(Term::Property)
                .map_err(|_| syntax(offset, format!("malformed property code `{local}`"))),
            ("ns", Dialect::Freebase) if FreebaseName::is_name(local) && !Mid::is_mid(local) => {
                Ok(Term::FreebaseProperty(local.parse()?))
            }
            ("ns", Dialect::Freebase) => Err(syntax(offset, format!("malformed freebase property `{local}`"))),
            _ => Err(self.prefix_error(offset, prefix)),
        }
    }

    fn prefix_error(&self, offset: usize, prefix: &str) -> SparqlError {
        match prefix {
            "wd" | "wdt" | "ns" => {
                dialect_err(offset, self.dialect, format!("`{prefix}:` term in {} dialect", self.dialect))
            }
            _ => syntax(offset, format!("unknown prefix `{prefix}:`")),
        }
    }

    fn class_term(&mut self) -> Result<Term, SparqlError> {
        let offset = self.offset();
        match self.bump() {
            Some(Tok::Prefixed("ns", local)) if FreebaseName::is_name(local) && !Mid::is_mid(local) => {
                Ok(Term::FreebaseProperty(local.parse()?))
            }
            _ => Err(syntax(offset, "expected freebase class after `a`")),
        }
    }

    fn entity_term(&mut self) -> Result<Term, SparqlError> {
        let offset = self.offset();
        match self.bump() {
            Some(Tok::Var(name)) => Ok(Term::Variable(Variable::new(name)?)),
            Some(Tok::Word(w)) => w
                .parse::<Placeholder>()
                .map(Term::Placeholder)
                .map_err(|_| syntax(offset, format!("unexpected word `{w}`"))),
            Some(Tok::Prefixed(prefix, local)) => match (prefix, self.dialect) {
                ("wd", Dialect::Wikidata) => local
                    .parse::<EntityId>()
                    .map(Term::Entity)
                    .map_err(|_| syntax(offset, format!("malformed entity code `{local}`"))),
                ("ns", Dialect::Freebase) => local
                    .parse::<Mid>()
                    .map(Term::Mid)
                    .map_err(|_| syntax(offset, format!("expected machine id, found `{local}`"))),
                ("wdt", Dialect::Wikidata) => Err(syntax(offset, "property in entity position")),
                _ => Err(self.prefix_error(offset, prefix)),
            },
            Some(_) => Err(syntax(offset, "expected variable, placeholder or entity")),
            None => Err(syntax(offset, "unexpected end of query")),
        }
    }
}

/// Parses one query in the given dialect.
pub fn parse_query(text: &str, dialect: Dialect) -> Result<Query, SparqlError> {
    let toks = Lexer::tokens(text)?;
    let mut parser = Parser { toks, idx: 0, end: text.len(), dialect };
    parser.query()
}
