use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub const START: &str = "$START";
pub const END: &str = "$END";
const RET: &str = "$RET";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TokenKind {
    /// A bare call, e.g. `dictNext`.
    Call,
    /// A check on a call result, e.g. `dictNext == 0`.
    Check,
    /// The result of one call flowing into another, e.g. `dictGetIterator -> dictNext`.
    Dataflow,
    /// A returned value, e.g. `$RET dictNext` or `$RET -1`.
    Return,
    /// `$START` or `$END`.
    Sentinel,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CompareOp {
    Eq,
    Ne,
    Lt,
    Gt,
    Le,
    Ge,
}

impl CompareOp {
    pub fn as_str(self) -> &'static str {
        match self {
            CompareOp::Eq => "==",
            CompareOp::Ne => "!=",
            CompareOp::Lt => "<",
            CompareOp::Gt => ">",
            CompareOp::Le => "<=",
            CompareOp::Ge => ">=",
        }
    }
}

/// One word of the trace language in canonical form.
///
/// Equality, ordering and hashing only look at the canonical text; the kind is
/// a function of the text.
#[derive(Clone, Debug)]
pub struct Token {
    text: String,
    kind: TokenKind,
}

impl Token {
    /// Parses and canonicalizes a raw token.
    pub fn parse(raw: &str) -> Result<Token> {
        let (text, kind) = canonicalize(raw)?;
        Ok(Token { text, kind })
    }

    pub fn start() -> Token {
        Token {
            text: START.to_owned(),
            kind: TokenKind::Sentinel,
        }
    }

    pub fn end() -> Token {
        Token {
            text: END.to_owned(),
            kind: TokenKind::Sentinel,
        }
    }

    pub fn as_str(&self) -> &str {
        &self.text
    }

    pub fn kind(&self) -> TokenKind {
        self.kind
    }

    pub fn is_sentinel(&self) -> bool {
        self.kind == TokenKind::Sentinel
    }

    pub fn is_start(&self) -> bool {
        self.text == START
    }

    pub fn is_end(&self) -> bool {
        self.text == END
    }
}

fn token_error(raw: &str, reason: impl Into<String>) -> Error {
    Error::Token {
        text: raw.to_owned(),
        reason: reason.into(),
    }
}

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn parse_constant(s: &str) -> Option<i64> {
    if s == "NULL" {
        return Some(0);
    }
    let digits = s.strip_prefix('-').unwrap_or(s);
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    s.parse().ok()
}

fn find_operator(s: &str) -> Option<(usize, CompareOp, usize)> {
    let bytes = s.as_bytes();
    let pos = bytes.iter().position(|b| b"=!<>".contains(b))?;
    let next = bytes.get(pos + 1).copied();
    let (op, len) = match (bytes[pos], next) {
        (b'=', Some(b'=')) => (CompareOp::Eq, 2),
        (b'!', Some(b'=')) => (CompareOp::Ne, 2),
        (b'<', Some(b'=')) => (CompareOp::Le, 2),
        (b'>', Some(b'=')) => (CompareOp::Ge, 2),
        (b'<', _) => (CompareOp::Lt, 1),
        (b'>', _) => (CompareOp::Gt, 1),
        _ => return None,
    };
    Some((pos, op, len))
}

fn canonicalize(raw: &str) -> Result<(String, TokenKind)> {
    let s = raw.trim();
    if s.is_empty() {
        return Err(token_error(raw, "empty token"));
    }
    if s == START || s == END {
        return Ok((s.to_owned(), TokenKind::Sentinel));
    }
    if let Some(rest) = s.strip_prefix(RET) {
        if !rest.is_empty() && !rest.starts_with(char::is_whitespace) {
            return Err(token_error(raw, "unknown `$` keyword"));
        }
        let value = rest.trim();
        if is_identifier(value) {
            return Ok((format!("{RET} {value}"), TokenKind::Return));
        }
        if let Some(c) = parse_constant(value) {
            return Ok((format!("{RET} {c}"), TokenKind::Return));
        }
        return Err(token_error(
            raw,
            "return value must be an identifier or integer",
        ));
    }
    if s.starts_with('$') {
        return Err(token_error(raw, "unknown `$` keyword"));
    }
    if let Some((producer, consumer)) = s.split_once("->") {
        let (producer, consumer) = (producer.trim(), consumer.trim());
        if producer.is_empty() {
            return Err(token_error(raw, "dataflow is missing its producer"));
        }
        if consumer.is_empty() {
            return Err(token_error(raw, "dataflow is missing its consumer"));
        }
        if !is_identifier(producer) || !is_identifier(consumer) {
            return Err(token_error(raw, "dataflow endpoints must be identifiers"));
        }
        return Ok((format!("{producer} -> {consumer}"), TokenKind::Dataflow));
    }
    if s.contains(['=', '!', '<', '>']) {
        let (pos, op, len) =
            find_operator(s).ok_or_else(|| token_error(raw, "unknown comparison operator"))?;
        let subject = s[..pos].trim();
        let value = s[pos + len..].trim();
        if !is_identifier(subject) {
            return Err(token_error(raw, "check subject must be an identifier"));
        }
        let c = parse_constant(value)
            .ok_or_else(|| token_error(raw, "check constant must be an integer or NULL"))?;
        return Ok((format!("{subject} {} {c}", op.as_str()), TokenKind::Check));
    }
    if is_identifier(s) {
        return Ok((s.to_owned(), TokenKind::Call));
    }
    Err(token_error(
        raw,
        "not a call, check, dataflow, return or sentinel",
    ))
}

impl PartialEq for Token {
    fn eq(&self, other: &Self) -> bool {
        self.text == other.text
    }
}

impl Eq for Token {}

impl Hash for Token {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.text.hash(state)
    }
}

impl PartialOrd for Token {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Token {
    fn cmp(&self, other: &Self) -> Ordering {
        self.text.cmp(&other.text)
    }
}

impl AsRef<str> for Token {
    fn as_ref(&self) -> &str {
        &self.text
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

impl FromStr for Token {
    type Err = Error;

    fn from_str(s: &str) -> Result<Token> {
        Token::parse(s)
    }
}

impl Serialize for Token {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.text)
    }
}

impl<'de> Deserialize<'de> for Token {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let raw = String::deserialize(deserializer)?;
        Token::parse(&raw).map_err(serde::de::Error::custom)
    }
}

/// Replaces internal spaces with `#` so a token fits in one whitespace-delimited field.
pub fn escape(token: &Token) -> String {
    token.as_str().replace(' ', "#")
}

pub fn unescape(field: &str) -> Result<Token> {
    Token::parse(&field.replace('#', " "))
}
