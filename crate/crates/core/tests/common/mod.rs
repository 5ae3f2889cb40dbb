#![allow(dead_code)]

use std::collections::BTreeSet;

use specmine::{TermCluster, Token, Trace};

pub const ITERATOR_TRACE: &[&str] = &[
    "$START",
    "strcasecmp",
    "strcasecmp != 0",
    "strcasecmp",
    "strcasecmp == 0",
    "dictGetIterator",
    "log",
    "dictGetIterator -> dictNext",
    "dictNext",
    "dictNext != 0",
    "dictNext -> dictGetKey",
    "dictGetKey",
    "sdslen",
    "sdslen -> strmatchlen",
    "strmatchlen",
    "strmatchlen != 0",
    "addReplyBulk",
    "dictGetIterator -> dictNext",
    "dictNext",
    "dictNext == 0",
    "dictGetIterator -> dictReleaseIterator",
    "dictReleaseIterator",
    "$END",
];

/// The iterator cluster.
pub const ITERATOR_CLUSTER: &[&str] = &[
    "dictGetIterator",
    "dictGetIterator -> dictNext",
    "dictNext",
    "dictNext == 0",
    "dictNext != 0",
    "dictGetIterator -> dictReleaseIterator",
    "dictReleaseIterator",
];

/// The projection of [`ITERATOR_TRACE`] onto [`ITERATOR_CLUSTER`].
pub const ITERATOR_PROJECTION: &[&str] = &[
    "dictGetIterator",
    "dictGetIterator -> dictNext",
    "dictNext",
    "dictNext != 0",
    "dictGetIterator -> dictNext",
    "dictNext",
    "dictNext == 0",
    "dictGetIterator -> dictReleaseIterator",
    "dictReleaseIterator",
];

const PREFIX: &[&str] = &["strcasecmp", "strcasecmp == 0", "dictGetIterator", "log"];
const MATCH: &[&str] = &[
    "dictGetIterator -> dictNext",
    "dictNext",
    "dictNext != 0",
    "dictNext -> dictGetKey",
    "dictGetKey",
    "sdslen",
    "sdslen -> strmatchlen",
    "strmatchlen",
    "strmatchlen != 0",
    "addReplyBulk",
];
const MISS: &[&str] = &[
    "dictGetIterator -> dictNext",
    "dictNext",
    "dictNext != 0",
    "dictNext -> dictGetKey",
    "dictGetKey",
    "sdslen",
    "sdslen -> strmatchlen",
    "strmatchlen",
    "strmatchlen == 0",
];
const EXIT: &[&str] = &[
    "dictGetIterator -> dictNext",
    "dictNext",
    "dictNext == 0",
    "dictGetIterator -> dictReleaseIterator",
    "dictReleaseIterator",
];

/// A path through the iterator procedure running `body` loop iterations.
pub fn path(procedure: &str, body: &[&[&str]]) -> Trace {
    let mut toks: Vec<&str> = vec!["$START"];
    toks.extend(PREFIX);
    for b in body {
        toks.extend(*b);
    }
    toks.extend(EXIT);
    toks.push("$END");
    Trace::parse(procedure, &toks).unwrap()
}

pub fn iterator_trace() -> Trace {
    Trace::parse("redisIterate", ITERATOR_TRACE).unwrap()
}

/// Paths with zero, one and two loop iterations.
pub fn iterator_paths(procedure: &str) -> Vec<Trace> {
    vec![
        path(procedure, &[]),
        path(procedure, &[MATCH]),
        path(procedure, &[MISS]),
        path(procedure, &[MATCH, MISS]),
        path(procedure, &[MISS, MATCH]),
    ]
}

/// Three traces whose projections follow `dictNext` with `!= 0` twice and
/// with `== 0` three times.
pub fn two_three_traces() -> Vec<Trace> {
    vec![
        iterator_trace(),
        path("redisIterate", &[MISS]),
        path("redisIterate", &[]),
    ]
}

pub fn tokens(items: &[&str]) -> Vec<Token> {
    items.iter().map(|s| Token::parse(s).unwrap()).collect()
}

pub fn cluster(items: &[&str]) -> TermCluster {
    TermCluster::new(tokens(items).into_iter().collect::<BTreeSet<_>>()).unwrap()
}

pub fn strs(tokens: &[Token]) -> Vec<&str> {
    tokens.iter().map(Token::as_str).collect()
}
