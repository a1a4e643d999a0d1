use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter {name} = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("line {line}: duplicate key (first seen on line {first})")]
    DuplicateKey { line: usize, first: usize },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("key {key} has no bit {bit}; finite keys must stay distinguishable")]
    KeyExhausted { key: usize, bit: usize },

    #[error("trie depth cap {cap} exceeded")]
    DepthCapExceeded { cap: usize },

    #[error("compressed node would need 2^{consumed} slots (limit 2^{limit})")]
    NodeTooWide { consumed: usize, limit: usize },

    #[error("unknown key id {0}")]
    UnknownKey(usize),

    #[error("fillup level undefined: fewer than two keys")]
    TooFewKeys,

    #[error("no level reaches the requested fill fraction")]
    NoFilledLevel,

    #[error("level search exceeded cap {cap}")]
    SearchCapExceeded { cap: usize },
}

impl Error {
    pub(crate) fn param(name: &'static str, value: f64, reason: &'static str) -> Self {
        Error::InvalidParameter {
            name,
            value,
            reason,
        }
    }
}
