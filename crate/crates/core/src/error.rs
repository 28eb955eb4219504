use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("factorization budget exceeded for n = {n} (trial division bound {bound})")]
    FactorizationBudget { n: u64, bound: u64 },

    #[error("{0} is not prime")]
    NotPrime(u64),

    #[error("custom spec has no value for prime power {p}^{k} and its default rule is `error`")]
    MissingPrimeValue { p: u64, k: u32 },

    #[error("memory budget exceeded: need {required} bytes, budget is {budget} bytes")]
    MemoryBudget { required: u64, budget: u64 },

    #[error("table too short: need length {required}, have {available}")]
    TableTooShort { required: u64, available: u64 },

    #[error("checkpoints must be non-empty and strictly increasing")]
    BadCheckpoints,

    #[error("empty summation range")]
    EmptyRange,

    #[error("table is not finite-valued; supply a quantizer")]
    NeedsQuantizer,

    #[error("word length {n_max} exceeds packing width ({max} for this alphabet)")]
    PackingWidth { n_max: usize, max: usize },

    #[error("all dyadic blocks are empty")]
    EmptyDyads,

    #[error("cache file has bad magic bytes")]
    CacheMagic,

    #[error("cache format version {found} does not match expected {expected}")]
    CacheVersion { found: u32, expected: u32 },

    #[error("cache spec hash {found:016x} does not match requested {expected:016x}")]
    CacheHash { found: u64, expected: u64 },

    #[error("cache file truncated")]
    CacheTruncated,

    #[error("cached table has length {stored}, requested {requested}")]
    CacheTooShort { stored: u64, requested: u64 },

    #[error("malformed spec: {0}")]
    Spec(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    /// True for errors raised while reading a cache file.
    pub fn is_cache_error(&self) -> bool {
        matches!(
            self,
            Error::CacheMagic
                | Error::CacheVersion { .. }
                | Error::CacheHash { .. }
                | Error::CacheTruncated
                | Error::CacheTooShort { .. }
        )
    }

    /// True for errors caused by a resource limit.
    pub fn is_resource_error(&self) -> bool {
        matches!(
            self,
            Error::MemoryBudget { .. } | Error::FactorizationBudget { .. }
        )
    }
}
