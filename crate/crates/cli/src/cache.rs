//! On-disk sieve table cache keyed by spec hash.

use std::path::{Path, PathBuf};

use mfstat_core::sieve::{cache_load, cache_store, sieve_range_with, SieveOptions, ValueTable};
use mfstat_core::{Error, MultiplicativeSpec};
use serde::Serialize;

use crate::error::CliError;

/// Environment variable that overrides the configured cache directory.
pub const CACHE_ENV: &str = "MFSTAT_CACHE_DIR";
pub const DEFAULT_CACHE_DIR: &str = ".mfstat-cache";

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CacheOutcome {
    Hit,
    Extended,
    Miss,
}

#[derive(Clone, Debug, Serialize)]
pub struct CacheEvent {
    pub spec_hash: String,
    pub n: u64,
    pub outcome: CacheOutcome,
}

pub struct TableCache {
    dir: PathBuf,
    sieve: SieveOptions,
    events: Vec<CacheEvent>,
}

impl TableCache {
    pub fn new(dir: PathBuf, sieve: SieveOptions) -> Self {
        Self {
            dir,
            sieve,
            events: Vec::new(),
        }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path_for(&self, spec_hash: u64) -> PathBuf {
        self.dir.join(format!("{spec_hash:016x}.mfsv"))
    }

    pub fn events(&self) -> &[CacheEvent] {
        &self.events
    }

    /// The table of `f` on `[1, n]`, read from the cache when a long enough
    /// table is stored and sieved (then stored) otherwise. A corrupt cache
    /// file is an error, not a silent resieve.
    pub fn table(&mut self, f: &MultiplicativeSpec, n: u64) -> Result<ValueTable, CliError> {
        let hash = f.spec_hash();
        let path = self.path_for(hash);
        let outcome = if path.exists() {
            match cache_load(hash, n, &path) {
                Ok(table) => {
                    self.record(hash, n, CacheOutcome::Hit);
                    return Ok(table);
                }
                Err(Error::CacheTooShort { .. }) => CacheOutcome::Extended,
                Err(e) if e.is_cache_error() => {
                    return Err(CliError::cache(format!("{}: {e}", path.display())));
                }
                Err(e) => return Err(e.into()),
            }
        } else {
            CacheOutcome::Miss
        };
        let table = sieve_range_with(f, n, &self.sieve)?;
        std::fs::create_dir_all(&self.dir)?;
        cache_store(&table, &path)?;
        self.record(hash, n, outcome);
        Ok(table)
    }

    fn record(&mut self, hash: u64, n: u64, outcome: CacheOutcome) {
        self.events.push(CacheEvent {
            spec_hash: format!("{hash:016x}"),
            n,
            outcome,
        });
    }
}

/// Flag, then environment, then config, then the default.
pub fn resolve_dir(flag: Option<&Path>, config: Option<&Path>) -> PathBuf {
    if let Some(p) = flag {
        return p.to_path_buf();
    }
    if let Some(p) = std::env::var_os(CACHE_ENV).filter(|v| !v.is_empty()) {
        return PathBuf::from(p);
    }
    config
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from(DEFAULT_CACHE_DIR))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::exit;

    #[test]
    fn miss_then_hit_then_extend() {
        let dir = tempfile::tempdir().unwrap();
        let mut cache = TableCache::new(dir.path().to_path_buf(), SieveOptions::default());
        let f = MultiplicativeSpec::liouville();
        let a = cache.table(&f, 1000).unwrap();
        let b = cache.table(&f, 500).unwrap();
        let c = cache.table(&f, 2000).unwrap();
        assert_eq!(b.len(), 500);
        assert_eq!(c.len(), 2000);
        for n in 1..=500 {
            assert_eq!(a.get(n), b.get(n));
        }
        let outcomes: Vec<_> = cache.events().iter().map(|e| e.outcome.clone()).collect();
        assert_eq!(outcomes, vec![CacheOutcome::Miss, CacheOutcome::Hit, CacheOutcome::Extended]);
    }

    #[test]
    fn corrupt_file_maps_to_cache_exit() {
        let dir = tempfile::tempdir().unwrap();
        let mut cache = TableCache::new(dir.path().to_path_buf(), SieveOptions::default());
        let f = MultiplicativeSpec::moebius();
        std::fs::write(cache.path_for(f.spec_hash()), b"JUNKJUNKJUNK").unwrap();
        let err = cache.table(&f, 10).unwrap_err();
        assert_eq!(err.code, exit::CACHE);
    }

    #[test]
    fn flag_wins() {
        let p = resolve_dir(Some(Path::new("/x")), Some(Path::new("/y")));
        assert_eq!(p, PathBuf::from("/x"));
    }
}
