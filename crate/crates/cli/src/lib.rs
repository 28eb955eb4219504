//! Config-driven runner for the `mfstat` command line tool.
//!
//! A run reads one JSON config, resolves the sieve cache directory, executes
//! one task on a fixed-size thread pool and writes its artifacts plus a
//! `manifest.json` into the output directory.

pub mod cache;
pub mod config;
pub mod error;
pub mod output;
pub mod tasks;

use std::path::{Path, PathBuf};
use std::time::Instant;

use mfstat_core::sieve::SieveOptions;
use serde_json::{json, Value};

pub use config::{RunConfig, Task};
pub use error::{exit, CliError};

use cache::TableCache;
use output::OutputDir;
use tasks::{dispatch, TaskContext};

pub const DEFAULT_OUTPUT_DIR: &str = "mfstat-out";

/// Command-line overrides applied on top of a config file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub cache_dir: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
}

#[derive(Debug)]
pub struct RunReport {
    pub output_dir: PathBuf,
    pub files: Vec<String>,
    pub manifest: Value,
}

/// Reads and validates the config at `path`, then runs `task`.
pub fn run_file(task: Task, path: &Path, overrides: &Overrides) -> Result<RunReport, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
    let cfg = RunConfig::from_json(&text)?;
    run(task, &cfg, overrides)
}

pub fn run(task: Task, cfg: &RunConfig, overrides: &Overrides) -> Result<RunReport, CliError> {
    if let Some(t) = cfg.task {
        if t != task {
            return Err(CliError::config(format!(
                "config is for task `{}` but `{}` was requested",
                t.name(),
                task.name()
            )));
        }
    }
    cfg.validate()?;
    if overrides.threads == Some(0) {
        return Err(CliError::config("--threads must be positive"));
    }
    let threads = overrides
        .threads
        .or(cfg.threads)
        .unwrap_or_else(rayon::current_num_threads);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::task(format!("cannot start thread pool: {e}")))?;

    let cache_dir = cache::resolve_dir(overrides.cache_dir.as_deref(), cfg.cache_dir.as_deref());
    let mut sieve = SieveOptions::default();
    if let Some(b) = cfg.memory_budget {
        sieve.memory_budget = b;
    }
    let mut cache = TableCache::new(cache_dir, sieve);
    let out_dir = overrides
        .out
        .clone()
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR));
    let mut out = OutputDir::create(&out_dir)?;

    let start = Instant::now();
    let mut ctx = TaskContext {
        cfg,
        cache: &mut cache,
        out: &mut out,
        meta: serde_json::Map::new(),
    };
    pool.install(|| dispatch(task, &mut ctx))?;
    let meta = std::mem::take(&mut ctx.meta);
    let wall = start.elapsed().as_secs_f64();

    let hashes: serde_json::Map<String, Value> = cfg
        .functions
        .iter()
        .map(|(k, v)| (k.clone(), json!(format!("{:016x}", v.spec_hash()))))
        .collect();
    let manifest = json!({
        "task": task.name(),
        "config": cfg,
        "versions": {
            "mfstat": env!("CARGO_PKG_VERSION"),
            "cache_format": mfstat_core::sieve::CACHE_VERSION,
        },
        "spec_hashes": hashes,
        "threads": threads,
        "partitions": meta.get("partitions").cloned().unwrap_or(json!(mfstat_core::summation::DEFAULT_PARTITIONS)),
        "task_meta": meta,
        "cache": {
            "dir": cache.dir(),
            "events": cache.events(),
        },
        "outputs": out.written(),
        "wall_time_seconds": wall,
    });
    out.json("manifest.json", &manifest)?;
    Ok(RunReport {
        output_dir: out_dir,
        files: out.written().to_vec(),
        manifest,
    })
}
