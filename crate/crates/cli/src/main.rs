use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use mfstat_cli::{exit, run_file, Overrides, Task};

/// Numerical experiments on bounded multiplicative functions.
#[derive(Parser, Debug)]
#[command(name = "mfstat", version)]
struct Args {
    /// Task to run.
    #[arg(value_enum)]
    task: Task,
    /// JSON run configuration.
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Sieve cache directory (overrides MFSTAT_CACHE_DIR and the config).
    #[arg(long, value_name = "PATH")]
    cache_dir: Option<PathBuf>,
    /// Output directory (overrides the config).
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Worker threads (overrides the config).
    #[arg(long, value_name = "K")]
    threads: Option<usize>,
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { exit::CONFIG } else { exit::OK };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    let overrides = Overrides {
        cache_dir: args.cache_dir,
        out: args.out,
        threads: args.threads,
    };
    match run_file(args.task, &args.config, &overrides) {
        Ok(report) => {
            for f in &report.files {
                println!("{}", report.output_dir.join(f).display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("mfstat: {e}");
            ExitCode::from(e.code as u8)
        }
    }
}
