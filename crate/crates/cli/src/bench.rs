use std::path::PathBuf;

use hawkes_core::eval::{bench_iteration_time, write_bench_csv, BenchConfig};
use hawkes_core::samplers::Method;
use hawkes_core::HawkesError;

use crate::config::RunConfig;
use crate::error::CliError;
use crate::output::write_atomic;
use crate::Globals;

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Only gibbs is timed.
    #[arg(long)]
    method: Option<String>,
    /// Ascending target event counts, comma separated.
    #[arg(long, value_delimiter = ',')]
    sizes: Option<Vec<usize>>,
    #[arg(long)]
    repeats: Option<usize>,
    /// Timed iterations per repeat.
    #[arg(long)]
    iterations: Option<usize>,
    /// Untimed iterations before timing.
    #[arg(long)]
    warmup: Option<usize>,
    /// Receives `bench_truncated.csv` and `bench_full.csv`.
    #[arg(long, short)]
    output_dir: Option<PathBuf>,
}

pub fn run(args: Args, config: &RunConfig, globals: &Globals) -> Result<(), CliError> {
    let c = &config.bench;
    let method: Method = args
        .method
        .or_else(|| c.method.clone())
        .unwrap_or_else(|| "gibbs".into())
        .parse()
        .map_err(|e: HawkesError| CliError::Usage(e.to_string()))?;
    if method != Method::Gibbs {
        return Err(CliError::Usage(format!("bench times gibbs iterations only (got {method})")));
    }
    let dir = args
        .output_dir
        .or_else(|| c.output_dir.clone())
        .ok_or_else(|| CliError::Usage("bench needs --output-dir".into()))?;
    let defaults = BenchConfig::default();
    let cfg = BenchConfig {
        sizes: args.sizes.or_else(|| c.sizes.clone()).unwrap_or(defaults.sizes.clone()),
        repeats: args.repeats.or(c.repeats).unwrap_or(defaults.repeats),
        iterations: args.iterations.or(c.iterations).unwrap_or(defaults.iterations),
        warmup: args.warmup.or(c.warmup).unwrap_or(defaults.warmup),
        seed: globals.seed,
        ..defaults
    };
    if cfg.sizes.is_empty() {
        return Err(CliError::Usage("--sizes is empty".into()));
    }
    if globals.jobs > 1 {
        log::warn!("bench runs on one thread; --jobs ignored");
    }
    let table = bench_iteration_time(method, &cfg)?;
    for (name, rows) in [("bench_truncated.csv", &table.truncated), ("bench_full.csv", &table.untruncated)] {
        let mut buf = Vec::new();
        write_bench_csv(rows, &mut buf)?;
        write_atomic(&dir.join(name), &buf)?;
        for r in rows {
            log::info!("{name}: n = {}, {:.4e} s/iter, ratio {:.4e}", r.n, r.seconds_per_iter, r.ratio);
        }
    }
    Ok(())
}
