use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use rrmd_cli::{parse_config, run, write_error, RunError};

/// Renewal-reward moderate-deviation toolkit.
#[derive(Parser, Debug)]
#[command(name = "rrmd", version)]
struct Args {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Directory for the CSV table and the JSON summary.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Overrides the seed in the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
}

fn execute(args: &Args) -> Result<bool, RunError> {
    let text = std::fs::read_to_string(&args.config).map_err(|source| RunError::Io { path: args.config.clone(), source })?;
    let base = args.config.parent().map(PathBuf::from).unwrap_or_default();
    let mut cfg = parse_config(&text, &base)?;
    if let Some(seed) = args.seed {
        cfg.set_seed(seed);
    }
    let outcome = run(&cfg, &args.out)?;
    println!("{}", outcome.csv_path.display());
    println!("{}", outcome.summary_path.display());
    Ok(outcome.passed)
}

fn main() -> ExitCode {
    let args = Args::parse();
    if let Some(n) = args.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global() {
            eprintln!("rrmd: cannot configure {n} threads: {e}");
            return ExitCode::from(2);
        }
    }
    match execute(&args) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("rrmd: one or more thresholds failed; see {}", args.out.join("summary.json").display());
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("rrmd: {e}");
            if let Err(w) = write_error(&args.out, &e) {
                eprintln!("rrmd: {w}");
            }
            ExitCode::from(2)
        }
    }
}
