//! `selfcon`: run self-consistency probes and build reports.
//!
//! Exit status: 0 on success, 2 for configuration errors, 3 for data errors,
//! 4 when the backends failed every probe, 1 for anything else.

use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use selfcon::backends::CompletionCache;
use selfcon::datasets::ArithItem;
use selfcon::expr::{ExprGenConfig, ExprGenerator};
use selfcon::harness::{self, HarnessError, RunConfig};

#[derive(Parser)]
#[command(
    name = "selfcon",
    version,
    about = "Hypothetical and compositional self-consistency probes"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate random arithmetic expressions as JSON lines.
    GenArith(GenArithArgs),
    /// Execute a run described by a TOML config.
    Run(RunArgs),
    /// Rebuild the CSV and Markdown reports from a records directory.
    Report(ReportArgs),
    /// Summarize a completion cache file.
    CacheStats(CacheStatsArgs),
}

#[derive(Args)]
struct GenArithArgs {
    #[arg(long, default_value_t = 500)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 5)]
    max_depth: usize,
    #[arg(long, default_value_t = 0.5)]
    nest_prob: f64,
    #[arg(long, default_value_t = 1)]
    operand_min: u64,
    #[arg(long, default_value_t = 999)]
    operand_max: u64,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Flags override the matching config fields.
#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    subject: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    sample_size: Option<usize>,
    #[arg(long)]
    demo_pool: Option<usize>,
    #[arg(long, num_args = 2, value_names = ["MIN", "MAX"])]
    k_range: Option<Vec<usize>>,
    #[arg(long, num_args = 2, value_names = ["MIN", "MAX"])]
    m_range: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    templates: Option<Vec<u8>>,
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    cache: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    concurrency: Option<usize>,
    #[arg(long)]
    allow_out_of_range: bool,
}

#[derive(Args)]
struct ReportArgs {
    /// Directory holding records.jsonl from a run.
    #[arg(long)]
    records: PathBuf,
    /// Where to write reports; defaults to the records directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CacheStatsArgs {
    #[arg(long)]
    cache: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if let Some(h) = err.downcast_ref::<HarnessError>() {
        return h.exit_code() as u8;
    }
    if err
        .downcast_ref::<selfcon::expr::GenConfigError>()
        .is_some()
    {
        return 2;
    }
    if err
        .downcast_ref::<selfcon::backends::CacheError>()
        .is_some()
    {
        return 3;
    }
    1
}

fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::GenArith(a) => gen_arith(a),
        Command::Run(a) => run(a),
        Command::Report(a) => {
            let out = a.out.unwrap_or_else(|| a.records.clone());
            harness::write_reports(&a.records, &out)?;
            eprintln!("reports written to {}", out.display());
            Ok(())
        }
        Command::CacheStats(a) => {
            let cache = CompletionCache::open(&a.cache)?;
            println!("{}", serde_json::to_string_pretty(&cache.stats())?);
            Ok(())
        }
    }
}

fn gen_arith(a: GenArithArgs) -> Result<()> {
    let cfg = ExprGenConfig::new(
        a.max_depth,
        a.nest_prob,
        a.operand_min,
        a.operand_max,
        a.seed,
    )?;
    let mut generator = ExprGenerator::new(cfg);
    let mut text = String::new();
    for (i, e) in generator.by_ref().take(a.count).enumerate() {
        let item = ArithItem::new(format!("arith-{i:04}"), &e)
            .expect("generator yields defined expressions");
        text.push_str(&serde_json::to_string(&item)?);
        text.push('\n');
    }
    match &a.out {
        Some(path) => {
            fs::write(path, &text).with_context(|| format!("writing {}", path.display()))?
        }
        None => io::stdout().write_all(text.as_bytes())?,
    }
    eprintln!(
        "{} expressions, {} discarded for division by zero",
        a.count,
        generator.discarded()
    );
    Ok(())
}

fn run(a: RunArgs) -> Result<()> {
    // Validation happens in `harness::run`, after the overrides.
    let mut cfg = RunConfig::read(&a.config)?;
    if let Some(v) = a.subject {
        cfg.subject = v;
    }
    if let Some(v) = a.seed {
        cfg.seed = v;
    }
    if let Some(v) = a.sample_size {
        cfg.sample_size = Some(v);
    }
    if let Some(v) = a.demo_pool {
        cfg.demo_pool = v;
    }
    if let Some(v) = a.k_range {
        cfg.k_range = Some([v[0], v[1]]);
    }
    if let Some(v) = a.m_range {
        cfg.m_range = Some([v[0], v[1]]);
    }
    if let Some(v) = a.templates {
        cfg.templates = v;
    }
    if let Some(v) = a.data {
        cfg.data = Some(v);
    }
    if let Some(v) = a.cache {
        cfg.cache = v;
    }
    if let Some(v) = a.out {
        cfg.out_dir = v;
    }
    if let Some(v) = a.concurrency {
        cfg.concurrency = v;
    }
    cfg.allow_out_of_range |= a.allow_out_of_range;

    let manifest = harness::run(&cfg)?;
    eprintln!(
        "{} records, {} quarantined, {} backend calls, {} cache hits; output in {}",
        manifest.records,
        manifest.quarantined.len(),
        manifest.total_calls(),
        manifest.cache_hits,
        cfg.out_dir.display()
    );
    Ok(())
}
