use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use log::{error, info};
use medflow_cli::config::{parse_mode, SUITES};
use medflow_cli::{demo, pipeline, CliError, RunConfig};

/// Median filter level set flows on random point clouds.
#[derive(Parser, Debug)]
#[command(name = "medflow", version)]
struct Args {
    /// Run configuration; without one the defaults are used.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the evolution mode: levelset, mbo or youngangle.
    #[arg(long)]
    mode: Option<String>,
    /// Override the sampler seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Output directory. Falls back to MEDFLOW_OUT, then the config, then `medflow-out`.
    #[arg(long, env = "MEDFLOW_OUT")]
    out: Option<PathBuf>,
    /// Verification suite to run, or `all`. Repeatable.
    #[arg(long)]
    verify: Vec<String>,
    /// Repeat the run over this many consecutive seeds and aggregate.
    #[arg(long)]
    seeds: Option<u64>,
    /// Run the named demo instead of a configured run (`dumbbell`).
    #[arg(long)]
    demo: Option<String>,
    /// More log output; repeat for more.
    #[arg(short, long, action = clap::ArgAction::Count)]
    verbose: u8,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let level = match args.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            error!("{e}");
            eprintln!("medflow: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(args: Args) -> Result<(), CliError> {
    if let Some(n) = args.threads {
        if n == 0 {
            return Err(CliError::InvalidParameter("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::InvalidParameter(e.to_string()))?;
    }
    let mut cfg = match &args.config {
        Some(p) => RunConfig::parse_file(p)?,
        None => RunConfig::default(),
    };
    if let Some(m) = &args.mode {
        cfg.mode = parse_mode(m).ok_or_else(|| CliError::Config {
            line: 0,
            key: "--mode".into(),
            msg: format!("unknown mode {m:?}"),
        })?;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    for v in &args.verify {
        if v != "all" && !SUITES.contains(&v.as_str()) {
            return Err(CliError::Config {
                line: 0,
                key: "--verify".into(),
                msg: format!("unknown suite {v:?}; known: all, {}", SUITES.join(", ")),
            });
        }
    }
    if !args.verify.is_empty() {
        cfg.verify = args.verify.clone();
    }
    cfg.revalidate()?;
    let out = args.out.clone().or_else(|| cfg.out.clone()).unwrap_or_else(|| PathBuf::from("medflow-out"));

    if let Some(name) = &args.demo {
        if name != "dumbbell" {
            return Err(CliError::InvalidParameter(format!("unknown demo {name:?}")));
        }
        let stable = demo::run(&out, 40_000, cfg.seed, cfg.raster)?;
        println!("demo written to {}; partition stable: {stable}", out.display());
        return Ok(());
    }
    match args.seeds {
        Some(k) => pipeline::run_sweep(&cfg, &out, k)?,
        None => {
            pipeline::run(&cfg, &out)?;
        }
    }
    info!("artifacts in {}", out.display());
    println!("run complete; artifacts in {}", out.display());
    Ok(())
}
