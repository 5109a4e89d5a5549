use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use qdsim_cli::{check, config, exit, load_config, run, Figure, RunError};

/// Three-spin-qubit quantum-dot simulator.
///
/// Runs one experiment from a JSON config (`--config`) or a named figure
/// preset, writing CSV/JSON artifacts and a checksummed manifest.
///
/// Exit codes: 0 success, 2 configuration error, 3 numerical failure,
/// 4 i/o error, 5 `--check` failed.
#[derive(Debug, Parser)]
#[command(name = "qdsim", version)]
struct Cli {
    /// Figure preset to run instead of a config file.
    #[arg(value_enum, conflicts_with = "config")]
    figure: Option<Figure>,

    /// JSON run configuration.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Output directory (overrides the config's `out_dir`).
    #[arg(long, value_name = "DIR", env = "QDSIM_OUT")]
    out: Option<PathBuf>,

    /// RNG seed (overrides the config's `seed`).
    #[arg(long, value_name = "N", env = "QDSIM_SEED")]
    seed: Option<u64>,

    /// Worker threads; defaults to the available cores.
    #[arg(long, value_name = "N")]
    workers: Option<usize>,

    /// Verify the manifest checksums in the output directory and exit.
    #[arg(long)]
    check: bool,

    /// Print the resolved config as JSON and exit without running.
    #[arg(long)]
    print_config: bool,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::from(exit::OK as u8),
        Err(e) => {
            eprintln!("qdsim: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn execute(cli: Cli) -> Result<(), RunError> {
    let loaded = match (&cli.config, cli.figure) {
        (Some(path), _) => Some(load_config(path)?),
        (None, Some(f)) => Some(f.config()?),
        (None, None) => None,
    };
    if cli.check {
        let dir = cli
            .out
            .clone()
            .or_else(|| loaded.as_ref().and_then(|c| c.out_dir.clone()))
            .ok_or_else(|| RunError::config("out", "--check needs --out, QDSIM_OUT or a config with out_dir"))?;
        let m = check(&dir)?;
        out_line(format_args!("{}: {} artifacts verified", dir.display(), m.artifacts.len()));
        return Ok(());
    }
    let mut cfg = loaded.ok_or_else(|| RunError::config("config", "give --config PATH or a figure name"))?;
    if let Some(seed) = cli.seed {
        cfg = cfg.with_seed(seed);
    }
    let out = cli.out.clone().or_else(|| cfg.out_dir.clone()).unwrap_or_else(|| PathBuf::from("qdsim-out"));
    cfg.out_dir = Some(out.clone());
    if cli.print_config {
        out_line(format_args!("{}", config::to_json(&cfg)));
        return Ok(());
    }
    if let Some(n) = cli.workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .map_err(|e| RunError::config("workers", e.to_string()))?;
    }
    let m = run(&cfg, &out)?;
    out_line(format_args!("{}: {} artifacts in {:.1} s", out.display(), m.artifacts.len(), m.wall_seconds));
    for a in &m.artifacts {
        out_line(format_args!("  {}", a.path));
    }
    Ok(())
}

/// Stdout line that tolerates a closed pipe (`qdsim ... | head`).
fn out_line(args: std::fmt::Arguments) {
    let _ = writeln!(std::io::stdout().lock(), "{args}");
}
