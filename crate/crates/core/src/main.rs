use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use densinf::cli::{emit, run, Command, RunConfig};
use densinf::Error;

#[derive(Parser)]
#[command(name = "densinf", version, about = "Density at infinity of polynomial fibers")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Density at infinity of the configured fibers
    Density(Common),
    /// Asymptotic critical value candidates
    Kinf(Common),
    /// Density profile and its Lipschitz behaviour
    Lipschitz(Common),
    /// Rugosity of the lifted vector field
    Rugosity(Common),
    /// Built-in invariant suite
    Verify(Common),
}

#[derive(Args)]
struct Common {
    /// JSON run configuration
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the configured seed
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (overrides `output_dir`)
    #[arg(long)]
    out: Option<PathBuf>,
}

const EXIT_VERIFY_FAILED: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERIC: u8 = 3;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (cmd, args) = match cli.command {
        Cmd::Density(a) => (Command::Density, a),
        Cmd::Kinf(a) => (Command::Kinf, a),
        Cmd::Lipschitz(a) => (Command::Lipschitz, a),
        Cmd::Rugosity(a) => (Command::Rugosity, a),
        Cmd::Verify(a) => (Command::Verify, a),
    };
    let cfg = match (&args.config, args.seed, cmd) {
        (Some(path), seed, _) => RunConfig::load(path, seed),
        (None, Some(seed), Command::Verify) => Ok(RunConfig::bare(seed)),
        (None, _, Command::Verify) => Err(Error::Config("verify needs --seed or --config".into())),
        (None, _, _) => Err(Error::Config("--config is required".into())),
    };
    let cfg = match cfg {
        Ok(c) => c,
        Err(e) => {
            eprintln!("densinf: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let (report, timings) = match run(cmd, &cfg) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("densinf: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let dir = args
        .out
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("densinf-out"));
    if let Err(e) = emit(&report, &timings, &dir) {
        eprintln!("densinf: cannot write {}: {e}", dir.display());
        return ExitCode::from(EXIT_NUMERIC);
    }
    if let Some(msg) = &report.failure {
        eprintln!("densinf: {} failed: {msg}", cmd.name());
        return ExitCode::from(EXIT_NUMERIC);
    }
    if let Some(v) = &report.results.verify {
        for c in &v.checks {
            println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
        }
        if !v.all_passed() {
            return ExitCode::from(EXIT_VERIFY_FAILED);
        }
    }
    println!("wrote {}", dir.join("report.json").display());
    ExitCode::SUCCESS
}
