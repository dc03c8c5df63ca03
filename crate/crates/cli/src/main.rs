use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use vfd_cli::{parse_config, run, Command, RunError, RunOptions};

#[derive(Parser)]
#[command(name = "vfd", version, about = "Very fast diffusion laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Integrate and check a self-similar profile
    Profile(Args),
    /// Check the interval Green-function identities
    GreenCheck(Args),
    /// Single boundary-value solve
    Solve(Args),
    /// Expanding-domain convergence study
    Converge(Args),
    /// Dirichlet versus flux-problem comparison
    Compare(Args),
    /// Mass law and extinction-time study
    Extinction(Args),
}

#[derive(clap::Args)]
struct Args {
    /// Configuration file (flat TOML)
    #[arg(long)]
    config: PathBuf,
    /// Output directory
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Worker threads for parallel solves
    #[arg(long)]
    threads: Option<usize>,
    /// Also write the Green kernel table (green-check)
    #[arg(long)]
    dump_kernels: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, args) = match cli.command {
        Cmd::Profile(a) => (Command::Profile, a),
        Cmd::GreenCheck(a) => (Command::GreenCheck, a),
        Cmd::Solve(a) => (Command::Solve, a),
        Cmd::Converge(a) => (Command::Converge, a),
        Cmd::Compare(a) => (Command::Compare, a),
        Cmd::Extinction(a) => (Command::Extinction, a),
    };
    match execute(command, &args) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = e.downcast_ref::<RunError>().map_or(2, RunError::exit_code);
            ExitCode::from(code)
        }
    }
}

fn execute(command: Command, args: &Args) -> anyhow::Result<u8> {
    if let Some(n) = args.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }
    let source = fs::read_to_string(&args.config).map_err(|source| RunError::Io {
        path: args.config.clone(),
        source,
    })?;
    let cfg = parse_config(&source, command).map_err(RunError::from)?;
    let options = RunOptions {
        out_dir: args.out.clone(),
        dump_kernels: args.dump_kernels,
    };
    let manifest = run(&cfg, &source, &options)?;
    if cfg.verbosity > 0 || !manifest.passed {
        for c in &manifest.checks {
            let status = if c.passed { "pass" } else { "FAIL" };
            let kind = if c.asserted { "" } else { " (reported)" };
            eprintln!(
                "{status} {}{kind}: {:.6e} vs {:.6e}",
                c.name, c.value, c.tolerance
            );
        }
    }
    if !manifest.passed {
        println!("{}", serde_json::json!({ "failures": manifest.failures }));
    }
    Ok(manifest.exit_code())
}
