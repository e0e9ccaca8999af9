use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use contact_duality::cli::{execute, Command, Invocation};

/// Boson-fermion duality laboratory.
#[derive(Debug, Parser)]
#[command(name = "contact-duality", version)]
struct Args {
    /// spectrum | duality | scale-invariance | kernel-properties |
    /// dual-kernels | propagate | fold-check
    command: Command,
    /// Experiment config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides the config's `output` key.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    verbose: bool,
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = if args.verbose { "debug" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let outcome = execute(&Invocation {
        command: args.command,
        config: args.config,
        out: args.out,
        threads: args.threads,
    });
    if let Some(dir) = &outcome.out_dir {
        println!("{}", dir.display());
    }
    ExitCode::from(outcome.exit_code as u8)
}
