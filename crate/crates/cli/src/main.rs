use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};

use baroflow_cli::{check_report, execute, RunConfig};

/// Finite-element solver for 2D barotropic compressible flow.
#[derive(Parser)]
#[command(name = "baroflow", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a simulation and write CSV outputs.
    Run(ConfigArgs),
    /// Validate a configuration and print derived sizes.
    Check(ConfigArgs),
    /// Print the version.
    Version,
}

#[derive(clap::Args)]
struct ConfigArgs {
    /// Configuration file of `key = value` lines.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Overrides as `--key value` or `key=value`, e.g. `--mesh.M 50`.
    #[arg(trailing_var_arg = true, allow_hyphen_values = true, value_name = "OVERRIDES")]
    overrides: Vec<String>,
}

impl ConfigArgs {
    fn load(&self) -> anyhow::Result<RunConfig> {
        let text = match &self.config {
            Some(path) => std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?,
            None => String::new(),
        };
        let origin = self
            .config
            .as_ref()
            .map_or_else(|| "configuration".to_string(), |p| p.display().to_string());
        RunConfig::parse(&text, &self.overrides).with_context(|| format!("invalid {origin}"))
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Version => {
            println!("baroflow {}", env!("CARGO_PKG_VERSION"));
            Ok(())
        }
        Command::Check(args) => args.load().map(|c| println!("{}", check_report(&c))),
        Command::Run(args) => args.load().and_then(|c| {
            let summary = execute(&c)?;
            println!(
                "completed {} steps to t = {}; wrote {} files to {}",
                summary.steps,
                summary.final_state.t,
                summary.files.len(),
                c.output_dir.display()
            );
            Ok(())
        }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
