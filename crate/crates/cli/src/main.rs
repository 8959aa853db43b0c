use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;
use pfgmpp_cli::{run, CliError, Mode, Overrides, RunConfig};

/// Run a pfgmpp experiment from a JSON config.
#[derive(Debug, Parser)]
#[command(name = "pfgmpp", version)]
struct Args {
    /// JSON config file; missing keys take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides `seed` from the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides `mode` from the config.
    #[arg(long, value_enum)]
    mode: Option<Mode>,
}

fn execute(args: Args) -> Result<String, CliError> {
    let overrides = Overrides {
        seed: args.seed,
        out: args.out,
        mode: args.mode,
    };
    let cfg = RunConfig::resolve(args.config.as_deref(), &overrides)?;
    let summary = run(&cfg)?;
    Ok(serde_json::to_string(&summary).expect("summary serializes"))
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let err = CliError::Validation(e.to_string().trim().to_string());
            eprintln!("{}", err.to_record());
            return ExitCode::from(err.exit_code() as u8);
        }
    };
    match execute(args) {
        Ok(line) => {
            println!("{line}");
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!("{}", err.to_record());
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
