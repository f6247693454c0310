use std::path::PathBuf;
use std::process::ExitCode;

use clap::builder::PossibleValuesParser;
use clap::Parser;
use varexp_core::scenario::{self, Subcommand, EXIT_INVALID};

/// Runs a named experiment and writes `data.csv` and `meta.json`.
///
/// Exit status: 0 on success, 2 on an invalid configuration or unwritable
/// output directory, 3 when any row carries a failure flag.
#[derive(Debug, Parser)]
#[command(name = "varexp", version)]
struct Args {
    /// Experiment to run.
    #[arg(value_parser = PossibleValuesParser::new(Subcommand::ALL.map(Subcommand::as_str)))]
    subcommand: String,

    /// JSON configuration; omitted keys take the subcommand defaults.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Dotted-path override such as `sweep.eps=[0.1,0.01]`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,

    /// Output directory.
    #[arg(long, value_name = "DIR", required_unless_present = "print_defaults")]
    out: Option<PathBuf>,

    /// Print the resolved default configuration and exit.
    #[arg(long)]
    print_defaults: bool,
}

fn main() -> ExitCode {
    let args = Args::parse();
    if args.print_defaults {
        let sub: Subcommand = args.subcommand.parse().expect("validated by clap");
        println!("{:#}", scenario::default_config(sub));
        return ExitCode::SUCCESS;
    }
    let text = match &args.config {
        Some(path) => match std::fs::read_to_string(path) {
            Ok(t) => Some(t),
            Err(e) => {
                eprintln!("varexp: cannot read {}: {e}", path.display());
                return ExitCode::from(EXIT_INVALID as u8);
            }
        },
        None => None,
    };
    let out = args.out.expect("required by clap");
    let status = scenario::run(&args.subcommand, text.as_deref(), &args.overrides, &out);
    if status.code == 0 {
        eprintln!("varexp {}: {}", args.subcommand, status.message);
    } else {
        eprintln!("varexp {}: {} (exit {})", args.subcommand, status.message, status.code);
    }
    ExitCode::from(status.code as u8)
}
