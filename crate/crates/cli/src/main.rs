use clap::error::ErrorKind;
use clap::Parser;
use dconf_cli::{Cli, CliError};

fn main() {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => e.exit(),
        Err(e) => {
            let err = CliError::Validation(e.to_string().trim().to_string());
            eprintln!("{}", serde_json::to_string_pretty(&err.to_json()).unwrap_or_default());
            std::process::exit(err.exit_code());
        }
    };
    std::process::exit(dconf_cli::main_with(&cli));
}
