use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("CHOQUARD_LOG", "info")).init();
    let cli = choquard_cli::Cli::parse();
    let command = cli.command.name();
    match choquard_cli::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.record(command));
            ExitCode::from(e.exit_code())
        }
    }
}
