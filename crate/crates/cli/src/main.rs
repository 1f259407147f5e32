mod args;
mod commands;
mod config;
mod output;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};
use config::{CliResult, FileConfig};

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => tracing::Level::WARN,
        1 => tracing::Level::INFO,
        _ => tracing::Level::DEBUG,
    };
    tracing_subscriber::fmt()
        .with_max_level(level)
        .with_target(false)
        .with_writer(std::io::stderr)
        .init();
}

fn run(cli: Cli) -> CliResult<()> {
    let file = FileConfig::load(cli.config.as_deref())?;
    let seed = cli.seed.or(file.seed).unwrap_or(0);
    match cli.command {
        Command::Augment(a) => commands::augment::run(a.layered_over(file.augment), seed),
        Command::Fit(a) => commands::fit::run(a.layered_over(file.fit), seed),
        Command::Score(a) => commands::score::run(a.layered_over(file.score), seed),
        Command::Eval(a) => commands::eval::run(a.layered_over(file.eval), seed),
        Command::Sweep(a) => commands::sweep::run(a.layered_over(file.sweep), seed),
        Command::Transfer(a) => commands::transfer::run(a.layered_over(file.transfer), seed),
        Command::Synth(a) => commands::synth::run(a.layered_over(file.synth), seed),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_logging(cli.verbose);
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
