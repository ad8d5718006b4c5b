mod args;
mod commands;
mod config;
mod error;

use std::ffi::OsString;
use std::io::Write;
use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command, Format};
use error::CliError;

fn parse(argv: &[OsString]) -> Cli {
    Cli::try_parse_from(argv).unwrap_or_else(|e| e.exit())
}

fn run(argv: Vec<OsString>) -> Result<(), CliError> {
    let mut cli = parse(&argv);
    if let Some(path) = cli.config.clone() {
        cli = parse(&config::apply(&argv, &path)?);
    }

    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).parse_default_env().init();

    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(format!("cannot start {n} worker threads: {e}")))?;
    }

    let default_format = match cli.command {
        Command::Tables(_) => Format::Csv,
        _ => Format::Json,
    };
    let format = cli.format.unwrap_or(default_format);
    let out = match &cli.command {
        Command::Assess(a) => commands::assess(a, format)?,
        Command::Simulate(a) => commands::simulate(a, format)?,
        Command::Tables(a) => commands::tables(a, format)?,
        Command::Believe(a) => commands::believe(a, format)?,
        Command::Scenarios => commands::scenarios(format),
    };

    match &cli.output {
        Some(path) => std::fs::write(path, out).map_err(|source| CliError::Output { path: path.clone(), source }),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(out.as_bytes())
                .and_then(|()| stdout.flush())
                .map_err(|source| CliError::Output { path: "standard output".into(), source })
        }
    }
}

fn main() -> ExitCode {
    match run(std::env::args_os().collect()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("mrct: error: {e}");
            e.exit_code()
        }
    }
}
