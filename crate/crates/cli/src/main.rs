use std::process::ExitCode;

use gammamix_cli::{execute, parse_args, ParseFailure};

fn main() -> ExitCode {
    let cli = match parse_args(std::env::args().collect()) {
        Ok(c) => c,
        Err(ParseFailure::Clap(e)) => e.exit(),
        Err(ParseFailure::Config(e)) => {
            eprintln!("error: {e}");
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).init();
    match execute(&cli.command) {
        Ok(m) => {
            for o in &m.outputs {
                log::info!("wrote {} ({} bytes)", o.path, o.bytes);
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
