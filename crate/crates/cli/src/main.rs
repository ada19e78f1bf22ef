use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    let cli = vortmix::Cli::parse();
    match vortmix::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("vortmix: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
