use std::process::ExitCode;

use clap::Parser;
use momo_core::parallel::init_thread_pool_from_env;
use momo_sim::{execute, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = init_thread_pool_from_env() {
        eprintln!("error: {e}");
        return ExitCode::FAILURE;
    }
    match execute(cli) {
        Ok(out) => {
            print!("{out}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
