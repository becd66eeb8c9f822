mod args;
mod commands;
mod error;

use clap::Parser;

fn main() {
    let args = args::Cli::parse();
    match commands::run(args) {
        Ok(()) => {}
        Err(e) => {
            eprintln!("cookstate: {e}");
            std::process::exit(e.exit_code());
        }
    }
}
