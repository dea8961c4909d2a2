use clap::Parser;
use intent_poe::cli::{run, Cli};

fn main() {
    std::process::exit(run(Cli::parse()));
}
