use clap::Parser;

use hbprobit::cli::{run, Cli};

fn main() {
    std::process::exit(run(Cli::parse()));
}
