use clap::Parser;
use lorentz_gas::cli;

fn main() {
    let args = cli::Cli::parse();
    std::process::exit(cli::run(&args));
}
