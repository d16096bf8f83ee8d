mod args;
mod commands;
mod config;
mod datafile;
mod failure;
mod manifest;
mod report;

use clap::Parser;

use args::{Cli, Command};

fn main() {
    // clap already exits 2 on usage errors and 0 for --help/--version
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Estimate(a) => commands::cmd_estimate(a),
        Command::Simulate(a) => commands::cmd_simulate(a),
        Command::PathologyCheck(a) => commands::cmd_pathology(a),
        Command::Report(a) => commands::cmd_report(a),
    };
    if let Err(failure) = outcome {
        eprintln!("error: {failure}");
        std::process::exit(failure.code);
    }
}
