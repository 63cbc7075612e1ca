mod args;
mod commands;

use clap::Parser;

use args::{Cli, Command};
use commands::{Report, EXIT_ERROR};

fn main() {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Monitor(a) => commands::monitor(a),
        Command::Solve(a) => commands::solve(a),
        Command::Simulate(a) => commands::simulate(a, cli.verbose),
        Command::Experiment(a) => commands::experiment(a, cli.verbose),
    };
    let code = match result {
        Ok(Report { code, text, json }) => {
            if cli.json {
                println!("{json}");
            } else {
                println!("{text}");
            }
            code
        }
        Err(e) => {
            if cli.json {
                println!("{}", serde_json::json!({ "schema_version": 1, "error": format!("{e:#}") }));
            }
            eprintln!("error: {e:#}");
            EXIT_ERROR
        }
    };
    std::process::exit(code);
}
