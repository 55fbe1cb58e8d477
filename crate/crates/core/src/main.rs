use clap::Parser;

use linecp::cli::{run, Cli};

fn main() {
    let outcome = run(Cli::parse());
    if outcome.exit_code == 0 {
        print!("{}", outcome.human_summary);
    } else {
        eprintln!("{}", outcome.human_summary);
    }
    std::process::exit(outcome.exit_code);
}
