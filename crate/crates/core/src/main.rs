use clap::Parser;

use pacc::cli::{execute, Cli, EXIT_OK};

fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("PACC_LOG", "warn")).init();
    let outcome = execute(Cli::parse());
    if outcome.status == EXIT_OK {
        println!("{}", outcome.summary);
    } else {
        eprintln!("{}", outcome.summary);
    }
    std::process::exit(outcome.status);
}
