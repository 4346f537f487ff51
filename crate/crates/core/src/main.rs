use clap::Parser;

use genstat::cli::{run, Cli};

fn main() {
    let cli = Cli::parse();
    let level = if cli.verbose { "debug" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let code = run(&cli, &mut std::io::stdout().lock());
    std::process::exit(code);
}
