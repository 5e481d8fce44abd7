use clap::Parser;
use stackcast_cli::{run, Cli};

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("stackcast: {e}");
        std::process::exit(e.exit_code());
    }
}
