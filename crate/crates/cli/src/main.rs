use clap::Parser;

fn main() {
    let cli = ruinvest_cli::Cli::parse();
    if let Err(e) = ruinvest_cli::run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
