use clap::Parser;

fn main() {
    let cli = dentgen_cli::Cli::parse();
    if let Err(e) = dentgen_cli::run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
