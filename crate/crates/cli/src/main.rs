use clap::Parser;

fn main() {
    let cli = nibr_cli::Cli::parse();
    std::process::exit(nibr_cli::execute(&cli));
}
