use clap::Parser;

fn main() {
    let cli = hamloop_cli::Cli::parse();
    std::process::exit(hamloop_cli::run(&cli));
}
