use clap::Parser;

fn main() {
    let cli = coalesce::cli::Cli::parse();
    std::process::exit(coalesce::cli::execute(cli));
}
