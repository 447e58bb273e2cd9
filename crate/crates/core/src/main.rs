use clap::Parser;

fn main() {
    let cli = beamlab::cli::Cli::parse();
    std::process::exit(beamlab::cli::run(&cli));
}
