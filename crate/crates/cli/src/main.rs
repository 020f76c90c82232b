use clap::Parser;

fn main() {
    let cli = qeilab::Cli::parse();
    std::process::exit(qeilab::run(cli));
}
