use clap::Parser;

fn main() {
    let cli = critnls_cli::Cli::parse();
    std::process::exit(critnls_cli::execute(&cli));
}
